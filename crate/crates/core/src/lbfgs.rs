//! Limited-memory BFGS with a strong Wolfe line search.
//!
//! Directions come from the two-loop recursion; the line search brackets a
//! step and then zooms with safeguarded cubic interpolation. Every accepted
//! step strictly lowers the objective.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

/// A differentiable function to be minimized.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsConfig {
    pub memory: usize,
    /// Stop when `‖g‖∞ ≤ grad_tol · reference`, see [`minimize`].
    pub grad_tol: f64,
    pub max_iters: usize,
    pub c1: f64,
    pub c2: f64,
    /// Interpolation steps allowed inside one zoom phase.
    pub max_zoom: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self { memory: 10, grad_tol: 1e-8, max_iters: 5000, c1: 1e-4, c2: 0.9, max_zoom: 50 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIterations,
    /// No step satisfying the Wolfe conditions was found, even along the
    /// steepest-descent direction.
    LineSearchFailed,
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Objective at the start point followed by one entry per accepted step.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

fn two_loop(history: &VecDeque<Pair>, g: &[f64]) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alpha = vec![0.0; history.len()];
    for (i, pair) in history.iter().enumerate().rev() {
        let a = pair.rho * dot(&pair.s, &q);
        alpha[i] = a;
        for (qj, yj) in q.iter_mut().zip(&pair.y) {
            *qj -= a * yj;
        }
    }
    if let Some(last) = history.back() {
        let gamma = dot(&last.s, &last.y) / dot(&last.y, &last.y);
        for qj in q.iter_mut() {
            *qj *= gamma;
        }
    }
    for (i, pair) in history.iter().enumerate() {
        let b = pair.rho * dot(&pair.y, &q);
        for (qj, sj) in q.iter_mut().zip(&pair.s) {
            *qj += (alpha[i] - b) * sj;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

#[derive(Clone)]
struct Sample {
    alpha: f64,
    value: f64,
    slope: f64,
    x: Vec<f64>,
    grad: Vec<f64>,
}

/// Minimizer of the cubic interpolating two samples, or the midpoint when the
/// cubic is degenerate or lands too close to either end.
fn cubic_step(a: &Sample, b: &Sample) -> f64 {
    let (lo, hi) = if a.alpha < b.alpha { (a.alpha, b.alpha) } else { (b.alpha, a.alpha) };
    let width = hi - lo;
    let mid = 0.5 * (lo + hi);
    let d1 = a.slope + b.slope - 3.0 * (a.value - b.value) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.slope * b.slope;
    if !(disc >= 0.0) {
        return mid;
    }
    let d2 = (b.alpha - a.alpha).signum() * disc.sqrt();
    let denom = b.slope - a.slope + 2.0 * d2;
    if denom == 0.0 {
        return mid;
    }
    let t = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / denom;
    if !t.is_finite() || t < lo + 0.1 * width || t > hi - 0.1 * width {
        mid
    } else {
        t
    }
}

struct LineSearch<'a, O: Objective> {
    obj: &'a O,
    x: &'a [f64],
    d: &'a [f64],
    f0: f64,
    slope0: f64,
    cfg: &'a LbfgsConfig,
}

impl<O: Objective> LineSearch<'_, O> {
    fn sample(&self, alpha: f64) -> Sample {
        let x: Vec<f64> = self.x.iter().zip(self.d).map(|(xi, di)| xi + alpha * di).collect();
        let (value, grad) = self.obj.value_and_gradient(&x);
        let slope = dot(&grad, self.d);
        Sample { alpha, value, slope, x, grad }
    }

    fn armijo(&self, s: &Sample) -> bool {
        s.value.is_finite() && s.value <= self.f0 + self.cfg.c1 * s.alpha * self.slope0 && s.value < self.f0
    }

    fn curvature(&self, s: &Sample) -> bool {
        s.slope.abs() <= -self.cfg.c2 * self.slope0
    }

    /// Returns a strong Wolfe step, or `Err` with the best strictly-improving
    /// sample seen (if any).
    fn run(&self, alpha0: f64) -> Result<Sample, Option<Sample>> {
        let start = Sample {
            alpha: 0.0,
            value: self.f0,
            slope: self.slope0,
            x: self.x.to_vec(),
            grad: Vec::new(),
        };
        let mut prev = start;
        let mut alpha = alpha0;
        for i in 0..60 {
            let cur = self.sample(alpha);
            if !self.armijo(&cur) || (i > 0 && cur.value >= prev.value) {
                return self.zoom(prev, cur);
            }
            if self.curvature(&cur) {
                return Ok(cur);
            }
            if cur.slope >= 0.0 {
                return self.zoom(cur, prev);
            }
            prev = cur;
            alpha *= 2.0;
        }
        Err(Some(prev).filter(|p| p.alpha > 0.0))
    }

    fn zoom(&self, mut lo: Sample, mut hi: Sample) -> Result<Sample, Option<Sample>> {
        for _ in 0..self.cfg.max_zoom {
            let alpha = if hi.value.is_finite() && hi.slope.is_finite() {
                cubic_step(&lo, &hi)
            } else {
                0.5 * (lo.alpha + hi.alpha)
            };
            if alpha == lo.alpha || alpha == hi.alpha {
                break;
            }
            let cur = self.sample(alpha);
            if !self.armijo(&cur) || cur.value >= lo.value {
                hi = cur;
            } else {
                if self.curvature(&cur) {
                    return Ok(cur);
                }
                if cur.slope * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                lo = cur;
            }
        }
        Err(Some(lo).filter(|s| s.alpha > 0.0))
    }
}

/// Minimizes `obj` from `x0`. The stopping reference is
/// `max(‖∇f(x0)‖∞, grad_floor)`.
pub fn minimize<O: Objective>(obj: &O, x0: Vec<f64>, cfg: &LbfgsConfig, grad_floor: f64) -> LbfgsOutcome {
    let mut x = x0;
    let (mut f, mut g) = obj.value_and_gradient(&x);
    let reference = inf_norm(&g).max(grad_floor);
    let threshold = cfg.grad_tol * reference;
    let mut trace = vec![f];
    let mut history: VecDeque<Pair> = VecDeque::with_capacity(cfg.memory);
    let mut iterations = 0;

    let termination = loop {
        if inf_norm(&g) <= threshold {
            break Termination::Converged;
        }
        if iterations >= cfg.max_iters {
            break Termination::MaxIterations;
        }
        let mut d = if history.is_empty() { g.iter().map(|v| -v).collect() } else { two_loop(&history, &g) };
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            history.clear();
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }
        let alpha0 = if history.is_empty() { 1.0 / dot(&g, &g).sqrt() } else { 1.0 };
        let search = LineSearch { obj, x: &x, d: &d, f0: f, slope0: slope, cfg };
        let step = match search.run(alpha0) {
            Ok(s) => Ok(s),
            Err(partial) if !history.is_empty() => {
                // retry once along steepest descent with fresh memory
                history.clear();
                let d: Vec<f64> = g.iter().map(|v| -v).collect();
                let slope = dot(&g, &d);
                let search = LineSearch { obj, x: &x, d: &d, f0: f, slope0: slope, cfg };
                search.run(1.0 / dot(&g, &g).sqrt()).map_err(|p| p.or(partial))
            }
            Err(partial) => Err(partial),
        };
        let (accepted, failed) = match step {
            Ok(s) => (s, false),
            Err(Some(s)) => (s, true),
            Err(None) => break Termination::LineSearchFailed,
        };
        let s: Vec<f64> = accepted.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = accepted.grad.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > f64::EPSILON * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if history.len() == cfg.memory {
                history.pop_front();
            }
            history.push_back(Pair { s, y, rho: 1.0 / sy });
        }
        x = accepted.x;
        f = accepted.value;
        g = accepted.grad;
        trace.push(f);
        iterations += 1;
        if failed {
            break if inf_norm(&g) <= threshold { Termination::Converged } else { Termination::LineSearchFailed };
        }
    };
    LbfgsOutcome { x, value: f, gradient: g, trace, iterations, termination }
}
