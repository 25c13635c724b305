//! Wiretap problem assembly and the L-BFGS descrambling driver.

use alloc::format;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[allow(unused_imports)]
use num_traits::Float;
use crate::cayley::{cayley_map, param_count, AntisymParams, Descrambler, DescramblingProblem, Functional, Sense};
use crate::error::{shape_err, Error, Result};
use crate::lbfgs::{self, LbfgsConfig, Objective, Termination};
use crate::matrix::DenseMatrix;
use crate::netlab::apply_layer;
use crate::network::FeedForwardNet;
use crate::spectral::DiffMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WiretapPosition {
    /// Between `W_k` and its activation: `F_k P⁻¹ P W_k`.
    PreActivation,
    /// After the activation: `W_{k+1} P⁻¹ P F_k W_k`.
    PostActivation,
}

impl core::str::FromStr for WiretapPosition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pre" => Ok(Self::PreActivation),
            "post" => Ok(Self::PostActivation),
            other => Err(Error::Config(format!("unknown wiretap position `{other}`"))),
        }
    }
}

/// Where the unit operator `P⁻¹P` is inserted. `layer` counts from 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WiretapSpec {
    pub layer: usize,
    pub position: WiretapPosition,
    /// Weight of the second-derivative penalty along the link dimension of
    /// `W_{k+1}`; zero disables it.
    pub link_smoothing: f64,
}

impl WiretapSpec {
    pub fn new(layer: usize, position: WiretapPosition) -> Self {
        Self { layer, position, link_smoothing: 0.0 }
    }

    pub fn validate(&self, net: &FeedForwardNet) -> Result<()> {
        if self.layer == 0 || self.layer > net.depth() {
            return Err(Error::Config(format!(
                "layer {} out of range for a {}-layer network",
                self.layer,
                net.depth()
            )));
        }
        if !(self.link_smoothing.is_finite() && self.link_smoothing >= 0.0) {
            return Err(Error::Config(format!("link smoothing weight {} must be finite and >= 0", self.link_smoothing)));
        }
        if self.link_smoothing > 0.0 {
            if self.layer == net.depth() {
                return Err(Error::Config("link smoothing needs a following layer".into()));
            }
            if self.position != WiretapPosition::PostActivation {
                return Err(Error::Config("link smoothing applies to post-activation wiretaps only".into()));
            }
        }
        Ok(())
    }
}

/// Signal array `S` seen by the wiretap for inputs `x`.
pub fn wiretap_signal(net: &FeedForwardNet, x: &DenseMatrix, spec: &WiretapSpec) -> Result<DenseMatrix> {
    spec.validate(net)?;
    if x.rows() != net.input_dim() {
        return Err(shape_err!("inputs have {} rows, network takes {}", x.rows(), net.input_dim()));
    }
    let mut signal = x.clone();
    for layer in &net.layers()[..spec.layer - 1] {
        signal = apply_layer(layer, &signal);
    }
    let layer = &net.layers()[spec.layer - 1];
    let pre = layer.weights.mul_unchecked(&signal);
    Ok(match spec.position {
        WiretapPosition::PreActivation => pre,
        WiretapPosition::PostActivation => pre.map(|v| layer.activation.apply(v)),
    })
}

/// Tikhonov problem for a network wiretap. With link smoothing `α > 0` the
/// signal is augmented by `√α·W_{k+1}ᵀ`, since `‖D·P·W_{k+1}ᵀ‖²_F` is the
/// second-derivative norm along the link dimension of `W_{k+1}·Pᵀ`.
pub fn assemble_problem(
    net: &FeedForwardNet,
    x: &DenseMatrix,
    spec: &WiretapSpec,
    d: &DiffMatrix,
) -> Result<DescramblingProblem> {
    let mut signal = wiretap_signal(net, x, spec)?;
    if spec.link_smoothing > 0.0 {
        let next = &net.layers()[spec.layer].weights;
        signal = signal.hcat(&next.transpose().scale(spec.link_smoothing.sqrt()))?;
    }
    DescramblingProblem::tikhonov(d, signal)
}

/// Maximum-diagonality problem on the output side of `W_k`.
pub fn assemble_diagonal_problem(
    net: &FeedForwardNet,
    spec: &WiretapSpec,
    functional: Functional,
) -> Result<DescramblingProblem> {
    spec.validate(net)?;
    let w = net.layers()[spec.layer - 1].weights.clone();
    match functional {
        Functional::Mds => Ok(DescramblingProblem::mds(w)),
        Functional::Mdns => Ok(DescramblingProblem::mdns(w)),
        Functional::Tikhonov => Err(Error::Config("tikhonov needs inputs and a derivative matrix".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Zero,
    /// i.i.d. normal upper-triangle entries with standard deviation `sigma`.
    RandomSmall { sigma: f64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub memory: usize,
    pub grad_tol: f64,
    pub max_iters: usize,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    pub init: Init,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { memory: 10, grad_tol: 1e-8, max_iters: 5000, wolfe_c1: 1e-4, wolfe_c2: 0.9, init: Init::Zero }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.memory == 0 {
            return Err(Error::Config("L-BFGS memory must be at least 1".into()));
        }
        if !(0.0 < self.wolfe_c1 && self.wolfe_c1 < self.wolfe_c2 && self.wolfe_c2 < 1.0) {
            return Err(Error::Config(format!(
                "Wolfe constants need 0 < c1 < c2 < 1, got c1={} c2={}",
                self.wolfe_c1, self.wolfe_c2
            )));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::Config("gradient tolerance must be positive".into()));
        }
        if let Init::RandomSmall { sigma, .. } = self.init {
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(Error::Config("initial sigma must be positive".into()));
            }
        }
        Ok(())
    }

    fn initial_params(&self, dim: usize) -> AntisymParams {
        match self.init {
            Init::Zero => AntisymParams::zeros(dim),
            Init::RandomSmall { sigma, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let normal = Normal::new(0.0, sigma).expect("validated sigma");
                let q = (0..param_count(dim)).map(|_| normal.sample(&mut rng)).collect();
                AntisymParams::new(dim, q).expect("finite draws")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct DescrambleResult {
    pub p: Descrambler,
    pub q: AntisymParams,
    /// Objective in the user's sense, starting point first, then one entry
    /// per accepted step.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub termination: Termination,
}

impl DescrambleResult {
    pub fn final_value(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds the start value")
    }
}

/// Relative floor on the stopping reference, guarding stationary starts.
const GRAD_FLOOR: f64 = 1e-6;

struct SignedObjective<'a> {
    prob: &'a DescramblingProblem,
    sign: f64,
}

impl Objective for SignedObjective<'_> {
    fn dim(&self) -> usize {
        param_count(self.prob.dim())
    }

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let q = AntisymParams::new(self.prob.dim(), x.to_vec());
        match q.and_then(|q| self.prob.eval_and_grad(&q)) {
            Ok((v, g)) => (self.sign * v, g.into_vec().into_iter().map(|x| self.sign * x).collect()),
            Err(_) => (f64::INFINITY, alloc::vec![f64::NAN; x.len()]),
        }
    }
}

/// Optimizes the problem over SO(n) starting from `cfg.init`.
/// Maximization runs as minimization of `−η`.
pub fn optimize(prob: &DescramblingProblem, cfg: &OptimizerConfig) -> Result<DescrambleResult> {
    cfg.validate()?;
    let sign = match prob.sense() {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let objective = SignedObjective { prob, sign };
    let lcfg = LbfgsConfig {
        memory: cfg.memory,
        grad_tol: cfg.grad_tol,
        max_iters: cfg.max_iters,
        c1: cfg.wolfe_c1,
        c2: cfg.wolfe_c2,
        max_zoom: 50,
    };
    let x0 = cfg.initial_params(prob.dim()).into_vec();
    let out = lbfgs::minimize(&objective, x0, &lcfg, GRAD_FLOOR * prob.gradient_scale());
    let q = AntisymParams::new(prob.dim(), out.x)?;
    Ok(DescrambleResult {
        p: cayley_map(&q),
        q,
        objective_trace: out.trace.iter().map(|v| sign * v).collect(),
        converged: out.termination == Termination::Converged,
        iterations: out.iterations,
        termination: out.termination,
    })
}

/// Descrambled weights. The network itself is never modified.
#[derive(Debug, Clone, PartialEq)]
pub struct DescrambledView {
    /// `P·W_k`.
    pub weights: DenseMatrix,
    /// `W_{k+1}·Pᵀ` for post-activation wiretaps with a following layer.
    pub next_conjugate: Option<DenseMatrix>,
}

pub fn apply_descrambler(net: &FeedForwardNet, spec: &WiretapSpec, p: &Descrambler) -> Result<DescrambledView> {
    spec.validate(net)?;
    let w = &net.layers()[spec.layer - 1].weights;
    if p.dim() != w.rows() {
        return Err(shape_err!("descrambler of dimension {} for a layer with {} outputs", p.dim(), w.rows()));
    }
    let weights = p.matrix().mul_unchecked(w);
    let next_conjugate = match spec.position {
        WiretapPosition::PostActivation => net
            .layers()
            .get(spec.layer)
            .map(|next| next.weights.mul_unchecked(&p.matrix().transpose())),
        WiretapPosition::PreActivation => None,
    };
    Ok(DescrambledView { weights, next_conjugate })
}

/// Forward pass with `P⁻¹P` explicitly inserted at the wiretap: the rotated
/// weights produce `P·S`, and `Pᵀ` (pre-activation) or `W_{k+1}·Pᵀ`
/// (post-activation) undoes it.
pub fn forward_with_wiretap(
    net: &FeedForwardNet,
    x: &DenseMatrix,
    spec: &WiretapSpec,
    p: &Descrambler,
) -> Result<DenseMatrix> {
    let view = apply_descrambler(net, spec, p)?;
    if x.rows() != net.input_dim() {
        return Err(shape_err!("inputs have {} rows, network takes {}", x.rows(), net.input_dim()));
    }
    let k = spec.layer - 1;
    let mut signal = x.clone();
    let mut i = 0;
    while i < net.depth() {
        let layer = &net.layers()[i];
        if i == k {
            let rotated = view.weights.mul_unchecked(&signal);
            match spec.position {
                WiretapPosition::PreActivation => {
                    let restored = p.matrix().transpose().mul_unchecked(&rotated);
                    signal = restored.map(|v| layer.activation.apply(v));
                }
                WiretapPosition::PostActivation => {
                    // P·F(W x) computed as rotation of the activated signal
                    let activated = layer.weights.mul_unchecked(&signal).map(|v| layer.activation.apply(v));
                    let tapped = p.matrix().mul_unchecked(&activated);
                    match (&view.next_conjugate, net.layers().get(i + 1)) {
                        (Some(conj), Some(next)) => {
                            signal = conj.mul_unchecked(&tapped).map(|v| next.activation.apply(v));
                            i += 1;
                        }
                        _ => signal = p.matrix().transpose().mul_unchecked(&tapped),
                    }
                }
            }
        } else {
            signal = apply_layer(layer, &signal);
        }
        i += 1;
    }
    Ok(signal)
}
