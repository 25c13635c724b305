//! Rational signal-processing replica of a two-layer DEER network: FIR
//! low-pass and zero-frequency notch filters followed by a regularized
//! linear time-to-distance transform.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{shape_err, Error, Result};
use crate::linalg::cholesky_solve;
use crate::matrix::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    LowPass,
    /// High-pass with a null at zero frequency.
    Notch,
}

impl FilterKind {
    pub fn tag(self) -> &'static str {
        match self {
            FilterKind::LowPass => "lowpass",
            FilterKind::Notch => "notch",
        }
    }
}

impl core::str::FromStr for FilterKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lowpass" | "low-pass" => Ok(Self::LowPass),
            "notch" | "highpass-notch" | "high-pass-notch" => Ok(Self::Notch),
            other => Err(Error::Config(format!("unknown filter kind `{other}`"))),
        }
    }
}

/// Direct-form FIR filter. Band edges are in cycles per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FirFilter {
    pub taps: Vec<f64>,
    pub kind: FilterKind,
    pub passband_edge: f64,
    pub stopband_edge: f64,
}

impl FirFilter {
    pub fn order(&self) -> usize {
        self.taps.len() - 1
    }

    pub fn cutoff(&self) -> f64 {
        0.5 * (self.passband_edge + self.stopband_edge)
    }

    /// `|H(f)|` at normalized frequency `f`.
    pub fn response(&self, f: f64) -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (k, h) in self.taps.iter().enumerate() {
            let phase = 2.0 * PI * f * k as f64;
            re += h * phase.cos();
            im -= h * phase.sin();
        }
        re.hypot(im)
    }

    pub fn dc_gain(&self) -> f64 {
        self.taps.iter().sum()
    }
}

/// Number of points on `[0, 0.5]` used to verify designs.
pub const RESPONSE_GRID: usize = 1024;
/// Hamming main-lobe width in cycles per sample, times the order.
const HAMMING_WIDTH: f64 = 3.3;

pub fn response_grid() -> Vec<f64> {
    (0..RESPONSE_GRID).map(|i| 0.5 * i as f64 / (RESPONSE_GRID - 1) as f64).collect()
}

fn min_even_order(width: f64) -> usize {
    let n = (width.recip()).ceil() as usize;
    n + n % 2
}

fn hamming_lowpass(order: usize, cutoff: f64) -> Vec<f64> {
    let m = order as f64;
    let mut h: Vec<f64> = (0..=order)
        .map(|k| {
            let x = k as f64 - 0.5 * m;
            let sinc = if x == 0.0 { 2.0 * cutoff } else { (2.0 * PI * cutoff * x).sin() / (PI * x) };
            sinc * (0.54 - 0.46 * (2.0 * PI * k as f64 / m).cos())
        })
        .collect();
    let dc: f64 = h.iter().sum();
    for v in &mut h {
        *v /= dc;
    }
    h
}

/// Windowed-sinc (Hamming) design with the cutoff at the midpoint of the
/// band edges.
///
/// A low-pass needs a transition band of at least `3.3/order`; the design
/// is then checked for ≤ 1 dB passband ripple and ≥ 40 dB stopband
/// attenuation on a 1024-point grid. A notch is the spectral inversion of
/// the matching low-pass, so its zero-frequency null is exact; it needs the
/// passband edge at least half a main lobe (`1.65/order`) above zero, and
/// is checked for ≤ 1 dB ripple above `cutoff + 1.65/order`.
pub fn design_fir(kind: FilterKind, order: usize, passband_edge: f64, stopband_edge: f64) -> Result<FirFilter> {
    if order < 4 || order % 2 == 1 {
        return Err(Error::Config(format!("order {order} must be even and at least 4")));
    }
    for e in [passband_edge, stopband_edge] {
        if !(e > 0.0 && e < 0.5) {
            return Err(Error::Config(format!("band edge {e} outside (0, 0.5)")));
        }
    }
    let ordered = match kind {
        FilterKind::LowPass => passband_edge < stopband_edge,
        FilterKind::Notch => stopband_edge < passband_edge,
    };
    if !ordered {
        return Err(Error::Config(format!(
            "{} needs the {} edge below the other",
            kind.tag(),
            if kind == FilterKind::LowPass { "passband" } else { "stopband" }
        )));
    }
    let n = order as f64;
    let cutoff = 0.5 * (passband_edge + stopband_edge);
    let (required, available) = match kind {
        FilterKind::LowPass => (HAMMING_WIDTH / n, stopband_edge - passband_edge),
        FilterKind::Notch => (0.5 * HAMMING_WIDTH / n, passband_edge),
    };
    if available < required {
        return Err(Error::Design {
            message: format!("{} transition {available} narrower than {required} at order {order}", kind.tag()),
            min_order: min_even_order(available / (required * n)),
        });
    }
    let mut taps = hamming_lowpass(order, cutoff);
    if kind == FilterKind::Notch {
        for t in &mut taps {
            *t = -*t;
        }
        taps[order / 2] += 1.0;
    }
    let filter = FirFilter { taps, kind, passband_edge, stopband_edge };
    verify(&filter)?;
    Ok(filter)
}

fn verify(f: &FirFilter) -> Result<()> {
    let db = |g: f64| 20.0 * g.log10();
    let half_lobe = 0.5 * HAMMING_WIDTH / f.order() as f64;
    for x in response_grid() {
        let g = f.response(x);
        let bad = match f.kind {
            FilterKind::LowPass => {
                (x <= f.passband_edge && db(g).abs() > 1.0) || (x >= f.stopband_edge && db(g) > -40.0)
            }
            FilterKind::Notch => (x == 0.0 && g > 1e-3) || (x >= f.cutoff() + half_lobe && db(g).abs() > 1.0),
        };
        if bad {
            return Err(Error::Design {
                message: format!("{} response {g} at f = {x} misses the band limits", f.kind.tag()),
                min_order: 2 * f.order(),
            });
        }
    }
    Ok(())
}

fn causal(taps: &[f64], x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|n| taps.iter().take(n + 1).enumerate().map(|(k, h)| h * x[n - k]).sum())
        .collect()
}

/// Zero-phase forward-backward filtering. The signal is extended at both
/// ends by `order` samples of even (mirror) reflection, `x₋ₖ = xₖ`: dipolar
/// traces are even in time, so the extension is exact at `t = 0`.
pub fn apply_fir(f: &FirFilter, signal: &[f64]) -> Result<Vec<f64>> {
    let n = signal.len();
    if n < f.taps.len() {
        return Err(Error::Size(format!("signal of {n} samples is shorter than {} taps", f.taps.len())));
    }
    let pad = f.order();
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|k| signal[k]));
    ext.extend_from_slice(signal);
    ext.extend((1..=pad).map(|k| signal[n - 1 - k]));
    let mut y = causal(&f.taps, &ext);
    y.reverse();
    let mut y = causal(&f.taps, &y);
    y.reverse();
    Ok(y[pad..pad + n].to_vec())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LCurvePoint {
    pub lambda: f64,
    /// `‖T F − P‖_F`.
    pub residual_norm: f64,
    /// `‖T‖_F`.
    pub solution_norm: f64,
    /// `‖(FFᵀ + λI)Tᵀ − FPᵀ‖_F / (‖FFᵀ + λI‖_F‖T‖_F + ‖FPᵀ‖_F)`.
    pub normal_residual: f64,
}

/// Linear map from filtered traces to distance distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedTransform {
    /// `n_r × n_t`.
    pub t: DenseMatrix,
    pub lambda: f64,
    pub lcurve_trace: Vec<LCurvePoint>,
}

/// 40 log-spaced values over `[1e-8, 1e2] · tr(FFᵀ)/n_t`.
pub fn default_lambda_grid(f_solutions: &DenseMatrix) -> Vec<f64> {
    let scale = f_solutions.frobenius_norm_sq() / f_solutions.rows() as f64;
    (0..40).map(|i| scale * 10f64.powf(-8.0 + 10.0 * i as f64 / 39.0)).collect()
}

/// `T = [(FFᵀ + λI)⁻¹ FPᵀ]ᵀ` for a given Gram matrix and cross term.
pub fn solve_ridge(fft: &DenseMatrix, fpt: &DenseMatrix, lambda: f64) -> Result<DenseMatrix> {
    let n = fft.rows();
    let a = DenseMatrix::from_fn(n, n, |i, j| fft.get(i, j) + if i == j { lambda } else { 0.0 });
    Ok(cholesky_solve(&a, fpt)?.transpose())
}

/// Index of maximum curvature of the discrete curve
/// `(log residual, log solution norm)` parameterized by grid position.
pub fn lcurve_corner(trace: &[LCurvePoint]) -> usize {
    if trace.len() < 3 {
        return 0;
    }
    let x: Vec<f64> = trace.iter().map(|p| p.residual_norm.max(f64::MIN_POSITIVE).ln()).collect();
    let y: Vec<f64> = trace.iter().map(|p| p.solution_norm.max(f64::MIN_POSITIVE).ln()).collect();
    let mut best = (1, f64::NEG_INFINITY);
    for i in 1..trace.len() - 1 {
        let (dx, dy) = (0.5 * (x[i + 1] - x[i - 1]), 0.5 * (y[i + 1] - y[i - 1]));
        let (ddx, ddy) = (x[i + 1] - 2.0 * x[i] + x[i - 1], y[i + 1] - 2.0 * y[i] + y[i - 1]);
        let denom = (dx * dx + dy * dy).powf(1.5);
        if denom > 0.0 {
            // the corner of the convex L bends toward the origin
            let kappa = (dx * ddy - ddx * dy) / denom;
            if kappa > best.1 {
                best = (i, kappa);
            }
        }
    }
    best.0
}

/// Ridge regression of distributions on filtered traces, one solve per grid
/// value, λ picked at the L-curve corner.
pub fn fit_transform(
    f_solutions: &DenseMatrix,
    p_targets: &DenseMatrix,
    lambda_grid: Option<&[f64]>,
) -> Result<RegularizedTransform> {
    if f_solutions.cols() != p_targets.cols() {
        return Err(shape_err!("{} traces but {} distributions", f_solutions.cols(), p_targets.cols()));
    }
    let default;
    let grid = match lambda_grid {
        Some(g) => g,
        None => {
            default = default_lambda_grid(f_solutions);
            &default
        }
    };
    if grid.is_empty() || grid.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::Config("lambda grid must be non-empty and strictly positive".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("lambda grid must be increasing".into()));
    }
    let fft = f_solutions.gram_rows(256);
    let fpt = f_solutions.mul_unchecked(&p_targets.transpose());
    let mut solutions = Vec::with_capacity(grid.len());
    let mut trace = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let t = solve_ridge(&fft, &fpt, lambda)?;
        let resid = (&t.mul_unchecked(f_solutions) - p_targets).frobenius_norm();
        let tt = t.transpose();
        let lhs = fft.mul_unchecked(&tt);
        let normal = DenseMatrix::from_fn(lhs.rows(), lhs.cols(), |i, j| {
            lhs.get(i, j) + lambda * tt.get(i, j) - fpt.get(i, j)
        });
        let a_norm = (fft.frobenius_norm_sq() + 2.0 * lambda * fft.trace() + lambda * lambda * fft.rows() as f64).sqrt();
        let scale = a_norm * t.frobenius_norm() + fpt.frobenius_norm();
        trace.push(LCurvePoint {
            lambda,
            residual_norm: resid,
            solution_norm: t.frobenius_norm(),
            normal_residual: if scale > 0.0 { normal.frobenius_norm() / scale } else { 0.0 },
        });
        solutions.push(t);
    }
    let pick = lcurve_corner(&trace);
    Ok(RegularizedTransform { t: solutions.swap_remove(pick), lambda: grid[pick], lcurve_trace: trace })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaOutput {
    /// Clipped at zero and normalized to unit sum.
    pub distribution: Vec<f64>,
    /// Trace after low-pass and notch filtering.
    pub filtered: Vec<f64>,
    /// `T·filtered` before clipping.
    pub raw: Vec<f64>,
    /// Set when nothing positive survives clipping; `distribution` is zero.
    pub degenerate: bool,
}

/// Low-pass, then notch, then the distance transform.
pub fn replica_pipeline(
    trace: &[f64],
    lowpass: &FirFilter,
    notch: &FirFilter,
    transform: &RegularizedTransform,
) -> Result<ReplicaOutput> {
    if trace.len() != transform.t.cols() {
        return Err(shape_err!("trace of {} points, transform takes {}", trace.len(), transform.t.cols()));
    }
    let filtered = apply_fir(notch, &apply_fir(lowpass, trace)?)?;
    let raw = transform.t.mat_vec(&filtered)?;
    let clipped: Vec<f64> = raw.iter().map(|v| v.max(0.0)).collect();
    let sum: f64 = clipped.iter().sum();
    let degenerate = !(sum > 0.0);
    let distribution = if degenerate { alloc::vec![0.0; raw.len()] } else { clipped.iter().map(|v| v / sum).collect() };
    Ok(ReplicaOutput { distribution, filtered, raw, degenerate })
}

/// Pearson correlation coefficient; zero when either input is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa > 0.0 && sbb > 0.0 {
        sab / (saa * sbb).sqrt()
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Direct DFT of the taps, independent of `FirFilter::response`.
    fn dft_gain(taps: &[f64], f: f64) -> f64 {
        let n = 1 << 16;
        let k = (f * n as f64).round() as usize;
        let (mut re, mut im) = (0.0, 0.0);
        for (j, h) in taps.iter().enumerate() {
            let ang = -2.0 * PI * ((k * j) % n) as f64 / n as f64;
            re += h * ang.cos();
            im += h * ang.sin();
        }
        (re * re + im * im).sqrt()
    }

    #[test]
    fn lowpass_order_32() {
        let f = design_fir(FilterKind::LowPass, 32, 0.01, 0.3).unwrap();
        assert_eq!(f.order(), 32);
        assert!((f.dc_gain() - 1.0).abs() <= 0.01);
        assert!(dft_gain(&f.taps, 0.45) <= 0.01);
        assert!((dft_gain(&f.taps, 0.0) - 1.0).abs() <= 0.01);
        // symmetric taps: linear phase
        assert!(f.taps.iter().zip(f.taps.iter().rev()).all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn notch_order_256() {
        let f = design_fir(FilterKind::Notch, 256, 0.008, 0.001).unwrap();
        assert!(f.dc_gain().abs() <= 1e-3);
        assert!(dft_gain(&f.taps, 0.0) <= 1e-3);
        assert!(dft_gain(&f.taps, 0.05) >= 0.9);
        let on_grid = 3277.0 / 65536.0;
        assert!((f.response(on_grid) - dft_gain(&f.taps, on_grid)).abs() < 1e-12);
    }

    #[test]
    fn infeasible_designs_name_minimum_order() {
        match design_fir(FilterKind::Notch, 8, 0.008, 0.001) {
            Err(Error::Design { min_order, .. }) => {
                assert_eq!(min_order, 208);
                assert!(design_fir(FilterKind::Notch, min_order, 0.008, 0.001).is_ok());
                assert!(design_fir(FilterKind::Notch, min_order - 2, 0.008, 0.001).is_err());
            }
            other => panic!("{other:?}"),
        }
        match design_fir(FilterKind::LowPass, 8, 0.1, 0.2) {
            Err(Error::Design { min_order, .. }) => assert_eq!(min_order, 34),
            other => panic!("{other:?}"),
        }
        assert!(matches!(design_fir(FilterKind::LowPass, 7, 0.1, 0.3), Err(Error::Config(_))));
        assert!(matches!(design_fir(FilterKind::LowPass, 32, 0.3, 0.1), Err(Error::Config(_))));
        assert!(matches!(design_fir(FilterKind::LowPass, 32, 0.1, 0.6), Err(Error::Config(_))));
    }

    #[test]
    fn filtering_examples() {
        let lp = design_fir(FilterKind::LowPass, 32, 0.01, 0.3).unwrap();
        let notch = design_fir(FilterKind::Notch, 256, 0.008, 0.001).unwrap();
        assert!(apply_fir(&lp, &[0.0; 100]).unwrap().iter().all(|&v| v == 0.0));
        let dc = apply_fir(&notch, &[2.5; 400]).unwrap();
        assert!(dc.iter().all(|v| v.abs() <= 1e-3 * 2.5));
        // in-band tone: forward-backward gain is |H|²
        let f0 = 0.05;
        let tone: Vec<f64> = (0..400).map(|i| (2.0 * PI * f0 * i as f64).sin()).collect();
        let out = apply_fir(&lp, &tone).unwrap();
        let expected = lp.response(f0).powi(2);
        let amp = out[100..300].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((amp - 1.0).abs() <= 0.02 && (amp - expected).abs() <= 0.01);
        assert!(matches!(apply_fir(&notch, &[1.0; 100]), Err(Error::Size(_))));
    }

    #[test]
    fn zero_phase_keeps_pulse_position() {
        let lp = design_fir(FilterKind::LowPass, 32, 0.01, 0.3).unwrap();
        let pulse: Vec<f64> =
            (0..200).map(|i| (-((i as f64 - 87.0) / 12.0).powi(2)).exp() * (2.0 * PI * 0.03 * (i as f64 - 87.0)).cos()).collect();
        let out = apply_fir(&lp, &pulse).unwrap();
        let argmax = out.iter().enumerate().fold((0, f64::MIN), |b, (i, &v)| if v > b.1 { (i, v) } else { b }).0;
        assert!((argmax as i64 - 87).abs() <= 1);
    }

    fn planted(rng: &mut ChaCha8Rng, nt: usize, nr: usize, n: usize) -> (DenseMatrix, DenseMatrix, DenseMatrix) {
        let t0 = DenseMatrix::from_fn(nr, nt, |_, _| rng.random_range(-1.0..1.0));
        let f = DenseMatrix::from_fn(nt, n, |_, _| StandardNormal.sample(rng));
        let p = &t0 * &f;
        (t0, f, p)
    }

    #[test]
    fn recovers_planted_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (t0, f, p) = planted(&mut rng, 12, 8, 600);
        let tiny = 1e-8 * f.frobenius_norm_sq() / 12.0;
        let fit = fit_transform(&f, &p, Some(&[tiny])).unwrap();
        assert!((&fit.t - &t0).frobenius_norm() <= 1e-3 * t0.frobenius_norm());
        assert!(fit.lcurve_trace[0].normal_residual <= 1e-8);
    }

    #[test]
    fn solution_norm_shrinks_with_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (_, f, p) = planted(&mut rng, 10, 6, 200);
        let grid: Vec<f64> = (0..30).map(|i| 10f64.powf(-4.0 + 0.5 * i as f64)).collect();
        let fit = fit_transform(&f, &p, Some(&grid)).unwrap();
        let norms: Vec<f64> = fit.lcurve_trace.iter().map(|q| q.solution_norm).collect();
        assert!(norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        assert!(*norms.last().unwrap() < 1e-6 * norms[0]);
        assert!(fit.lcurve_trace.iter().all(|q| q.normal_residual <= 1e-8));
        assert!(grid.contains(&fit.lambda));
    }

    #[test]
    fn default_grid_and_config_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (_, f, p) = planted(&mut rng, 6, 4, 100);
        let fit = fit_transform(&f, &p, None).unwrap();
        assert_eq!(fit.lcurve_trace.len(), 40);
        let g = default_lambda_grid(&f);
        let scale = f.frobenius_norm_sq() / 6.0;
        assert!((g[0] / scale - 1e-8).abs() < 1e-20 && (g[39] / scale - 1e2).abs() < 1e-10);
        assert!(fit_transform(&f, &p, Some(&[0.0, 1.0])).is_err());
        assert!(fit_transform(&f, &p, Some(&[])).is_err());
    }

    #[test]
    fn lcurve_picks_a_sensible_lambda_on_noisy_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (t0, f, p) = planted(&mut rng, 16, 8, 300);
        // noisy observations of the traces, exact targets
        let noise = DenseMatrix::from_fn(16, 300, |_, _| StandardNormal.sample(&mut rng));
        let f_noisy = &f + &noise.scale(0.3);
        let fit = fit_transform(&f_noisy, &p, None).unwrap();
        // report-only: distance of the L-curve pick from the oracle-best λ
        let err: Vec<f64> = fit
            .lcurve_trace
            .iter()
            .map(|q| {
                let t = solve_ridge(&f_noisy.gram_rows(256), &(&f_noisy * &p.transpose()), q.lambda).unwrap();
                (&(&t * &f) - &(&t0 * &f)).frobenius_norm()
            })
            .collect();
        let best = err.iter().enumerate().fold((0, f64::MAX), |b, (i, &e)| if e < b.1 { (i, e) } else { b }).0;
        let pick = fit.lcurve_trace.iter().position(|q| q.lambda == fit.lambda).unwrap();
        std::println!("L-curve pick index {pick}, true-error optimum {best}");
        assert!(pick > 0 && pick < 39);
    }

    #[test]
    fn pipeline_degenerate_and_homogeneous() {
        let lp = design_fir(FilterKind::LowPass, 8, 0.01, 0.45).unwrap();
        let notch = design_fir(FilterKind::Notch, 8, 0.45, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = DenseMatrix::from_fn(5, 20, |_, _| rng.random_range(-1.0..1.0));
        let tr = RegularizedTransform { t, lambda: 1.0, lcurve_trace: Vec::new() };
        let out = replica_pipeline(&[0.0; 20], &lp, &notch, &tr).unwrap();
        assert!(out.degenerate && out.distribution.iter().all(|&v| v == 0.0));
        let x: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = replica_pipeline(&x, &lp, &notch, &tr).unwrap();
        let x3: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
        let b = replica_pipeline(&x3, &lp, &notch, &tr).unwrap();
        for (u, v) in a.raw.iter().zip(&b.raw) {
            assert!((3.0 * u - v).abs() <= 1e-12 * (1.0 + v.abs()));
        }
        assert!(replica_pipeline(&[0.0; 19], &lp, &notch, &tr).is_err());
    }

    #[test]
    fn pearson_basics() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.5]) - 0.9986).abs() < 1e-3);
        assert_eq!(pearson(&[1.0, 1.0], &[0.0, 1.0]), 0.0);
    }
}
