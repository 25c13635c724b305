//! DEER forward model: Fresnel integrals, the dipolar kernel, the Fredholm
//! integral and a synthetic training-set generator.
//!
//! Units: time in microseconds, distance in nanometers, angular frequencies
//! in rad/µs.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::{linspace, DeerDataset};
use crate::error::{shape_err, Error, Result};
use crate::matrix::DenseMatrix;
use crate::quadrature::integrate;

/// Vacuum permeability, T²·m³/J (CODATA 2018).
pub const MU0: f64 = 1.256_637_062_12e-6;
/// Free-electron magnetogyric ratio, rad/(s·T) (CODATA 2018).
pub const GAMMA_E: f64 = 1.760_859_630_23e11;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// `μ₀γₑ²ħ/4π` in rad·nm³/µs, so that `D = dipolar_constant() / r³`.
/// Both spins are taken as free electrons; evaluates to ≈ 326.98
/// (52.04 MHz·nm³ after division by 2π).
pub fn dipolar_constant() -> f64 {
    let si = MU0 * GAMMA_E * GAMMA_E * HBAR / (4.0 * core::f64::consts::PI); // rad·m³/s
    si * 1e27 * 1e-6
}

fn fresnel_integral(x: f64, f: fn(f64) -> f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let end = x.abs();
    // pieces no longer than a quarter of the local oscillation period π/t
    let mut total = 0.0;
    let mut a = 0.0;
    while a < end {
        let width = (core::f64::consts::PI / (4.0 * a.max(1.0))).min(end - a);
        let b = if end - a - width < 1e-12 * end { end } else { a + width };
        total += integrate(f, a, b, 1e-15, 64);
        a = b;
    }
    x.signum() * total
}

/// `∫₀ˣ cos(t²) dt` (unnormalized). Odd in `x`; tends to `√(2π)/4`.
pub fn fresnel_c(x: f64) -> f64 {
    fresnel_integral(x, |t| (t * t).cos())
}

/// `∫₀ˣ sin(t²) dt` (unnormalized). Odd in `x`; tends to `√(2π)/4`.
pub fn fresnel_s(x: f64) -> f64 {
    fresnel_integral(x, |t| (t * t).sin())
}

/// Orientation-averaged dipolar evolution `∫₀¹ cos(a(1 − 3u²)) du` at
/// `a = D·t`, in closed form
/// `(1/√(3a))·[cos a·FrC(√(3a)) + sin a·FrS(√(3a))]`.
pub fn kernel_of_phase(a: f64) -> f64 {
    if a.abs() < 1e-6 {
        return 1.0 - 0.4 * a * a;
    }
    let z = (3.0 * a.abs()).sqrt();
    // the integrand is even in a
    let a = a.abs();
    (a.cos() * fresnel_c(z) + a.sin() * fresnel_s(z)) / z
}

/// DEER kernel `γ(r, t)` for a spin pair at distance `r` (nm), time `t` (µs).
pub fn deer_kernel(r: f64, t: f64) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!("distance {r} must be positive")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("time {t} must be non-negative")));
    }
    Ok(kernel_of_phase(dipolar_constant() / (r * r * r) * t))
}

/// Precomputed `K[i, j] = γ(r_j, t_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeerKernel {
    pub time_grid: Vec<f64>,
    pub dist_grid: Vec<f64>,
    pub matrix: DenseMatrix,
}

impl DeerKernel {
    pub fn new(time_grid: &[f64], dist_grid: &[f64]) -> Result<Self> {
        if time_grid.is_empty() || dist_grid.is_empty() {
            return Err(Error::Size("kernel grids must be non-empty".into()));
        }
        let mut data = Vec::with_capacity(time_grid.len() * dist_grid.len());
        for &t in time_grid {
            for &r in dist_grid {
                data.push(deer_kernel(r, t)?);
            }
        }
        Ok(Self {
            time_grid: time_grid.to_vec(),
            dist_grid: dist_grid.to_vec(),
            matrix: DenseMatrix::new(time_grid.len(), dist_grid.len(), data)?,
        })
    }

    /// `Γ = K·p / Σp`, so that `Γ(0) = 1` on grids starting at `t = 0`.
    pub fn forward(&self, p: &[f64]) -> Result<Vec<f64>> {
        fredholm_forward(p, self)
    }
}

pub fn fredholm_forward(p: &[f64], kernel: &DeerKernel) -> Result<Vec<f64>> {
    if p.len() != kernel.dist_grid.len() {
        return Err(shape_err!("distribution has {} points, grid has {}", p.len(), kernel.dist_grid.len()));
    }
    if let Some(i) = p.iter().position(|&v| !(v >= 0.0)) {
        return Err(Error::Domain(format!("distribution entry {i} is negative or NaN")));
    }
    let sum: f64 = p.iter().sum();
    if !(sum > 0.0 && sum.is_finite()) {
        return Err(Error::Domain("distribution has zero mass".into()));
    }
    let mut out = kernel.matrix.mat_vec(p)?;
    for v in &mut out {
        *v /= sum;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeerGridConfig {
    pub time_points: usize,
    /// Microseconds; the time grid runs from 0 to `t_max` inclusive.
    pub t_max: f64,
    pub dist_points: usize,
    /// Nanometers.
    pub r_min: f64,
    pub r_max: f64,
    pub noise_sigma_range: (f64, f64),
    pub modulation_depth_range: (f64, f64),
    /// Per microsecond.
    pub background_rate_range: (f64, f64),
    pub n_gaussians_max: usize,
    pub seed: u64,
}

impl Default for DeerGridConfig {
    fn default() -> Self {
        Self {
            time_points: 64,
            t_max: 3.0,
            dist_points: 64,
            r_min: 2.0,
            r_max: 6.0,
            noise_sigma_range: (0.0, 0.02),
            modulation_depth_range: (0.2, 0.5),
            background_rate_range: (0.0, 0.3),
            n_gaussians_max: 3,
            seed: 0,
        }
    }
}

impl DeerGridConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.time_points < 2 || self.dist_points < 2 {
            return bad("grids need at least 2 points");
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return bad("t_max must be positive");
        }
        if !(self.r_min > 0.0 && self.r_max > self.r_min && self.r_max.is_finite()) {
            return bad("distance range needs 0 < r_min < r_max");
        }
        let ordered = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        if !ordered(self.noise_sigma_range) || self.noise_sigma_range.0 < 0.0 {
            return bad("noise range must be ordered and non-negative");
        }
        let (l0, l1) = self.modulation_depth_range;
        if !ordered(self.modulation_depth_range) || l0 < 0.0 || l1 > 1.0 {
            return bad("modulation depth range must be ordered within [0, 1]");
        }
        if !ordered(self.background_rate_range) || self.background_rate_range.0 < 0.0 {
            return bad("background rate range must be ordered and non-negative");
        }
        if self.n_gaussians_max == 0 {
            return bad("n_gaussians_max must be at least 1");
        }
        Ok(())
    }

    pub fn time_grid(&self) -> Vec<f64> {
        linspace(0.0, self.t_max, self.time_points)
    }

    pub fn dist_grid(&self) -> Vec<f64> {
        linspace(self.r_min, self.r_max, self.dist_points)
    }
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    // a draw is consumed either way so that the stream layout is fixed
    let u: f64 = rng.random();
    lo + (hi - lo) * u
}

/// Random Gaussian-mixture distance distribution, normalized to unit sum.
fn sample_distribution(cfg: &DeerGridConfig, r: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let span = cfg.r_max - cfg.r_min;
    let n = rng.random_range(1..=cfg.n_gaussians_max);
    let mut p = alloc::vec![0.0; r.len()];
    for _ in 0..n {
        let mean = draw(rng, (cfg.r_min + 0.1 * span, cfg.r_max - 0.1 * span));
        let width = draw(rng, (0.02 * span, 0.1 * span));
        let amp = draw(rng, (0.1, 1.0));
        for (pi, &ri) in p.iter_mut().zip(r) {
            let z = (ri - mean) / width;
            *pi += amp * (-0.5 * z * z).exp();
        }
    }
    for v in &mut p {
        *v = v.max(0.0);
    }
    let sum: f64 = p.iter().sum();
    for v in &mut p {
        *v /= sum;
    }
    p
}

/// Synthetic traces `V(t) = e^{−kt}(1 − λ + λΓ(t)) + σε`. Trace `j` uses
/// its own ChaCha stream, so the corpus does not depend on generation order.
pub fn generate_dataset(cfg: &DeerGridConfig, n_traces: usize) -> Result<DeerDataset> {
    cfg.validate()?;
    if n_traces == 0 {
        return Err(Error::Size("need at least one trace".into()));
    }
    let t = cfg.time_grid();
    let r = cfg.dist_grid();
    let kernel = DeerKernel::new(&t, &r)?;
    let mut inputs = Vec::with_capacity(n_traces);
    let mut targets = Vec::with_capacity(n_traces);
    for j in 0..n_traces {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(j as u64);
        let p = sample_distribution(cfg, &r, &mut rng);
        let lambda = draw(&mut rng, cfg.modulation_depth_range);
        let k = draw(&mut rng, cfg.background_rate_range);
        let sigma = draw(&mut rng, cfg.noise_sigma_range);
        let gamma = kernel.forward(&p)?;
        let v: Vec<f64> = gamma
            .iter()
            .zip(&t)
            .map(|(g, ti)| {
                let noise: f64 = StandardNormal.sample(&mut rng);
                (-k * ti).exp() * (1.0 - lambda + lambda * g) + sigma * noise
            })
            .collect();
        inputs.push(v);
        targets.push(p);
    }
    DeerDataset::new(
        t,
        r,
        DenseMatrix::from_columns(&inputs)?,
        DenseMatrix::from_columns(&targets)?,
        cfg.seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    // reference values from 30-digit adaptive quadrature of the defining integrals
    const FRESNEL_REF: [(f64, f64, f64); 5] = [
        (0.5, 0.496_884_029_214_794_7, 0.041_481_024_268_547_48),
        (1.0, 0.904_524_237_900_272_1, 0.310_268_301_723_381_1),
        (2.0, 0.461_461_462_433_216_4, 0.804_776_489_343_756_1),
        (3.7, 0.745_943_309_636_618_9, 0.564_079_404_044_601_0),
        (10.0, 0.601_125_184_813_444_3, 0.583_670_899_929_622_3),
    ];

    #[test]
    fn fresnel_reference_values() {
        assert_eq!(fresnel_c(0.0), 0.0);
        assert_eq!(fresnel_s(0.0), 0.0);
        for (x, c, s) in FRESNEL_REF {
            assert!((fresnel_c(x) - c).abs() <= 1e-12, "C({x})");
            assert!((fresnel_s(x) - s).abs() <= 1e-12, "S({x})");
        }
    }

    #[test]
    fn fresnel_matches_simpson_and_is_odd() {
        for x in [0.3, 1.7, 4.2] {
            let c = simpson(|t| (t * t).cos(), 0.0, x, 20_000);
            let s = simpson(|t| (t * t).sin(), 0.0, x, 20_000);
            assert!((fresnel_c(x) - c).abs() <= 1e-10);
            assert!((fresnel_s(x) - s).abs() <= 1e-10);
            assert_eq!(fresnel_c(-x), -fresnel_c(x));
            assert_eq!(fresnel_s(-x), -fresnel_s(x));
        }
    }

    #[test]
    fn fresnel_limit() {
        let limit = (2.0 * core::f64::consts::PI).sqrt() / 4.0;
        assert!((fresnel_c(50.0) - limit).abs() < 1e-2);
        assert!((fresnel_s(50.0) - limit).abs() < 1e-2);
    }

    #[test]
    fn dipolar_constant_value() {
        let d = dipolar_constant();
        assert!((d - 326.983_346_859_383_5).abs() < 1e-9);
        assert!((d / (2.0 * core::f64::consts::PI) - 52.04).abs() < 5e-3);
    }

    #[test]
    fn kernel_matches_orientation_average() {
        // independent oracle: direct quadrature over the orientation cosine
        for a in [core::f64::consts::PI, 0.37, 25.0, 100.0, 1e-3] {
            let direct = simpson(|u| (a * (1.0 - 3.0 * u * u)).cos(), 0.0, 1.0, 200_000);
            assert!((kernel_of_phase(a) - direct).abs() < 1e-10, "a={a}");
        }
        let frozen = [
            (core::f64::consts::PI, -0.206_835_552_406_500_9),
            (0.37, 0.946_298_960_522_709_1),
            (25.0, 0.060_354_778_879_750_12),
            (100.0, 0.011_421_573_622_094_72),
        ];
        for (a, v) in frozen {
            assert!((kernel_of_phase(a) - v).abs() < 1e-12, "a={a}");
        }
    }

    #[test]
    fn kernel_limits_scaling_and_bounds() {
        for r in [1.5, 3.0, 8.0] {
            assert_eq!(deer_kernel(r, 0.0).unwrap(), 1.0);
        }
        // series branch meets the closed form
        assert!((kernel_of_phase(0.999e-6) - kernel_of_phase(1.001e-6)).abs() < 1e-12);
        for (r, t) in [(2.0, 0.3), (3.1, 1.7), (4.5, 0.05)] {
            let a = deer_kernel(r, t).unwrap();
            let b = deer_kernel(2.0 * r, 8.0 * t).unwrap();
            assert!((a - b).abs() < 1e-13);
        }
        for i in 0..200 {
            assert!(kernel_of_phase(i as f64 * 0.73).abs() <= 1.0);
        }
        assert!(matches!(deer_kernel(0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(deer_kernel(-1.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn fredholm_point_masses_and_linearity() {
        let t = linspace(0.0, 2.0, 16);
        let r = linspace(2.0, 5.0, 12);
        let k = DeerKernel::new(&t, &r).unwrap();
        assert!((0..16).all(|i| i > 0 || k.matrix.row(0).iter().all(|&v| v == 1.0)));
        let mut p = alloc::vec![0.0; 12];
        p[4] = 1.0;
        assert_eq!(k.forward(&p).unwrap(), k.matrix.col(4));
        p[4] = 0.5;
        p[9] = 0.5;
        let g = k.forward(&p).unwrap();
        for i in 0..16 {
            let avg = 0.5 * (k.matrix.get(i, 4) + k.matrix.get(i, 9));
            assert!((g[i] - avg).abs() < 1e-15);
        }
        p[9] = -0.1;
        assert!(matches!(k.forward(&p), Err(Error::Domain(_))));
    }

    #[test]
    fn fredholm_gaussian_matches_refined_grid() {
        let t = linspace(0.0, 3.0, 32);
        let gauss = |r: f64| (-0.5 * ((r - 3.5) / 0.4).powi(2)).exp();
        let coarse_r = linspace(2.0, 6.0, 64);
        let fine_r = linspace(2.0, 6.0, 253);
        let coarse = DeerKernel::new(&t, &coarse_r).unwrap();
        let fine = DeerKernel::new(&t, &fine_r).unwrap();
        let pc: Vec<f64> = coarse_r.iter().map(|&r| gauss(r)).collect();
        let pf: Vec<f64> = fine_r.iter().map(|&r| gauss(r)).collect();
        let gc = coarse.forward(&pc).unwrap();
        let gf = fine.forward(&pf).unwrap();
        let scale = gf.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in gc.iter().zip(&gf) {
            assert!((a - b).abs() <= 1e-3 * scale);
        }
    }

    #[test]
    fn complication_free_traces_equal_gamma() {
        let cfg = DeerGridConfig {
            time_points: 24,
            dist_points: 20,
            noise_sigma_range: (0.0, 0.0),
            background_rate_range: (0.0, 0.0),
            modulation_depth_range: (1.0, 1.0),
            seed: 3,
            ..DeerGridConfig::default()
        };
        let data = generate_dataset(&cfg, 5).unwrap();
        let k = DeerKernel::new(&data.time_grid, &data.dist_grid).unwrap();
        for j in 0..5 {
            assert_eq!(data.inputs.col(j), k.forward(&data.targets.col(j)).unwrap());
        }
    }

    #[test]
    fn generation_is_deterministic_and_normalized() {
        let cfg = DeerGridConfig { time_points: 16, dist_points: 16, seed: 42, ..DeerGridConfig::default() };
        let a = generate_dataset(&cfg, 1000).unwrap();
        let b = generate_dataset(&cfg, 1000).unwrap();
        assert_eq!(a, b);
        for j in 0..1000 {
            let col = a.targets.col(j);
            assert!(col.iter().all(|&v| v >= 0.0));
            assert!((col.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
        // prefix property: trace j does not depend on the corpus size
        let c = generate_dataset(&cfg, 10).unwrap();
        assert_eq!(c.inputs.col(7), a.inputs.col(7));
        let other = generate_dataset(&DeerGridConfig { seed: 43, ..cfg }, 10).unwrap();
        assert_ne!(other.inputs.col(0), a.inputs.col(0));
    }

    #[test]
    fn config_validation() {
        let ok = DeerGridConfig::default();
        assert!(ok.validate().is_ok());
        assert!(DeerGridConfig { r_min: 0.0, ..ok }.validate().is_err());
        assert!(DeerGridConfig { t_max: -1.0, ..ok }.validate().is_err());
        assert!(DeerGridConfig { noise_sigma_range: (0.2, 0.1), ..ok }.validate().is_err());
        assert!(DeerGridConfig { modulation_depth_range: (0.2, 1.5), ..ok }.validate().is_err());
    }
}
