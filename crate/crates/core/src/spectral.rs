//! Second-derivative matrices and dense DFT matrices.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;


#[allow(unused_imports)]
use num_traits::Float;
use crate::complex::ComplexMatrix;
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffKind {
    /// Periodic Fourier spectral second derivative.
    FourierSpectral,
    /// Three-point stencil, first and last rows zeroed.
    FiniteDifference,
}

/// Second-derivative operator on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffMatrix {
    pub d: DenseMatrix,
    pub kind: DiffKind,
    pub grid_points: usize,
    pub grid_spacing: f64,
}

/// Signed wavenumber index for DFT bin `k` of an `n`-point transform. The
/// Nyquist bin of an even transform is reported as `+n/2`.
pub fn signed_bin(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

pub fn build_second_derivative(n: usize, spacing: f64, kind: DiffKind) -> Result<DiffMatrix> {
    if n < 4 {
        return Err(Error::Size(format!("second-derivative matrix needs n >= 4, got {n}")));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::Domain(format!("grid spacing must be positive, got {spacing}")));
    }
    let d = match kind {
        DiffKind::FourierSpectral => {
            if n % 2 != 0 {
                return Err(Error::Size(format!(
                    "Fourier spectral differentiation needs an even grid, got {n}"
                )));
            }
            fourier_second_derivative(n, spacing)
        }
        DiffKind::FiniteDifference => {
            let h2 = spacing * spacing;
            DenseMatrix::from_fn(n, n, |i, j| {
                if i == 0 || i == n - 1 {
                    0.0
                } else if i == j {
                    -2.0 / h2
                } else if i.abs_diff(j) == 1 {
                    1.0 / h2
                } else {
                    0.0
                }
            })
        }
    };
    Ok(DiffMatrix { d, kind, grid_points: n, grid_spacing: spacing })
}

/// `F₋·diag(−κ²)·F₊` on the periodic grid of length `n·h`. The product is
/// circulant, so only its first column is formed from the DFT pair.
fn fourier_second_derivative(n: usize, h: f64) -> DenseMatrix {
    let dft = DftPair::new_unchecked(n);
    let base = 2.0 * PI / (n as f64 * h);
    let eig: Vec<f64> = (0..n)
        .map(|k| {
            let kappa = base * signed_bin(k, n) as f64;
            -kappa * kappa
        })
        .collect();
    let mut first_col = Vec::with_capacity(n);
    let mut residue: f64 = 0.0;
    for m in 0..n {
        let (mut re, mut im) = (0.0, 0.0);
        for (k, lam) in eig.iter().enumerate() {
            // F₋[m,k]·λ_k·F₊[k,0], with F₊[k,0] = 1/√n real
            let f0 = dft.f_plus.re.get(k, 0);
            re += dft.f_minus.re.get(m, k) * lam * f0;
            im += dft.f_minus.im.get(m, k) * lam * f0;
        }
        residue = residue.max(im.abs());
        first_col.push(re);
    }
    let scale = eig.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    debug_assert!(residue <= 1e-12 * scale.max(1.0), "imaginary residue {residue}");
    DenseMatrix::from_fn(n, n, |i, j| first_col[(i + n - j) % n])
}

/// Unitary forward/backward DFT matrices with symmetric `1/√n` scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct DftPair {
    pub f_plus: ComplexMatrix,
    pub f_minus: ComplexMatrix,
}

impl DftPair {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Size(format!("DFT needs n >= 2, got {n}")));
        }
        Ok(Self::new_unchecked(n))
    }

    fn new_unchecked(n: usize) -> Self {
        let norm = 1.0 / (n as f64).sqrt();
        let angle = |j: usize, k: usize| 2.0 * PI * ((j * k) % n) as f64 / n as f64;
        let re = DenseMatrix::from_fn(n, n, |j, k| angle(j, k).cos() * norm);
        let im = DenseMatrix::from_fn(n, n, |j, k| -angle(j, k).sin() * norm);
        let f_plus = ComplexMatrix { re, im };
        let f_minus = f_plus.adjoint();
        Self { f_plus, f_minus }
    }

    pub fn len(&self) -> usize {
        self.f_plus.shape().0
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

pub fn build_dft_pair(n: usize) -> Result<DftPair> {
    DftPair::new(n)
}

/// Destination index of bin `k` after moving the zero frequency to `n/2`.
pub fn fftshift_index(k: usize, n: usize) -> usize {
    (k + n / 2) % n
}

/// Magnitude of the unitary 2D DFT of `w`, zero frequency shifted to the
/// center pixel `(rows/2, cols/2)`.
pub fn spectrum2d(w: &DenseMatrix) -> DenseMatrix {
    let (m, n) = w.shape();
    let fm = dft_or_trivial(m);
    let fn_ = dft_or_trivial(n);
    // F_m · W · F_nᵀ, and F_n is symmetric
    let left = fm.matmul_real(w).expect("dimensions agree");
    let spec = left.matmul(&fn_).expect("dimensions agree").abs();
    let mut out = DenseMatrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            out.set(fftshift_index(i, m), fftshift_index(j, n), spec.get(i, j));
        }
    }
    out
}

fn dft_or_trivial(n: usize) -> ComplexMatrix {
    if n == 1 {
        ComplexMatrix::identity(1)
    } else {
        DftPair::new_unchecked(n).f_plus
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn annihilates_constants() {
        for kind in [DiffKind::FourierSpectral, DiffKind::FiniteDifference] {
            let d = build_second_derivative(8, 0.37, kind).unwrap();
            let out = d.d.mat_vec(&[1.0; 8]).unwrap();
            assert!(out.iter().all(|v| v.abs() <= 1e-10), "{kind:?}: {out:?}");
        }
    }

    #[test]
    fn cosine_is_an_eigenfunction() {
        let h = 0.25;
        let d = build_second_derivative(16, h, DiffKind::FourierSpectral).unwrap();
        let x: Vec<f64> = (0..16).map(|j| (2.0 * PI * j as f64 / 16.0).cos()).collect();
        let y = d.d.mat_vec(&x).unwrap();
        let lam = -(2.0 * PI / (16.0 * h)).powi(2);
        for (a, b) in y.iter().zip(&x) {
            assert!((a - lam * b).abs() < 1e-8);
        }
    }

    #[test]
    fn matches_trefethen_toeplitz_form() {
        // closed-form periodic second derivative on [0, 2π) rescaled to spacing h
        let (n, h) = (12usize, 0.3);
        let d = build_second_derivative(n, h, DiffKind::FourierSpectral).unwrap();
        let hh = 2.0 * PI / n as f64;
        let rescale = (hh / h).powi(2);
        for i in 0..n {
            for j in 0..n {
                let m = (i + n - j) % n;
                let expected = if m == 0 {
                    -PI * PI / (3.0 * hh * hh) - 1.0 / 6.0
                } else {
                    let s = (m as f64 * hh / 2.0).sin();
                    -(if m % 2 == 0 { 1.0 } else { -1.0 }) / (2.0 * s * s)
                };
                assert!((d.d.get(i, j) - expected * rescale).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn spectral_matrix_is_symmetric() {
        let d = build_second_derivative(32, 1.0, DiffKind::FourierSpectral).unwrap();
        assert!(d.d.max_abs_diff(&d.d.transpose()).unwrap() <= 1e-12);
    }

    #[test]
    fn harmonic_eigenvalues() {
        let (n, h) = (32usize, 0.1);
        let d = build_second_derivative(n, h, DiffKind::FourierSpectral).unwrap();
        for k in 1..n / 2 {
            let v: Vec<f64> = (0..n).map(|j| (2.0 * PI * (k * j) as f64 / n as f64).sin()).collect();
            let dv = d.d.mat_vec(&v).unwrap();
            let lam = -(2.0 * PI * k as f64 / (n as f64 * h)).powi(2);
            let err = dv.iter().zip(&v).map(|(a, b)| (a - lam * b).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-8 * lam.abs(), "k={k} err={err}");
        }
    }

    #[test]
    fn size_errors() {
        assert!(matches!(build_second_derivative(3, 1.0, DiffKind::FiniteDifference), Err(Error::Size(_))));
        assert!(matches!(build_second_derivative(7, 1.0, DiffKind::FourierSpectral), Err(Error::Size(_))));
        assert!(build_second_derivative(7, 1.0, DiffKind::FiniteDifference).is_ok());
        assert!(matches!(DftPair::new(1), Err(Error::Size(_))));
    }

    #[test]
    fn finite_difference_interior_stencil() {
        let d = build_second_derivative(6, 0.5, DiffKind::FiniteDifference).unwrap();
        assert_eq!(d.d.row(0), &[0.0; 6]);
        assert_eq!(d.d.row(2), &[0.0, 4.0, -8.0, 4.0, 0.0, 0.0]);
        let x: Vec<f64> = (0..6).map(|j| (j as f64 * 0.5).powi(2)).collect();
        let y = d.d.mat_vec(&x).unwrap();
        assert!(y[1..5].iter().all(|v| (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn dft_pair_is_unitary_inverse() {
        let p = DftPair::new(4).unwrap();
        let id = p.f_minus.matmul(&p.f_plus).unwrap();
        assert!(id.max_abs_diff(&ComplexMatrix::identity(4)).unwrap() < 1e-12);
    }

    #[test]
    fn dft_concentrates_dc() {
        let p = DftPair::new(8).unwrap();
        let (re, im) = p.f_plus.apply_real(&[1.0; 8]).unwrap();
        assert!((re[0] - 8f64.sqrt()).abs() < 1e-12);
        assert!(re[1..].iter().chain(&im).all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn dft_parseval_against_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p = DftPair::new(8).unwrap();
        let (re, im) = p.f_plus.apply_real(&x).unwrap();
        // direct summation oracle
        for k in 0..8 {
            let (mut sr, mut si) = (0.0, 0.0);
            for (j, xj) in x.iter().enumerate() {
                let a = -2.0 * PI * (j * k) as f64 / 8.0;
                sr += xj * a.cos();
                si += xj * a.sin();
            }
            assert!((sr / 8f64.sqrt() - re[k]).abs() < 1e-12);
            assert!((si / 8f64.sqrt() - im[k]).abs() < 1e-12);
        }
        let ex: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ey: f64 = re.iter().chain(&im).map(|v| v * v).sum::<f64>().sqrt();
        assert!((ex - ey).abs() < 1e-12);
    }

    #[test]
    fn spectrum_of_constant_is_center_pixel() {
        let w = DenseMatrix::from_fn(6, 8, |_, _| 2.0);
        let s = spectrum2d(&w);
        for i in 0..6 {
            for j in 0..8 {
                let v = s.get(i, j);
                if (i, j) == (3, 4) {
                    assert!((v - 2.0 * 48f64.sqrt()).abs() < 1e-10);
                } else {
                    assert!(v < 1e-10);
                }
            }
        }
        assert_eq!(spectrum2d(&DenseMatrix::zeros(4, 4)), DenseMatrix::zeros(4, 4));
    }

    #[test]
    fn spectrum_of_sinusoid_outer_product_has_four_peaks() {
        let (m, n, a, b) = (16usize, 12usize, 3usize, 2usize);
        let w = DenseMatrix::from_fn(m, n, |i, j| {
            (2.0 * PI * (a * i) as f64 / m as f64).cos() * (2.0 * PI * (b * j) as f64 / n as f64).cos()
        });
        let s = spectrum2d(&w);
        let (ci, cj) = (m / 2, n / 2);
        let peaks = [(ci + a, cj + b), (ci - a, cj - b), (ci + a, cj - b), (ci - a, cj + b)];
        let expected = (m * n) as f64 / 4.0 / ((m * n) as f64).sqrt();
        for i in 0..m {
            for j in 0..n {
                if peaks.contains(&(i, j)) {
                    assert!((s.get(i, j) - expected).abs() < 1e-10);
                } else {
                    assert!(s.get(i, j) < 1e-10);
                }
            }
        }
    }

    #[test]
    fn spectrum_magnitude_is_shift_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = DenseMatrix::from_fn(6, 10, |_, _| rng.random_range(-1.0..1.0));
        let shifted = DenseMatrix::from_fn(6, 10, |i, j| w.get((i + 2) % 6, (j + 7) % 10));
        assert!(spectrum2d(&w).max_abs_diff(&spectrum2d(&shifted)).unwrap() < 1e-12);
    }
}
