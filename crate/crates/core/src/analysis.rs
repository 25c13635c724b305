//! Interpretation tools for descrambled weight matrices.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::complex::ComplexMatrix;
use crate::error::{shape_err, Error, Result};
use crate::linalg::{Lu, Svd};
use crate::matrix::DenseMatrix;
use crate::netlab::svd_truncate;
use crate::spectral::{signed_bin, DftPair};

fn dft_plus(n: usize) -> ComplexMatrix {
    match DftPair::new(n) {
        Ok(p) => p.f_plus,
        Err(_) => ComplexMatrix::identity(1),
    }
}

fn dft_minus(n: usize) -> ComplexMatrix {
    match DftPair::new(n) {
        Ok(p) => p.f_minus,
        Err(_) => ComplexMatrix::identity(1),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FourierConjugate {
    /// `F₊·W·F₋`; bin order is unshifted (row/column 0 is zero frequency).
    pub matrix: ComplexMatrix,
    pub magnitude: DenseMatrix,
}

/// Maps input-spectrum to output-spectrum: if `y = W x` then
/// `F₊y = (F₊ W F₋)(F₊x)`.
pub fn fourier_conjugate(w: &DenseMatrix) -> FourierConjugate {
    let left = dft_plus(w.rows()).matmul_real(w).expect("dimensions agree");
    let matrix = left.matmul(&dft_minus(w.cols())).expect("dimensions agree");
    let magnitude = matrix.abs();
    FourierConjugate { matrix, magnitude }
}

/// Medians of a Fourier-conjugate magnitude over three frequency regions.
/// With `|f|` the normalized frequency of a bin (0 … 0.5):
/// `zero` covers row 0 and column 0; `passband` the entries with
/// `0 < |f| < 1/8` on both axes; `top_quarter` the entries whose larger
/// `|f|` is at least 3/8.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandMedians {
    pub zero: f64,
    pub passband: f64,
    pub top_quarter: f64,
}

pub fn band_medians(magnitude: &DenseMatrix) -> Result<BandMedians> {
    let (m, n) = magnitude.shape();
    // the passband 0 < |f| < 1/8 holds a bin only when 1/len < 1/8
    if m < 9 || n < 9 {
        return Err(Error::Size(format!("band medians need at least 9x9, got {m}x{n}")));
    }
    let freq = |k: usize, len: usize| signed_bin(k, len).unsigned_abs() as f64 / len as f64;
    let (mut zero, mut pass, mut top) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..m {
        for j in 0..n {
            let v = magnitude.get(i, j);
            let (fr, fc) = (freq(i, m), freq(j, n));
            if i == 0 || j == 0 {
                zero.push(v);
            } else if fr < 0.125 && fc < 0.125 {
                pass.push(v);
            }
            if fr.max(fc) >= 0.375 {
                top.push(v);
            }
        }
    }
    Ok(BandMedians { zero: median(&mut zero), passband: median(&mut pass), top_quarter: median(&mut top) })
}

pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of nothing");
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// `W = U·diag(S)·Vᵀ`, singular values descending, each `V` column with a
/// positive largest-magnitude entry.
pub fn svd_inspect(w: &DenseMatrix) -> Svd {
    Svd::new(w)
}

/// Row-averaged autocorrelation of mean-removed row elements, each row
/// normalized by its lag-0 value. Constant rows contribute zeros.
pub fn row_autocorrelation(w: &DenseMatrix) -> Result<Vec<f64>> {
    let n = w.cols();
    if n < 2 {
        return Err(Error::Size("autocorrelation needs at least 2 columns".into()));
    }
    let mut acc = alloc::vec![0.0; n];
    for i in 0..w.rows() {
        let row = w.row(i);
        let mean = row.iter().sum::<f64>() / n as f64;
        let x: Vec<f64> = row.iter().map(|v| v - mean).collect();
        let r0: f64 = x.iter().map(|v| v * v).sum();
        if !(r0 > 0.0) || r0 <= 1e-28 * row.iter().map(|v| v * v).sum::<f64>() {
            continue;
        }
        for (lag, a) in acc.iter_mut().enumerate() {
            let r: f64 = x[..n - lag].iter().zip(&x[lag..]).map(|(a, b)| a * b).sum();
            *a += r / r0;
        }
    }
    let rows = w.rows() as f64;
    Ok(acc.into_iter().map(|v| v / rows).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockAverage {
    pub matrix: DenseMatrix,
    /// Trailing columns that did not fill a whole block and were ignored.
    pub dropped_cols: usize,
}

/// Averages consecutive column blocks of width `block_cols`, then keeps the
/// `sv_keep` leading singular components.
pub fn block_average(w: &DenseMatrix, block_cols: usize, sv_keep: usize) -> Result<BlockAverage> {
    if block_cols == 0 || block_cols > w.cols() {
        return Err(Error::Size(format!("block width {block_cols} does not fit {} columns", w.cols())));
    }
    if sv_keep == 0 {
        return Err(Error::Size("sv_keep must be at least 1".into()));
    }
    let blocks = w.cols() / block_cols;
    let mut avg = DenseMatrix::zeros(w.rows(), block_cols);
    for i in 0..w.rows() {
        for j in 0..block_cols {
            let s: f64 = (0..blocks).map(|b| w.get(i, b * block_cols + j)).sum();
            avg.set(i, j, s / blocks as f64);
        }
    }
    let keep = sv_keep.min(w.rows().min(block_cols));
    Ok(BlockAverage { matrix: svd_truncate(&avg, keep)?, dropped_cols: w.cols() - blocks * block_cols })
}

/// Sign of `det(W)`; 0 when a pivot falls below 1e-300 in magnitude.
pub fn det_sign(w: &DenseMatrix) -> Result<i8> {
    if !w.is_square() {
        return Err(shape_err!("determinant of a {}x{} matrix", w.rows(), w.cols()));
    }
    Ok(Lu::new(w)?.det_sign(1e-300))
}
