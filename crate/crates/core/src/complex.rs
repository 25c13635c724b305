//! Complex matrices as explicit (real, imaginary) pairs.


#[allow(unused_imports)]
use num_traits::Float;
use crate::error::{shape_err, Result};
use crate::matrix::DenseMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    pub re: DenseMatrix,
    pub im: DenseMatrix,
}

impl ComplexMatrix {
    pub fn new(re: DenseMatrix, im: DenseMatrix) -> Result<Self> {
        if re.shape() != im.shape() {
            return Err(shape_err!("real part {:?} vs imaginary part {:?}", re.shape(), im.shape()));
        }
        Ok(Self { re, im })
    }

    pub fn from_real(re: DenseMatrix) -> Self {
        let im = DenseMatrix::zeros(re.rows(), re.cols());
        Self { re, im }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_real(DenseMatrix::identity(n))
    }

    pub fn shape(&self) -> (usize, usize) {
        self.re.shape()
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        let rr = self.re.matmul(&rhs.re)?;
        let ii = self.im.mul_unchecked(&rhs.im);
        let ri = self.re.mul_unchecked(&rhs.im);
        let ir = self.im.mul_unchecked(&rhs.re);
        Ok(Self { re: &rr - &ii, im: &ri + &ir })
    }

    /// Complex times real matrix.
    pub fn matmul_real(&self, rhs: &DenseMatrix) -> Result<Self> {
        Ok(Self { re: self.re.matmul(rhs)?, im: self.im.mul_unchecked(rhs) })
    }

    /// Real matrix times complex.
    pub fn real_matmul(lhs: &DenseMatrix, rhs: &Self) -> Result<Self> {
        Ok(Self { re: lhs.matmul(&rhs.re)?, im: lhs.mul_unchecked(&rhs.im) })
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self { re: self.re.transpose(), im: self.im.transpose().scale(-1.0) }
    }

    /// Entrywise modulus.
    pub fn abs(&self) -> DenseMatrix {
        self.re.zip_with(&self.im, |a, b| a.hypot(b)).expect("parts share a shape")
    }

    pub fn frobenius_norm(&self) -> f64 {
        (self.re.frobenius_norm_sq() + self.im.frobenius_norm_sq()).sqrt()
    }

    /// Largest entrywise modulus of `self − rhs`.
    pub fn max_abs_diff(&self, rhs: &Self) -> Result<f64> {
        let dr = &self.re - &rhs.re;
        let di = &self.im - &rhs.im;
        Ok(Self { re: dr, im: di }.abs().max_abs())
    }

    /// Complex matrix–vector product with a real vector.
    pub fn apply_real(&self, x: &[f64]) -> Result<(alloc::vec::Vec<f64>, alloc::vec::Vec<f64>)> {
        Ok((self.re.mat_vec(x)?, self.im.mat_vec(x)?))
    }
}
