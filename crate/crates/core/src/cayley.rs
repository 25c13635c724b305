//! Cayley parameterization of SO(n) and the descrambling functionals.
//!
//! A rotation is written `P = (I + Q)⁻¹(I − Q)` with `Q` real antisymmetric.
//! `I + Q` is always invertible because the eigenvalues of `Q` are purely
//! imaginary. Only the strict upper triangle of `Q` is stored, so every
//! parameter vector maps to a valid rotation.
//!
//! For any functional `η(P)` with matrix gradient `G = ∂η/∂P`, the gradient
//! with respect to the full matrix `Q` is
//!
//! ```text
//! ∂η/∂Q = −(I + Q)⁻ᵀ · G · (I + P)ᵀ
//! ```
//!
//! and the gradient with respect to an upper-triangle parameter `q_ij` is
//! `[∂η/∂Q]_ij − [∂η/∂Q]_ji`, since `Q_ji = −Q_ij`.

use alloc::format;
use alloc::vec::Vec;


use crate::error::{shape_err, Error, Result};
use crate::linalg::Lu;
use crate::matrix::DenseMatrix;
use crate::spectral::DiffMatrix;

/// Strict upper triangle of an antisymmetric `dim × dim` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AntisymParams {
    dim: usize,
    q_upper: Vec<f64>,
}

pub fn param_count(dim: usize) -> usize {
    dim * dim.saturating_sub(1) / 2
}

impl AntisymParams {
    pub fn new(dim: usize, q_upper: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Size("rotation dimension must be positive".into()));
        }
        if q_upper.len() != param_count(dim) {
            return Err(shape_err!(
                "dimension {dim} needs {} parameters, got {}",
                param_count(dim),
                q_upper.len()
            ));
        }
        if let Some(index) = q_upper.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { dim, q_upper })
    }

    pub fn zeros(dim: usize) -> Self {
        Self { dim, q_upper: alloc::vec![0.0; param_count(dim)] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.q_upper
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.q_upper
    }

    /// Materializes `Q` with `Qᵀ = −Q` exactly.
    pub fn to_matrix(&self) -> DenseMatrix {
        let n = self.dim;
        let mut q = DenseMatrix::zeros(n, n);
        let mut idx = 0;
        for i in 0..n {
            for j in i + 1..n {
                let v = self.q_upper[idx];
                q.set(i, j, v);
                q.set(j, i, -v);
                idx += 1;
            }
        }
        q
    }

    /// Projects a full-matrix gradient onto the parameters:
    /// `g_ij = G_ij − G_ji` for `i < j`.
    pub fn project_gradient(g: &DenseMatrix) -> Result<Self> {
        if !g.is_square() {
            return Err(shape_err!("gradient must be square, got {:?}", g.shape()));
        }
        let n = g.rows();
        let mut out = Vec::with_capacity(param_count(n));
        for i in 0..n {
            for j in i + 1..n {
                out.push(g.get(i, j) - g.get(j, i));
            }
        }
        Ok(Self { dim: n, q_upper: out })
    }
}

impl core::ops::Neg for &AntisymParams {
    type Output = AntisymParams;
    fn neg(self) -> AntisymParams {
        AntisymParams { dim: self.dim, q_upper: self.q_upper.iter().map(|v| -v).collect() }
    }
}

/// A rotation in SO(n).
#[derive(Debug, Clone, PartialEq)]
pub struct Descrambler {
    p: DenseMatrix,
}

impl Descrambler {
    /// Wraps an externally supplied matrix after checking `PᵀP = I` to
    /// `1e-8·n` and `det P > 0`.
    pub fn from_matrix(p: DenseMatrix) -> Result<Self> {
        if !p.is_square() {
            return Err(shape_err!("descrambler must be square, got {:?}", p.shape()));
        }
        let n = p.rows() as f64;
        let defect = p.orthogonality_defect();
        if defect > 1e-8 * n {
            return Err(Error::Domain(format!("matrix is not orthogonal (defect {defect:e})")));
        }
        if Lu::new(&p)?.det() <= 0.0 {
            return Err(Error::Domain("matrix is not a proper rotation (det <= 0)".into()));
        }
        Ok(Self { p })
    }

    pub fn identity(n: usize) -> Self {
        Self { p: DenseMatrix::identity(n) }
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.p
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.p.rows()
    }

    /// `P⁻¹ = Pᵀ`.
    pub fn inverse(&self) -> Self {
        Self { p: self.p.transpose() }
    }
}

/// `P = (I + Q)⁻¹(I − Q)` together with the factorization of `I + Q`.
pub(crate) struct CayleyEval {
    pub p: DenseMatrix,
    pub lu: Lu,
}

pub(crate) fn cayley_eval(q: &AntisymParams) -> CayleyEval {
    let n = q.dim;
    let qm = q.to_matrix();
    let id = DenseMatrix::identity(n);
    let lu = Lu::new(&(&id + &qm)).expect("square");
    let p = lu.solve(&(&id - &qm)).expect("I + Q is nonsingular for antisymmetric Q");
    CayleyEval { p, lu }
}

pub fn cayley_map(q: &AntisymParams) -> Descrambler {
    Descrambler { p: cayley_eval(q).p }
}

/// `(I + P)ᵀ` applied from the right: `M·(I + P)ᵀ = M + M·Pᵀ`.
fn times_i_plus_p_transpose(m: &DenseMatrix, p: &DenseMatrix) -> DenseMatrix {
    m + &m.mul_unchecked(&p.transpose())
}

fn pullback_with(lu: &Lu, p: &DenseMatrix, d_eta_dp: &DenseMatrix) -> Result<AntisymParams> {
    let left = lu.solve_transpose(d_eta_dp)?;
    let full = times_i_plus_p_transpose(&left, p);
    AntisymParams::project_gradient(&(-&full))
}

/// Generic chain rule from a gradient with respect to `P` to the
/// upper-triangle parameters of `Q`.
pub fn cayley_pullback(
    d_eta_dp: &DenseMatrix,
    q: &AntisymParams,
    p: &Descrambler,
) -> Result<AntisymParams> {
    let n = q.dim;
    if d_eta_dp.shape() != (n, n) || p.dim() != n {
        return Err(shape_err!(
            "pullback operands {:?}, q dim {n}, p dim {}",
            d_eta_dp.shape(),
            p.dim()
        ));
    }
    let id = DenseMatrix::identity(n);
    let lu = Lu::new(&(&id + &q.to_matrix()))?;
    pullback_with(&lu, p.matrix(), d_eta_dp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Functional {
    /// `‖D·P·S‖²_F`, minimized.
    Tikhonov,
    /// `Tr[P·W]`, maximized.
    Mds,
    /// `Σ_i (P·W)_ii²`, maximized.
    Mdns,
}

impl Functional {
    pub fn sense(self) -> Sense {
        match self {
            Functional::Tikhonov => Sense::Minimize,
            Functional::Mds | Functional::Mdns => Sense::Maximize,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Functional::Tikhonov => "tikhonov",
            Functional::Mds => "mds",
            Functional::Mdns => "mdns",
        }
    }
}

impl core::str::FromStr for Functional {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tikhonov" => Ok(Functional::Tikhonov),
            "mds" => Ok(Functional::Mds),
            "mdns" => Ok(Functional::Mdns),
            other => Err(Error::Config(format!("unknown functional `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Column block width used when accumulating `S·Sᵀ`.
pub const GRAM_BLOCK: usize = 256;

#[derive(Debug, Clone, PartialEq)]
enum Terms {
    Tikhonov { signal: DenseMatrix, dtd: DenseMatrix, sst: DenseMatrix },
    Diagonal { functional: Functional, weight: DenseMatrix },
}

/// A frozen descrambling objective over `SO(dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DescramblingProblem {
    dim: usize,
    terms: Terms,
}

impl DescramblingProblem {
    /// `‖D·P·S‖²_F` with `DᵀD` and `SSᵀ` precomputed.
    pub fn tikhonov(d: &DiffMatrix, signal: DenseMatrix) -> Result<Self> {
        Self::tikhonov_from_matrix(&d.d, signal)
    }

    pub fn tikhonov_from_matrix(d: &DenseMatrix, signal: DenseMatrix) -> Result<Self> {
        let n = signal.rows();
        if d.shape() != (n, n) {
            return Err(shape_err!(
                "derivative matrix {:?} does not act on {n}-row signal",
                d.shape()
            ));
        }
        let dtd = d.transpose().mul_unchecked(d);
        let sst = signal.gram_rows(GRAM_BLOCK);
        Ok(Self { dim: n, terms: Terms::Tikhonov { signal, dtd, sst } })
    }

    /// Maximum diagonal sum of `P·W`.
    pub fn mds(weight: DenseMatrix) -> Self {
        Self { dim: weight.rows(), terms: Terms::Diagonal { functional: Functional::Mds, weight } }
    }

    /// Maximum diagonal norm-square of `P·W`.
    pub fn mdns(weight: DenseMatrix) -> Self {
        Self { dim: weight.rows(), terms: Terms::Diagonal { functional: Functional::Mdns, weight } }
    }

    pub fn functional(&self) -> Functional {
        match &self.terms {
            Terms::Tikhonov { .. } => Functional::Tikhonov,
            Terms::Diagonal { functional, .. } => *functional,
        }
    }

    pub fn sense(&self) -> Sense {
        self.functional().sense()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn signal(&self) -> Option<&DenseMatrix> {
        match &self.terms {
            Terms::Tikhonov { signal, .. } => Some(signal),
            Terms::Diagonal { .. } => None,
        }
    }

    pub fn weight(&self) -> Option<&DenseMatrix> {
        match &self.terms {
            Terms::Diagonal { weight, .. } => Some(weight),
            Terms::Tikhonov { .. } => None,
        }
    }

    /// Precomputed `DᵀD` (Tikhonov only).
    pub fn dtd(&self) -> Option<&DenseMatrix> {
        match &self.terms {
            Terms::Tikhonov { dtd, .. } => Some(dtd),
            Terms::Diagonal { .. } => None,
        }
    }

    /// Precomputed `SSᵀ` (Tikhonov only).
    pub fn sst(&self) -> Option<&DenseMatrix> {
        match &self.terms {
            Terms::Tikhonov { sst, .. } => Some(sst),
            Terms::Diagonal { .. } => None,
        }
    }

    /// Magnitude scale of the gradient, used to normalize stopping tests.
    pub fn gradient_scale(&self) -> f64 {
        match &self.terms {
            Terms::Tikhonov { dtd, sst, .. } => dtd.frobenius_norm() * sst.frobenius_norm(),
            Terms::Diagonal { functional: Functional::Mdns, weight } => weight.frobenius_norm_sq(),
            Terms::Diagonal { weight, .. } => weight.frobenius_norm(),
        }
    }

    fn check(&self, q: &AntisymParams) -> Result<()> {
        if q.dim != self.dim {
            return Err(shape_err!("parameters of dimension {} for a {}-dim problem", q.dim, self.dim));
        }
        Ok(())
    }

    fn expect(&self, f: Functional) -> Result<()> {
        if self.functional() != f {
            return Err(Error::Config(format!(
                "problem is {}, not {}",
                self.functional().name(),
                f.name()
            )));
        }
        Ok(())
    }

    /// Objective value at `q` in the user's sense (not sign-flipped).
    pub fn eval(&self, q: &AntisymParams) -> Result<f64> {
        self.check(q)?;
        let c = cayley_eval(q);
        Ok(self.value_at(&c.p))
    }

    /// Objective value at an explicit rotation.
    pub fn value_at(&self, p: &DenseMatrix) -> f64 {
        match &self.terms {
            Terms::Tikhonov { dtd, sst, .. } => {
                let ap = dtd.mul_unchecked(p);
                let pb = p.mul_unchecked(sst);
                ap.as_slice().iter().zip(pb.as_slice()).map(|(a, b)| a * b).sum()
            }
            Terms::Diagonal { functional, weight } => {
                let d = diag_of_product(p, weight);
                match functional {
                    Functional::Mds => d.iter().sum(),
                    _ => d.iter().map(|v| v * v).sum(),
                }
            }
        }
    }

    /// Value and parameter gradient at `q`, sharing one factorization.
    pub fn eval_and_grad(&self, q: &AntisymParams) -> Result<(f64, AntisymParams)> {
        self.check(q)?;
        let CayleyEval { p, lu } = cayley_eval(q);
        match &self.terms {
            Terms::Tikhonov { dtd, sst, .. } => {
                // −2 (I+Q)⁻ᵀ [DᵀD] P [SSᵀ] (I+P)ᵀ
                let ap = dtd.mul_unchecked(&p);
                let pb = p.mul_unchecked(sst);
                let value = ap.as_slice().iter().zip(pb.as_slice()).map(|(a, b)| a * b).sum();
                let apb = ap.mul_unchecked(sst);
                let left = lu.solve_transpose(&apb)?;
                let full = times_i_plus_p_transpose(&left, &p).scale(-2.0);
                Ok((value, AntisymParams::project_gradient(&full)?))
            }
            Terms::Diagonal { functional, weight } => {
                let n = self.dim;
                let m = n.min(weight.cols());
                let d = diag_of_product(&p, weight);
                let (value, scale): (f64, Vec<f64>) = match functional {
                    Functional::Mds => (d.iter().sum(), alloc::vec![1.0; m]),
                    _ => (d.iter().map(|v| v * v).sum(), d.clone()),
                };
                // rows l < m of Wᵀ scaled by the diagonal of P·W
                let wt = DenseMatrix::from_fn(n, n, |l, k| if l < m { scale[l] * weight.get(k, l) } else { 0.0 });
                let left = lu.solve_transpose(&wt)?;
                let factor = if *functional == Functional::Mds { -1.0 } else { -2.0 };
                let full = times_i_plus_p_transpose(&left, &p).scale(factor);
                Ok((value, AntisymParams::project_gradient(&full)?))
            }
        }
    }

    pub fn grad(&self, q: &AntisymParams) -> Result<AntisymParams> {
        Ok(self.eval_and_grad(q)?.1)
    }

    /// `∂η/∂P` at an explicit rotation.
    pub fn gradient_wrt_p(&self, p: &DenseMatrix) -> DenseMatrix {
        match &self.terms {
            Terms::Tikhonov { dtd, sst, .. } => dtd.mul_unchecked(p).mul_unchecked(sst).scale(2.0),
            Terms::Diagonal { functional, weight } => {
                let n = self.dim;
                let m = n.min(weight.cols());
                let d = diag_of_product(p, weight);
                DenseMatrix::from_fn(n, n, |l, k| {
                    if l >= m {
                        0.0
                    } else if *functional == Functional::Mds {
                        weight.get(k, l)
                    } else {
                        2.0 * d[l] * weight.get(k, l)
                    }
                })
            }
        }
    }
}

/// Leading `min(rows, cols)` diagonal of `P·W`.
fn diag_of_product(p: &DenseMatrix, w: &DenseMatrix) -> Vec<f64> {
    let m = p.rows().min(w.cols());
    (0..m)
        .map(|i| p.row(i).iter().enumerate().map(|(k, pik)| pik * w.get(k, i)).sum())
        .collect()
}

pub fn eval_tikhonov(q: &AntisymParams, prob: &DescramblingProblem) -> Result<f64> {
    prob.expect(Functional::Tikhonov)?;
    prob.eval(q)
}

pub fn grad_tikhonov(q: &AntisymParams, prob: &DescramblingProblem) -> Result<AntisymParams> {
    prob.expect(Functional::Tikhonov)?;
    prob.grad(q)
}

pub fn eval_mds(q: &AntisymParams, prob: &DescramblingProblem) -> Result<f64> {
    prob.expect(Functional::Mds)?;
    prob.eval(q)
}

pub fn grad_mds(q: &AntisymParams, prob: &DescramblingProblem) -> Result<AntisymParams> {
    prob.expect(Functional::Mds)?;
    prob.grad(q)
}

pub fn eval_mdns(q: &AntisymParams, prob: &DescramblingProblem) -> Result<f64> {
    prob.expect(Functional::Mdns)?;
    prob.eval(q)
}

pub fn grad_mdns(q: &AntisymParams, prob: &DescramblingProblem) -> Result<AntisymParams> {
    prob.expect(Functional::Mdns)?;
    prob.grad(q)
}
