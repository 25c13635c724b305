//! Dense factorizations: LU with partial pivoting, Cholesky, and one-sided
//! Jacobi SVD.

use alloc::vec;
use alloc::vec::Vec;


#[allow(unused_imports)]
use num_traits::Float;
use crate::error::{shape_err, Error, Result};
use crate::matrix::DenseMatrix;

/// LU factorization `PA = LU` of a square matrix, packed in one buffer.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    swaps: usize,
    min_pivot: f64,
}

impl Lu {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(shape_err!("LU needs a square matrix, got {:?}", a.shape()));
        }
        let n = a.rows();
        let mut lu = a.as_slice().to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut swaps = 0;
        let mut min_pivot = f64::INFINITY;
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            min_pivot = min_pivot.min(pmax);
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                swaps += 1;
            }
            let pivot = lu[k * n + k];
            if pivot == 0.0 {
                continue;
            }
            for i in k + 1..n {
                let f = lu[i * n + k] / pivot;
                lu[i * n + k] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu[i * n + j] -= f * lu[k * n + j];
                    }
                }
            }
        }
        Ok(Self { n, lu, perm, swaps, min_pivot })
    }

    /// Smallest pivot magnitude encountered.
    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    pub fn det(&self) -> f64 {
        let d: f64 = (0..self.n).map(|i| self.lu[i * self.n + i]).product();
        if self.swaps % 2 == 0 {
            d
        } else {
            -d
        }
    }

    /// Sign of the determinant from pivot signs and permutation parity;
    /// zero when any pivot magnitude falls below `tiny`.
    pub fn det_sign(&self, tiny: f64) -> i8 {
        let mut sign: i8 = if self.swaps % 2 == 0 { 1 } else { -1 };
        for i in 0..self.n {
            let d = self.lu[i * self.n + i];
            if d.abs() < tiny {
                return 0;
            }
            if d < 0.0 {
                sign = -sign;
            }
        }
        sign
    }

    fn check_rhs(&self, b: &DenseMatrix) -> Result<()> {
        if b.rows() != self.n {
            return Err(shape_err!("rhs has {} rows, system is {}x{}", b.rows(), self.n, self.n));
        }
        if self.min_pivot == 0.0 {
            return Err(Error::Singular);
        }
        Ok(())
    }

    /// Solves `A X = B`.
    pub fn solve(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_rhs(b)?;
        let (n, m) = (self.n, b.cols());
        let mut x = DenseMatrix::from_fn(n, m, |i, j| b.get(self.perm[i], j));
        let xs = x.data_mut();
        // forward substitution with unit lower triangle
        for i in 0..n {
            for k in 0..i {
                let l = self.lu[i * n + k];
                if l != 0.0 {
                    for j in 0..m {
                        xs[i * m + j] -= l * xs[k * m + j];
                    }
                }
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                let u = self.lu[i * n + k];
                if u != 0.0 {
                    for j in 0..m {
                        xs[i * m + j] -= u * xs[k * m + j];
                    }
                }
            }
            let d = self.lu[i * n + i];
            for j in 0..m {
                xs[i * m + j] /= d;
            }
        }
        Ok(x)
    }

    /// Solves `Aᵀ X = B`.
    pub fn solve_transpose(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_rhs(b)?;
        let (n, m) = (self.n, b.cols());
        // Aᵀ = Uᵀ Lᵀ P, so solve Uᵀ z = b, Lᵀ w = z, x = Pᵀ w.
        let mut w = b.as_slice().to_vec();
        for i in 0..n {
            for k in 0..i {
                let u = self.lu[k * n + i];
                if u != 0.0 {
                    for j in 0..m {
                        w[i * m + j] -= u * w[k * m + j];
                    }
                }
            }
            let d = self.lu[i * n + i];
            for j in 0..m {
                w[i * m + j] /= d;
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                let l = self.lu[k * n + i];
                if l != 0.0 {
                    for j in 0..m {
                        w[i * m + j] -= l * w[k * m + j];
                    }
                }
            }
        }
        let mut x = vec![0.0; n * m];
        for i in 0..n {
            let dst = self.perm[i];
            x[dst * m..(dst + 1) * m].copy_from_slice(&w[i * m..(i + 1) * m]);
        }
        Ok(DenseMatrix::from_raw(n, m, x))
    }
}

/// Solves the symmetric positive definite system `A X = B` by Cholesky.
pub fn cholesky_solve(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if !a.is_square() || a.rows() != b.rows() {
        return Err(shape_err!("cholesky: {:?} with rhs {:?}", a.shape(), b.shape()));
    }
    let n = a.rows();
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if d <= 0.0 {
            return Err(Error::Singular);
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    let m = b.cols();
    let mut x = b.as_slice().to_vec();
    for i in 0..n {
        for k in 0..i {
            let lik = l[i * n + k];
            for j in 0..m {
                x[i * m + j] -= lik * x[k * m + j];
            }
        }
        for j in 0..m {
            x[i * m + j] /= l[i * n + i];
        }
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            let lki = l[k * n + i];
            for j in 0..m {
                x[i * m + j] -= lki * x[k * m + j];
            }
        }
        for j in 0..m {
            x[i * m + j] /= l[i * n + i];
        }
    }
    Ok(DenseMatrix::from_raw(n, m, x))
}

/// Thin SVD `W = U·diag(S)·Vᵀ` with `k = min(rows, cols)` components.
#[derive(Debug, Clone)]
pub struct Svd {
    /// `rows × k`, orthonormal columns.
    pub u: DenseMatrix,
    /// Descending, non-negative.
    pub s: Vec<f64>,
    /// `cols × k`, orthonormal columns.
    pub v: DenseMatrix,
}

impl Svd {
    /// One-sided Jacobi SVD. Each column of `V` is sign-fixed so that its
    /// largest-magnitude entry is positive.
    pub fn new(w: &DenseMatrix) -> Self {
        if w.rows() < w.cols() {
            let t = Self::new(&w.transpose());
            let mut out = Self { u: t.v, s: t.s, v: t.u };
            out.fix_signs();
            return out;
        }
        let (m, n) = w.shape();
        // columns of W stored contiguously
        let mut a: Vec<Vec<f64>> = (0..n).map(|j| w.col(j)).collect();
        let mut v: Vec<Vec<f64>> =
            (0..n).map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        let eps = f64::EPSILON;
        for _sweep in 0..80 {
            let mut rotated = false;
            for p in 0..n {
                for q in p + 1..n {
                    let alpha = dot(&a[p], &a[p]);
                    let beta = dot(&a[q], &a[q]);
                    let gamma = dot(&a[p], &a[q]);
                    if gamma == 0.0 || gamma.abs() <= eps * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (2.0 * gamma);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    rotate(&mut a, p, q, c, s);
                    rotate(&mut v, p, q, c, s);
                }
            }
            if !rotated {
                break;
            }
        }
        let mut order: Vec<(usize, f64)> = a.iter().map(|c| dot(c, c).sqrt()).enumerate().collect();
        order.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
        let smax = order.first().map_or(0.0, |o| o.1);
        let mut ucols: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut vcols: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut s = Vec::with_capacity(n);
        let mut pending = Vec::new();
        for &(j, sigma) in &order {
            vcols.push(v[j].clone());
            s.push(sigma);
            if sigma > 0.0 && sigma > smax * f64::EPSILON {
                ucols.push(a[j].iter().map(|x| x / sigma).collect());
            } else {
                pending.push(ucols.len());
                ucols.push(vec![0.0; m]);
            }
        }
        complete_orthonormal(&mut ucols, &pending);
        let mut out = Self {
            u: DenseMatrix::from_columns(&ucols).expect("finite svd factors"),
            s,
            v: DenseMatrix::from_columns(&vcols).expect("finite svd factors"),
        };
        out.fix_signs();
        out
    }

    fn fix_signs(&mut self) {
        let k = self.s.len();
        for j in 0..k {
            let col = self.v.col(j);
            let big = col.iter().fold(0.0_f64, |b, &x| if x.abs() > b.abs() { x } else { b });
            if big < 0.0 {
                for i in 0..self.v.rows() {
                    let x = self.v.get(i, j);
                    self.v.set(i, j, -x);
                }
                for i in 0..self.u.rows() {
                    let x = self.u.get(i, j);
                    self.u.set(i, j, -x);
                }
            }
        }
    }

    /// `U·diag(S)·Vᵀ` restricted to the leading `rank` components.
    pub fn reconstruct(&self, rank: usize) -> DenseMatrix {
        let rank = rank.min(self.s.len());
        let (m, n) = (self.u.rows(), self.v.rows());
        let mut out = DenseMatrix::zeros(m, n);
        let data = out.data_mut();
        for k in 0..rank {
            let sk = self.s[k];
            for i in 0..m {
                let uik = self.u.get(i, k) * sk;
                if uik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    data[i * n + j] += uik * self.v.get(j, k);
                }
            }
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let (cp, cq) = (&mut lo[p], &mut hi[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Fills the columns listed in `pending` with unit vectors orthogonal to all
/// other columns (modified Gram–Schmidt over the standard basis).
fn complete_orthonormal(cols: &mut [Vec<f64>], pending: &[usize]) {
    let m = cols.first().map_or(0, Vec::len);
    let mut candidate = 0;
    for &slot in pending {
        while candidate < m {
            let mut e = vec![0.0; m];
            e[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for (j, c) in cols.iter().enumerate() {
                    if j == slot || (pending.contains(&j) && c.iter().all(|x| *x == 0.0)) {
                        continue;
                    }
                    let proj = dot(&e, c);
                    for (ei, ci) in e.iter_mut().zip(c) {
                        *ei -= proj * ci;
                    }
                }
            }
            let norm = dot(&e, &e).sqrt();
            if norm > 1e-8 {
                cols[slot] = e.iter().map(|x| x / norm).collect();
                break;
            }
        }
    }
}
