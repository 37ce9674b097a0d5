//! Dense symmetric positive definite factorization.
//!
//! The factorization is written out rather than delegated so that a failure
//! reports the exact pivot at which positive definiteness broke down, which
//! callers surface as "add jitter or shrink the subset" guidance.

use nalgebra::{DMatrix, DVector};

use crate::real::Real;
use crate::{Error, Result};

/// Lower Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct CholeskyFactor<T: Real> {
    l: DMatrix<T>,
}

/// Factors `a = L L^T`. Fails with [`Error::Factorization`] carrying the
/// matrix size and the first pivot whose Schur complement is non-positive.
/// Only the lower triangle of `a` is read.
pub fn cholesky<T: Real>(a: &DMatrix<T>) -> Result<CholeskyFactor<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::invalid("cholesky requires a square matrix"));
    }
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for t in 0..j {
            d -= l[(j, t)] * l[(j, t)];
        }
        if !(crate::real::is_finite(d) && d > T::zero()) {
            return Err(Error::Factorization { size: n, pivot: j });
        }
        let dj = d.sqrt();
        l[(j, j)] = dj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for t in 0..j {
                s -= l[(i, t)] * l[(j, t)];
            }
            l[(i, j)] = s / dj;
        }
    }
    Ok(CholeskyFactor { l })
}

impl<T: Real> CholeskyFactor<T> {
    pub fn n(&self) -> usize {
        self.l.nrows()
    }

    pub fn l(&self) -> &DMatrix<T> {
        &self.l
    }

    /// Solves `L x = b` (forward substitution), column by column.
    pub fn forward_sub_mat(&self, b: &DMatrix<T>) -> DMatrix<T> {
        let n = self.n();
        assert_eq!(b.nrows(), n, "right-hand side height mismatch");
        let mut x = b.clone();
        for col in 0..x.ncols() {
            for i in 0..n {
                let mut s = x[(i, col)];
                for t in 0..i {
                    s -= self.l[(i, t)] * x[(t, col)];
                }
                x[(i, col)] = s / self.l[(i, i)];
            }
        }
        x
    }

    /// Solves `L^T x = b` (back substitution), column by column.
    pub fn backward_sub_mat(&self, b: &DMatrix<T>) -> DMatrix<T> {
        let n = self.n();
        assert_eq!(b.nrows(), n, "right-hand side height mismatch");
        let mut x = b.clone();
        for col in 0..x.ncols() {
            for i in (0..n).rev() {
                let mut s = x[(i, col)];
                for t in (i + 1)..n {
                    s -= self.l[(t, i)] * x[(t, col)];
                }
                x[(i, col)] = s / self.l[(i, i)];
            }
        }
        x
    }

    /// Solves `L L^T x = b`.
    pub fn solve_mat(&self, b: &DMatrix<T>) -> DMatrix<T> {
        self.backward_sub_mat(&self.forward_sub_mat(b))
    }

    pub fn solve_vec(&self, b: &DVector<T>) -> DVector<T> {
        let x = self.solve_mat(&DMatrix::from_column_slice(b.len(), 1, b.as_slice()));
        DVector::from_column_slice(x.as_slice())
    }
}
