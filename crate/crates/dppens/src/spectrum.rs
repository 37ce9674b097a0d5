//! Symmetric eigendecomposition, marginal kernel and ridge leverage scores.

use nalgebra::{DMatrix, DVector};

use crate::kernel::GramMatrix;
use crate::real::{real, Real};
use crate::{Error, Result};

/// Eigendecomposition of a Gram matrix, eigenvalues sorted descending.
///
/// The decomposition is the one O(n^3) step of the pipeline; it is computed
/// once per dataset and shared read-only by samplers, regressors and
/// verifiers.
#[derive(Debug, Clone)]
pub struct Spectrum<T: Real> {
    eigenvalues: DVector<T>,
    eigenvectors: DMatrix<T>,
}

/// Default positive-definiteness gate, `1e-12 * lambda_max`.
pub fn default_pd_tolerance<T: Real>(lambda_max: T) -> T {
    real::<T>(1e-12) * lambda_max
}

/// Eigendecomposes `K` and validates strict positive definiteness.
///
/// Fails with [`Error::NotPositiveDefinite`] when the smallest eigenvalue is
/// at or below `pd_tolerance`; the caller may add diagonal jitter (see
/// [`GramMatrix::with_jitter`]) and retry. Jitter is never applied silently.
pub fn eigendecompose<T: Real>(k: &GramMatrix<T>, pd_tolerance: T) -> Result<Spectrum<T>> {
    let eig = k.entries().clone().symmetric_eigen();
    let n = k.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("eigenvalues are finite")
    });
    let eigenvalues = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]]);
    let eigenvectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    let lambda_min = eigenvalues[n - 1];
    if lambda_min <= pd_tolerance {
        return Err(Error::NotPositiveDefinite {
            lambda_min: lambda_min.to_f64().unwrap_or(f64::NAN),
            tolerance: pd_tolerance.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

impl<T: Real> Spectrum<T> {
    /// Builds a spectrum directly from eigenvalues and orthonormal
    /// eigenvectors. Sorts into descending order; trusts orthonormality.
    pub fn from_parts(eigenvalues: DVector<T>, eigenvectors: DMatrix<T>) -> Result<Self> {
        let n = eigenvalues.len();
        if eigenvectors.nrows() != n || eigenvectors.ncols() != n {
            return Err(Error::invalid("eigenvector matrix shape mismatch"));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            eigenvalues[b]
                .partial_cmp(&eigenvalues[a])
                .ok_or(())
                .expect("eigenvalues must not be NaN")
        });
        Ok(Spectrum {
            eigenvalues: DVector::from_fn(n, |i, _| eigenvalues[order[i]]),
            eigenvectors: DMatrix::from_fn(n, n, |i, j| eigenvectors[(i, order[j])]),
        })
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenvalues, descending.
    pub fn eigenvalues(&self) -> &DVector<T> {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors, one column per eigenvalue.
    pub fn eigenvectors(&self) -> &DMatrix<T> {
        &self.eigenvectors
    }

    pub fn lambda_max(&self) -> T {
        self.eigenvalues[0]
    }

    pub fn lambda_min(&self) -> T {
        self.eigenvalues[self.n() - 1]
    }

    /// Reassembles `sum_l lambda_l v_l v_l^T` (test and validation aid).
    pub fn reconstruct(&self) -> DMatrix<T> {
        let n = self.n();
        let mut scaled = self.eigenvectors.clone();
        for l in 0..n {
            let w = self.eigenvalues[l];
            for i in 0..n {
                scaled[(i, l)] *= w;
            }
        }
        &scaled * self.eigenvectors.transpose()
    }

    /// Marginal kernel `P = K (K + alpha I)^{-1}`, assembled spectrally as
    /// `sum_l (lambda_l / (lambda_l + alpha)) v_l v_l^T`.
    ///
    /// The upper triangle is computed and mirrored, so `P` is exactly
    /// symmetric; its eigenvalues lie in (0, 1).
    pub fn marginal_kernel(&self, alpha: T) -> Result<DMatrix<T>> {
        if alpha <= T::zero() {
            return Err(Error::invalid("alpha must be positive"));
        }
        let n = self.n();
        let weights: Vec<T> = (0..n)
            .map(|l| self.eigenvalues[l] / (self.eigenvalues[l] + alpha))
            .collect();
        let mut p = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut acc = T::zero();
                for (l, w) in weights.iter().enumerate() {
                    acc += *w * self.eigenvectors[(i, l)] * self.eigenvectors[(j, l)];
                }
                p[(i, j)] = acc;
                p[(j, i)] = acc;
            }
        }
        Ok(p)
    }

    /// Ridge leverage scores `l_i = P_ii`; only the diagonal is formed.
    pub fn ridge_leverage_scores(&self, alpha: T) -> Result<DVector<T>> {
        if alpha <= T::zero() {
            return Err(Error::invalid("alpha must be positive"));
        }
        let n = self.n();
        let weights: Vec<T> = (0..n)
            .map(|l| self.eigenvalues[l] / (self.eigenvalues[l] + alpha))
            .collect();
        Ok(DVector::from_fn(n, |i, _| {
            let mut acc = T::zero();
            for (l, w) in weights.iter().enumerate() {
                let v = self.eigenvectors[(i, l)];
                acc += *w * v * v;
            }
            acc
        }))
    }

    /// Expected DPP(K/alpha) subset size, `sum_l lambda_l / (lambda_l + alpha)`.
    pub fn expected_dpp_size(&self, alpha: T) -> T {
        let mut acc = T::zero();
        for l in 0..self.n() {
            acc += self.eigenvalues[l] / (self.eigenvalues[l] + alpha);
        }
        acc
    }
}
