//! Nystrom low-rank approximation and equal-weight ensembles of them.
//!
//! A single approximation is `K_hat = K_C (K_CC + eps I)^{-1} K_C^T`, held
//! as the cross block plus the Cholesky factor of the regularized core, so
//! the implied matrix is symmetric PSD by construction. Ensembles average
//! member approximations entrywise.

use nalgebra::DMatrix;

use crate::kernel::GramMatrix;
use crate::linalg::{cholesky, CholeskyFactor};
use crate::real::{is_finite, real, Real};
use crate::subset::Subset;
use crate::{Error, Result};

/// One Nystrom approximation, factored form.
#[derive(Debug, Clone)]
pub struct NystromApprox<T: Real> {
    subset: Subset,
    cross_block: DMatrix<T>,
    factor: CholeskyFactor<T>,
    epsilon: T,
}

/// Builds the approximation anchored at `subset`, regularizing the core
/// with `epsilon` on the diagonal.
pub fn nystrom<T: Real>(
    k: &GramMatrix<T>,
    subset: &Subset,
    epsilon: T,
) -> Result<NystromApprox<T>> {
    if subset.ground() != k.n() {
        return Err(Error::invalid(
            "subset ground set does not match the kernel",
        ));
    }
    if subset.is_empty() {
        return Err(Error::invalid(
            "Nystrom approximation needs at least one landmark",
        ));
    }
    if !(is_finite(epsilon) && epsilon >= T::zero()) {
        return Err(Error::invalid("epsilon must be finite and non-negative"));
    }
    let idx = subset.indices();
    let mut core = k.principal_submatrix(idx);
    if epsilon > T::zero() {
        for j in 0..idx.len() {
            core[(j, j)] += epsilon;
        }
    }
    let factor = cholesky(&core)?;
    Ok(NystromApprox {
        subset: subset.clone(),
        cross_block: k.columns_block(idx),
        factor,
        epsilon,
    })
}

impl<T: Real> NystromApprox<T> {
    pub fn subset(&self) -> &Subset {
        &self.subset
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn rank(&self) -> usize {
        self.subset.len()
    }

    // W = L^{-1} K_C^T, so that K_hat = W^T W.
    fn half_factor(&self) -> DMatrix<T> {
        self.factor.forward_sub_mat(&self.cross_block.transpose())
    }

    /// Materializes the full `n x n` approximation.
    pub fn full_matrix(&self) -> DMatrix<T> {
        let w = self.half_factor();
        w.tr_mul(&w)
    }

    /// Relative Frobenius error `|K - K_hat|_F / |K|_F`, computed one
    /// column at a time so memory stays at O(n * rank).
    pub fn frobenius_error(&self, k: &GramMatrix<T>) -> T {
        let w = self.half_factor();
        let n = k.n();
        let mut num = T::zero();
        let mut den = T::zero();
        for j in 0..n {
            let approx_col = w.tr_mul(&w.column(j));
            for i in 0..n {
                let kij = k.entries()[(i, j)];
                let diff = kij - approx_col[i];
                num += diff * diff;
                den += kij * kij;
            }
        }
        (num / den).sqrt()
    }
}

/// Running entrywise average of Nystrom approximations.
pub struct NystromAccumulator<T: Real> {
    sum: DMatrix<T>,
    count: usize,
}

impl<T: Real> NystromAccumulator<T> {
    pub fn new(n: usize) -> Self {
        NystromAccumulator {
            sum: DMatrix::zeros(n, n),
            count: 0,
        }
    }

    pub fn push(&mut self, approx: &NystromApprox<T>) {
        self.sum += approx.full_matrix();
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Current ensemble average `(1/m) sum of members`.
    pub fn mean(&self) -> Result<DMatrix<T>> {
        if self.count == 0 {
            return Err(Error::invalid("no members accumulated"));
        }
        Ok(&self.sum * (T::one() / real::<T>(self.count as f64)))
    }

    /// Relative Frobenius error of the current average against `k`.
    pub fn relative_error(&self, k: &GramMatrix<T>) -> Result<T> {
        if self.count == 0 {
            return Err(Error::invalid("no members accumulated"));
        }
        let inv_m = T::one() / real::<T>(self.count as f64);
        let n = k.n();
        let mut num = T::zero();
        let mut den = T::zero();
        for j in 0..n {
            for i in 0..n {
                let kij = k.entries()[(i, j)];
                let diff = kij - self.sum[(i, j)] * inv_m;
                num += diff * diff;
                den += kij * kij;
            }
        }
        Ok((num / den).sqrt())
    }
}

/// Equal-weight ensemble approximation over `subsets`.
pub fn ensemble_nystrom<T: Real>(
    k: &GramMatrix<T>,
    subsets: &[Subset],
    epsilon: T,
) -> Result<DMatrix<T>> {
    if subsets.is_empty() {
        return Err(Error::invalid("ensemble requires at least one subset"));
    }
    let mut acc = NystromAccumulator::new(k.n());
    for s in subsets {
        acc.push(&nystrom(k, s, epsilon)?);
    }
    acc.mean()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{gram, KernelSpec};
    use approx::assert_relative_eq;

    fn toy_kernel(n: usize) -> GramMatrix<f64> {
        let points = DMatrix::from_fn(n, 2, |i, j| (i as f64) * 0.7 + (j as f64) * 1.3);
        gram(&points, &KernelSpec::gaussian(2.0).unwrap()).unwrap()
    }

    #[test]
    fn full_subset_recovers_the_kernel() {
        let k = toy_kernel(5);
        let full = Subset::new((0..5).collect(), 5).unwrap();
        let approx = nystrom(&k, &full, 0.0).unwrap();
        assert!(approx.frobenius_error(&k) <= 1e-8);
        let m = approx.full_matrix();
        for i in 0..5 {
            for j in 0..5 {
                assert_relative_eq!(m[(i, j)], k.entries()[(i, j)], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn singleton_is_the_rank_one_formula() {
        let k = toy_kernel(4);
        let c = Subset::new(vec![1], 4).unwrap();
        let approx = nystrom(&k, &c, 0.0).unwrap();
        let m = approx.full_matrix();
        // unit diagonal: K_hat = K_{:,1} K_{1,:}
        for i in 0..4 {
            for j in 0..4 {
                let expect = k.entries()[(i, 1)] * k.entries()[(1, j)];
                assert_relative_eq!(m[(i, j)], expect, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn epsilon_shrinks_the_rank_one_formula() {
        let k = toy_kernel(3);
        let c = Subset::new(vec![0], 3).unwrap();
        let eps = 0.25;
        let m = nystrom(&k, &c, eps).unwrap().full_matrix();
        for i in 0..3 {
            for j in 0..3 {
                let expect = k.entries()[(i, 0)] * k.entries()[(0, j)] / (1.0 + eps);
                assert_relative_eq!(m[(i, j)], expect, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn residual_is_psd() {
        let k = toy_kernel(6);
        let c = Subset::new(vec![0, 2, 5], 6).unwrap();
        let residual = k.entries() - nystrom(&k, &c, 0.0).unwrap().full_matrix();
        let eig = residual.symmetric_eigen();
        for l in 0..6 {
            assert!(
                eig.eigenvalues[l] >= -1e-8,
                "residual eigenvalue {} below tolerance",
                eig.eigenvalues[l]
            );
        }
    }

    #[test]
    fn landmark_rows_are_exact() {
        let k = toy_kernel(6);
        let c = Subset::new(vec![1, 4], 6).unwrap();
        let m = nystrom(&k, &c, 0.0).unwrap().full_matrix();
        for &i in c.indices() {
            for j in 0..6 {
                assert_relative_eq!(m[(i, j)], k.entries()[(i, j)], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn ensemble_of_one_matches_single() {
        let k = toy_kernel(5);
        let c = Subset::new(vec![0, 3], 5).unwrap();
        let single = nystrom(&k, &c, 1e-12).unwrap().full_matrix();
        let ens = ensemble_nystrom(&k, std::slice::from_ref(&c), 1e-12).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_relative_eq!(ens[(i, j)], single[(i, j)], epsilon = 1e-14);
            }
        }
        let repeated = ensemble_nystrom(&k, &[c.clone(), c.clone(), c], 1e-12).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_relative_eq!(repeated[(i, j)], single[(i, j)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn accumulator_error_matches_direct_computation() {
        let k = toy_kernel(6);
        let a = Subset::new(vec![0, 2], 6).unwrap();
        let b = Subset::new(vec![1, 5], 6).unwrap();
        let mut acc = NystromAccumulator::new(6);
        acc.push(&nystrom(&k, &a, 0.0).unwrap());
        acc.push(&nystrom(&k, &b, 0.0).unwrap());
        let mean = acc.mean().unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..6 {
            for j in 0..6 {
                num += (k.entries()[(i, j)] - mean[(i, j)]).powi(2);
                den += k.entries()[(i, j)].powi(2);
            }
        }
        assert_relative_eq!(
            acc.relative_error(&k).unwrap(),
            (num / den).sqrt(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn single_error_matches_accumulator_of_one() {
        let k = toy_kernel(5);
        let c = Subset::new(vec![1, 3], 5).unwrap();
        let approx = nystrom(&k, &c, 0.0).unwrap();
        let mut acc = NystromAccumulator::new(5);
        acc.push(&approx);
        assert_relative_eq!(
            approx.frobenius_error(&k),
            acc.relative_error(&k).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn input_validation() {
        let k = toy_kernel(4);
        assert!(nystrom(&k, &Subset::empty(4), 0.0).is_err());
        assert!(nystrom(&k, &Subset::new(vec![0], 3).unwrap(), 0.0).is_err());
        assert!(nystrom(&k, &Subset::new(vec![0], 4).unwrap(), -0.1).is_err());
        assert!(ensemble_nystrom(&k, &[], 0.0).is_err());
    }

    #[test]
    fn singular_core_fails_without_epsilon() {
        // duplicate points, both as landmarks
        let points = DMatrix::from_row_slice(3, 1, &[0.0, 0.0, 1.0]);
        let k = gram(&points, &KernelSpec::gaussian(1.0).unwrap()).unwrap();
        let c = Subset::new(vec![0, 1], 3).unwrap();
        assert!(matches!(
            nystrom(&k, &c, 0.0),
            Err(Error::Factorization { .. })
        ));
        assert!(nystrom(&k, &c, 1e-6).is_ok());
    }
}
