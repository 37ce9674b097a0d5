//! Kernel evaluation and Gram-matrix assembly.

use nalgebra::{DMatrix, DVector};

use crate::real::{is_finite, real, Real};
use crate::{Error, Result};

/// Kernel family. Both are strictly positive definite with unit diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    /// `k(x, y) = exp(-||x - y||^2 / (2 sigma^2))`
    Gaussian,
    /// `k(x, y) = exp(-||x - y|| / sigma)`
    Laplace,
}

/// A kernel family together with its bandwidth `sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec<T: Real> {
    pub family: KernelFamily,
    pub bandwidth: T,
}

impl<T: Real> KernelSpec<T> {
    /// Builds a spec, rejecting non-positive or non-finite bandwidths.
    pub fn new(family: KernelFamily, bandwidth: T) -> Result<Self> {
        if !is_finite(bandwidth) || bandwidth <= T::zero() {
            return Err(Error::invalid(format!(
                "bandwidth must be positive and finite, got {:?}",
                bandwidth.to_f64()
            )));
        }
        Ok(KernelSpec { family, bandwidth })
    }

    pub fn gaussian(bandwidth: T) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, bandwidth)
    }

    pub fn laplace(bandwidth: T) -> Result<Self> {
        Self::new(KernelFamily::Laplace, bandwidth)
    }

    /// Kernel value from a squared Euclidean distance.
    #[inline]
    pub fn eval_sq_dist(&self, sq_dist: T) -> T {
        match self.family {
            KernelFamily::Gaussian => {
                (-sq_dist / (real::<T>(2.0) * self.bandwidth * self.bandwidth)).exp()
            }
            KernelFamily::Laplace => (-sq_dist.sqrt() / self.bandwidth).exp(),
        }
    }

    /// Kernel value between two points of equal dimension.
    #[inline]
    pub fn eval(&self, x: &[T], y: &[T]) -> T {
        debug_assert_eq!(x.len(), y.len());
        let mut sq = T::zero();
        for (&a, &b) in x.iter().zip(y.iter()) {
            let d = a - b;
            sq += d * d;
        }
        self.eval_sq_dist(sq)
    }
}

/// An `n x n` symmetric strictly positive-definite kernel matrix.
///
/// Assembly mirrors the upper triangle so `K = K^T` holds exactly, and the
/// diagonal is exactly one for the supported kernel families. Positive
/// definiteness is asserted later, by [`crate::spectrum::eigendecompose`].
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix<T: Real> {
    entries: DMatrix<T>,
}

impl<T: Real> GramMatrix<T> {
    /// Wraps an externally assembled symmetric matrix.
    ///
    /// Used by verifiers that work on synthetic PD matrices rather than
    /// kernels of actual data points; rejects asymmetric or non-finite input.
    pub fn from_symmetric(entries: DMatrix<T>) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() == 0 {
            return Err(Error::invalid("Gram matrix must be square and non-empty"));
        }
        for j in 0..entries.ncols() {
            for i in 0..=j {
                if !is_finite(entries[(i, j)]) {
                    return Err(Error::NonFiniteInput {
                        what: "gram matrix entries",
                    });
                }
                if entries[(i, j)] != entries[(j, i)] {
                    return Err(Error::invalid(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(GramMatrix { entries })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<T> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<T> {
        self.entries
    }

    /// Adds `jitter` to the diagonal, keeping symmetry exact.
    pub fn with_jitter(&self, jitter: T) -> GramMatrix<T> {
        let mut entries = self.entries.clone();
        for i in 0..entries.nrows() {
            entries[(i, i)] += jitter;
        }
        GramMatrix { entries }
    }

    /// Gathers the principal submatrix indexed by `indices`.
    pub fn principal_submatrix(&self, indices: &[usize]) -> DMatrix<T> {
        let k = indices.len();
        DMatrix::from_fn(k, k, |i, j| self.entries[(indices[i], indices[j])])
    }

    /// Gathers the `n x |indices|` block of columns indexed by `indices`.
    pub fn columns_block(&self, indices: &[usize]) -> DMatrix<T> {
        let n = self.n();
        DMatrix::from_fn(n, indices.len(), |i, j| self.entries[(i, indices[j])])
    }

    pub fn frobenius_norm(&self) -> T {
        self.entries.norm()
    }
}

/// Assembles the Gram matrix of `points` (one row per point).
///
/// Only the upper triangle is evaluated; the lower triangle is mirrored and
/// the diagonal pinned to one, so symmetry and unit diagonal hold exactly.
pub fn gram<T: Real>(points: &DMatrix<T>, spec: &KernelSpec<T>) -> Result<GramMatrix<T>> {
    let n = points.nrows();
    if n == 0 || points.ncols() == 0 {
        return Err(Error::invalid("need at least one point and one feature"));
    }
    if points.iter().any(|&x| !is_finite(x)) {
        return Err(Error::NonFiniteInput {
            what: "input features",
        });
    }
    let mut entries = DMatrix::zeros(n, n);
    for i in 0..n {
        entries[(i, i)] = T::one();
        for j in (i + 1)..n {
            let mut sq = T::zero();
            for c in 0..points.ncols() {
                let d = points[(i, c)] - points[(j, c)];
                sq += d * d;
            }
            let v = spec.eval_sq_dist(sq);
            entries[(i, j)] = v;
            entries[(j, i)] = v;
        }
    }
    Ok(GramMatrix { entries })
}

/// Cross-kernel block `[k(a_i, b_j)]` between the rows of `a` and of `b`.
pub fn cross_gram<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    spec: &KernelSpec<T>,
) -> Result<DMatrix<T>> {
    if a.ncols() != b.ncols() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {} features",
            a.ncols(),
            b.ncols()
        )));
    }
    if a.iter().chain(b.iter()).any(|&x| !is_finite(x)) {
        return Err(Error::NonFiniteInput {
            what: "input features",
        });
    }
    let mut out = DMatrix::zeros(a.nrows(), b.nrows());
    for i in 0..a.nrows() {
        for j in 0..b.nrows() {
            let mut sq = T::zero();
            for c in 0..a.ncols() {
                let d = a[(i, c)] - b[(j, c)];
                sq += d * d;
            }
            out[(i, j)] = spec.eval_sq_dist(sq);
        }
    }
    Ok(out)
}

/// Kernel vector `k_x = [k(x, p_1), ..., k(x, p_n)]` against the rows of `points`.
pub fn kernel_vector<T: Real>(
    points: &DMatrix<T>,
    x: &[T],
    spec: &KernelSpec<T>,
) -> Result<DVector<T>> {
    if x.len() != points.ncols() {
        return Err(Error::invalid(format!(
            "query point has {} features, expected {}",
            x.len(),
            points.ncols()
        )));
    }
    if x.iter().any(|&v| !is_finite(v)) {
        return Err(Error::NonFiniteInput {
            what: "query point",
        });
    }
    Ok(DVector::from_fn(points.nrows(), |i, _| {
        let mut sq = T::zero();
        for c in 0..points.ncols() {
            let d = points[(i, c)] - x[c];
            sq += d * d;
        }
        spec.eval_sq_dist(sq)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_point_gives_unit_matrix() {
        let pts = DMatrix::from_row_slice(1, 2, &[3.0, -1.0]);
        let k = gram(&pts, &KernelSpec::gaussian(2.0).unwrap()).unwrap();
        assert_eq!(k.n(), 1);
        assert_eq!(k.entries()[(0, 0)], 1.0);
    }

    #[test]
    fn identical_points_give_all_ones() {
        let pts = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
        let k = gram(&pts, &KernelSpec::laplace(0.5).unwrap()).unwrap();
        for v in k.entries().iter() {
            assert_eq!(*v, 1.0);
        }
    }

    #[test]
    fn gaussian_off_diagonal_hand_value() {
        // x1 = 0, x2 = 2, sigma = sqrt(2): exp(-4 / (2 * 2)) = exp(-1)
        let pts = DMatrix::from_row_slice(2, 1, &[0.0, 2.0]);
        let k = gram(&pts, &KernelSpec::gaussian(2.0_f64.sqrt()).unwrap()).unwrap();
        assert_relative_eq!(k.entries()[(0, 1)], (-1.0_f64).exp(), max_relative = 1e-15);
        assert_eq!(k.entries()[(0, 1)], k.entries()[(1, 0)]);
    }

    #[test]
    fn laplace_uses_euclidean_distance() {
        let pts = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 3.0, 4.0]);
        let k = gram(&pts, &KernelSpec::laplace(2.0).unwrap()).unwrap();
        assert_relative_eq!(k.entries()[(0, 1)], (-2.5_f64).exp(), max_relative = 1e-15);
    }

    #[test]
    fn non_finite_features_rejected() {
        let pts = DMatrix::from_row_slice(2, 1, &[0.0, f64::NAN]);
        let err = gram(&pts, &KernelSpec::gaussian(1.0).unwrap()).unwrap_err();
        assert!(matches!(err, Error::NonFiniteInput { .. }));
    }

    #[test]
    fn zero_bandwidth_rejected() {
        assert!(KernelSpec::gaussian(0.0).is_err());
        assert!(KernelSpec::laplace(-1.0).is_err());
        assert!(KernelSpec::gaussian(f64::INFINITY).is_err());
    }

    #[test]
    fn entries_are_within_unit_interval() {
        let pts = DMatrix::from_row_slice(3, 1, &[0.0, 0.7, 10.0]);
        let k = gram(&pts, &KernelSpec::gaussian(1.0).unwrap()).unwrap();
        for v in k.entries().iter() {
            assert!(*v > 0.0 && *v <= 1.0);
        }
    }

    #[test]
    fn asymmetric_input_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(GramMatrix::from_symmetric(m).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let pts = DMatrix::<f32>::from_row_slice(2, 1, &[0.0, 2.0]);
        let k = gram(&pts, &KernelSpec::gaussian(2.0_f32.sqrt()).unwrap()).unwrap();
        assert_relative_eq!(k.entries()[(0, 1)], (-1.0_f32).exp(), max_relative = 1e-6);
    }
}
