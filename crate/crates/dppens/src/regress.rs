//! Ridgeless kernel regression on landmark subsets, full kernel ridge
//! regression, and equal-weight ensembles.
//!
//! A fitted predictor interpolates its landmark labels: the dual weights
//! solve `(K_CC + jitter I) beta = y_C`, and prediction at `x` is
//! `sum_j beta_j k(x, x_j)` over the landmarks. Averaging such predictors
//! over random subsets is what the verification oracles relate to ridge
//! regression on the full data.

use nalgebra::{DMatrix, DVector};

use crate::kernel::{GramMatrix, KernelSpec};
use crate::linalg::cholesky;
use crate::real::{is_finite, real, Real};
use crate::subset::Subset;
use crate::{Error, Result};

/// Minimum-norm interpolant over a landmark subset.
///
/// The empty subset yields the designated zero predictor, which is how
/// empty DPP draws contribute to ensemble and Monte Carlo averages.
#[derive(Debug, Clone)]
pub struct RidgelessPredictor<T: Real> {
    subset: Subset,
    dual_weights: DVector<T>,
    // one landmark per column, so coordinates stay contiguous
    landmarks: DMatrix<T>,
    kernel: KernelSpec<T>,
}

/// Fits the ridgeless regressor on `subset`: solves
/// `(K_CC + jitter I) beta = y_C` by symmetric factorization.
///
/// `points` holds one training point per row; `k` is their Gram matrix
/// under `spec`. `jitter = 0` is the oracle-grade exact solve.
pub fn fit_ridgeless<T: Real>(
    points: &DMatrix<T>,
    spec: &KernelSpec<T>,
    k: &GramMatrix<T>,
    y: &[T],
    subset: &Subset,
    jitter: T,
) -> Result<RidgelessPredictor<T>> {
    let n = k.n();
    if points.nrows() != n {
        return Err(Error::invalid(format!(
            "points ({} rows) and Gram matrix (n = {n}) disagree",
            points.nrows()
        )));
    }
    if y.len() != n {
        return Err(Error::invalid(format!(
            "labels (len {}) and Gram matrix (n = {n}) disagree",
            y.len()
        )));
    }
    if subset.ground() != n {
        return Err(Error::invalid("subset ground set does not match the data"));
    }
    if !(is_finite(jitter) && jitter >= T::zero()) {
        return Err(Error::invalid("jitter must be finite and non-negative"));
    }
    if y.iter().any(|v| !is_finite(*v)) {
        return Err(Error::NonFiniteInput { what: "labels" });
    }
    let d = points.ncols();
    if subset.is_empty() {
        return Ok(RidgelessPredictor {
            subset: subset.clone(),
            dual_weights: DVector::zeros(0),
            landmarks: DMatrix::zeros(d, 0),
            kernel: *spec,
        });
    }
    let idx = subset.indices();
    let mut kcc = k.principal_submatrix(idx);
    if jitter > T::zero() {
        for j in 0..idx.len() {
            kcc[(j, j)] += jitter;
        }
    }
    let factor = cholesky(&kcc)?;
    let y_c = DVector::from_fn(idx.len(), |i, _| y[idx[i]]);
    let dual_weights = factor.solve_vec(&y_c);
    let landmarks = DMatrix::from_fn(d, idx.len(), |r, j| points[(idx[j], r)]);
    Ok(RidgelessPredictor {
        subset: subset.clone(),
        dual_weights,
        landmarks,
        kernel: *spec,
    })
}

/// Kernel ridge regression on all of the data: solves `(K + alpha I) w = y`.
/// Identical to [`fit_ridgeless`] on the full index set with `jitter = alpha`.
pub fn fit_krr<T: Real>(
    points: &DMatrix<T>,
    spec: &KernelSpec<T>,
    k: &GramMatrix<T>,
    y: &[T],
    alpha: T,
) -> Result<RidgelessPredictor<T>> {
    if !(is_finite(alpha) && alpha > T::zero()) {
        return Err(Error::invalid("alpha must be positive and finite"));
    }
    let full = Subset::new((0..k.n()).collect(), k.n())?;
    fit_ridgeless(points, spec, k, y, &full, alpha)
}

impl<T: Real> RidgelessPredictor<T> {
    pub fn subset(&self) -> &Subset {
        &self.subset
    }

    pub fn dual_weights(&self) -> &DVector<T> {
        &self.dual_weights
    }

    pub fn kernel(&self) -> &KernelSpec<T> {
        &self.kernel
    }

    pub fn dim(&self) -> usize {
        self.landmarks.nrows()
    }

    pub fn is_zero(&self) -> bool {
        self.subset.is_empty()
    }

    /// `f(x) = sum_j beta_j k(x, landmark_j)`; the zero predictor returns 0.
    pub fn predict(&self, x: &[T]) -> T {
        assert_eq!(x.len(), self.dim(), "query dimension mismatch");
        let mut acc = T::zero();
        for j in 0..self.dual_weights.len() {
            let mut sq = T::zero();
            for (r, &xr) in x.iter().enumerate() {
                let diff = self.landmarks[(r, j)] - xr;
                sq += diff * diff;
            }
            acc += self.dual_weights[j] * self.kernel.eval_sq_dist(sq);
        }
        acc
    }

    /// Predictions for one query per row of `xs`.
    pub fn predict_batch(&self, xs: &DMatrix<T>) -> DVector<T> {
        assert_eq!(xs.ncols(), self.dim(), "query dimension mismatch");
        DVector::from_fn(xs.nrows(), |i, _| {
            let mut acc = T::zero();
            for j in 0..self.dual_weights.len() {
                let mut sq = T::zero();
                for r in 0..xs.ncols() {
                    let diff = self.landmarks[(r, j)] - xs[(i, r)];
                    sq += diff * diff;
                }
                acc += self.dual_weights[j] * self.kernel.eval_sq_dist(sq);
            }
            acc
        })
    }

    /// Prediction from precomputed kernel values at the landmarks, in
    /// subset order.
    pub fn predict_prekernel(&self, kx: &[T]) -> T {
        assert_eq!(kx.len(), self.subset.len(), "kernel row length mismatch");
        let mut acc = T::zero();
        for (j, &v) in kx.iter().enumerate() {
            acc += self.dual_weights[j] * v;
        }
        acc
    }

    /// Prediction from a full kernel column `k(x, x_i)` over all `n`
    /// training points; gathers the landmark entries.
    pub fn predict_kernel_column(&self, column: &[T]) -> T {
        assert_eq!(
            column.len(),
            self.subset.ground(),
            "kernel column length mismatch"
        );
        let mut acc = T::zero();
        for (j, &i) in self.subset.indices().iter().enumerate() {
            acc += self.dual_weights[j] * column[i];
        }
        acc
    }
}

/// Equal-weight average of ridgeless members, in member order.
#[derive(Debug, Clone)]
pub struct EnsemblePredictor<T: Real> {
    members: Vec<RidgelessPredictor<T>>,
}

impl<T: Real> EnsemblePredictor<T> {
    pub fn new(members: Vec<RidgelessPredictor<T>>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::invalid("ensemble requires at least one member"));
        }
        let d = members[0].dim();
        if members.iter().any(|m| m.dim() != d) {
            return Err(Error::invalid("ensemble members disagree on dimension"));
        }
        Ok(EnsemblePredictor { members })
    }

    pub fn members(&self) -> &[RidgelessPredictor<T>] {
        &self.members
    }

    pub fn m(&self) -> usize {
        self.members.len()
    }

    pub fn predict(&self, x: &[T]) -> T {
        let mut acc = T::zero();
        for member in &self.members {
            acc += member.predict(x);
        }
        acc / real::<T>(self.members.len() as f64)
    }

    pub fn predict_batch(&self, xs: &DMatrix<T>) -> DVector<T> {
        let mut acc = DVector::zeros(xs.nrows());
        for member in &self.members {
            acc += member.predict_batch(xs);
        }
        acc / real::<T>(self.members.len() as f64)
    }

    pub fn predict_kernel_column(&self, column: &[T]) -> T {
        let mut acc = T::zero();
        for member in &self.members {
            acc += member.predict_kernel_column(column);
        }
        acc / real::<T>(self.members.len() as f64)
    }
}
