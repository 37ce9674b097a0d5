//! Ground-truth verifiers for the subset-expectation identities.
//!
//! Every check computes the same quantity along at least two routes that
//! share no numerical machinery: exhaustive enumeration of the subset law
//! (LU determinants), characteristic-polynomial coefficients, spectral
//! closed forms built from the scaled elementary-symmetric tables, and
//! Monte Carlo draws from the production samplers. A route disagreement
//! is reported, never averaged away.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::error::Error;
use crate::esym::ElemSymTable;
use crate::kernel::GramMatrix;
use crate::linalg::cholesky;
use crate::real::{is_finite, real, Real};
use crate::rng::stream_rng;
use crate::sampler::{PreparedSampler, SamplerConfig, SamplerScheme};
use crate::spectrum::{eigendecompose, Spectrum};
use crate::Result;

/// Ground-set cap for full-power-set enumeration (2^n subsets).
pub const DPP_ENUMERATION_CAP: usize = 12;

/// Ground-set cap for fixed-size enumeration (binomial(n, k) subsets).
pub const KDPP_ENUMERATION_CAP: usize = 14;

/// Stream tag separating Monte Carlo verifier draws from every other
/// consumer of the master seed.
const MC_STREAM_TAG: u64 = 0x6f72_6163_6c65;

/// How a report's left-hand side was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    Exhaustive,
    MonteCarlo,
}

/// Two-sided comparison of an expectation computed along independent routes.
#[derive(Debug, Clone)]
pub struct IdentityReport<T: Real> {
    pub lhs: DMatrix<T>,
    pub rhs: DMatrix<T>,
    pub abs_error: T,
    pub rel_error: T,
    pub method: OracleMethod,
    pub draws: Option<usize>,
}

impl<T: Real> IdentityReport<T> {
    /// Invariant: `rel_error` is the Frobenius gap over `max(‖rhs‖_F, 1e-30)`.
    pub fn new(
        lhs: DMatrix<T>,
        rhs: DMatrix<T>,
        method: OracleMethod,
        draws: Option<usize>,
    ) -> Self {
        let abs_error = (&lhs - &rhs).norm();
        let rel_error = abs_error / rhs.norm().max(real::<T>(1e-30));
        IdentityReport {
            lhs,
            rhs,
            abs_error,
            rel_error,
            method,
            draws,
        }
    }
}

/// One-sided scalar check that `value >= bound` is claimed.
#[derive(Debug, Clone, Copy)]
pub struct BoundReport<T: Real> {
    pub value: T,
    pub bound: T,
}

impl<T: Real> BoundReport<T> {
    /// Signed slack; negative means the claimed inequality is violated.
    pub fn gap(&self) -> T {
        self.value - self.bound
    }

    /// True when the inequality holds within `rel_slack` of the larger magnitude.
    pub fn holds(&self, rel_slack: T) -> bool {
        let scale = self.value.abs().max(self.bound.abs());
        self.value >= self.bound - rel_slack * scale
    }

    /// Two-sided relative gap, for asserting equality cases.
    pub fn rel_gap(&self) -> T {
        let scale = self.value.abs().max(self.bound.abs()).max(real::<T>(1e-30));
        (self.value - self.bound).abs() / scale
    }
}

/// Positive-semidefinite-gap report for the tail-regularized lower bound.
#[derive(Debug, Clone, Copy)]
pub struct Prop5Report<T: Real> {
    /// Tail mass used as the implicit ridge: the sum of the k-th through
    /// n-th eigenvalues (descending, 1-based).
    pub alpha: T,
    /// Smallest eigenvalue of (expectation - bound); the bound claims >= 0.
    pub lambda_min: T,
}

impl<T: Real> Prop5Report<T> {
    pub fn holds(&self, tol: T) -> bool {
        self.lambda_min >= -tol
    }
}

/// The rank-one expectation identity evaluated along three routes.
#[derive(Debug, Clone, Copy)]
pub struct Lemma2Report<T: Real> {
    /// Subset enumeration of E[u' C K_CC^-1 C' w].
    pub enumerated: T,
    /// Determinant route: (e_k(K) - e_k(K - w u')) / e_k(K).
    pub determinant_form: T,
    /// Contraction of the spectral expectation matrix between u and w.
    pub spectral_form: T,
}

impl<T: Real> Lemma2Report<T> {
    /// Largest pairwise disagreement relative to the largest magnitude.
    pub fn max_rel_error(&self) -> T {
        let scale = self
            .enumerated
            .abs()
            .max(self.determinant_form.abs())
            .max(self.spectral_form.abs())
            .max(real::<T>(1e-30));
        let d1 = (self.enumerated - self.determinant_form).abs();
        let d2 = (self.enumerated - self.spectral_form).abs();
        let d3 = (self.determinant_form - self.spectral_form).abs();
        d1.max(d2).max(d3) / scale
    }
}

/// Monte Carlo comparison of mean subset predictions against the ridge
/// reference, with per-point standard errors.
#[derive(Debug, Clone)]
pub struct McReport<T: Real> {
    pub mc_mean: DVector<T>,
    pub reference: DVector<T>,
    pub std_error: DVector<T>,
    pub max_abs_deviation: T,
    pub rel_error: T,
    pub draws: usize,
}

impl<T: Real> McReport<T> {
    pub fn method(&self) -> OracleMethod {
        OracleMethod::MonteCarlo
    }

    /// True when every point deviates by at most
    /// `max(se_multiplier * std_error, abs_floor)`.
    pub fn within_band(&self, se_multiplier: T, abs_floor: T) -> bool {
        (0..self.mc_mean.len()).all(|j| {
            let dev = (self.mc_mean[j] - self.reference[j]).abs();
            dev <= (se_multiplier * self.std_error[j]).max(abs_floor)
        })
    }
}

/// Draws a random positive-definite matrix with log-uniform spectrum in
/// [0.3, 3] and a Haar-ish orthogonal basis from the QR of a uniform matrix.
///
/// The mild condition number keeps enumeration-versus-closed-form checks
/// meaningful at 1e-9 relative tolerances.
pub fn random_pd<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> GramMatrix<T> {
    assert!(n > 0, "ground set must be non-empty");
    let raw = DMatrix::<T>::from_fn(n, n, |_, _| real::<T>(2.0 * rng.random::<f64>() - 1.0));
    let q = raw.qr().q();
    let (lo, hi) = ((0.3f64).ln(), (3.0f64).ln());
    let lambdas: Vec<T> = (0..n)
        .map(|_| real::<T>((lo + (hi - lo) * rng.random::<f64>()).exp()))
        .collect();
    let mut m = DMatrix::<T>::zeros(n, n);
    for (l, lam) in lambdas.iter().enumerate() {
        let v = q.column(l);
        for j in 0..n {
            for i in 0..=j {
                m[(i, j)] += *lam * v[i] * v[j];
            }
        }
    }
    for j in 0..n {
        for i in 0..j {
            m[(j, i)] = m[(i, j)];
        }
    }
    GramMatrix::from_symmetric(m).expect("assembled symmetric by construction")
}

/// Elementary symmetric polynomials e_0..e_n of the eigenvalues of a general
/// square matrix, read off the characteristic polynomial.
///
/// The matrix is reduced to upper Hessenberg form, whose leading principal
/// characteristic polynomials obey a short recurrence; e_r is then (-1)^r
/// times the coefficient of t^(n-r) in det(tI - A). This works for
/// non-symmetric input, where the eigenvalue-product definition would need
/// complex arithmetic.
pub fn char_poly_esyms<T: Real>(a: &DMatrix<T>) -> Result<Vec<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::invalid(
            "characteristic polynomial needs a square matrix",
        ));
    }
    for j in 0..n {
        for i in 0..n {
            if !is_finite(a[(i, j)]) {
                return Err(Error::NonFiniteInput {
                    what: "matrix entries",
                });
            }
        }
    }
    if n == 0 {
        return Ok(vec![T::one()]);
    }
    if n == 1 {
        return Ok(vec![T::one(), a[(0, 0)]]);
    }
    let h = a.clone().hessenberg().h();
    // polys[j] holds det(tI - H_j) for the leading j x j block, low degree first.
    let mut polys: Vec<Vec<T>> = Vec::with_capacity(n + 1);
    polys.push(vec![T::one()]);
    for j in 1..=n {
        let mut c = vec![T::zero(); j + 1];
        let hjj = h[(j - 1, j - 1)];
        for (d, &v) in polys[j - 1].iter().enumerate() {
            c[d + 1] += v;
            c[d] -= hjj * v;
        }
        // Expansion along the last column; prod accumulates the subdiagonal
        // product linking row i to the corner.
        let mut prod = T::one();
        for i in (1..j).rev() {
            prod *= h[(i, i - 1)];
            let coeff = h[(i - 1, j - 1)] * prod;
            for (d, &v) in polys[i - 1].iter().enumerate() {
                c[d] -= coeff * v;
            }
        }
        polys.push(c);
    }
    let cp = &polys[n];
    let mut es = Vec::with_capacity(n + 1);
    let mut sign = T::one();
    for r in 0..=n {
        es.push(sign * cp[n - r]);
        sign = -sign;
    }
    Ok(es)
}

fn mask_indices(mask: usize, n: usize) -> Vec<usize> {
    (0..n).filter(|i| (mask >> i) & 1 == 1).collect()
}

fn normalization_tol<T: Real>() -> T {
    let eps = T::default_epsilon().to_f64().unwrap_or(f64::EPSILON);
    real::<T>((1e4 * eps).max(1e-10))
}

/// Exact law of the size-varying determinantal measure with ridge `alpha`,
/// indexed by subset bitmask (bit i set means index i is in the subset).
///
/// Masses are normalized by det(I + K/alpha) and the enumerated total is
/// cross-checked against 1, so a failed normalization identity surfaces as
/// an error rather than a silently skewed law.
pub fn enumerate_dpp_law<T: Real>(k: &GramMatrix<T>, alpha: T) -> Result<Vec<T>> {
    let n = k.n();
    if n > DPP_ENUMERATION_CAP {
        return Err(Error::EnumerationTooLarge {
            n,
            cap: DPP_ENUMERATION_CAP,
        });
    }
    if !(is_finite(alpha) && alpha > T::zero()) {
        return Err(Error::invalid("alpha must be positive and finite"));
    }
    let l_mat = k.entries() * (T::one() / alpha);
    let z = (DMatrix::<T>::identity(n, n) + &l_mat).determinant();
    if !(is_finite(z) && z > T::zero()) {
        return Err(Error::invalid("normalization determinant is not positive"));
    }
    let mut law = Vec::with_capacity(1usize << n);
    law.push(T::one() / z);
    for mask in 1..(1usize << n) {
        let idx = mask_indices(mask, n);
        let det =
            DMatrix::from_fn(idx.len(), idx.len(), |i, j| l_mat[(idx[i], idx[j])]).determinant();
        law.push(det / z);
    }
    let total = law.iter().fold(T::zero(), |a, &b| a + b);
    if (total - T::one()).abs() > normalization_tol::<T>() {
        return Err(Error::invalid(format!(
            "enumerated subset masses sum to {}, expected 1",
            total.to_f64().unwrap_or(f64::NAN)
        )));
    }
    Ok(law)
}

/// Exhaustive check of the scatter-expectation identity
/// E[C K_CC^-1 C'] = (K + alpha I)^-1 over the full power set.
pub fn expect_dpp_exhaustive<T: Real>(k: &GramMatrix<T>, alpha: T) -> Result<IdentityReport<T>> {
    let law = enumerate_dpp_law(k, alpha)?;
    let n = k.n();
    let mut lhs = DMatrix::<T>::zeros(n, n);
    for (mask, &p) in law.iter().enumerate().skip(1) {
        let idx = mask_indices(mask, n);
        let sub = k.principal_submatrix(&idx);
        let inv = sub
            .try_inverse()
            .ok_or_else(|| Error::invalid("singular principal submatrix during enumeration"))?;
        for (a, &ia) in idx.iter().enumerate() {
            for (b, &ib) in idx.iter().enumerate() {
                lhs[(ia, ib)] += p * inv[(a, b)];
            }
        }
    }
    let ridge = k.entries() + DMatrix::<T>::identity(n, n) * alpha;
    let rhs = ridge
        .try_inverse()
        .ok_or_else(|| Error::invalid("ridge matrix is singular"))?;
    Ok(IdentityReport::new(
        lhs,
        rhs,
        OracleMethod::Exhaustive,
        None,
    ))
}

/// Exact law of the fixed-size determinantal measure, indexed by bitmask;
/// masks whose popcount differs from `k` carry zero mass.
///
/// Masses are self-normalized by the enumerated total, which is
/// independently cross-checked against e_k from the characteristic
/// polynomial (the sum of size-k principal minors identity).
pub fn enumerate_kdpp_law<T: Real>(k: &GramMatrix<T>, kk: usize) -> Result<Vec<T>> {
    let n = k.n();
    if n > KDPP_ENUMERATION_CAP {
        return Err(Error::EnumerationTooLarge {
            n,
            cap: KDPP_ENUMERATION_CAP,
        });
    }
    if kk == 0 || kk > n {
        return Err(Error::invalid("subset size must satisfy 1 <= k <= n"));
    }
    let mut law = vec![T::zero(); 1usize << n];
    let mut total = T::zero();
    for (mask, slot) in law.iter_mut().enumerate() {
        if mask.count_ones() as usize != kk {
            continue;
        }
        let idx = mask_indices(mask, n);
        let det = k.principal_submatrix(&idx).determinant();
        *slot = det;
        total += det;
    }
    if !(is_finite(total) && total > T::zero()) {
        return Err(Error::invalid("enumerated size-k masses are not positive"));
    }
    let ek = char_poly_esyms(k.entries())?[kk];
    if ((total - ek) / ek).abs() > normalization_tol::<T>() {
        return Err(Error::invalid(format!(
            "size-k masses total {} but the characteristic polynomial gives {}",
            total.to_f64().unwrap_or(f64::NAN),
            ek.to_f64().unwrap_or(f64::NAN)
        )));
    }
    for slot in law.iter_mut() {
        *slot /= total;
    }
    Ok(law)
}

/// Spectral closed form of the fixed-size scatter expectation:
/// sum_l v_l v_l' / (lambda_l + e_k(hat lambda_l)/e_{k-1}(hat lambda_l)).
fn kdpp_spectral_expectation<T: Real>(spectrum: &Spectrum<T>, kk: usize) -> Result<DMatrix<T>> {
    let n = spectrum.n();
    let table = ElemSymTable::with_max_degree(spectrum.eigenvalues().as_slice(), kk)?;
    let mut rhs = DMatrix::<T>::zeros(n, n);
    for l in 0..n {
        let denom = spectrum.eigenvalues()[l] + table.loo_ratio(l, kk)?;
        if denom <= T::zero() || !is_finite(denom) {
            return Err(Error::invalid("spectral denominator is not positive"));
        }
        let wgt = T::one() / denom;
        let v = spectrum.eigenvectors().column(l);
        for j in 0..n {
            for i in 0..n {
                rhs[(i, j)] += wgt * v[i] * v[j];
            }
        }
    }
    Ok(rhs)
}

/// Exhaustive check of the fixed-size scatter expectation against its
/// spectral closed form.
pub fn expect_kdpp_exhaustive<T: Real>(k: &GramMatrix<T>, kk: usize) -> Result<IdentityReport<T>> {
    let law = enumerate_kdpp_law(k, kk)?;
    let n = k.n();
    let mut lhs = DMatrix::<T>::zeros(n, n);
    for (mask, &p) in law.iter().enumerate() {
        if mask.count_ones() as usize != kk {
            continue;
        }
        let idx = mask_indices(mask, n);
        let inv = k
            .principal_submatrix(&idx)
            .try_inverse()
            .ok_or_else(|| Error::invalid("singular principal submatrix during enumeration"))?;
        for (a, &ia) in idx.iter().enumerate() {
            for (b, &ib) in idx.iter().enumerate() {
                lhs[(ia, ib)] += p * inv[(a, b)];
            }
        }
    }
    let spectrum = eigendecompose(k, T::zero())?;
    let rhs = kdpp_spectral_expectation(&spectrum, kk)?;
    Ok(IdentityReport::new(
        lhs,
        rhs,
        OracleMethod::Exhaustive,
        None,
    ))
}

/// Verifies the rank-one contraction identity along three routes:
/// subset enumeration, the determinant ratio
/// (e_k(K) - e_k(K - w u'))/e_k(K), and the spectral expectation matrix
/// contracted between `u` and `w`.
pub fn lemma2_check<T: Real>(
    k: &GramMatrix<T>,
    kk: usize,
    u: &DVector<T>,
    w: &DVector<T>,
) -> Result<Lemma2Report<T>> {
    let n = k.n();
    if u.len() != n || w.len() != n {
        return Err(Error::invalid("vectors must match the ground-set size"));
    }
    for i in 0..n {
        if !(is_finite(u[i]) && is_finite(w[i])) {
            return Err(Error::NonFiniteInput {
                what: "contraction vectors",
            });
        }
    }
    let base = expect_kdpp_exhaustive(k, kk)?;
    let enumerated = (u.transpose() * &base.lhs * w)[(0, 0)];
    let spectral_form = (u.transpose() * &base.rhs * w)[(0, 0)];
    let ek = char_poly_esyms(k.entries())?[kk];
    if ek == T::zero() {
        return Err(Error::invalid("e_k of the kernel vanishes"));
    }
    let updated = k.entries() - w * u.transpose();
    let ek_updated = char_poly_esyms(&updated)?[kk];
    let determinant_form = (ek - ek_updated) / ek;
    Ok(Lemma2Report {
        enumerated,
        determinant_form,
        spectral_form,
    })
}

/// Checks the tail-regularized lower bound: the enumerated scatter
/// expectation dominates sum_l v_l v_l'/(lambda_l + alpha) in the PSD order,
/// where alpha is the eigenvalue tail sum starting at the k-th largest.
pub fn prop5_bound_check<T: Real>(k: &GramMatrix<T>, kk: usize) -> Result<Prop5Report<T>> {
    let base = expect_kdpp_exhaustive(k, kk)?;
    let spectrum = eigendecompose(k, T::zero())?;
    let n = k.n();
    let lam = spectrum.eigenvalues();
    let mut alpha = T::zero();
    for i in (kk - 1)..n {
        alpha += lam[i];
    }
    let mut bound = DMatrix::<T>::zeros(n, n);
    for l in 0..n {
        let wgt = T::one() / (lam[l] + alpha);
        let v = spectrum.eigenvectors().column(l);
        for j in 0..n {
            for i in 0..n {
                bound[(i, j)] += wgt * v[i] * v[j];
            }
        }
    }
    let gap = &base.lhs - &bound;
    // Symmetrize so enumeration roundoff cannot leak asymmetry into the
    // symmetric eigensolver.
    let sym = (&gap + gap.transpose()) * real::<T>(0.5);
    let eig = sym.symmetric_eigen();
    let mut lambda_min = eig.eigenvalues[0];
    for i in 1..n {
        if eig.eigenvalues[i] < lambda_min {
            lambda_min = eig.eigenvalues[i];
        }
    }
    Ok(Prop5Report { alpha, lambda_min })
}

/// Scalar tail bound on consecutive elementary-symmetric ratios:
/// for sorted sigma_1 >= ... >= sigma_n >= 0 and degrees k >= l >= 1,
/// e_{k+1}(sigma)/e_k(sigma) <= (sum_{i=l+1}^n sigma_i) / (k - l + 1).
pub fn lemma6_check<T: Real>(sigma: &[T], k: usize, l: usize) -> Result<BoundReport<T>> {
    let n = sigma.len();
    if n == 0 {
        return Err(Error::invalid("sigma must be non-empty"));
    }
    if l == 0 || l > k {
        return Err(Error::invalid("degrees must satisfy 1 <= l <= k"));
    }
    for (i, &s) in sigma.iter().enumerate() {
        if !(is_finite(s) && s >= T::zero()) {
            return Err(Error::invalid(
                "sigma entries must be non-negative and finite",
            ));
        }
        if i > 0 && s > sigma[i - 1] {
            return Err(Error::invalid("sigma must be sorted descending"));
        }
    }
    let bound = if k >= n {
        // e_{k+1} vanishes beyond the vector length.
        T::zero()
    } else {
        let table = ElemSymTable::with_max_degree(sigma, k + 1)?;
        if table.e(k).is_zero() {
            T::zero()
        } else {
            table.e(k + 1).ratio(&table.e(k))
        }
    };
    let tail = sigma[l..].iter().fold(T::zero(), |a, &b| a + b);
    let value = tail / real::<T>((k - l + 1) as f64);
    Ok(BoundReport { value, bound })
}

/// Pessimistic floor on the drop-smallest elementary-symmetric ratio:
/// e_k(hat lambda_n)/e_{k-1}(hat lambda_n) >= ((n-k)/k) * lambda_{n-1} *
/// (lambda_{n-1}/lambda_1)^{k-1}, with equality on constant spectra.
pub fn remark_bound_check<T: Real>(spectrum: &Spectrum<T>, k: usize) -> Result<BoundReport<T>> {
    let n = spectrum.n();
    if n < 2 {
        return Err(Error::invalid("need at least two eigenvalues"));
    }
    if k == 0 || k > n - 1 {
        return Err(Error::invalid("degree must satisfy 1 <= k <= n-1"));
    }
    let lam = spectrum.eigenvalues();
    for i in 0..n {
        if !(is_finite(lam[i]) && lam[i] >= T::zero()) {
            return Err(Error::invalid(
                "eigenvalues must be non-negative and finite",
            ));
        }
    }
    // The loop above rules out NaN, so the positive form is exhaustive.
    let head = lam[0];
    if head <= T::zero() {
        return Err(Error::invalid("largest eigenvalue must be positive"));
    }
    // Drop the smallest eigenvalue (last in descending order).
    let hat: Vec<T> = lam.iter().take(n - 1).copied().collect();
    let table = ElemSymTable::with_max_degree(&hat, k)?;
    let value = if table.e(k).is_zero() {
        T::zero()
    } else {
        table.e(k).ratio(&table.e(k - 1))
    };
    let second_smallest = lam[n - 2];
    let bound = real::<T>((n - k) as f64 / k as f64)
        * second_smallest
        * (second_smallest / head).powi((k - 1) as i32);
    Ok(BoundReport { value, bound })
}

struct Chunk {
    id: u64,
    draws: usize,
}

/// Monte Carlo draws per parallel chunk; checkpoints cut chunks short so
/// snapshots land on exact draw counts.
const MC_CHUNK: usize = 1000;

/// Runs [`expectation_mc`] once and snapshots the running estimate at each
/// checkpoint, reusing the same stream prefix so later checkpoints refine
/// earlier ones.
pub fn expectation_mc_curve<T: Real>(
    k: &GramMatrix<T>,
    y: &[T],
    config: &SamplerConfig,
    checkpoints: &[usize],
    test_columns: &DMatrix<T>,
) -> Result<Vec<McReport<T>>> {
    let n = k.n();
    if y.len() != n {
        return Err(Error::invalid("labels must match the ground-set size"));
    }
    if y.iter().any(|v| !is_finite(*v)) {
        return Err(Error::NonFiniteInput { what: "labels" });
    }
    if test_columns.nrows() != n || test_columns.ncols() == 0 {
        return Err(Error::invalid(
            "test kernel columns must be n x t with t >= 1",
        ));
    }
    if test_columns.iter().any(|v| !is_finite(*v)) {
        return Err(Error::NonFiniteInput {
            what: "test kernel columns",
        });
    }
    if config.scheme != SamplerScheme::Dpp {
        return Err(Error::invalid(
            "the mean-prediction identity is stated for the size-varying scheme",
        ));
    }
    if checkpoints.is_empty() {
        return Err(Error::invalid("at least one checkpoint is required"));
    }
    for (i, &c) in checkpoints.iter().enumerate() {
        if c == 0 || (i > 0 && c <= checkpoints[i - 1]) {
            return Err(Error::invalid(
                "checkpoints must be strictly increasing and positive",
            ));
        }
    }

    let spectrum = eigendecompose(k, T::zero())?;
    let sampler = PreparedSampler::prepare(config, n, Some(&spectrum))?;
    let alpha = real::<T>(config.alpha);

    // Reference route: dense LU ridge solve, sharing nothing with the
    // per-draw Cholesky path.
    let ridge = k.entries() + DMatrix::<T>::identity(n, n) * alpha;
    let weights = ridge
        .lu()
        .solve(&DVector::from_column_slice(y))
        .ok_or_else(|| Error::invalid("ridge system is singular"))?;
    let t = test_columns.ncols();
    let reference = DVector::<T>::from_fn(t, |j, _| test_columns.column(j).dot(&weights));

    let mut chunks = Vec::new();
    let mut placed = 0usize;
    let mut id = 0u64;
    for &c in checkpoints {
        while placed < c {
            let len = MC_CHUNK.min(c - placed);
            chunks.push(Chunk { id, draws: len });
            id += 1;
            placed += len;
        }
    }

    let partials = chunks
        .par_iter()
        .map(|chunk| -> Result<(DVector<T>, DVector<T>)> {
            let mut rng = stream_rng(config.seed, &[MC_STREAM_TAG, chunk.id]);
            let mut sum = DVector::<T>::zeros(t);
            let mut sumsq = DVector::<T>::zeros(t);
            for _ in 0..chunk.draws {
                let subset = sampler.draw(&mut rng)?;
                if subset.is_empty() {
                    // The empty subset predicts zero everywhere but still
                    // counts as a draw.
                    continue;
                }
                let idx = subset.indices();
                let factor = cholesky(&k.principal_submatrix(idx))?;
                let y_sub = DVector::<T>::from_fn(idx.len(), |a, _| y[idx[a]]);
                let beta = factor.solve_vec(&y_sub);
                for j in 0..t {
                    let mut pred = T::zero();
                    for (a, &ia) in idx.iter().enumerate() {
                        pred += beta[a] * test_columns[(ia, j)];
                    }
                    sum[j] += pred;
                    sumsq[j] += pred * pred;
                }
            }
            Ok((sum, sumsq))
        })
        .collect::<Result<Vec<_>>>()?;

    // Ordered reduction: totals are independent of how chunks were scheduled.
    let mut reports = Vec::with_capacity(checkpoints.len());
    let mut acc_sum = DVector::<T>::zeros(t);
    let mut acc_sq = DVector::<T>::zeros(t);
    let mut done = 0usize;
    let mut cursor = 0usize;
    for (chunk, (sum, sumsq)) in chunks.iter().zip(partials) {
        acc_sum += sum;
        acc_sq += sumsq;
        done += chunk.draws;
        if done == checkpoints[cursor] {
            reports.push(mc_snapshot(&acc_sum, &acc_sq, done, &reference));
            cursor += 1;
        }
    }
    debug_assert_eq!(cursor, checkpoints.len());
    Ok(reports)
}

fn mc_snapshot<T: Real>(
    sum: &DVector<T>,
    sumsq: &DVector<T>,
    draws: usize,
    reference: &DVector<T>,
) -> McReport<T> {
    let t = sum.len();
    let m = real::<T>(draws as f64);
    let mc_mean = sum / m;
    let std_error = DVector::<T>::from_fn(t, |j, _| {
        if draws < 2 {
            T::zero()
        } else {
            let centered = (sumsq[j] - sum[j] * sum[j] / m).max(T::zero());
            (centered / (m - T::one()) / m).sqrt()
        }
    });
    let diff = &mc_mean - reference;
    let mut max_abs_deviation = T::zero();
    for j in 0..t {
        max_abs_deviation = max_abs_deviation.max(diff[j].abs());
    }
    let rel_error = diff.norm() / reference.norm().max(real::<T>(1e-30));
    McReport {
        mc_mean,
        reference: reference.clone(),
        std_error,
        max_abs_deviation,
        rel_error,
        draws,
    }
}

/// Monte Carlo check of the mean-prediction identity: the average ridgeless
/// prediction over subsets drawn from the size-varying scheme converges to
/// the ridge regression prediction with ridge `config.alpha`.
///
/// `test_columns` holds one kernel column per test point (entry (i, j) is
/// the kernel between training point i and test point j).
pub fn expectation_mc<T: Real>(
    k: &GramMatrix<T>,
    y: &[T],
    config: &SamplerConfig,
    draws: usize,
    test_columns: &DMatrix<T>,
) -> Result<McReport<T>> {
    if draws == 0 {
        return Err(Error::invalid("draws must be at least 1"));
    }
    let mut reports = expectation_mc_curve(k, y, config, &[draws], test_columns)?;
    Ok(reports.pop().expect("one checkpoint yields one report"))
}
