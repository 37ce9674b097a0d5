//! Train/test stratification by ridge leverage score and the two ensemble
//! experiments: bulk/tail SMAPE of averaged ridgeless regressors, and
//! relative Frobenius error of averaged Nystrom approximations.
//!
//! Repeats run on the rayon pool; every subset draw is addressed by
//! `(master seed, tag, repeat, member)`, and per-repeat results are
//! collected in repeat order, so reports do not depend on the worker count.

use std::collections::BTreeSet;

use dppens::kernel::gram;
use dppens::{
    fit_ridgeless, nystrom, stream_rng, GramMatrix, KernelSpec, PreparedSampler, SamplerConfig,
    SamplerScheme, Spectrum,
};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::report::{ExperimentReport, MSummary, Quantiles, RepeatRecord, SCHEMA_VERSION};
use crate::{stream_tag, CliError, Result};

/// Largest n for which the harness will hold a dense kernel matrix.
pub const NYSTROM_CAP: usize = 5000;

/// A random train/test split with the test fold stratified into bulk
/// (leverage at or below the 70% quantile) and tail (above it).
#[derive(Debug, Clone)]
pub struct StratifiedSplit {
    pub train_idx: Vec<usize>,
    pub test_bulk_idx: Vec<usize>,
    pub test_tail_idx: Vec<usize>,
    /// The 70% linear-interpolation quantile of test-point leverage scores.
    pub rls_threshold: f64,
    /// Stratification ridge, `1e-4 * n_train`.
    pub alpha_strat: f64,
}

/// Train size and stratification ridge implied by `train_fraction`.
pub(crate) fn split_sizes(n: usize, train_fraction: f64) -> (usize, f64) {
    let n_train = (train_fraction * n as f64).floor() as usize;
    (n_train, 1e-4 * n_train as f64)
}

/// Symmetric eigendecomposition with trailing roundoff eigenvalues clamped
/// to zero.
///
/// Kernel Gram matrices are PSD by construction, but once n exceeds the
/// kernel's effective rank the smallest eigenvalues are pure roundoff and
/// can come out slightly negative. Sampling and leverage scores need PSD
/// only, so tiny negatives (within `1e-8 * lambda_max`) are clamped here,
/// explicitly; anything more negative is treated as a numerical failure.
pub fn clamped_spectrum(k: &GramMatrix<f64>) -> Result<Spectrum<f64>> {
    let eig = k.entries().clone().symmetric_eigen();
    let lambda_max = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    // The fold seeds with -inf and f64::max skips NaN, so the test is total.
    if lambda_max <= 0.0 {
        return Err(CliError::Numerical(
            "kernel matrix has no positive eigenvalue".into(),
        ));
    }
    let floor = -1e-8 * lambda_max;
    let lambda_min = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if lambda_min < floor {
        return Err(CliError::Numerical(format!(
            "kernel matrix is indefinite beyond roundoff: lambda_min = {lambda_min:.3e}"
        )));
    }
    let clamped = DVector::from_fn(eig.eigenvalues.len(), |i, _| eig.eigenvalues[i].max(0.0));
    Spectrum::from_parts(clamped, eig.eigenvectors).map_err(CliError::from)
}

/// Ridge level at which the spectrum's effective dimension
/// `sum_i lambda_i / (lambda_i + alpha)` equals `k`.
///
/// The effective dimension decreases strictly in alpha, from the count of
/// positive eigenvalues down to zero, so a solution exists exactly when k
/// is below the numerical rank. Found by geometric bisection; sqrt-based
/// midpoints keep the iteration exact in IEEE arithmetic, so the result is
/// reproducible across worker counts.
pub fn matched_alpha(spectrum: &Spectrum<f64>, k: usize) -> Result<f64> {
    let rank = spectrum.eigenvalues().iter().filter(|&&l| l > 0.0).count();
    if k == 0 || k >= rank {
        return Err(CliError::usage(format!(
            "no ridge matches effective dimension {k}: kernel numerical rank \
             is {rank}; pass --alpha explicitly"
        )));
    }
    let target = k as f64;
    let d_eff = |alpha: f64| spectrum.expected_dpp_size(alpha);
    let lambda_max = spectrum.lambda_max();
    // expand downward until the bracket straddles the target; each term of
    // d_eff(n * lambda_max) is at most 1/(n+1), so the upper end always sits
    // below any k >= 1
    let mut lo = lambda_max * 1e-12;
    let mut tries = 0;
    while d_eff(lo) <= target {
        lo *= 0.5;
        tries += 1;
        if tries > 4096 || lo == 0.0 {
            return Err(CliError::Numerical(
                "failed to bracket the effective-dimension ridge".into(),
            ));
        }
    }
    let mut hi = lambda_max * spectrum.n().max(2) as f64;
    for _ in 0..120 {
        let mid = lo.sqrt() * hi.sqrt();
        if d_eff(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo.sqrt() * hi.sqrt())
}

/// Sampler settings as requested on the command line; `alpha = None` means
/// no explicit ridge was given and a default should be filled in once the
/// kernel spectrum is known.
#[derive(Debug, Clone)]
pub struct SamplerRequest {
    pub scheme: SamplerScheme,
    /// Subset size; 0 for the free-size scheme.
    pub k: usize,
    pub alpha: Option<f64>,
    pub seed: u64,
}

impl SamplerRequest {
    /// Fills in the ridge. The leverage scheme defaults to the ridge whose
    /// effective dimension equals k, so score mass spreads over about k
    /// points. The free-size scheme has no target size to match, so it
    /// requires an explicit ridge. Schemes that ignore the ridge get a
    /// placeholder.
    pub fn resolve(&self, spectrum: Option<&Spectrum<f64>>) -> Result<SamplerConfig> {
        let alpha = match self.alpha {
            Some(a) => a,
            None => match self.scheme {
                SamplerScheme::Uniform | SamplerScheme::Kdpp => 1.0,
                SamplerScheme::Dpp => {
                    return Err(CliError::usage(
                        "scheme dpp needs --alpha: the ridge sets its expected subset size",
                    ))
                }
                SamplerScheme::Rls => {
                    let s = spectrum.expect("leverage sampling always carries a spectrum");
                    matched_alpha(s, self.k)?
                }
            },
        };
        Ok(SamplerConfig {
            scheme: self.scheme,
            k: self.k,
            alpha,
            seed: self.seed,
        })
    }
}

/// Linear-interpolation empirical quantile of an ascending-sorted slice.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty slice");
    assert!((0.0..=1.0).contains(&p), "quantile level out of range");
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn quantiles_over(values: &[f64]) -> Quantiles {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("metric values are finite"));
    Quantiles {
        q25: quantile(&sorted, 0.25),
        q50: quantile(&sorted, 0.50),
        q75: quantile(&sorted, 0.75),
    }
}

/// Symmetric mean absolute percentage error, in [0, 2]. A term with
/// `y_i = yhat_i = 0` contributes 0 (its limit value).
pub fn smape(y: &[f64], yhat: &[f64]) -> Result<f64> {
    if y.len() != yhat.len() {
        return Err(CliError::data(format!(
            "smape length mismatch: {} vs {}",
            y.len(),
            yhat.len()
        )));
    }
    if y.is_empty() {
        return Err(CliError::data("smape of empty vectors"));
    }
    let mut acc = 0.0;
    for (a, b) in y.iter().zip(yhat.iter()) {
        let denom = (a.abs() + b.abs()) / 2.0;
        if denom > 0.0 {
            acc += (a - b).abs() / denom;
        }
    }
    Ok(acc / y.len() as f64)
}

/// Randomly splits off `floor(train_fraction * n)` training rows, then
/// stratifies the test fold by full-data ridge leverage score under
/// `alpha = 1e-4 * n_train`: bulk holds test points at or below the 70%
/// quantile of test-point scores, tail those strictly above.
///
/// Features are standardized with training-fold statistics before the
/// kernel is formed; leverage scores are read from the diagonal of the
/// marginal kernel over all n points.
pub fn split_and_stratify(
    ds: &Dataset,
    spec: &KernelSpec<f64>,
    train_fraction: f64,
    seed: u64,
) -> Result<StratifiedSplit> {
    if !(train_fraction > 0.0 && train_fraction < 1.0 && train_fraction.is_finite()) {
        return Err(CliError::usage(format!(
            "train fraction must lie strictly between 0 and 1, got {train_fraction}"
        )));
    }
    let n = ds.n();
    let (n_train, alpha_strat) = split_sizes(n, train_fraction);
    if n_train == 0 || n_train >= n {
        return Err(CliError::data(format!(
            "degenerate split sizes: {n_train} train of {n} total"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut stream_rng(seed, &[stream_tag::SPLIT]));
    let mut train_idx = perm[..n_train].to_vec();
    let mut test_idx = perm[n_train..].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();

    let standardized = ds.standardized(&train_idx)?;
    let g = gram(standardized.features(), spec)?;
    let spectrum = clamped_spectrum(&g)?;
    let rls = spectrum.ridge_leverage_scores(alpha_strat)?;

    let mut test_rls: Vec<f64> = test_idx.iter().map(|&i| rls[i]).collect();
    test_rls.sort_by(|a, b| a.partial_cmp(b).expect("leverage scores are finite"));
    let rls_threshold = quantile(&test_rls, 0.7);

    // Ties at the threshold go to bulk. The comparison carries relative
    // slack so roundoff-level score spread (e.g. all points identical)
    // cannot fabricate a tail; genuine leverage gaps are many orders wider.
    let tie_slack = 1e-9 * rls_threshold.abs().max(f64::MIN_POSITIVE);
    let (test_tail_idx, test_bulk_idx): (Vec<usize>, Vec<usize>) = test_idx
        .into_iter()
        .partition(|&i| rls[i] > rls_threshold + tie_slack);

    Ok(StratifiedSplit {
        train_idx,
        test_bulk_idx,
        test_tail_idx,
        rls_threshold,
        alpha_strat,
    })
}

fn normalize_m_list(m_list: &[usize]) -> Result<Vec<usize>> {
    if m_list.is_empty() {
        return Err(CliError::usage("m list must be non-empty"));
    }
    if m_list.contains(&0) {
        return Err(CliError::usage("ensemble sizes must be at least 1"));
    }
    let mut sorted = m_list.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    Ok(sorted)
}

pub(crate) fn validate_sampler(
    sampler: &SamplerRequest,
    ground: usize,
    ground_name: &str,
) -> Result<()> {
    if sampler.scheme.fixed_size() && (sampler.k == 0 || sampler.k > ground) {
        return Err(CliError::usage(format!(
            "subset size k = {} out of range 1..={ground} ({ground_name})",
            sampler.k
        )));
    }
    Ok(())
}

/// One repeat's metrics at one checkpoint m.
struct RawPoint {
    m: usize,
    smape_bulk: Option<f64>,
    smape_tail: Option<f64>,
    frobenius_rel_error: Option<f64>,
    distinct: usize,
}

// Pure assembly of already-computed pieces; a parameter struct would only
// move the argument list to the call site.
#[allow(clippy::too_many_arguments)]
fn assemble_report(
    command: &str,
    sampler: &SamplerConfig,
    n: usize,
    repeats: usize,
    per_repeat: Vec<Vec<RawPoint>>,
    m_list: &[usize],
    split: Option<&StratifiedSplit>,
    epsilon: Option<f64>,
    jitter: Option<f64>,
) -> ExperimentReport {
    let scheme = sampler.scheme.as_str().to_string();
    let mut records = Vec::with_capacity(m_list.len() * repeats);
    let mut summaries = Vec::with_capacity(m_list.len());
    for (mi, &m) in m_list.iter().enumerate() {
        for (r, rep) in per_repeat.iter().enumerate() {
            let p = &rep[mi];
            debug_assert_eq!(p.m, m);
            records.push(RepeatRecord {
                scheme: scheme.clone(),
                k: sampler.k,
                m,
                repeat: r,
                smape_bulk: p.smape_bulk,
                smape_tail: p.smape_tail,
                frobenius_rel_error: p.frobenius_rel_error,
                distinct_landmarks: p.distinct,
            });
        }
        let gather = |f: &dyn Fn(&RawPoint) -> Option<f64>| -> Option<Quantiles> {
            let vals: Vec<f64> = per_repeat.iter().filter_map(|rep| f(&rep[mi])).collect();
            (!vals.is_empty()).then(|| quantiles_over(&vals))
        };
        summaries.push(MSummary {
            scheme: scheme.clone(),
            k: sampler.k,
            m,
            smape_bulk: gather(&|p| p.smape_bulk),
            smape_tail: gather(&|p| p.smape_tail),
            frobenius_rel_error: gather(&|p| p.frobenius_rel_error),
            distinct_landmarks: quantiles_over(
                &per_repeat
                    .iter()
                    .map(|rep| rep[mi].distinct as f64)
                    .collect::<Vec<_>>(),
            ),
        });
    }
    ExperimentReport {
        schema_version: SCHEMA_VERSION,
        command: command.to_string(),
        seed: sampler.seed,
        scheme,
        k: sampler.k,
        alpha: sampler.alpha,
        n,
        n_train: split.map(|s| s.train_idx.len()),
        n_test_bulk: split.map(|s| s.test_bulk_idx.len()),
        n_test_tail: split.map(|s| s.test_tail_idx.len()),
        rls_threshold: split.map(|s| s.rls_threshold),
        alpha_strat: split.map(|s| s.alpha_strat),
        epsilon,
        jitter,
        repeats,
        records,
        summaries,
    }
}

/// Ensemble ridgeless regression benchmark. For every repeat, draws
/// `max(m_list)` training subsets, fits ridgeless members, and evaluates
/// bulk and tail SMAPE of the running ensemble average at every checkpoint
/// in `m_list` (members are nested across checkpoints, so the m-curve reuses
/// all fits). Reports per-repeat records plus q25/q50/q75 over repeats.
pub fn run_ensemble_krr(
    ds: &Dataset,
    split: &StratifiedSplit,
    spec: &KernelSpec<f64>,
    sampler: SamplerRequest,
    m_list: &[usize],
    repeats: usize,
    jitter: f64,
) -> Result<ExperimentReport> {
    let m_list = normalize_m_list(m_list)?;
    if repeats == 0 {
        return Err(CliError::usage("repeats must be at least 1"));
    }
    if !(jitter.is_finite() && jitter >= 0.0) {
        return Err(CliError::usage("jitter must be finite and non-negative"));
    }
    let n_train = split.train_idx.len();
    validate_sampler(&sampler, n_train, "training fold")?;

    let standardized = ds.standardized(&split.train_idx)?;
    let train_x = standardized.rows(&split.train_idx);
    let train_y = ds.labels_at(&split.train_idx)?;
    let bulk_x = standardized.rows(&split.test_bulk_idx);
    let bulk_y = ds.labels_at(&split.test_bulk_idx)?;
    let tail_x = standardized.rows(&split.test_tail_idx);
    let tail_y = ds.labels_at(&split.test_tail_idx)?;
    if bulk_y.is_empty() {
        return Err(CliError::data("test bulk stratum is empty"));
    }

    let g = gram(&train_x, spec)?;
    let spectrum = if sampler.scheme.needs_spectrum() {
        Some(clamped_spectrum(&g)?)
    } else {
        None
    };
    let sampler = sampler.resolve(spectrum.as_ref())?;
    let prepared = PreparedSampler::prepare(&sampler, n_train, spectrum.as_ref())?;
    let max_m = *m_list.last().expect("m list is non-empty");

    let per_repeat: Vec<Vec<RawPoint>> = (0..repeats)
        .into_par_iter()
        .map(|r| -> Result<Vec<RawPoint>> {
            let mut bulk_sum = DVector::<f64>::zeros(bulk_x.nrows());
            let mut tail_sum = DVector::<f64>::zeros(tail_x.nrows());
            let mut distinct: BTreeSet<usize> = BTreeSet::new();
            let mut points = Vec::with_capacity(m_list.len());
            for i in 0..max_m {
                let subset = prepared.draw_stream(&[stream_tag::KRR, r as u64, i as u64])?;
                let member =
                    fit_ridgeless(&train_x, spec, &g, train_y.as_slice(), &subset, jitter)?;
                bulk_sum += member.predict_batch(&bulk_x);
                tail_sum += member.predict_batch(&tail_x);
                distinct.extend(subset.indices().iter().copied());
                let m = i + 1;
                if m_list.binary_search(&m).is_ok() {
                    let inv = 1.0 / m as f64;
                    let bulk_mean = bulk_sum.map(|v| v * inv);
                    let smape_bulk = Some(smape(bulk_y.as_slice(), bulk_mean.as_slice())?);
                    let smape_tail = if tail_y.is_empty() {
                        None
                    } else {
                        let tail_mean = tail_sum.map(|v| v * inv);
                        Some(smape(tail_y.as_slice(), tail_mean.as_slice())?)
                    };
                    points.push(RawPoint {
                        m,
                        smape_bulk,
                        smape_tail,
                        frobenius_rel_error: None,
                        distinct: distinct.len(),
                    });
                }
            }
            Ok(points)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(assemble_report(
        "krr-ensemble",
        &sampler,
        ds.n(),
        repeats,
        per_repeat,
        &m_list,
        Some(split),
        None,
        Some(jitter),
    ))
}

/// Ensemble Nystrom benchmark: relative Frobenius error of the averaged
/// approximation at every checkpoint in `m_list`, per repeat, with
/// quantiles over repeats. No train/test split; landmarks come from all n
/// points. An empty subset (possible under the free-size scheme)
/// contributes the zero matrix to the average.
pub fn run_ensemble_nystrom(
    ds: &Dataset,
    spec: &KernelSpec<f64>,
    sampler: SamplerRequest,
    m_list: &[usize],
    repeats: usize,
    epsilon: f64,
) -> Result<ExperimentReport> {
    let m_list = normalize_m_list(m_list)?;
    if repeats == 0 {
        return Err(CliError::usage("repeats must be at least 1"));
    }
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(CliError::usage("epsilon must be finite and non-negative"));
    }
    let n = ds.n();
    if n > NYSTROM_CAP {
        return Err(CliError::data(format!(
            "n = {n} exceeds the dense-kernel cap of {NYSTROM_CAP}; \
             rerun with --subsample {NYSTROM_CAP} or smaller"
        )));
    }
    validate_sampler(&sampler, n, "dataset")?;

    let all: Vec<usize> = (0..n).collect();
    let standardized = ds.standardized(&all)?;
    let g = gram(standardized.features(), spec)?;
    let spectrum = if sampler.scheme.needs_spectrum() {
        Some(clamped_spectrum(&g)?)
    } else {
        None
    };
    let sampler = sampler.resolve(spectrum.as_ref())?;
    let prepared = PreparedSampler::prepare(&sampler, n, spectrum.as_ref())?;
    let max_m = *m_list.last().expect("m list is non-empty");
    let k_norm_sq: f64 = g.entries().iter().map(|v| v * v).sum();

    let per_repeat: Vec<Vec<RawPoint>> = (0..repeats)
        .into_par_iter()
        .map(|r| -> Result<Vec<RawPoint>> {
            let mut sum = DMatrix::<f64>::zeros(n, n);
            let mut distinct: BTreeSet<usize> = BTreeSet::new();
            let mut points = Vec::with_capacity(m_list.len());
            for i in 0..max_m {
                let subset = prepared.draw_stream(&[stream_tag::NYSTROM, r as u64, i as u64])?;
                if !subset.is_empty() {
                    sum += nystrom(&g, &subset, epsilon)?.full_matrix();
                }
                distinct.extend(subset.indices().iter().copied());
                let m = i + 1;
                if m_list.binary_search(&m).is_ok() {
                    let inv = 1.0 / m as f64;
                    let mut num = 0.0;
                    for (approx, exact) in sum.iter().zip(g.entries().iter()) {
                        let diff = exact - approx * inv;
                        num += diff * diff;
                    }
                    points.push(RawPoint {
                        m,
                        smape_bulk: None,
                        smape_tail: None,
                        frobenius_rel_error: Some((num / k_norm_sq).sqrt()),
                        distinct: distinct.len(),
                    });
                }
            }
            Ok(points)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(assemble_report(
        "nystrom",
        &sampler,
        n,
        repeats,
        per_repeat,
        &m_list,
        None,
        Some(epsilon),
        None,
    ))
}
