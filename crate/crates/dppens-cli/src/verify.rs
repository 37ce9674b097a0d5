//! Verification suites: each runs a battery of oracle checks against
//! closed-form identities and bounds, reports every check, and on failure
//! singles out the worst instance with enough state to replay it.
//!
//! Every check is normalized to the convention `value <= threshold`, so a
//! positive margin always means a violation.

use dppens::kernel::cross_gram;
use dppens::oracle::{
    enumerate_dpp_law, enumerate_kdpp_law, expect_dpp_exhaustive, expect_kdpp_exhaustive,
    expectation_mc_curve, lemma2_check, lemma6_check, prop5_bound_check, random_pd,
    remark_bound_check,
};
use dppens::{
    eigendecompose, gram, stream_rng, KernelSpec, PreparedSampler, SamplerConfig, SamplerScheme,
    Spectrum,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::report::SCHEMA_VERSION;
use crate::{stream_tag, CliError, Result};

const THM1_TOL: f64 = 1e-9;
const COR4_TOL: f64 = 1e-8;
const LEMMA2_TOL: f64 = 1e-8;
const PROP5_TOL: f64 = 1e-8;
const LEMMA6_SLACK: f64 = 1e-12;
const REMARK_SLACK: f64 = 1e-8;
const REMARK_EQ_TOL: f64 = 1e-10;
const MC_SE_MULT: f64 = 4.0;
const MC_MONOTONE_SLACK: f64 = 1.25;
const TV_TOL: f64 = 0.02;
const INCLUSION_SE_MULT: f64 = 3.0;
const INCLUSION_ABS: f64 = 1e-3;
const ALPHA_GRID: [f64; 3] = [0.01, 1.0, 100.0];
const LAW_CHUNK: usize = 1000;

/// Which battery of checks to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Thm1,
    Cor4,
    Lemma2,
    Prop5,
    Remark,
    Eq2Mc,
    SamplerLaws,
}

impl Suite {
    pub fn as_str(&self) -> &'static str {
        match self {
            Suite::Thm1 => "thm1",
            Suite::Cor4 => "cor4",
            Suite::Lemma2 => "lemma2",
            Suite::Prop5 => "prop5",
            Suite::Remark => "remark",
            Suite::Eq2Mc => "eq2-mc",
            Suite::SamplerLaws => "sampler-laws",
        }
    }

    /// Stream sub-tag, so suites never share random state.
    fn tag(&self) -> u64 {
        match self {
            Suite::Thm1 => 1,
            Suite::Cor4 => 2,
            Suite::Lemma2 => 3,
            Suite::Prop5 => 4,
            Suite::Remark => 5,
            Suite::Eq2Mc => 6,
            Suite::SamplerLaws => 7,
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "thm1" => Ok(Suite::Thm1),
            "cor4" => Ok(Suite::Cor4),
            "lemma2" => Ok(Suite::Lemma2),
            "prop5" => Ok(Suite::Prop5),
            "remark" => Ok(Suite::Remark),
            "eq2-mc" => Ok(Suite::Eq2Mc),
            "sampler-laws" => Ok(Suite::SamplerLaws),
            other => Err(CliError::usage(format!(
                "unknown verify suite {other:?} (expected thm1, cor4, lemma2, prop5, \
                 remark, eq2-mc, or sampler-laws)"
            ))),
        }
    }
}

/// Optional overrides for a suite's built-in grid.
#[derive(Debug, Clone)]
pub struct SuiteParams {
    /// Restricts the grid to one ground-set size.
    pub n: Option<usize>,
    /// Restricts the grid to one subset size.
    pub k: Option<usize>,
    /// Restricts the grid to one ridge value.
    pub alpha: Option<f64>,
    /// Random instances per grid cell.
    pub seeds: usize,
    /// Monte Carlo draws, where a suite samples.
    pub draws: Option<usize>,
    /// Random vectors or spectra for the scalar-bound suites.
    pub count: usize,
    /// Test points for the mean-prediction suite.
    pub test_points: usize,
}

impl Default for SuiteParams {
    fn default() -> Self {
        SuiteParams {
            n: None,
            k: None,
            alpha: None,
            seeds: 5,
            draws: None,
            count: 100,
            test_points: 10,
        }
    }
}

/// One check, in the `value <= threshold` convention.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub label: String,
    pub metric: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Replay state for the worst-failing check: the stream path reproduces the
/// instance's random input under `master_seed`, and the concrete inputs are
/// attached directly where they are small.
#[derive(Debug, Clone, Serialize)]
pub struct WorstInstance {
    pub label: String,
    pub metric: String,
    pub value: f64,
    pub threshold: f64,
    pub master_seed: u64,
    pub stream_path: Vec<u64>,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel_matrix: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyOutput {
    pub schema_version: u32,
    pub command: String,
    pub suite: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: usize,
    pub failures: usize,
    pub records: Vec<CheckRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_failure: Option<WorstInstance>,
}

pub fn verify_csv(out: &VerifyOutput) -> String {
    let mut s = String::from("label,metric,value,threshold,pass\n");
    for r in &out.records {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.label, r.metric, r.value, r.threshold, r.pass
        ));
    }
    s
}

/// A record plus the state needed to replay it if it turns out worst.
struct Check {
    record: CheckRecord,
    replay: WorstInstance,
}

impl Check {
    fn new(label: String, metric: &str, value: f64, threshold: f64, replay: WorstInstance) -> Self {
        let record = CheckRecord {
            label,
            metric: metric.to_string(),
            value,
            threshold,
            // NaN fails the comparison and infinities fail the finiteness check.
            pass: value <= threshold && value.is_finite(),
        };
        Check { record, replay }
    }
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn replay_stub(
    label: &str,
    metric: &str,
    value: f64,
    threshold: f64,
    master_seed: u64,
    stream_path: Vec<u64>,
    n: usize,
) -> WorstInstance {
    WorstInstance {
        label: label.to_string(),
        metric: metric.to_string(),
        value,
        threshold,
        master_seed,
        stream_path,
        n,
        k: None,
        alpha: None,
        kernel_matrix: None,
        u: None,
        w: None,
        sigma: None,
    }
}

/// Runs one suite and assembles the full report.
pub fn run_suite(suite: Suite, params: &SuiteParams, master_seed: u64) -> Result<VerifyOutput> {
    let checks = match suite {
        Suite::Thm1 => suite_thm1(params, master_seed)?,
        Suite::Cor4 => suite_cor4(params, master_seed)?,
        Suite::Lemma2 => suite_lemma2(params, master_seed)?,
        Suite::Prop5 => suite_prop5(params, master_seed)?,
        Suite::Remark => suite_remark(params, master_seed)?,
        Suite::Eq2Mc => suite_eq2_mc(params, master_seed)?,
        Suite::SamplerLaws => suite_sampler_laws(params, master_seed)?,
    };
    let mut records = Vec::with_capacity(checks.len());
    let mut worst: Option<WorstInstance> = None;
    let mut failures = 0usize;
    for c in checks {
        if !c.record.pass {
            failures += 1;
            let margin = c.record.value - c.record.threshold;
            let is_worse = worst
                .as_ref()
                .map(|w| margin > w.value - w.threshold || !margin.is_finite())
                .unwrap_or(true);
            if is_worse {
                worst = Some(c.replay);
            }
        }
        records.push(c.record);
    }
    Ok(VerifyOutput {
        schema_version: SCHEMA_VERSION,
        command: "verify".to_string(),
        suite: suite.as_str().to_string(),
        seed: master_seed,
        passed: failures == 0,
        checks: records.len(),
        failures,
        records,
        worst_failure: worst,
    })
}

fn n_grid(params: &SuiteParams, lo: usize, hi: usize) -> Result<Vec<usize>> {
    match params.n {
        None => Ok((lo..=hi).collect()),
        Some(n) => {
            if n < 2 {
                return Err(CliError::usage("ground-set size must be at least 2"));
            }
            Ok(vec![n])
        }
    }
}

fn k_grid(params: &SuiteParams, n: usize, hi: usize) -> Result<Vec<usize>> {
    match params.k {
        None => Ok((1..=hi).collect()),
        Some(k) => {
            if k == 0 || k > n {
                return Err(CliError::usage(format!(
                    "subset size k = {k} out of range 1..={n}"
                )));
            }
            Ok(if k <= hi { vec![k] } else { vec![] })
        }
    }
}

fn alpha_grid(params: &SuiteParams) -> Result<Vec<f64>> {
    match params.alpha {
        None => Ok(ALPHA_GRID.to_vec()),
        Some(a) => {
            if !(a > 0.0 && a.is_finite()) {
                return Err(CliError::usage("alpha must be positive and finite"));
            }
            Ok(vec![a])
        }
    }
}

fn check_seeds(params: &SuiteParams) -> Result<usize> {
    if params.seeds == 0 {
        return Err(CliError::usage("seeds must be at least 1"));
    }
    Ok(params.seeds)
}

/// Scatter-expectation identity over the free-size scheme:
/// E[C K_CC^-1 C'] = (K + alpha I)^-1, by exhaustive enumeration.
fn suite_thm1(params: &SuiteParams, master_seed: u64) -> Result<Vec<Check>> {
    let seeds = check_seeds(params)?;
    let mut cells = Vec::new();
    for n in n_grid(params, 2, 8)? {
        for (ai, &alpha) in alpha_grid(params)?.iter().enumerate() {
            for s in 0..seeds {
                cells.push((n, ai, alpha, s));
            }
        }
    }
    cells
        .par_iter()
        .map(|&(n, ai, alpha, s)| -> Result<Check> {
            let path = vec![
                stream_tag::VERIFY,
                Suite::Thm1.tag(),
                n as u64,
                ai as u64,
                s as u64,
            ];
            let k = random_pd::<f64, _>(n, &mut stream_rng(master_seed, &path));
            let report = expect_dpp_exhaustive(&k, alpha)?;
            let label = format!("thm1 n={n} alpha={alpha} seed={s}");
            let mut replay = replay_stub(
                &label,
                "rel_error",
                report.rel_error,
                THM1_TOL,
                master_seed,
                path,
                n,
            );
            replay.alpha = Some(alpha);
            replay.kernel_matrix = Some(matrix_rows(k.entries()));
            Ok(Check::new(
                label,
                "rel_error",
                report.rel_error,
                THM1_TOL,
                replay,
            ))
        })
        .collect()
}

/// Fixed-size scatter-expectation identity against its spectral closed form,
/// by exhaustive enumeration over all size-k subsets.
fn suite_cor4(params: &SuiteParams, master_seed: u64) -> Result<Vec<Check>> {
    let seeds = check_seeds(params)?;
    let mut cells = Vec::new();
    for n in n_grid(params, 2, 8)? {
        for kk in k_grid(params, n, n)? {
            for s in 0..seeds {
                cells.push((n, kk, s));
            }
        }
    }
    cells
        .par_iter()
        .map(|&(n, kk, s)| -> Result<Check> {
            let path = vec![
                stream_tag::VERIFY,
                Suite::Cor4.tag(),
                n as u64,
                kk as u64,
                s as u64,
            ];
            let k = random_pd::<f64, _>(n, &mut stream_rng(master_seed, &path));
            let report = expect_kdpp_exhaustive(&k, kk)?;
            let label = format!("cor4 n={n} k={kk} seed={s}");
            let mut replay = replay_stub(
                &label,
                "rel_error",
                report.rel_error,
                COR4_TOL,
                master_seed,
                path,
                n,
            );
            replay.k = Some(kk);
            replay.kernel_matrix = Some(matrix_rows(k.entries()));
            Ok(Check::new(
                label,
                "rel_error",
                report.rel_error,
                COR4_TOL,
                replay,
            ))
        })
        .collect()
}

/// Rank-one contraction identity along three routes: subset enumeration,
/// the determinant ratio, and the contracted spectral expectation.
fn suite_lemma2(params: &SuiteParams, master_seed: u64) -> Result<Vec<Check>> {
    let seeds = check_seeds(params)?;
    let mut cells = Vec::new();
    for n in n_grid(params, 3, 6)? {
        for kk in k_grid(params, n, n)? {
            for s in 0..seeds {
                cells.push((n, kk, s));
            }
        }
    }
    cells
        .par_iter()
        .map(|&(n, kk, s)| -> Result<Check> {
            let path = vec![
                stream_tag::VERIFY,
                Suite::Lemma2.tag(),
                n as u64,
                kk as u64,
                s as u64,
            ];
            let mut rng = stream_rng(master_seed, &path);
            let k = random_pd::<f64, _>(n, &mut rng);
            let u = DVector::from_fn(n, |_, _| 2.0 * rng.random::<f64>() - 1.0);
            let w = DVector::from_fn(n, |_, _| 2.0 * rng.random::<f64>() - 1.0);
            let report = lemma2_check(&k, kk, &u, &w)?;
            let value = report.max_rel_error();
            let label = format!("lemma2 n={n} k={kk} seed={s}");
            let mut replay = replay_stub(
                &label,
                "max_rel_error",
                value,
                LEMMA2_TOL,
                master_seed,
                path,
                n,
            );
            replay.k = Some(kk);
            replay.kernel_matrix = Some(matrix_rows(k.entries()));
            replay.u = Some(u.as_slice().to_vec());
            replay.w = Some(w.as_slice().to_vec());
            Ok(Check::new(
                label,
                "max_rel_error",
                value,
                LEMMA2_TOL,
                replay,
            ))
        })
        .collect()
}

/// PSD lower bound on the fixed-size scatter expectation with the eigenvalue
/// tail sum as implicit ridge, plus the scalar tail bound on consecutive
/// elementary-symmetric ratios it rests on.
fn suite_prop5(params: &SuiteParams, master_seed: u64) -> Result<Vec<Check>> {
    let seeds = check_seeds(params)?;
    let mut cells = Vec::new();
    for n in n_grid(params, 2, 8)? {
        for kk in k_grid(params, n, n)? {
            for s in 0..seeds {
                cells.push((n, kk, s));
            }
        }
    }
    let mut checks: Vec<Check> = cells
        .par_iter()
        .map(|&(n, kk, s)| -> Result<Check> {
            let path = vec![
                stream_tag::VERIFY,
                Suite::Prop5.tag(),
                n as u64,
                kk as u64,
                s as u64,
            ];
            let k = random_pd::<f64, _>(n, &mut stream_rng(master_seed, &path));
            let report = prop5_bound_check(&k, kk)?;
            // violation convention: -lambda_min must stay within tolerance
            let value = -report.lambda_min;
            let label = format!("prop5 n={n} k={kk} seed={s}");
            let mut replay = replay_stub(
                &label,
                "neg_lambda_min",
                value,
                PROP5_TOL,
                master_seed,
                path,
                n,
            );
            replay.k = Some(kk);
            replay.alpha = Some(report.alpha);
            replay.kernel_matrix = Some(matrix_rows(k.entries()));
            Ok(Check::new(
                label,
                "neg_lambda_min",
                value,
                PROP5_TOL,
                replay,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    // scalar tail bound, on random sorted non-negative vectors
    let n_sigma = 10;
    let sigma_checks: Vec<Check> = (0..params.count)
        .into_par_iter()
        .map(|c| -> Result<Vec<Check>> {
            let path = vec![stream_tag::VERIFY, Suite::Prop5.tag(), 0x16, c as u64];
            let mut rng = stream_rng(master_seed, &path);
            let mut sigma: Vec<f64> = (0..n_sigma).map(|_| rng.random::<f64>() * 3.0).collect();
            sigma.sort_by(|a, b| b.partial_cmp(a).expect("finite draws"));
            let mut out = Vec::with_capacity(n_sigma);
            for kk in 1..=n_sigma {
                let report = lemma6_check(&sigma, kk, kk)?;
                let scale = report.value.abs().max(report.bound.abs()).max(1e-30);
                let value = (report.bound - report.value) / scale;
                let label = format!("lemma6 vec={c} k={kk} l={kk}");
                let mut replay = replay_stub(
                    &label,
                    "rel_violation",
                    value,
                    LEMMA6_SLACK,
                    master_seed,
                    path.clone(),
                    n_sigma,
                );
                replay.k = Some(kk);
                replay.sigma = Some(sigma.clone());
                out.push(Check::new(
                    label,
                    "rel_violation",
                    value,
                    LEMMA6_SLACK,
                    replay,
                ));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    checks.extend(sigma_checks);
    Ok(checks)
}

fn identity_spectrum(sigma: &[f64]) -> Result<Spectrum<f64>> {
    let n = sigma.len();
    Spectrum::from_parts(DVector::from_column_slice(sigma), DMatrix::identity(n, n))
        .map_err(CliError::from)
}

/// Pessimistic floor on the drop-smallest elementary-symmetric ratio, on
/// random descending spectra, with the equality case on constant spectra.
fn suite_remark(params: &SuiteParams, master_seed: u64) -> Result<Vec<Check>> {
    let n = 10;
    let mut checks: Vec<Check> = (0..params.count)
        .into_par_iter()
        .map(|c| -> Result<Vec<Check>> {
            let path = vec![stream_tag::VERIFY, Suite::Remark.tag(), c as u64];
            let mut rng = stream_rng(master_seed, &path);
            let (lo, hi) = ((0.3f64).ln(), (3.0f64).ln());
            let sigma: Vec<f64> = (0..n)
                .map(|_| (lo + (hi - lo) * rng.random::<f64>()).exp())
                .collect();
            let spectrum = identity_spectrum(&sigma)?;
            let mut out = Vec::with_capacity(n - 1);
            for kk in 1..n {
                let report = remark_bound_check(&spectrum, kk)?;
                let scale = report.value.abs().max(report.bound.abs()).max(1e-30);
                let value = (report.bound - report.value) / scale;
                let label = format!("remark spectrum={c} k={kk}");
                let mut replay = replay_stub(
                    &label,
                    "rel_violation",
                    value,
                    REMARK_SLACK,
                    master_seed,
                    path.clone(),
                    n,
                );
                replay.k = Some(kk);
                replay.sigma = Some(sigma.clone());
                out.push(Check::new(
                    label,
                    "rel_violation",
                    value,
                    REMARK_SLACK,
                    replay,
                ));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    // equality on constant spectra, at a tighter two-sided tolerance
    for (ci, level) in [0.1, 0.5, 1.0, 2.0, 10.0].into_iter().enumerate() {
        let sigma = vec![level; n];
        let spectrum = identity_spectrum(&sigma)?;
        for kk in 1..n {
            let report = remark_bound_check(&spectrum, kk)?;
            let value = report.rel_gap();
            let label = format!("remark constant={level} k={kk}");
            let mut replay = replay_stub(
                &label,
                "rel_gap",
                value,
                REMARK_EQ_TOL,
                master_seed,
                vec![stream_tag::VERIFY, Suite::Remark.tag(), 0xc0257, ci as u64],
                n,
            );
            replay.k = Some(kk);
            replay.sigma = Some(sigma.clone());
            checks.push(Check::new(label, "rel_gap", value, REMARK_EQ_TOL, replay));
        }
    }
    Ok(checks)
}

/// Synthetic planar design for the Monte Carlo identity: a jittered grid
/// keeps the kernel matrix strictly positive definite at n = 20 while
/// avoiding symmetry degeneracies.
fn mc_design(
    n: usize,
    test_points: usize,
    master_seed: u64,
) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    let cols = (n as f64).sqrt().ceil() as usize;
    let mut rng = stream_rng(master_seed, &[stream_tag::VERIFY, Suite::Eq2Mc.tag(), 0]);
    let mut place = |count: usize, off: f64| -> DMatrix<f64> {
        DMatrix::from_fn(count, 2, |i, j| {
            let base = if j == 0 {
                (i % cols) as f64
            } else {
                (i / cols) as f64
            };
            base + off + 0.4 * rng.random::<f64>() - 0.2
        })
    };
    let train = place(n, 0.0);
    let test = place(test_points, 0.5);
    let y: Vec<f64> = (0..n)
        .map(|i| (train[(i, 0)]).sin() + 0.5 * (2.0 * train[(i, 1)]).cos() + 0.25 * train[(i, 0)])
        .collect();
    Ok((train, y, test))
}

/// Monte Carlo check of the mean-prediction identity: ensemble-averaged
/// ridgeless predictions over free-size draws converge to ridge regression,
/// with the deviation shrinking as draws grow.
fn suite_eq2_mc(params: &SuiteParams, master_seed: u64) -> Result<Vec<Check>> {
    let n = params.n.unwrap_or(20);
    if n < 4 {
        return Err(CliError::usage("mean-prediction suite needs n >= 4"));
    }
    let alpha = match params.alpha {
        None => 1.0,
        Some(a) if a > 0.0 && a.is_finite() => a,
        Some(a) => {
            return Err(CliError::usage(format!(
                "alpha = {a} must be positive and finite"
            )))
        }
    };
    let draws = params.draws.unwrap_or(100_000);
    if draws < 100 {
        return Err(CliError::usage(
            "mean-prediction suite needs at least 100 draws",
        ));
    }
    if params.test_points == 0 {
        return Err(CliError::usage("test points must be at least 1"));
    }
    let (train, y, test) = mc_design(n, params.test_points, master_seed)?;
    let spec = KernelSpec::gaussian(1.0)?;
    let k = gram(&train, &spec)?;
    let test_columns = cross_gram(&train, &test, &spec)?;
    let config = SamplerConfig {
        scheme: SamplerScheme::Dpp,
        k: 0,
        alpha,
        seed: master_seed,
    };
    let checkpoints = [(draws / 100).max(1), (draws / 10).max(2), draws];
    let reports = expectation_mc_curve(&k, &y, &config, &checkpoints, &test_columns)?;

    let mut checks = Vec::new();
    let final_report = reports
        .last()
        .expect("curve yields one report per checkpoint");
    // band check at the final checkpoint: worst per-point deviation in SE units
    let mut max_dev_se = 0.0f64;
    for j in 0..final_report.mc_mean.len() {
        let dev = (final_report.mc_mean[j] - final_report.reference[j]).abs();
        let se = final_report.std_error[j].max(1e-12);
        max_dev_se = max_dev_se.max(dev / se);
    }
    let label = format!("eq2-mc band n={n} alpha={alpha} draws={draws}");
    let mut replay = replay_stub(
        &label,
        "max_dev_over_se",
        max_dev_se,
        MC_SE_MULT,
        master_seed,
        vec![stream_tag::VERIFY, Suite::Eq2Mc.tag(), 0],
        n,
    );
    replay.alpha = Some(alpha);
    replay.kernel_matrix = Some(matrix_rows(k.entries()));
    checks.push(Check::new(
        label,
        "max_dev_over_se",
        max_dev_se,
        MC_SE_MULT,
        replay,
    ));

    // deviations must shrink as draws grow, within Monte Carlo noise
    for w in reports.windows(2) {
        let (prev, next) = (&w[0], &w[1]);
        let ratio = next.rel_error / prev.rel_error.max(1e-300);
        let label = format!("eq2-mc monotone draws={}->{}", prev.draws, next.draws);
        let replay = replay_stub(
            &label,
            "deviation_ratio",
            ratio,
            MC_MONOTONE_SLACK,
            master_seed,
            vec![stream_tag::VERIFY, Suite::Eq2Mc.tag(), 0],
            n,
        );
        checks.push(Check::new(
            label,
            "deviation_ratio",
            ratio,
            MC_MONOTONE_SLACK,
            replay,
        ));
    }
    Ok(checks)
}

/// Counts subsets drawn by `prepared` across parallel chunks; counts merge
/// by integer addition, so totals are schedule-independent.
fn empirical_mask_counts(
    prepared: &PreparedSampler<'_, f64>,
    draws: usize,
    master_seed: u64,
    sub_tag: u64,
) -> Result<Vec<u64>> {
    let n_masks = 1usize << prepared.n();
    let chunks: Vec<usize> = (0..draws.div_ceil(LAW_CHUNK)).collect();
    let partials = chunks
        .par_iter()
        .map(|&c| -> Result<Vec<u64>> {
            let mut rng = stream_rng(
                master_seed,
                &[
                    stream_tag::VERIFY,
                    Suite::SamplerLaws.tag(),
                    sub_tag,
                    c as u64,
                ],
            );
            let take = LAW_CHUNK.min(draws - c * LAW_CHUNK);
            let mut counts = vec![0u64; n_masks];
            for _ in 0..take {
                let subset = prepared.draw(&mut rng)?;
                counts[subset.mask() as usize] += 1;
            }
            Ok(counts)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = vec![0u64; n_masks];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    Ok(total)
}

fn tv_distance(counts: &[u64], law: &[f64], draws: usize) -> f64 {
    counts
        .iter()
        .zip(law)
        .map(|(&c, &p)| (c as f64 / draws as f64 - p).abs())
        .sum::<f64>()
        / 2.0
}

/// Distributional checks of the exact samplers against enumerated laws:
/// total-variation distance for the fixed-size and free-size schemes, and
/// per-index inclusion marginals against the marginal kernel diagonal.
fn suite_sampler_laws(params: &SuiteParams, master_seed: u64) -> Result<Vec<Check>> {
    let n = params.n.unwrap_or(6);
    if !(2..=16).contains(&n) {
        return Err(CliError::usage(
            "sampler-law enumeration needs 2 <= n <= 16",
        ));
    }
    let kk = params.k.unwrap_or(3.min(n));
    if kk == 0 || kk > n {
        return Err(CliError::usage(format!(
            "subset size k = {kk} out of range 1..={n}"
        )));
    }
    let alpha = match params.alpha {
        None => 1.0,
        Some(a) if a > 0.0 && a.is_finite() => a,
        Some(a) => {
            return Err(CliError::usage(format!(
                "alpha = {a} must be positive and finite"
            )))
        }
    };
    let draws = params.draws.unwrap_or(200_000);
    if draws < 1000 {
        return Err(CliError::usage("law comparison needs at least 1000 draws"));
    }

    let path = vec![stream_tag::VERIFY, Suite::SamplerLaws.tag(), 0];
    let k = random_pd::<f64, _>(n, &mut stream_rng(master_seed, &path));
    let spectrum = eigendecompose(&k, 0.0)?;
    let mut checks = Vec::new();

    // fixed-size law
    let kdpp_law = enumerate_kdpp_law(&k, kk)?;
    let kdpp_config = SamplerConfig {
        scheme: SamplerScheme::Kdpp,
        k: kk,
        alpha,
        seed: master_seed,
    };
    let prepared = PreparedSampler::prepare(&kdpp_config, n, Some(&spectrum))?;
    let kdpp_counts = empirical_mask_counts(&prepared, draws, master_seed, 1)?;
    let tv = tv_distance(&kdpp_counts, &kdpp_law, draws);
    let label = format!("sampler-laws kdpp tv n={n} k={kk} draws={draws}");
    let mut replay = replay_stub(
        &label,
        "tv_distance",
        tv,
        TV_TOL,
        master_seed,
        path.clone(),
        n,
    );
    replay.k = Some(kk);
    replay.kernel_matrix = Some(matrix_rows(k.entries()));
    checks.push(Check::new(label, "tv_distance", tv, TV_TOL, replay));

    // free-size law
    let dpp_law = enumerate_dpp_law(&k, alpha)?;
    let dpp_config = SamplerConfig {
        scheme: SamplerScheme::Dpp,
        k: 0,
        alpha,
        seed: master_seed,
    };
    let prepared = PreparedSampler::prepare(&dpp_config, n, Some(&spectrum))?;
    let dpp_counts = empirical_mask_counts(&prepared, draws, master_seed, 2)?;
    let tv = tv_distance(&dpp_counts, &dpp_law, draws);
    let label = format!("sampler-laws dpp tv n={n} alpha={alpha} draws={draws}");
    let mut replay = replay_stub(
        &label,
        "tv_distance",
        tv,
        TV_TOL,
        master_seed,
        path.clone(),
        n,
    );
    replay.alpha = Some(alpha);
    replay.kernel_matrix = Some(matrix_rows(k.entries()));
    checks.push(Check::new(label, "tv_distance", tv, TV_TOL, replay));

    // free-size inclusion marginals against the marginal kernel diagonal
    let marginal = spectrum.marginal_kernel(alpha)?;
    for i in 0..n {
        let mut hits = 0u64;
        for (mask, &c) in dpp_counts.iter().enumerate() {
            if mask & (1 << i) != 0 {
                hits += c;
            }
        }
        let p = marginal[(i, i)];
        let phat = hits as f64 / draws as f64;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        let threshold = INCLUSION_SE_MULT * se + INCLUSION_ABS;
        let value = (phat - p).abs();
        let label = format!("sampler-laws dpp inclusion i={i}");
        let mut replay = replay_stub(
            &label,
            "inclusion_abs_dev",
            value,
            threshold,
            master_seed,
            path.clone(),
            n,
        );
        replay.alpha = Some(alpha);
        replay.kernel_matrix = Some(matrix_rows(k.entries()));
        checks.push(Check::new(
            label,
            "inclusion_abs_dev",
            value,
            threshold,
            replay,
        ));
    }
    Ok(checks)
}
