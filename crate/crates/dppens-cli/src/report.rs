//! Machine-readable reports: schema-versioned JSON (primary) and flat CSV.
//!
//! Reports never include wall-clock times or worker counts, so the same
//! seed yields byte-identical output at any `--threads` value; timings go
//! to stderr.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// 25/50/75 percent quantiles (linear interpolation) over repeats.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Quantiles {
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
}

/// One observation: a single repeat evaluated at a single ensemble size.
/// Metrics that do not apply to the run kind are null; an undefined tail
/// SMAPE (empty tail stratum) is also null.
#[derive(Debug, Clone, Serialize)]
pub struct RepeatRecord {
    pub scheme: String,
    pub k: usize,
    pub m: usize,
    pub repeat: usize,
    pub smape_bulk: Option<f64>,
    pub smape_tail: Option<f64>,
    pub frobenius_rel_error: Option<f64>,
    pub distinct_landmarks: usize,
}

/// Per-m quantile summary over repeats.
#[derive(Debug, Clone, Serialize)]
pub struct MSummary {
    pub scheme: String,
    pub k: usize,
    pub m: usize,
    pub smape_bulk: Option<Quantiles>,
    pub smape_tail: Option<Quantiles>,
    pub frobenius_rel_error: Option<Quantiles>,
    pub distinct_landmarks: Quantiles,
}

/// Full experiment report: run parameters, raw per-repeat records and
/// per-m summaries. `k = 0` marks the free-size scheme.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub command: String,
    pub seed: u64,
    pub scheme: String,
    pub k: usize,
    pub alpha: f64,
    pub n: usize,
    pub n_train: Option<usize>,
    pub n_test_bulk: Option<usize>,
    pub n_test_tail: Option<usize>,
    pub rls_threshold: Option<f64>,
    pub alpha_strat: Option<f64>,
    pub epsilon: Option<f64>,
    pub jitter: Option<f64>,
    pub repeats: usize,
    pub records: Vec<RepeatRecord>,
    pub summaries: Vec<MSummary>,
}

/// Subset draws from the `sample` subcommand.
#[derive(Debug, Clone, Serialize)]
pub struct SampleOutput {
    pub schema_version: u32,
    pub command: String,
    pub seed: u64,
    pub scheme: String,
    pub n: usize,
    pub k: usize,
    pub alpha: f64,
    pub draws: usize,
    pub subsets: Vec<Vec<usize>>,
}

/// Ridge leverage scores from the `rls` subcommand.
#[derive(Debug, Clone, Serialize)]
pub struct RlsOutput {
    pub schema_version: u32,
    pub command: String,
    pub seed: u64,
    pub n: usize,
    pub alpha: f64,
    pub expected_dpp_size: f64,
    pub scores: Vec<f64>,
}

/// Renders any report as pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Data(format!("report serialization: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Flat CSV: one row per (scheme, m, repeat).
pub fn experiment_csv(report: &ExperimentReport) -> String {
    let mut out = String::from(
        "scheme,k,m,repeat,smape_bulk,smape_tail,frobenius_rel_error,distinct_landmarks\n",
    );
    for r in &report.records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.scheme,
            r.k,
            r.m,
            r.repeat,
            fmt_opt(r.smape_bulk),
            fmt_opt(r.smape_tail),
            fmt_opt(r.frobenius_rel_error),
            r.distinct_landmarks
        ));
    }
    out
}

/// Flat CSV: one row per draw, indices space-separated.
pub fn sample_csv(output: &SampleOutput) -> String {
    let mut out = String::from("draw,size,indices\n");
    for (i, s) in output.subsets.iter().enumerate() {
        let idx: Vec<String> = s.iter().map(usize::to_string).collect();
        out.push_str(&format!("{},{},{}\n", i, s.len(), idx.join(" ")));
    }
    out
}

/// Flat CSV: one row per point.
pub fn rls_csv(output: &RlsOutput) -> String {
    let mut out = String::from("index,score\n");
    for (i, s) in output.scores.iter().enumerate() {
        out.push_str(&format!("{i},{s}\n"));
    }
    out
}

/// Writes `text` to `out` when given, otherwise to stdout.
pub fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display()))),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())
                .and_then(|_| lock.flush())
                .map_err(|e| CliError::Data(format!("cannot write to stdout: {e}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_report() -> ExperimentReport {
        ExperimentReport {
            schema_version: SCHEMA_VERSION,
            command: "krr-ensemble".into(),
            seed: 7,
            scheme: "uniform".into(),
            k: 2,
            alpha: 0.1,
            n: 4,
            n_train: Some(2),
            n_test_bulk: Some(1),
            n_test_tail: Some(1),
            rls_threshold: Some(0.5),
            alpha_strat: Some(2e-4),
            epsilon: None,
            jitter: Some(0.0),
            repeats: 1,
            records: vec![RepeatRecord {
                scheme: "uniform".into(),
                k: 2,
                m: 1,
                repeat: 0,
                smape_bulk: Some(0.25),
                smape_tail: None,
                frobenius_rel_error: None,
                distinct_landmarks: 2,
            }],
            summaries: vec![],
        }
    }

    #[test]
    fn json_is_stable_and_null_marks_undefined_metrics() {
        let a = to_json(&tiny_report()).unwrap();
        let b = to_json(&tiny_report()).unwrap();
        assert_eq!(a, b);
        assert!(a.ends_with('\n'));
        assert!(a.contains("\"smape_tail\": null"));
        assert!(a.contains("\"schema_version\": 1"));
    }

    #[test]
    fn csv_has_one_row_per_record_and_empty_cells_for_null() {
        let csv = experiment_csv(&tiny_report());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1], "uniform,2,1,0,0.25,,,2");
    }

    #[test]
    fn sample_csv_joins_indices_with_spaces() {
        let out = SampleOutput {
            schema_version: SCHEMA_VERSION,
            command: "sample".into(),
            seed: 0,
            scheme: "uniform".into(),
            n: 5,
            k: 2,
            alpha: 0.0,
            draws: 2,
            subsets: vec![vec![0, 3], vec![1, 4]],
        };
        let csv = sample_csv(&out);
        assert_eq!(csv.lines().nth(1).unwrap(), "0,2,0 3");
        assert_eq!(csv.lines().nth(2).unwrap(), "1,2,1 4");
    }
}
