//! Acceptance gate: one test per release criterion, each asserting its
//! stated tolerance and runtime budget. The per-test ok/FAILED lines of
//! this target are the acceptance record.
//!
//! Criteria 1-7 drive the oracle suites at their full default grids.
//! Criterion 8 reproduces the qualitative ensemble trends at desk scale.
//! Criterion 9 checks byte-level determinism across worker counts.
//! Criterion 10 stresses the scaled symmetric-polynomial table.

use std::process::Command;
use std::time::Instant;

use dppens::{elem_sym, stream_rng, KernelSpec, SamplerScheme, Scaled};
use dppens_cli::cli::{DEFAULT_EPSILON, DEFAULT_JITTER};
use dppens_cli::experiment::{
    run_ensemble_krr, run_ensemble_nystrom, split_and_stratify, SamplerRequest,
};
use dppens_cli::report::ExperimentReport;
use dppens_cli::synth::{synth500, SYNTH_K, SYNTH_SIGMA};
use dppens_cli::verify::{run_suite, Suite, SuiteParams, VerifyOutput};
use rand::Rng;

const SEEDS: u64 = 10;

fn suite_at_defaults(suite: Suite) -> VerifyOutput {
    run_suite(suite, &SuiteParams::default(), 0).expect("suite runs")
}

fn assert_all_pass(out: &VerifyOutput, expected_checks: usize) {
    assert_eq!(
        out.checks, expected_checks,
        "suite {} ran {} checks, expected {expected_checks}",
        out.suite, out.checks
    );
    if let Some(worst) = out.records.iter().max_by(|a, b| {
        (a.value - a.threshold)
            .partial_cmp(&(b.value - b.threshold))
            .unwrap_or(std::cmp::Ordering::Equal)
    }) {
        assert!(
            out.passed && out.failures == 0,
            "suite {} failed {} of {} checks; worst: {} {} = {:.3e} > {:.3e}",
            out.suite,
            out.failures,
            out.checks,
            worst.label,
            worst.metric,
            worst.value,
            worst.threshold
        );
    }
}

#[test]
fn criterion_01_thm1_exhaustive_identity() {
    // 5 random PD kernels at each n in 2..=8 and ridge in {0.01, 1, 100}:
    // enumerated subset-average of scatter inverses matches the ridge
    // inverse to relative 1e-9. Budget 10 s.
    let start = Instant::now();
    let out = suite_at_defaults(Suite::Thm1);
    assert!(out.records.iter().all(|r| r.threshold == 1e-9));
    assert_all_pass(&out, 7 * 3 * 5);
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed <= 10.0, "ran {elapsed:.1}s, budget 10s");
}

#[test]
fn criterion_02_cor4_exhaustive_identity() {
    // same kernel grid with every subset size k in 1..=n: the spectral
    // formula matches enumeration to relative 1e-8. Budget 30 s.
    let start = Instant::now();
    let out = suite_at_defaults(Suite::Cor4);
    assert!(out.records.iter().all(|r| r.threshold == 1e-8));
    let k_pairs: usize = (2..=8).sum();
    assert_all_pass(&out, k_pairs * 5);
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed <= 30.0, "ran {elapsed:.1}s, budget 30s");
}

#[test]
fn criterion_03_lemma2_bilinear_identity() {
    // n in 3..=6, k <= n, 5 random (kernel, u, w) triples each: the
    // determinant-ratio form, the enumeration, and the spectral form agree
    // pairwise to relative 1e-8.
    let out = suite_at_defaults(Suite::Lemma2);
    assert!(out.records.iter().all(|r| r.threshold == 1e-8));
    let k_pairs: usize = (3..=6).sum();
    assert_all_pass(&out, k_pairs * 5);
}

#[test]
fn criterion_04_prop5_lower_bound_and_lemma6_scalar_inequality() {
    // On the criterion-2 grid the enumerated expectation dominates the
    // spectral bound with the tail-sum ridge (lambda_min >= -1e-8); the
    // scalar inequality holds on 100 random sorted non-negative spectra
    // of length 10 at every k with l = k.
    let out = suite_at_defaults(Suite::Prop5);
    let grid: usize = (2..=8).sum::<usize>() * 5;
    assert_all_pass(&out, grid + 100 * 10);
}

#[test]
fn criterion_05_remark_spectral_ratio_bound() {
    // 100 random descending spectra (n = 10, every k) satisfy the bound
    // with relative slack 1e-8; constant spectra meet it with equality to
    // 1e-10.
    let out = suite_at_defaults(Suite::Remark);
    assert_all_pass(&out, 100 * 9 + 5 * 9);
}

#[test]
fn criterion_06_sampler_law_exactness() {
    // One random PD kernel, n = 6: over 2e5 draws the empirical fixed-size
    // (k = 3) and free-size (ridge 1) subset laws sit within total
    // variation 0.02 of enumeration, and free-size inclusion frequencies
    // match the marginal-kernel diagonal within 3 binomial standard errors
    // plus 1e-3. Budget 60 s.
    let start = Instant::now();
    let out = suite_at_defaults(Suite::SamplerLaws);
    assert_all_pass(&out, 2 + 6);
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed <= 60.0, "ran {elapsed:.1}s, budget 60s");
}

#[test]
fn criterion_07_prediction_expectation_monte_carlo() {
    // n = 20 synthetic regression, ridge 1, 1e5 free-size draws: at all 10
    // test points the ensemble-mean prediction sits within 4 standard
    // errors of the ridge prediction, and the worst deviation decreases
    // monotonically (within noise) across 1e3, 1e4, 1e5 draws.
    let out = suite_at_defaults(Suite::Eq2Mc);
    assert_all_pass(&out, 3);
    let band = out
        .records
        .iter()
        .find(|r| r.metric == "max_dev_over_se")
        .expect("band check present");
    assert_eq!(band.threshold, 4.0);
}

fn krr_report(scheme: SamplerScheme, seed: u64) -> ExperimentReport {
    let ds = synth500(seed);
    let spec = KernelSpec::gaussian(SYNTH_SIGMA).expect("bandwidth");
    let split = split_and_stratify(&ds, &spec, 0.5, seed).expect("split");
    let request = SamplerRequest {
        scheme,
        k: SYNTH_K,
        alpha: None,
        seed,
    };
    run_ensemble_krr(
        &ds,
        &split,
        &spec,
        request,
        &[1, 5, 10, 15, 20],
        10,
        DEFAULT_JITTER,
    )
    .expect("ensemble runs")
}

fn nystrom_report(scheme: SamplerScheme, seed: u64) -> ExperimentReport {
    let ds = synth500(seed);
    let spec = KernelSpec::gaussian(SYNTH_SIGMA).expect("bandwidth");
    let request = SamplerRequest {
        scheme,
        k: SYNTH_K,
        alpha: None,
        seed,
    };
    run_ensemble_nystrom(&ds, &spec, request, &[1, 10], 10, DEFAULT_EPSILON).expect("ensemble runs")
}

fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Pooled median of one record field at ensemble size m, over all seeds
/// and repeats.
fn median_at(
    reports: &[ExperimentReport],
    m: usize,
    field: impl Fn(&dppens_cli::report::RepeatRecord) -> Option<f64>,
) -> f64 {
    let mut vals: Vec<f64> = reports
        .iter()
        .flat_map(|rep| rep.records.iter())
        .filter(|r| r.m == m)
        .map(|r| field(r).expect("field populated"))
        .collect();
    median(&mut vals)
}

#[test]
fn criterion_08_desk_scale_ensemble_trends() {
    // Synthetic 500-point dataset, 10 seeds, 10 repeats per seed, k = 25:
    // (a) ensemble Nystrom median relative Frobenius error at m = 10 is at
    //     most the m = 1 value for the leverage and fixed-size schemes;
    // (b) median tail SMAPE under the fixed-size scheme is at most the
    //     uniform value at m = 10;
    // (c) every scheme's bulk and tail SMAPE curves flatten: the median
    //     move from m = 15 to m = 20 is at most 20% of the m = 1 -> m = 5
    //     drop. Budget 5 min.
    let start = Instant::now();

    for scheme in [SamplerScheme::Rls, SamplerScheme::Kdpp] {
        let reports: Vec<ExperimentReport> =
            (0..SEEDS).map(|s| nystrom_report(scheme, s)).collect();
        let e1 = median_at(&reports, 1, |r| r.frobenius_rel_error);
        let e10 = median_at(&reports, 10, |r| r.frobenius_rel_error);
        assert!(
            e10 <= e1,
            "(a) {scheme}: median error rose from {e1:.4} at m=1 to {e10:.4} at m=10"
        );
    }

    let mut tail_at_10 = std::collections::HashMap::new();
    for scheme in [
        SamplerScheme::Uniform,
        SamplerScheme::Rls,
        SamplerScheme::Kdpp,
    ] {
        let reports: Vec<ExperimentReport> = (0..SEEDS).map(|s| krr_report(scheme, s)).collect();
        tail_at_10.insert(scheme.as_str(), median_at(&reports, 10, |r| r.smape_tail));
        for (name, pick_bulk) in [("bulk", true), ("tail", false)] {
            let at = |m| {
                median_at(&reports, m, |r| {
                    if pick_bulk {
                        r.smape_bulk
                    } else {
                        r.smape_tail
                    }
                })
            };
            let drop = at(1) - at(5);
            let late = (at(15) - at(20)).abs();
            assert!(
                late <= 0.2 * drop,
                "(c) {scheme} {name}: |m15-m20| = {late:.4} exceeds 20% of the \
                 m1->m5 drop {drop:.4}"
            );
        }
    }
    let kdpp_tail = tail_at_10["kdpp"];
    let uniform_tail = tail_at_10["uniform"];
    assert!(
        kdpp_tail <= uniform_tail,
        "(b) tail SMAPE at m=10: kdpp {kdpp_tail:.4} vs uniform {uniform_tail:.4}"
    );

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed <= 300.0, "ran {elapsed:.1}s, budget 300s");
}

#[test]
fn criterion_09_reports_are_byte_identical_across_worker_counts() {
    // The same invocation with different --threads values must emit
    // byte-identical reports; parallelism is over repeats, oracle grid
    // cells, and Monte Carlo chunks, so each command family is exercised.
    let cases: &[&[&str]] = &[
        &[
            "krr-ensemble",
            "--synth",
            "--scheme",
            "rls",
            "--seed",
            "5",
            "--repeats",
            "4",
            "--m-list",
            "1,3",
        ],
        &[
            "nystrom",
            "--synth",
            "--subsample",
            "200",
            "--scheme",
            "kdpp",
            "--k",
            "20",
            "--seed",
            "8",
            "--repeats",
            "3",
            "--m-list",
            "1,2",
        ],
        &["verify", "sampler-laws", "--draws", "20000", "--seed", "2"],
        &["verify", "thm1", "--n", "5", "--seed", "3"],
        &[
            "sample",
            "--synth",
            "--subsample",
            "90",
            "--scheme",
            "dpp",
            "--alpha",
            "2",
            "--seed",
            "4",
        ],
    ];
    for args in cases {
        let mut outs = Vec::new();
        for threads in ["1", "3"] {
            let out = Command::new(env!("CARGO_BIN_EXE_dppens"))
                .args(*args)
                .args(["--threads", threads])
                .output()
                .expect("binary runs");
            assert!(
                out.status.code() == Some(0) || out.status.code() == Some(3),
                "unexpected exit {:?} for {args:?}: {}",
                out.status.code(),
                String::from_utf8_lossy(&out.stderr)
            );
            outs.push(out.stdout);
        }
        assert!(
            outs[0] == outs[1],
            "report bytes differ across --threads for {args:?}"
        );
        assert!(!outs[0].is_empty());
    }
}

#[test]
fn criterion_10_symmetric_polynomial_table_hygiene() {
    // Random log-spaced spectra spanning 12 orders of magnitude, n up to
    // 2000: the table's degree-1 value equals the trace and its degree-n
    // value equals the eigenvalue product (both to relative 1e-10), with
    // interior degrees finite and positive despite far exceeding the
    // plain-float range.
    for (n, seed) in [(500, 0u64), (2000, 1), (2000, 2), (2000, 3)] {
        let mut rng = stream_rng(99, &[0x1ab1e, seed]);
        let lambdas: Vec<f64> = (0..n)
            .map(|_| 10f64.powf(12.0 * rng.random::<f64>() - 6.0))
            .collect();
        let table = elem_sym(&lambdas).expect("table builds");

        let trace: f64 = lambdas.iter().sum();
        let e1 = table.e(1).to_value();
        let trace_err = ((e1 - trace) / trace).abs();
        assert!(
            trace_err <= 1e-10,
            "n={n} seed={seed}: trace identity off by {trace_err:.3e}"
        );

        // reference product in the same scaled representation; exponent
        // arithmetic is exact, so this only accumulates mantissa roundoff
        let mut product = Scaled::one();
        for &l in &lambdas {
            product = product.mul(&Scaled::from_value(l));
        }
        let det_err = table.e(n).rel_diff(&product);
        assert!(
            det_err <= 1e-10,
            "n={n} seed={seed}: determinant identity off by {det_err:.3e}"
        );

        // interior degrees stay representable under row scaling even where
        // the plain value overflows f64
        for r in [n / 4, n / 2, 3 * n / 4] {
            let cell = table.e(r);
            assert!(!cell.is_zero(), "n={n} seed={seed}: e_{r} vanished");
            assert!(
                cell.ln().is_finite(),
                "n={n} seed={seed}: e_{r} lost its magnitude"
            );
        }
    }
}
