//! End-to-end checks of the installed binary: golden reports on fixed
//! seeds, schema shape, exit codes, and config-file merging.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dppens"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn golden(name: &str) -> String {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "golden", name]
        .iter()
        .collect();
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("golden {name}: {e}"))
}

#[test]
fn sample_report_matches_the_golden_bytes() {
    let out = run(&[
        "sample", "--scheme", "uniform", "--n", "12", "--k", "4", "--draws", "3", "--seed", "42",
    ]);
    assert!(out.status.success());
    assert_eq!(stdout_str(&out), golden("sample_uniform.json"));
}

#[test]
fn nystrom_report_matches_the_golden_bytes() {
    let out = run(&[
        "nystrom",
        "--synth",
        "--subsample",
        "60",
        "--scheme",
        "kdpp",
        "--k",
        "10",
        "--m-list",
        "1,3",
        "--repeats",
        "2",
        "--seed",
        "11",
    ]);
    assert!(out.status.success());
    assert_eq!(stdout_str(&out), golden("nystrom_kdpp.json"));
}

#[test]
fn experiment_schema_carries_records_and_quantiles() {
    let out = run(&[
        "krr-ensemble",
        "--synth",
        "--subsample",
        "120",
        "--scheme",
        "uniform",
        "--k",
        "15",
        "--m-list",
        "1,2",
        "--repeats",
        "3",
        "--seed",
        "5",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout_str(&out)).expect("valid json");
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["command"], "krr-ensemble");
    let records = v["records"].as_array().expect("records array");
    assert_eq!(records.len(), 2 * 3);
    for r in records {
        assert_eq!(r["scheme"], "uniform");
        assert_eq!(r["k"], 15);
        assert!(r["m"].is_u64());
        assert!(r["repeat"].is_u64());
        assert!(r["smape_bulk"].is_f64());
    }
    let summaries = v["summaries"].as_array().expect("summaries array");
    assert_eq!(summaries.len(), 2);
    for s in summaries {
        let q = &s["smape_bulk"];
        assert!(q["q25"].is_f64() && q["q50"].is_f64() && q["q75"].is_f64());
    }
    assert!(v["n_train"].is_u64());
    assert!(v["rls_threshold"].is_f64());
}

#[test]
fn csv_output_is_one_row_per_record() {
    let out = run(&[
        "nystrom",
        "--synth",
        "--subsample",
        "60",
        "--scheme",
        "uniform",
        "--k",
        "8",
        "--m-list",
        "1,2",
        "--repeats",
        "2",
        "--output",
        "csv",
    ]);
    assert!(out.status.success());
    let text = stdout_str(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "scheme,k,m,repeat,smape_bulk,smape_tail,frobenius_rel_error,distinct_landmarks"
    );
    assert_eq!(lines.len(), 1 + 4);
    assert!(lines[1].starts_with("uniform,8,1,0,,,"));
}

#[test]
fn exit_codes_partition_the_failure_modes() {
    // usage: unknown scheme
    let out = run(&["sample", "--n", "10", "--scheme", "bogus"]);
    assert_eq!(out.status.code(), Some(1));
    // usage: free-size scheme without a ridge
    let out = run(&["nystrom", "--synth", "--scheme", "dpp"]);
    assert_eq!(out.status.code(), Some(1));
    // data: missing input file
    let out = run(&["rls", "--data", "/nonexistent/x.csv", "--sigma", "1"]);
    assert_eq!(out.status.code(), Some(2));
    // usage: no input source at all
    let out = run(&["rls", "--sigma", "1"]);
    assert_eq!(out.status.code(), Some(1));
    // verification failure: far too few draws for the law tolerance
    let out = run(&["verify", "sampler-laws", "--draws", "1000"]);
    assert_eq!(out.status.code(), Some(3));
    // success paths
    let out = run(&["verify", "cor4", "--n", "3", "--k", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn verify_failure_report_serializes_the_worst_instance() {
    let out = run(&["verify", "sampler-laws", "--draws", "1000"]);
    assert_eq!(out.status.code(), Some(3));
    let v: serde_json::Value = serde_json::from_str(&stdout_str(&out)).expect("valid json");
    assert_eq!(v["passed"], false);
    let worst = &v["worst_failure"];
    assert!(worst["label"].is_string());
    assert!(worst["value"].as_f64().unwrap() > worst["threshold"].as_f64().unwrap());
    assert!(worst["master_seed"].is_u64());
    assert!(worst["stream_path"].is_array());
    // the offending kernel rides along for replay
    let kernel = worst["kernel_matrix"].as_array().expect("kernel rows");
    assert_eq!(kernel.len(), worst["n"].as_u64().unwrap() as usize);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = std::env::temp_dir();
    let cfg_path = dir.join(format!("dppens-test-{}.conf", std::process::id()));
    std::fs::write(
        &cfg_path,
        "scheme = uniform\nn = 9\nk = 3\ndraws = 2\nseed = 7\n",
    )
    .unwrap();
    let cfg = cfg_path.to_str().unwrap();

    let out = run(&["sample", "--config", cfg]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(v["n"], 9);
    assert_eq!(v["k"], 3);
    assert_eq!(v["seed"], 7);
    assert_eq!(v["subsets"].as_array().unwrap().len(), 2);

    // an explicit flag overrides the config value
    let out = run(&["sample", "--config", cfg, "--k", "5"]);
    let v: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(v["k"], 5);

    // unknown keys are rejected up front
    let bad_path = dir.join(format!("dppens-test-bad-{}.conf", std::process::id()));
    std::fs::write(&bad_path, "shceme = uniform\n").unwrap();
    let out = run(&["sample", "--config", bad_path.to_str().unwrap(), "--n", "4"]);
    assert_eq!(out.status.code(), Some(1));

    std::fs::remove_file(&cfg_path).ok();
    std::fs::remove_file(&bad_path).ok();
}

#[test]
fn out_flag_writes_the_report_to_a_file() {
    let path = std::env::temp_dir().join(format!("dppens-out-{}.json", std::process::id()));
    let out = run(&[
        "sample",
        "--scheme",
        "uniform",
        "--n",
        "6",
        "--k",
        "2",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["command"], "sample");
    std::fs::remove_file(&path).ok();
}

#[test]
fn rls_scores_sum_to_the_expected_subset_size() {
    let out = run(&["rls", "--synth", "--subsample", "80", "--alpha", "0.5"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    let scores: Vec<f64> = v["scores"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert_eq!(scores.len(), 80);
    assert!(scores.iter().all(|&s| s > 0.0 && s < 1.0));
    let total: f64 = scores.iter().sum();
    let expected = v["expected_dpp_size"].as_f64().unwrap();
    assert!((total - expected).abs() < 1e-9, "{total} vs {expected}");
}
