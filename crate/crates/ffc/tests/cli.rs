//! Integration tests for the `ffc` command-line interface: exit codes,
//! output files, and validation messages.

use std::path::Path;
use std::process::{Command, Output};

const IRIS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/iris.csv");

fn ffc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ffc"))
        .args(args)
        .output()
        .unwrap()
}

fn make_partition(dir: &Path, mode: &str) -> String {
    let path = dir.join(format!("partition_{mode}.json"));
    let out = ffc(&[
        "partition",
        "--input",
        IRIS,
        "--clients",
        "10",
        "--mode",
        mode,
        "--seed",
        "7",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    path.to_str().unwrap().to_owned()
}

fn write_config(dir: &Path, partition: &str, extra: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(
        &path,
        format!(r#"{{"dataset": "{IRIS}", "partition": "{partition}"{extra}}}"#),
    )
    .unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn partition_iid_prints_sizes_and_histograms() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    let out = ffc(&[
        "partition", "--input", IRIS, "--clients", "10", "--mode", "iid", "--seed", "7", "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    for id in 0..10 {
        assert!(stdout.contains(&format!("client {id}: 15 samples")), "{stdout}");
    }
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(parsed["mode"], "iid");
    assert_eq!(parsed["seed"], 7);
    assert_eq!(parsed["clients"].as_object().unwrap().len(), 10);
}

#[test]
fn partition_noniid_skews_labels() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    let out = ffc(&[
        "partition", "--input", IRIS, "--clients", "10", "--mode", "noniid", "--shards", "2",
        "--seed", "5", "--out", path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    // With label-sorted shards every printed histogram names at most two classes.
    for line in stdout.lines().filter(|l| l.starts_with("client ")) {
        let histogram = line.split('{').nth(1).unwrap();
        assert!(histogram.matches(':').count() <= 2, "{line}");
    }
}

#[test]
fn partition_rejects_single_client() {
    let dir = tempfile::tempdir().unwrap();
    let out = ffc(&[
        "partition", "--input", IRIS, "--clients", "1", "--mode", "iid", "--out",
        dir.path().join("p.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("at least 2"), "{stderr}");
}

#[test]
fn run_produces_three_parseable_outputs_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let partition = make_partition(dir.path(), "iid");
    let config = write_config(dir.path(), &partition, r#", "global_rounds": 3"#);

    let mut snapshots = Vec::new();
    for name in ["first", "second"] {
        let out_dir = dir.path().join(name);
        let out = ffc(&["run", "--config", &config, "--out", out_dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let results: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out_dir.join("results.json")).unwrap())
                .unwrap();
        assert!(results["acc_constructed"].is_f64() || results["acc_constructed"].is_u64());
        assert!(results["acc_baseline"].is_f64() || results["acc_baseline"].is_u64());
        assert_eq!(results["rounds"], 3);
        let features: Vec<serde_json::Value> =
            serde_json::from_str(&std::fs::read_to_string(out_dir.join("features.json")).unwrap())
                .unwrap();
        assert!(!features.is_empty());
        assert_eq!(
            std::fs::read_to_string(out_dir.join("rounds.jsonl")).unwrap().lines().count(),
            3
        );
        snapshots.push(
            ["results.json", "rounds.jsonl", "features.json"]
                .map(|f| std::fs::read(out_dir.join(f)).unwrap()),
        );
    }
    assert_eq!(snapshots[0], snapshots[1]);
}

#[test]
fn run_rejects_zero_rounds() {
    let dir = tempfile::tempdir().unwrap();
    let partition = make_partition(dir.path(), "iid");
    let config = write_config(dir.path(), &partition, r#", "global_rounds": 0"#);
    let out = ffc(&["run", "--config", &config, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("at least 1 round"));
}

#[test]
fn run_reports_missing_partition_path() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "/nonexistent/partition.json", "");
    let out = ffc(&["run", "--config", &config, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("/nonexistent/partition.json"), "{stderr}");
}

#[test]
fn run_rejects_unknown_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    let partition = make_partition(dir.path(), "iid");
    let config = write_config(dir.path(), &partition, r#", "typo_knob": 3"#);
    let out = ffc(&["run", "--config", &config, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("typo_knob"));
}

#[test]
fn unknown_flag_exits_two() {
    let out = ffc(&["run", "--nonsense"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn evaluate_scores_saved_features() {
    let dir = tempfile::tempdir().unwrap();
    let partition = make_partition(dir.path(), "iid");
    let config = write_config(dir.path(), &partition, r#", "global_rounds": 3"#);
    let out_dir = dir.path().join("out");
    let out = ffc(&["run", "--config", &config, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success());

    let eval = ffc(&[
        "evaluate",
        "--input",
        IRIS,
        "--features",
        out_dir.join("features.json").to_str().unwrap(),
        "--seed",
        "42",
    ]);
    assert!(eval.status.success(), "{}", String::from_utf8_lossy(&eval.stderr));
    let summary: serde_json::Value =
        serde_json::from_slice(&eval.stdout).unwrap();
    // Same dataset, same master seed: evaluate reproduces the run's split,
    // so the reported accuracy matches results.json.
    let results: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("results.json")).unwrap())
            .unwrap();
    assert_eq!(summary["acc_constructed"], results["acc_constructed"]);
    assert_eq!(summary["acc_baseline"], results["acc_baseline"]);
    assert_eq!(summary["tf"], 4);
}

#[test]
fn ffc_threads_env_matches_flag_results() {
    let dir = tempfile::tempdir().unwrap();
    let partition = make_partition(dir.path(), "iid");
    let config = write_config(dir.path(), &partition, r#", "global_rounds": 3"#);

    let flag_out = dir.path().join("flag");
    let out = ffc(&[
        "run", "--config", &config, "--out", flag_out.to_str().unwrap(), "--threads", "1",
    ]);
    assert!(out.status.success());

    let env_out = dir.path().join("env");
    let out = Command::new(env!("CARGO_BIN_EXE_ffc"))
        .args(["run", "--config", &config, "--out", env_out.to_str().unwrap()])
        .env("FFC_THREADS", "3")
        .output()
        .unwrap();
    assert!(out.status.success());

    for name in ["results.json", "rounds.jsonl", "features.json"] {
        assert_eq!(
            std::fs::read(flag_out.join(name)).unwrap(),
            std::fs::read(env_out.join(name)).unwrap(),
            "{name} differs between --threads 1 and FFC_THREADS=3"
        );
    }
}

#[test]
fn baseline_reports_accuracy_band() {
    let out = ffc(&["baseline", "--input", IRIS, "--seed", "1"]);
    assert!(out.status.success());
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let acc = summary["acc_baseline"].as_f64().unwrap();
    assert!((80.0..=100.0).contains(&acc), "baseline accuracy {acc}");
    assert_eq!(summary["tf"], 4);
}
