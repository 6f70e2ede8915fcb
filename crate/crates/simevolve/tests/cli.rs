//! Black-box tests of the command-line binary: exit codes, determinism, and
//! output formats.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_simevolve"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn tiny_dataset(dir: &Path) -> PathBuf {
    let path = dir.join("tiny.csv");
    let out = bin()
        .args(["generate", "--kind", "gaussian", "--dims", "2", "--clusters", "2"])
        .args(["--seed", "3", "--min-size", "12", "--max-size", "16"])
        .arg("--out")
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn generate_is_deterministic_and_labeled() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = bin()
            .args(["generate", "--kind", "elliptical", "--dims", "3", "--clusters", "2"])
            .args(["--seed", "9", "--min-size", "10", "--max-size", "12"])
            .arg("--out")
            .arg(p)
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    // Header + one label column at the end.
    let text = std::fs::read_to_string(&a).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.ends_with("label"), "header: {header}");
}

#[test]
fn generate_missing_out_is_usage_error() {
    let out = run(&["generate", "--kind", "gaussian", "--dims", "2", "--clusters", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn evolve_zero_generations_still_reports() {
    let dir = tempfile::tempdir().unwrap();
    let data = tiny_dataset(dir.path());
    let out = bin()
        .arg("evolve")
        .arg("--data")
        .arg(&data)
        .args(["--labels", "--pop", "30", "--gens", "0", "--seed", "1"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(stdout_str(&out).trim()).unwrap();
    assert!(report["k"].as_u64().unwrap() >= 1);
    assert!(report["ari"].is_number());
}

#[test]
fn evolve_single_crossover_with_multiple_trees_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = tiny_dataset(dir.path());
    let out = bin()
        .arg("evolve")
        .arg("--data")
        .arg(&data)
        .args(["--labels", "--trees", "3", "--crossover", "single"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cluster_applies_model_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let data = tiny_dataset(dir.path());
    let model = dir.path().join("model.txt");
    std::fs::write(&model, "trees=1\n(sub (const 0) (abssub (f 0 0) (f 1 0)))\n").unwrap();
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let out = bin()
            .arg("cluster")
            .arg("--data")
            .arg(&data)
            .arg("--model")
            .arg(&model)
            .output()
            .unwrap();
        assert!(out.status.success());
        outputs.push(stdout_str(&out));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert!(outputs[0].starts_with("instance_id,cluster_id\n"));
}

#[test]
fn cluster_dimension_mismatch_is_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = tiny_dataset(dir.path()); // 2 features
    let model = dir.path().join("model.txt");
    std::fs::write(&model, "trees=1\n(f 0 5)\n").unwrap();
    let out = bin()
        .arg("cluster")
        .arg("--data")
        .arg(&data)
        .arg("--model")
        .arg(&model)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dimension"));
}

#[test]
fn evaluate_identical_partitions_yield_ari_one() {
    let dir = tempfile::tempdir().unwrap();
    let data = tiny_dataset(dir.path());
    let assign = dir.path().join("assign.csv");
    let out = bin()
        .arg("baseline")
        .arg("--data")
        .arg(&data)
        .args(["--algo", "ng", "--nn", "2"])
        .arg("--out")
        .arg(&assign)
        .output()
        .unwrap();
    assert!(out.status.success());
    let out = bin()
        .arg("evaluate")
        .arg("--pred")
        .arg(&assign)
        .arg("--gold")
        .arg(&assign)
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(stdout_str(&out).trim()).unwrap();
    assert_eq!(v["ari"].as_f64().unwrap(), 1.0);
}

#[test]
fn evaluate_accepts_labeled_dataset_as_gold() {
    let dir = tempfile::tempdir().unwrap();
    let data = tiny_dataset(dir.path());
    let assign = dir.path().join("assign.csv");
    let out = bin()
        .arg("baseline")
        .arg("--data")
        .arg(&data)
        .args(["--labels", "--algo", "kmeanspp", "--k", "2", "--seed", "4"])
        .arg("--out")
        .arg(&assign)
        .output()
        .unwrap();
    assert!(out.status.success());
    let out = bin()
        .arg("evaluate")
        .arg("--pred")
        .arg(&assign)
        .arg("--gold")
        .arg(&data)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(stdout_str(&out).trim()).unwrap();
    assert!(v["ari"].is_number());
}

#[test]
fn baseline_kmeanspp_without_k_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = tiny_dataset(dir.path());
    let out = bin()
        .arg("baseline")
        .arg("--data")
        .arg(&data)
        .args(["--algo", "kmeanspp"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn benchmark_emits_method_blocks_and_pairwise_tests() {
    let dir = tempfile::tempdir().unwrap();
    let data = tiny_dataset(dir.path());
    let report_path = dir.path().join("report.json");
    let out = bin()
        .arg("benchmark")
        .arg("--data")
        .arg(&data)
        .args(["--labels", "--runs", "3", "--methods", "gpgc-aic,kmeanspp,ng2"])
        .args(["--pop", "30", "--gens", "3", "--seed", "11"])
        .arg("--out")
        .arg(&report_path)
        .env("SIMEVOLVE_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(v["runs"], 3);
    let methods = v["methods"].as_object().unwrap();
    assert_eq!(methods.len(), 3);
    for block in methods.values() {
        for col in ["k", "fitness", "connectedness", "sparsity_mean", "separation_mean", "ari"] {
            assert!(block[col]["mean"].is_number(), "missing {col}");
            assert!(block[col]["std"].is_number());
        }
    }
    assert_eq!(v["pairwise"].as_array().unwrap().len(), 3);
    for t in v["pairwise"].as_array().unwrap() {
        assert_eq!(t["metric"], "ari");
        assert!(t["p"].is_number());
    }
}

#[test]
fn unknown_benchmark_method_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = tiny_dataset(dir.path());
    let out = bin()
        .arg("benchmark")
        .arg("--data")
        .arg(&data)
        .args(["--runs", "1", "--methods", "dbscan"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_thread_env_is_usage_error() {
    let out = bin()
        .arg("--help")
        .env("SIMEVOLVE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_data_file_is_runtime_error() {
    let out = run(&["evolve", "--data", "/nonexistent/x.csv", "--pop", "10", "--gens", "1"]);
    assert_eq!(out.status.code(), Some(1));
}
