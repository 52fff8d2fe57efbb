use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use maxassoc::data::DataMatrix;
use maxassoc::simlab::{build_sigma, sample, Distribution, Setting};
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_maxassoc"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_matrix(dir: &Path, name: &str, m: &DataMatrix) -> PathBuf {
    let path = dir.join(name);
    m.write_csv(std::fs::File::create(&path).unwrap()).unwrap();
    path
}

fn setting1_files(dir: &Path, n: usize) -> (PathBuf, PathBuf) {
    let (sigma, _) = build_sigma(Setting::LowDim);
    let (x, y) = sample(&sigma, n, Distribution::Normal, 99).unwrap();
    (write_matrix(dir, "x.csv", &x), write_matrix(dir, "y.csv", &y))
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn fit_recovers_first_association_from_csv() {
    let dir = TempDir::new().unwrap();
    let (x, y) = setting1_files(dir.path(), 1000);
    let out = run(&[
        "fit", "--x", s(&x), "--y", s(&y), "--estimator", "pearson", "--orders", "1",
        "--alpha-a", "0", "--alpha-b", "0", "--bound-a", "10", "--bound-b", "10",
    ]);
    let v = json(&out);
    assert_eq!(v["schema_version"], 1);
    let rho = v["orders"][0]["association"].as_f64().unwrap();
    assert!((rho - 0.9).abs() < 0.1, "{rho}");
    assert_eq!(v["orders"][0]["a"].as_array().unwrap().len(), 10);
    assert!(v["orders"][0]["a"][0]["variable"].is_string());
    assert!(v["converged"].is_boolean());
}

#[test]
fn mismatched_rows_fail() {
    let dir = TempDir::new().unwrap();
    let x = DataMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 0.5], vec![3.0, 1.0]]).unwrap();
    let y = DataMatrix::from_rows(&[vec![1.0], vec![0.0], vec![2.0], vec![4.0]]).unwrap();
    let (xp, yp) = (write_matrix(dir.path(), "x.csv", &x), write_matrix(dir.path(), "y.csv", &y));
    let out = run(&["fit", "--x", s(&xp), "--y", s(&yp)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("row count mismatch"));
}

#[test]
fn fit_is_deterministic_given_seed() {
    let dir = TempDir::new().unwrap();
    let (x, y) = setting1_files(dir.path(), 120);
    let args = [
        "fit", "--x", s(&x), "--y", s(&y), "--estimator", "spearman", "--budget", "12",
        "--test-fraction", "0.25", "--seed", "5",
    ];
    let first = run(&args);
    let second = run(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
    let v = json(&first);
    assert_eq!(v["test"]["n_test"], 30);
    assert_eq!(v["n_train"], 90);
    assert!(v["test"]["trimmed_residual_score"].as_f64().unwrap() <= v["test"]["residual_score"].as_f64().unwrap());
    assert_eq!(v["orders"][0]["hyperparameters"]["searched"], true);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = TempDir::new().unwrap();
    let (x, y) = setting1_files(dir.path(), 100);
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "estimator = \"kendall\"\nbound_a = 1.0\nbound_b = 1.0\n\n[optimizer]\nmax_inner = 3000\n",
    )
    .unwrap();
    let from_file = json(&run(&["fit", "--config", s(&cfg), "--x", s(&x), "--y", s(&y)]));
    assert_eq!(from_file["estimator"], "kendall");
    assert_eq!(from_file["orders"][0]["hyperparameters"]["bound_a"], 1.0);
    let flagged = json(&run(&[
        "fit", "--config", s(&cfg), "--x", s(&x), "--y", s(&y), "--estimator", "ogk",
    ]));
    assert_eq!(flagged["estimator"], "ogk");
}

#[test]
fn simulate_writes_rows_per_order() {
    let dir = TempDir::new().unwrap();
    let out = run(&[
        "simulate", "--setting", "low_dim", "--estimator", "spearman", "--replicates", "5",
        "--seed", "7", "--bound-a", "1", "--bound-b", "1", "--out-dir", s(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("replicates.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    for order in ["1", "2"] {
        assert_eq!(rows.iter().filter(|r| r.split(',').nth(2) == Some(order)).count(), 5);
    }
    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["summary"]["replicates"], 5);
    assert!(String::from_utf8_lossy(&out.stdout).contains("association"));
}

#[test]
fn simulate_clean_pearson_association() {
    let dir = TempDir::new().unwrap();
    let out = bin()
        .args([
            "simulate", "--setting", "low_dim", "--replicates", "20", "--orders", "1",
            "--bound-a", "1", "--bound-b", "1", "--out-dir", s(dir.path()),
        ])
        .env("MAXASSOC_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    let mean = summary["summary"]["orders"][0]["association"]["mean"].as_f64().unwrap();
    assert!((0.8..=1.0).contains(&mean), "{mean}");
}

#[test]
fn simulate_rejects_bad_inputs() {
    let out = run(&["simulate", "--setting", "low_dim", "--contamination-rate", "0.6"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("0.5"));

    let out = run(&["simulate", "--setting", "mid_dim"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("low_dim") && err.contains("high_dim"), "{err}");
}

#[test]
fn oracle_named_settings() {
    let v = json(&run(&["oracle", "--setting", "low_dim"]));
    let rhos: Vec<f64> = v["rhos"].as_array().unwrap().iter().map(|r| r.as_f64().unwrap()).collect();
    assert!((rhos[0] - 0.9).abs() < 1e-10 && (rhos[1] - 0.7).abs() < 1e-10);
    let v = json(&run(&["oracle", "--setting", "high_dim"]));
    assert!((v["rhos"][0].as_f64().unwrap() - 0.989).abs() < 1e-3);
}

#[test]
fn oracle_covariance_file_checks() {
    let dir = TempDir::new().unwrap();
    let asym = DataMatrix::from_rows(&[
        vec![1.0, 0.2, 0.1],
        vec![0.3, 1.0, 0.0],
        vec![0.1, 0.0, 1.0],
    ])
    .unwrap();
    let path = write_matrix(dir.path(), "asym.csv", &asym);
    let out = run(&["oracle", "--cov", s(&path), "--p", "1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("not symmetric"));

    let singular = DataMatrix::from_rows(&[
        vec![1.0, 0.0, 0.0],
        vec![0.0, 1.0, 1.0],
        vec![0.0, 1.0, 1.0],
    ])
    .unwrap();
    let path = write_matrix(dir.path(), "sing.csv", &singular);
    let out = run(&["oracle", "--cov", s(&path), "--p", "1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("yy block is singular"));

    let ok = DataMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
    let path = write_matrix(dir.path(), "ok.csv", &ok);
    let v = json(&run(&["oracle", "--cov", s(&path), "--p", "1"]));
    assert!((v["rhos"][0].as_f64().unwrap() - 0.5).abs() < 1e-12);
}
