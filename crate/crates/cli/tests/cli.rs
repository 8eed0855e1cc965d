use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use ksglasso::io::{read_matrix_csv, read_sym_csv};
use ksglasso::kron_sum_dense;
use ksglasso::solver::threshold_components;
use tempfile::TempDir;

fn ksglasso(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ksglasso")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn simulate(dir: &Path, extra: &[&str]) -> PathBuf {
    let out = dir.join("sim");
    let mut args = vec!["simulate", "--out", p(&out)];
    args.extend_from_slice(extra);
    let res = ksglasso(&args);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    out
}

fn toy_data(dir: &Path) -> PathBuf {
    simulate(dir, &["--kind", "random", "--p", "6", "--q", "5", "--nnz", "18", "--n", "4", "--seed", "3"])
}

fn data_args(sim: &Path, n: usize) -> Vec<String> {
    (0..n)
        .flat_map(|i| ["--data".to_string(), sim.join(format!("data_{i:03}.csv")).display().to_string()])
        .collect()
}

fn run_estimate(sim: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args: Vec<String> = vec!["estimate".into(), "--out".into(), p(out).into()];
    args.extend(data_args(sim, 4));
    args.extend(extra.iter().map(|s| s.to_string()));
    ksglasso(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

fn trace_rows(dir: &Path) -> usize {
    fs::read_to_string(dir.join("trace.csv")).unwrap().lines().count() - 1
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn simulate_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let args = ["--kind", "random", "--p", "20", "--q", "10", "--nnz", "60", "--n", "1", "--seed", "7"];
    let a = simulate(&dir.path().join("a"), &args);
    let b = simulate(&dir.path().join("b"), &args);
    for name in ["theta_true.csv", "psi_true.csv", "data_000.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    assert!(!a.join("data_001.csv").exists());
    let y = read_matrix_csv(&a.join("data_000.csv")).unwrap();
    assert_eq!((y.nrows(), y.ncols()), (10, 20));
    assert_eq!(manifest(&a)["status"], "ok");
}

#[test]
fn clustered_graph_has_one_component_per_block() {
    let dir = TempDir::new().unwrap();
    let sim = simulate(dir.path(), &["--kind", "clustered", "--p", "100", "--blocks", "5", "--seed", "2"]);
    let theta = read_sym_csv(&sim.join("theta_true.csv")).unwrap();
    let psi = read_sym_csv(&sim.join("psi_true.csv")).unwrap();
    assert_eq!((theta.dim(), psi.dim()), (100, 100));
    for m in [&theta, &psi] {
        let labels = threshold_components(m, 0.0);
        assert_eq!(labels.iter().max().map(|l| l + 1), Some(5));
    }
}

#[test]
fn simulate_rejects_incomplete_arguments() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("x");
    let res = ksglasso(&["simulate", "--kind", "random", "--p", "5", "--q", "5", "--nnz", "10"]);
    assert_eq!(code(&res), 2);
    let res = ksglasso(&["simulate", "--kind", "random", "--p", "5", "--q", "5", "--out", p(&out)]);
    assert_eq!(code(&res), 2);
    let res = ksglasso(&["simulate", "--kind", "clustered", "--p", "5", "--q", "5", "--out", p(&out)]);
    assert_eq!(code(&res), 2);
    assert!(!out.exists());
}

#[test]
fn large_penalty_gives_diagonal_estimates() {
    let dir = TempDir::new().unwrap();
    let sim = toy_data(dir.path());
    let out = dir.path().join("est");
    let res = run_estimate(&sim, &out, &["--gamma-theta", "100"]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    for name in ["theta_hat.csv", "psi_hat.csv"] {
        let m = read_sym_csv(&out.join(name)).unwrap();
        assert_eq!(m.nnz_off(0.0), 0, "{name} has off-diagonal entries");
    }
    let man = manifest(&out);
    assert_eq!(man["inputs"].as_array().unwrap().len(), 4);
    assert_eq!(man["exit_code"], 0);
}

#[test]
fn exact_hessian_needs_no_more_iterations_than_truncated() {
    let dir = TempDir::new().unwrap();
    let sim = toy_data(dir.path());
    let (exact, trunc) = (dir.path().join("k0"), dir.path().join("k1"));
    let common = ["--gamma-theta", "0.1", "--eps", "1e-8", "--max-iters", "500", "--sweeps", "40"];
    assert_eq!(code(&run_estimate(&sim, &exact, &[&common[..], &["--k", "0"]].concat())), 0);
    assert_eq!(code(&run_estimate(&sim, &trunc, &[&common[..], &["--k", "1"]].concat())), 0);
    assert!(trace_rows(&exact) <= trace_rows(&trunc));
}

#[test]
fn trace_ratio_does_not_change_the_kronecker_sum() {
    let dir = TempDir::new().unwrap();
    let sim = toy_data(dir.path());
    let mut sums = Vec::new();
    let mut thetas = Vec::new();
    for rho in ["1", "2"] {
        let out = dir.path().join(format!("rho{rho}"));
        let res = run_estimate(&sim, &out, &["--rho", rho, "--k", "0", "--eps", "1e-6"]);
        assert_eq!(code(&res), 0);
        let theta = read_sym_csv(&out.join("theta_hat.csv")).unwrap();
        let psi = read_sym_csv(&out.join("psi_hat.csv")).unwrap();
        let rho: f64 = rho.parse().unwrap();
        assert!((psi.as_matrix().trace() / theta.as_matrix().trace() - rho).abs() < 1e-9);
        sums.push(kron_sum_dense(&theta, &psi).unwrap().as_matrix().clone());
        thetas.push(theta.into_inner());
    }
    assert!((&sums[0] - &sums[1]).amax() < 1e-8);
    let diff = &thetas[0] - &thetas[1];
    let shift = diff[(0, 0)];
    assert!(shift.abs() > 1e-6);
    for i in 0..diff.nrows() {
        for j in 0..diff.ncols() {
            let expected = if i == j { shift } else { 0.0 };
            assert!((diff[(i, j)] - expected).abs() < 1e-8, "Θ difference at ({i}, {j}) is {}", diff[(i, j)]);
        }
    }
}

#[test]
fn iteration_cap_exits_four_and_keeps_estimates() {
    let dir = TempDir::new().unwrap();
    let sim = toy_data(dir.path());
    let out = dir.path().join("cap");
    let res = run_estimate(&sim, &out, &["--max-iters", "1", "--eps", "1e-12"]);
    assert_eq!(code(&res), 4);
    assert!(out.join("theta_hat.csv").exists());
    assert_eq!(manifest(&out)["status"], "max_iterations");
}

#[test]
fn mismatched_samples_exit_two() {
    let dir = TempDir::new().unwrap();
    let a = simulate(&dir.path().join("a"), &["--kind", "random", "--p", "5", "--q", "4", "--nnz", "9"]);
    let b = simulate(&dir.path().join("b"), &["--kind", "random", "--p", "4", "--q", "4", "--nnz", "8"]);
    let out = dir.path().join("est");
    let res = ksglasso(&[
        "estimate",
        "--data",
        p(&a.join("data_000.csv")),
        "--data",
        p(&b.join("data_000.csv")),
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&res), 2);
    assert!(!out.exists());
}

#[test]
fn missing_input_file_exits_three() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("est");
    let res = ksglasso(&["estimate", "--data", p(&dir.path().join("nope.csv")), "--out", p(&out)]);
    assert_eq!(code(&res), 3);
}

#[test]
fn reruns_write_identical_traces() {
    let dir = TempDir::new().unwrap();
    let sim = toy_data(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&run_estimate(&sim, &a, &["--seed", "9"])), 0);
    assert_eq!(code(&run_estimate(&sim, &b, &["--seed", "9"])), 0);
    for name in ["trace.csv", "theta_hat.csv", "psi_hat.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn eval_single_gamma_gives_one_pr_row() {
    let dir = TempDir::new().unwrap();
    let sim = toy_data(dir.path());
    let out = dir.path().join("ev");
    let res = ksglasso(&[
        "eval",
        "--data",
        p(&sim.join("data_000.csv")),
        "--truth-theta",
        p(&sim.join("theta_true.csv")),
        "--truth-psi",
        p(&sim.join("psi_true.csv")),
        "--gamma-grid",
        "0.2",
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let pr = fs::read_to_string(out.join("pr_curve.csv")).unwrap();
    assert_eq!(pr.lines().count(), 2);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["metrics"]["best_gamma"], 0.2);
    assert!(out.join("theta_hat.csv").exists());
}

#[test]
fn eval_without_truth_skips_pr() {
    let dir = TempDir::new().unwrap();
    let sim = toy_data(dir.path());
    let out = dir.path().join("ev");
    let mut args: Vec<String> = vec!["eval".into(), "--grid-points".into(), "3".into(), "--out".into(), p(&out).into()];
    args.extend(data_args(&sim, 2));
    let res = ksglasso(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code(&res), 0);
    assert!(!out.join("pr_curve.csv").exists());
    assert_eq!(fs::read_to_string(out.join("bic.csv")).unwrap().lines().count(), 4);
}

#[test]
fn eval_rejects_an_empty_grid() {
    let dir = TempDir::new().unwrap();
    let sim = toy_data(dir.path());
    let out = dir.path().join("ev");
    let res = ksglasso(&["eval", "--data", p(&sim.join("data_000.csv")), "--gamma-grid", " , ", "--out", p(&out)]);
    assert_eq!(code(&res), 2);
    assert!(!out.exists());
}

#[test]
fn command_line_overrides_config_file() {
    let dir = TempDir::new().unwrap();
    let sim = toy_data(dir.path());
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, format!("max_iters=1\neps=1e-12\ndata={}\n", sim.join("data_000.csv").display())).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let res = ksglasso(&["estimate", "--config", p(&cfg), "--out", p(&a)]);
    assert_eq!(code(&res), 4);
    let res = ksglasso(&["estimate", "--config", p(&cfg), "--max-iters", "200", "--eps", "1e-3", "--out", p(&b)]);
    assert_eq!(code(&res), 0);
    assert_eq!(manifest(&b)["config"]["max_newton_iters"], 200);
}

#[test]
fn moderate_problem_round_trips_quickly() {
    let dir = TempDir::new().unwrap();
    let start = Instant::now();
    let sim = simulate(dir.path(), &["--kind", "random", "--p", "30", "--q", "30", "--nnz", "300", "--n", "5", "--seed", "1"]);
    let est = dir.path().join("est");
    let mut args: Vec<String> = vec!["estimate".into(), "--out".into(), p(&est).into()];
    args.extend(data_args(&sim, 5));
    let res = ksglasso(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(matches!(code(&res), 0 | 4));
    assert!(est.join("theta_hat.csv").exists() && est.join("trace.csv").exists());

    let ev = dir.path().join("eval");
    let mut args: Vec<String> = vec!["eval".into(), "--grid-points".into(), "5".into(), "--out".into(), p(&ev).into()];
    args.extend(["--truth-theta", "--truth-psi"].iter().zip(["theta_true.csv", "psi_true.csv"]).flat_map(|(f, n)| {
        [f.to_string(), sim.join(n).display().to_string()]
    }));
    args.extend(data_args(&sim, 5));
    let res = ksglasso(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    assert!(ev.join("pr_curve.csv").exists());
    assert!(start.elapsed().as_secs() < 60, "round trip took {:?}", start.elapsed());
}

/// Mean precision/recall per grid point over independent datasets, the
/// aggregate produced by `scripts/pr_batch.sh`.
#[test]
fn ten_seed_mean_curve_beats_the_density_baseline() {
    let dir = TempDir::new().unwrap();
    let grid = "0.5,0.3,0.2,0.12,0.08,0.05";
    let mut sums = vec![(0.0, 0.0); 6];
    let mut baseline = 0.0;
    for seed in 0..10 {
        let seed = seed.to_string();
        let root = dir.path().join(&seed);
        let sim = simulate(&root, &["--kind", "random", "--p", "15", "--nnz", "60", "--n", "10", "--seed", &seed]);
        let out = root.join("eval");
        let mut args: Vec<String> = vec!["eval".into(), "--gamma-grid".into(), grid.into(), "--out".into(), p(&out).into()];
        args.extend(["--truth-theta", "--truth-psi"].iter().zip(["theta_true.csv", "psi_true.csv"]).flat_map(|(f, n)| {
            [f.to_string(), sim.join(n).display().to_string()]
        }));
        args.extend(data_args(&sim, 10));
        let res = ksglasso(&args.iter().map(String::as_str).collect::<Vec<_>>());
        assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
        let mut reader = csv::Reader::from_path(out.join("pr_curve.csv")).unwrap();
        for (acc, row) in sums.iter_mut().zip(reader.records()) {
            let row = row.unwrap();
            acc.0 += row[1].parse::<f64>().unwrap() / 10.0;
            acc.1 += row[2].parse::<f64>().unwrap() / 10.0;
        }
        let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
        baseline += summary["metrics"]["baseline"].as_f64().unwrap() / 10.0;
    }
    let informative: Vec<_> = sums.iter().filter(|(_, r)| *r > 0.0).collect();
    assert!(!informative.is_empty());
    for (precision, recall) in informative {
        assert!(*precision > baseline, "mean precision {precision} at recall {recall}, baseline {baseline}");
    }
}
