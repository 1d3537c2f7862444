//! End-to-end runs of the command-line front end.

use std::path::Path;

use cbf_mild::cli::cli_main;
use cbf_mild::config::RunConfig;

fn run(args: &[&str]) -> i32 {
    let mut argv = vec!["cbf-mild", "--quiet"];
    argv.extend_from_slice(args);
    cli_main(argv)
}

fn write_config(dir: &Path, cfg: &RunConfig) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, cfg.to_toml().unwrap()).unwrap();
    path.to_str().unwrap().to_owned()
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let mut rd = csv::Reader::from_path(path).unwrap();
    let idx = rd.headers().unwrap().iter().position(|h| h == name).unwrap();
    rd.records()
        .map(|r| r.unwrap()[idx].to_owned())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().unwrap())
        .collect()
}

#[test]
fn budget_reports_the_golden_root() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let code = run(&["--out", out, "budget", "--dim", "3", "--r", "3", "--p", "6", "--c", "1", "--k", "1"]);
    assert_eq!(code, 0);
    let t = column(&dir.path().join("budget.csv"), "T_star");
    assert!((t[0] - 0.1458980338).abs() < 1e-9, "{}", t[0]);
    assert!(t[1] <= t[0] && t[2] <= t[1]);
}

#[test]
fn linear_deterministic_run_is_heat_flow() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.model.convection = false;
    cfg.model.damping = false;
    let path = write_config(dir.path(), &cfg);
    let out = dir.path().join("out");
    assert_eq!(run(&["--config", &path, "--out", out.to_str().unwrap(), "deterministic"]), 0);
    let file = out.join("trajectory.csv");
    let (t, l2) = (column(&file, "t"), column(&file, "norm_2"));
    // Taylor-Green sits on |k|^2 = 2
    for (t, n) in t.iter().zip(&l2) {
        assert!((n - l2[0] * (-2.0 * t).exp()).abs() <= 1e-12 * l2[0], "t = {t}");
    }
    assert!(column(&out.join("trace.csv"), "D_n").len() >= 1);
}

#[test]
fn repeated_runs_write_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.grid.n = 16;
    cfg.noise.family = cbf_mild::config::FamilyConfig::Wiener;
    cfg.noise.sigma = 0.1;
    cfg.noise.paths = 4;
    let path = write_config(dir.path(), &cfg);
    let outs: Vec<_> = ["a", "b"].iter().map(|n| dir.path().join(n)).collect();
    for out in &outs {
        for cmd in ["stochastic", "noise"] {
            assert_eq!(run(&["--config", &path, "--out", out.to_str().unwrap(), "--seed", "5", cmd]), 0);
        }
    }
    for name in ["ensemble.csv", "noise.csv", "noise_diagnostics.csv", "summary.toml"] {
        assert_eq!(std::fs::read(outs[0].join(name)).unwrap(), std::fs::read(outs[1].join(name)).unwrap(), "{name}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(run(&["frobnicate"]), 1);
    assert_eq!(run(&["deterministic", "--no-such-flag"]), 1);
    assert_eq!(cli_main(["cbf-mild", "--help"]), 0);

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[grid]\ndim = 2\nn = 16\nbogus = 1\n").unwrap();
    assert_eq!(run(&["--config", bad.to_str().unwrap(), "deterministic"]), 1);
    let err = RunConfig::from_toml("[grid]\ndim = 2\nn = 16\nbogus = 1\n").unwrap_err().to_string();
    assert!(err.contains("grid"), "{err}");

    let gate = dir.path().join("gate.toml");
    std::fs::write(&gate, "[model]\nr = 5.0\np = 5.0\n[grid]\ndim = 3\nn = 8\n").unwrap();
    assert_eq!(run(&["--config", gate.to_str().unwrap(), "deterministic"]), 1);

    assert_eq!(run(&["--out", out, "budget", "--dim", "2", "--r", "3", "--p", "6", "--c", "1", "--f0", "1e6"]), 2);
}

#[test]
fn check_passes_on_defaults() {
    assert_eq!(run(&["check"]), 0);
}

#[test]
fn estimates_writes_a_reusable_constants_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.grid.n = 16;
    cfg.lab.samples = 4;
    let path = write_config(dir.path(), &cfg);
    let out = dir.path().join("out");
    assert_eq!(run(&["--config", &path, "--out", out.to_str().unwrap(), "estimates"]), 0);
    assert_eq!(column(&out.join("constants.csv"), "C_measured").len(), 5);

    cfg.model.constant = None;
    cfg.model.constants_file = Some(out.join("constants.toml"));
    let path = write_config(dir.path(), &cfg);
    assert_eq!(run(&["--config", &path, "--out", out.to_str().unwrap(), "budget"]), 0);
}
