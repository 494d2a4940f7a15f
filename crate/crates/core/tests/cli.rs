//! End-to-end runs of the `snnlab` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn snnlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snnlab"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn snnlab")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn read(dir: &Path, rel: &str) -> String {
    fs::read_to_string(dir.join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

fn csv_value(text: &str, name: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{name},")))
        .unwrap_or_else(|| panic!("no row {name}"))
        .parse()
        .unwrap()
}

const SMALL: &str = "master_seed = 5
[distribution]
d = 3
[model]
m = 32
[training]
n = 16
horizon = 10
[stability]
replicates = 2
[sweep]
n_grid = 16
[check]
pairs = 200
instances = 20
trajectory_runs = 2
";

#[test]
fn check_passes_on_a_valid_config() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "a.cfg", SMALL);
    let out = snnlab(tmp.path(), &["--config", "a.cfg", "--out", "o", "check"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_str(&read(tmp.path(), "o/summary.json")).unwrap();
    assert_eq!(summary["total_violations"], 0);
    assert!(tmp.path().join("o/config.snapshot").exists());
}

#[test]
fn oversized_step_is_reported_as_violations() {
    // η = 5/ρ with strict mode off; at d = 1 the averaged curvature reaches ρ
    let tmp = TempDir::new().unwrap();
    write(
        tmp.path(),
        "b.cfg",
        "master_seed = 7\n[distribution]\nd = 1\n[training]\nstrict_mode = false\neta = 2.7504\n\
         [check]\npairs = 100\ninstances = 10\ntrajectory_runs = 2\n",
    );
    let out = snnlab(tmp.path(), &["--config", "b.cfg", "--out", "o", "check"]);
    assert_eq!(out.status.code(), Some(1));
    let summary: serde_json::Value = serde_json::from_str(&read(tmp.path(), "o/summary.json")).unwrap();
    assert!(summary["total_violations"].as_u64().unwrap() > 0);
}

#[test]
fn strict_mode_refuses_large_step() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "c.cfg", "[distribution]\nd = 3\n[training]\neta = 2.7504\n");
    let out = snnlab(tmp.path(), &["--config", "c.cfg", "--out", "o", "check"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn parse_error_names_the_field() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "d.cfg", "master_seed = 1\n[distribution]\n[model]\nm = 4\n");
    let out = snnlab(tmp.path(), &["--config", "d.cfg", "check"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("distribution.d"));

    write(tmp.path(), "e.cfg", "[distribution]\nd = 3\nwidth = 4\n");
    let out = snnlab(tmp.path(), &["--config", "e.cfg", "check"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("width"));

    let out = snnlab(tmp.path(), &["--config", "missing.cfg", "check"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn budget_is_refused_before_running() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "a.cfg", SMALL);
    let out = snnlab(tmp.path(), &["--config", "a.cfg", "--out", "o", "--budget", "10", "stability"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("budget"));
    assert!(!tmp.path().join("o/per_index.csv").exists());
}

#[test]
fn runs_are_deterministic_across_output_dirs() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "a.cfg", SMALL);
    for dir in ["x", "y"] {
        let out = snnlab(tmp.path(), &["--config", "a.cfg", "--out", dir, "--jobs", "3", "stability"]);
        assert_eq!(out.status.code(), Some(0));
    }
    for f in ["per_index.csv", "per_step.csv", "summary.json", "config.snapshot"] {
        assert_eq!(fs::read(tmp.path().join("x").join(f)).unwrap(), fs::read(tmp.path().join("y").join(f)).unwrap(), "{f}");
    }
    let out = snnlab(tmp.path(), &["--config", "a.cfg", "--out", "z", "--jobs", "1", "stability"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(read(tmp.path(), "x/per_index.csv"), read(tmp.path(), "z/per_index.csv"));
}

#[test]
fn single_point_sweep_matches_stability() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "a.cfg", SMALL);
    assert_eq!(snnlab(tmp.path(), &["--config", "a.cfg", "--out", "s", "stability"]).status.code(), Some(0));
    assert_eq!(snnlab(tmp.path(), &["--config", "a.cfg", "--out", "w", "sweep"]).status.code(), Some(0));
    for f in ["per_index.csv", "per_step.csv"] {
        assert_eq!(read(tmp.path(), &format!("s/{f}")), read(tmp.path(), &format!("w/{f}")), "{f}");
    }
}

#[test]
fn train_then_bounds_from_measured_risks() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "a.cfg", &format!("{SMALL}[bounds]\nrisk_csv = t/scalars.csv\n"));
    assert_eq!(snnlab(tmp.path(), &["--config", "a.cfg", "--out", "t", "train"]).status.code(), Some(0));
    for f in ["scalars.csv", "dataset.csv", "model.bin", "summary.json"] {
        assert!(tmp.path().join("t").join(f).exists(), "{f}");
    }
    assert_eq!(snnlab(tmp.path(), &["--config", "a.cfg", "--out", "b", "bounds"]).status.code(), Some(0));
    let bounds = read(tmp.path(), "b/bounds.csv");
    assert!(csv_value(&bounds, "gen_bound_gd") > 0.0);
    assert!(read(tmp.path(), "b/thresholds.csv").starts_with("name,required_m,configured_m,satisfied"));
    assert_eq!(read(tmp.path(), "b/bounds_by_step.csv").lines().count(), 12);
}

#[test]
fn zero_risks_give_zero_generalization_column() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "r.csv", &format!("empirical_risk\n{}", "0\n".repeat(11)));
    write(tmp.path(), "a.cfg", &format!("{SMALL}[bounds]\nrisk_csv = r.csv\n"));
    let out = snnlab(tmp.path(), &["--config", "a.cfg", "--out", "b", "bounds"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table = read(tmp.path(), "b/bounds_by_step.csv");
    let header: Vec<&str> = table.lines().next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "gen_bound_gd").unwrap();
    for line in table.lines().skip(1) {
        assert_eq!(line.split(',').nth(col).unwrap(), "0", "{line}");
    }
}

#[test]
fn missing_risk_file_is_an_input_error() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "a.cfg", &format!("{SMALL}[bounds]\nrisk_csv = nowhere.csv\n"));
    assert_eq!(snnlab(tmp.path(), &["--config", "a.cfg", "--out", "b", "bounds"]).status.code(), Some(2));
}

#[test]
fn uniform_stability_worked_instance() {
    let tmp = TempDir::new().unwrap();
    write(
        tmp.path(),
        "u.cfg",
        "[distribution]\nd = 5\n[model]\nm = 100\ninit = zeros\n[training]\neta = 0.1\nhorizon = 100\nn = 1000\n",
    );
    let out = snnlab(tmp.path(), &["--config", "u.cfg", "--out", "b", "bounds"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let bounds = read(tmp.path(), "b/bounds.csv");
    assert!((csv_value(&bounds, "rho") - 1.8468).abs() < 5e-5);
    assert!((csv_value(&bounds, "stab_bound_gd_uniform") - 0.334).abs() < 5e-4);
}

#[test]
fn population_risks_gate_the_optimization_bound() {
    let tmp = TempDir::new().unwrap();
    let cfg = format!(
        "{SMALL}[reference]\nbuild = true\nsurrogate_n = 10000\nn_mc = 2000\nmax_steps = 200\n\
         [bounds]\nrisk_csv = t/scalars.csv\npopulation_csv = t/population.csv\n"
    );
    write(tmp.path(), "a.cfg", &cfg);
    assert_eq!(snnlab(tmp.path(), &["--config", "a.cfg", "--out", "t", "train"]).status.code(), Some(0));
    assert!(read(tmp.path(), "t/population.csv").starts_with("step,population_risk,population_se"));
    assert_eq!(snnlab(tmp.path(), &["--config", "a.cfg", "--out", "b", "bounds"]).status.code(), Some(0));
    let summary: serde_json::Value = serde_json::from_str(&read(tmp.path(), "b/summary.json")).unwrap();
    let margin = summary["report"]["ws_lower_margin"].as_f64().unwrap();
    assert_eq!(summary["report"]["opt_bound_gd_conditional"], margin < 0.0);

    write(tmp.path(), "c.cfg", &format!("{SMALL}[bounds]\nrisk_csv = t/scalars.csv\n"));
    assert_eq!(snnlab(tmp.path(), &["--config", "c.cfg", "--out", "c", "bounds"]).status.code(), Some(0));
    let summary: serde_json::Value = serde_json::from_str(&read(tmp.path(), "c/summary.json")).unwrap();
    assert_eq!(summary["report"]["opt_bound_gd_conditional"], true);
}
