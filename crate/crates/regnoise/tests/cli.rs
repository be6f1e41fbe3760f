//! The `lab` binary: listing, usage errors, direct commands and exit codes.

use std::process::Command;

fn lab(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_lab")).args(args).output().expect("lab runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned(), String::from_utf8_lossy(&out.stderr).into_owned())
}

#[test]
fn list_names_every_suite() {
    let (code, out, _) = lab(&["list"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), regnoise::harness::suites().len());
    assert!(out.contains("she-weak-cauchy"));
}

#[test]
fn unknown_suite_and_stray_key_are_usage_errors() {
    let (code, _, err) = lab(&["run", "no-such-suite"]);
    assert_eq!(code, 2, "{err}");
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "modes = 64\n").unwrap();
    let (code, _, err) = lab(&["run", "fbm-covariance", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("modes"));
    std::fs::write(&cfg, "experiment = \"heat-kernel-laws\"\n").unwrap();
    let (code, _, _) = lab(&["run", "fbm-covariance", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 2);
}

#[test]
fn run_writes_report_tables_and_timing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "scale = \"smoke\"\nt_levels = [0.01, 0.1]\n").unwrap();
    let out = dir.path().join("out");
    let (code, stdout, err) =
        lab(&["run", "heat-kernel-laws", "--config", cfg.to_str().unwrap(), "--seed", "3", "--workers", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{stdout}{err}");
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["suite"], "heat-kernel-laws");
    assert_eq!(report["seed"], 3);
    assert_eq!(report["passed"], true);
    assert!(out.join("heat_kernel_laws.csv").exists());
    assert!(out.join("timing.json").exists());
}

#[test]
fn failing_suite_exits_with_one() {
    let (code, out, _) = lab(&["run", "kernel-lipschitz", "--smoke"]);
    assert_eq!(code, 1);
    assert!(out.contains("FAIL"));
}

#[test]
fn sewing_run_reports_levels() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = lab(&["sewing", "run", "--germ", "additive", "--levels", "5", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["report"]["sums"].as_array().unwrap().len(), 6);
    assert_eq!(v["report"]["exact"], true);
    assert!(dir.path().join("sewing.json").exists());
    let (code, out, err) = lab(&["sewing", "run", "--germ", "drift", "--levels", "6", "--steps", "256", "--hurst", "0.3"]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let finest = v["report"]["sums"][6][0].as_f64().unwrap();
    assert!(finest.is_finite());
}

#[test]
fn sde_and_she_direct_commands_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let (code, _, err) = lab(&["sde", "solve", "--paths", "5", "--steps", "128", "--out", d]);
    assert_eq!(code, 0, "{err}");
    let rows = std::fs::read_to_string(dir.path().join("paths.csv")).unwrap();
    assert_eq!(rows.lines().count(), 6);
    let (code, out, err) = lab(&["sde", "couple", "--paths", "3", "--steps", "512", "--lambda", "8,16"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("mean_sup_gap"));
    let (code, _, err) = lab(&["she", "convolution", "--modes", "32", "--steps", "64", "--out", d]);
    assert_eq!(code, 0, "{err}");
    let field = std::fs::read_to_string(dir.path().join("field.csv")).unwrap();
    assert_eq!(field.lines().count(), 66);
    let (code, out, err) = lab(&["she", "solve", "--modes", "32", "--steps", "64"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("sup_abs"));
}

#[test]
fn forwarded_suite_accepts_flags() {
    let (code, out, err) =
        lab(&["sde", "min-construction", "--smoke", "--paths", "100", "--steps", "256", "--workers", "1"]);
    assert!(code == 0 || code == 1, "{err}");
    assert!(out.contains("suite min-construction"));
}
