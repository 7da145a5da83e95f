//! End-to-end CLI tests: exit codes, determinism, config diagnostics.

use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_itocalc"))
}

fn read(path: &Path) -> Vec<u8> {
    fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn passing_run_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["occupation", "--paths", "32", "--steps", "4096"])
        .args(["--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(dir.path().join("occupation.csv").exists());
    assert!(dir.path().join("report.json").exists());
    let report: serde_json::Value =
        serde_json::from_slice(&read(&dir.path().join("report.json"))).unwrap();
    assert_eq!(report["rng_algorithm"], "chacha12");
    assert_eq!(report["passed"], true);
}

#[test]
fn tolerance_failure_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // an impossible tolerance fails the verdict but is not a usage error
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"kind": "formula-check", "function": "tanaka", "n_steps": 1024,
            "n_paths": 16, "tolerance": 1e-12}"#,
    )
    .unwrap();
    let out = bin()
        .args(["check", "--config", cfg.to_str().unwrap()])
        .args(["--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn malformed_config_exits_two_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, "{\n  \"kind\": \"formula-check\",\n  broken\n}").unwrap();
    let out = bin()
        .args(["check", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "missing diagnostics: {err}");
}

#[test]
fn kind_mismatch_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"kind": "krylov", "n_bound": 2.0, "t": 1.0}"#).unwrap();
    let out = bin()
        .args(["check", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not match"));
}

#[test]
fn unknown_flag_exits_two() {
    let out = bin().args(["check", "--definitely-not-a-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    for d in [&d1, &d2] {
        let out = bin()
            .args(["check", "--paths", "24", "--steps", "2048", "--seed", "99"])
            .args(["--out", d.path().to_str().unwrap()])
            .env("ITOCALC_WORKERS", if d.path() == d1.path() { "1" } else { "4" })
            .output()
            .unwrap();
        assert!(out.status.code().is_some());
    }
    assert_eq!(
        read(&d1.path().join("formula_check.csv")),
        read(&d2.path().join("formula_check.csv")),
        "CSV bodies must not depend on run or worker count"
    );
}

#[test]
fn grid_file_surface_through_cli() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("surface.txt");
    fs::write(&grid, "3 3 0 1 0 1\n0 0 0\n0 0.5 1\n0 1 2\n").unwrap();
    let out = bin()
        .args(["variation", "--grid-file", grid.to_str().unwrap()])
        .args(["--rect", "0", "1", "0", "1"])
        .args(["--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("variation"), "{text}");
}

#[test]
fn csv_format_skips_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["occupation", "--paths", "8", "--steps", "1024", "--format", "csv"])
        .args(["--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("occupation.csv").exists());
    assert!(!dir.path().join("report.json").exists());
}
