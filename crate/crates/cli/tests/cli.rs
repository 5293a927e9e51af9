use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_superform"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("spawn superform")
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

fn configs() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs"))
}

#[test]
fn ded_pass_and_fail_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = run(dir.path(), &["ded", "verify", "--lambda", "[[x1^2 d(2)]]", "--candidate", "[[2*x1 d(1,2)]]"]);
    assert_eq!(good.status.code(), Some(0), "{}", String::from_utf8_lossy(&good.stderr));
    let r = report(dir.path());
    assert_eq!(r["status"], "PASS");
    assert!(r["result"]["max_residual"].as_f64().unwrap() < 1e-6);
    assert_eq!(r["manifest"]["config"]["lambda"], "[[x1^2 d(2)]]");
    assert!(dir.path().join("ded_residuals.csv").is_file());

    let bad = run(dir.path(), &["ded", "verify", "--lambda", "[[x1^2 d(2)]]", "--candidate", "[[0]]", "--dim", "2"]);
    assert_eq!(bad.status.code(), Some(1));
    assert_eq!(report(dir.path())["status"], "FAIL");
}

#[test]
fn parse_errors_point_at_the_column() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["forms", "check", "--form", "[[x1 d(1) + ]]"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("<inline>:1:"), "{err}");
    assert!(err.contains('^'), "{err}");
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["cartan", "mc-check", "--chart", "sl7"]).status.code(), Some(2));
}

#[test]
fn forms_check_with_map_and_negative_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &[
            "forms", "check", "--form", "[[x1*x2 d(1), x2 d(2)],[0, x1^2 d(1)]]",
            "--other", "[[x1 d(2), 0],[x2 d(1), x1 d(1)]]", "--third", "[[x1, 0],[0, x2]]",
            "--map", "x1; x1*x2", "--map-source", "-1:1,-1:1",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path());
    for key in ["dd_zero", "leibniz", "associativity", "pullback_commutes_with_d"] {
        assert_eq!(r["result"][key], true, "{key}");
    }
}

#[test]
fn density_table_has_one_row_per_radius() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["density", "--set", "half-space", "--point", "0,0", "--samples", "2000"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("density.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 8);
    let slope = report(dir.path())["result"]["slope"].as_f64().unwrap();
    assert!((slope - 2.0).abs() < 1e-6, "{slope}");
}

#[test]
fn sampled_density_replays_identically() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["density", "--set", "half-space", "--point", "0,0", "--mode", "sampled", "--samples", "5000", "--seed", "7"];
    let strip = |mut v: Value| {
        v["manifest"].as_object_mut().unwrap().remove("wall_clock_seconds");
        v
    };
    assert!(run(dir.path(), &args).status.success());
    let first = strip(report(dir.path()));
    let first_csv = fs::read_to_string(dir.path().join("density.csv")).unwrap();
    assert!(run(dir.path(), &args).status.success());
    assert_eq!(first, strip(report(dir.path())));
    assert_eq!(first_csv, fs::read_to_string(dir.path().join("density.csv")).unwrap());
    assert_eq!(first["manifest"]["seed"], 7);
}

#[test]
fn cartan_commands() {
    let dir = tempfile::tempdir().unwrap();
    let mc = run(dir.path(), &["cartan", "mc-check", "--chart", "so2", "--points", "20"]);
    assert_eq!(mc.status.code(), Some(0), "{}", String::from_utf8_lossy(&mc.stderr));

    let dev = run(dir.path(), &["cartan", "integrate", "--phi", "[[d(1)]]", "--path", "0,0;0.7,0", "--dim", "2"]);
    assert_eq!(dev.status.code(), Some(0), "{}", String::from_utf8_lossy(&dev.stderr));
    let end = report(dir.path())["result"]["end"][0][0].as_f64().unwrap();
    assert!((end - 0.7f64.exp()).abs() < 1e-6, "{end}");
}

#[test]
fn lab_configs_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("cor52.json");
    let out = run(dir.path(), &["lab", "cor52", "--config", cfg.to_str().unwrap(), "--samples", "5000"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path());
    assert_eq!(r["status"], "PASS");
    assert_eq!(r["manifest"]["config"]["instance"], "canonical");
    assert!(dir.path().join("probes.csv").is_file());

    let cfg = configs().join("thm31-hyperplane.json");
    let out = run(dir.path(), &["lab", "thm31", "--config", cfg.to_str().unwrap(), "--samples", "5000"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(report(dir.path())["result"]["metrics"]["superdense"], 0.0);
}

#[test]
fn malformed_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, "{ \"probe_count\": \"many\" }").unwrap();
    let out = run(dir.path(), &["lab", "cor52", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn selftest_subset() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["selftest", "--only", "3,8"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.matches("[PASS]").count(), 2, "{stdout}");
}
