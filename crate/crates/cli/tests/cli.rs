use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn derivlab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_derivlab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

#[test]
fn exp3_files_are_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let out = derivlab(&["exp3"], dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["exp3.csv", "exp3_baseline.dat", "exp3_optimized.dat"] {
        let first = fs::read(a.path().join(name)).unwrap();
        assert!(!first.is_empty(), "{name}");
        assert_eq!(first, fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    let dat = fs::read_to_string(a.path().join("exp3_optimized.dat")).unwrap();
    assert!(dat.starts_with("# range optimized_total\n0 "));
}

#[test]
fn exp1_honours_timeouts_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = derivlab(&["exp1", "--timeouts", "50,200", "--seed", "3"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("exp1.csv")).unwrap();
    let labels: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(labels, ["50s", "200s"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), csv);
}

#[test]
fn attack_lines_end_in_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let out = derivlab(&["attacks", "--seeds", "2"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 14);
    assert!(stdout.lines().all(|l| l.ends_with(" PASS")));
}

#[test]
fn single_attack_spec_from_json() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("a2.json");
    fs::write(&spec, r#"{"id":"A2","parameters":{"hint":1}}"#).unwrap();
    let out = derivlab(&["attacks", "--spec", spec.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("A2 seed=0 expected=NonceGapError observed=NonceGapError"), "{stdout}");
}

#[test]
fn bad_config_reports_code_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"channel_timeout_s": 0}"#).unwrap();
    let out = derivlab(&["exp1", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.lines().next() == Some("error_code=InvalidScenario"), "{stderr}");
    assert!(!dir.path().join("exp1.csv").exists());
}
