use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rrs_core::tensor_file::parse_tensor;
use rrs_core::Role;

fn rrs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rrs"))
        .args(args)
        .env_remove("RRS_THREADS")
        .output()
        .expect("spawn rrs")
}

fn ok(args: &[&str]) -> Output {
    let out = rrs(args);
    assert!(
        out.status.success(),
        "rrs {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[test]
fn gen_writes_readable_tensor_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.rrst");
    ok(&["gen", "--rows", "6", "--cols", "32", "--outlier", "channel", "--channels", "3", "--mag", "40", "-o", p(&x)]);
    let m = parse_tensor(&fs::read(&x).unwrap(), Role::Activation).unwrap();
    assert_eq!(m.shape(), (6, 32));

    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("x.rrst.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "gen");
    assert_eq!(manifest["seed"], 0);
    assert!(manifest["timestamp"].is_string());
}

#[test]
fn missing_required_flag_is_usage_error() {
    let out = rrs(&["gen", "--rows", "4", "-o", "unused.rrst"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--cols"));
}

#[test]
fn gen_is_byte_identical_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.rrst");
    let b = dir.path().join("b.rrst");
    ok(&["gen", "--rows", "16", "--cols", "64", "--outlier", "mixed", "--channels", "2", "--spike-tokens", "3", "--mag", "20", "--seed", "9", "-o", p(&a)]);
    ok(&["--threads", "3", "gen", "--rows", "16", "--cols", "64", "--outlier", "mixed", "--channels", "2", "--spike-tokens", "3", "--mag", "20", "--seed", "9", "-o", p(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn bench_bypass_reproduces_fp_output() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.rrst");
    let w = dir.path().join("w.rrst");
    let out = dir.path().join("bench.csv");
    ok(&["gen", "--rows", "12", "--cols", "64", "--outlier", "channel", "--channels", "4", "--mag", "30", "--seed", "1", "-o", p(&x)]);
    ok(&["gen", "--rows", "8", "--cols", "64", "--role", "weight", "--seed", "2", "-o", p(&w)]);
    ok(&["bench", "--x", p(&x), "--w", p(&w), "--a-bits", "16", "--w-bits", "16", "--smooth-group", "1,8", "-o", p(&out)]);
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 7);
    for r in &rows {
        assert_eq!(r[8], "ok");
        let err: f64 = r[4].parse().unwrap();
        assert!(err <= 1e-10, "{} error {err}", r[0]);
    }
    assert!(dir.path().join("bench.json").exists());
}

#[test]
fn bench_skips_rotation_for_non_power_of_two() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.rrst");
    let w = dir.path().join("w.rrst");
    let out = dir.path().join("bench.csv");
    ok(&["gen", "--rows", "4", "--cols", "12", "-o", p(&x)]);
    ok(&["gen", "--rows", "3", "--cols", "12", "--role", "weight", "-o", p(&w)]);
    ok(&["bench", "--x", p(&x), "--w", p(&w), "-o", p(&out)]);
    for r in csv_rows(&out) {
        let expected = if r[0] == "rotate" || r[0] == "rrs" { "skipped" } else { "ok" };
        assert_eq!(r[8], expected, "{r:?}");
    }
}

#[test]
fn victims_reports_one_row_per_l() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.csv");
    ok(&["victims", "--k", "256", "--l", "1,2,4,8", "--trials", "40", "-o", p(&out)]);
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert_eq!(r[1], "40");
        let mean: f64 = r[2].parse().unwrap();
        assert!(mean >= 1.0);
    }
}

#[test]
fn analyze_reports_each_transform() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.rrst");
    let out = dir.path().join("a.csv");
    ok(&["gen", "--rows", "10", "--cols", "32", "--outlier", "spike", "--spike-tokens", "4", "--mag", "50", "-o", p(&x)]);
    ok(&["analyze", "--input", p(&x), "--census-bins", "4,16", "--rotate", "-o", p(&out)]);
    let rows = csv_rows(&out);
    let names: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(names, ["none", "rotate", "rs", "rrs"]);
    assert_eq!(csv_rows(&dir.path().join("a.census.csv")).len(), 2);
    assert_eq!(csv_rows(&dir.path().join("a.rotation.csv")).len(), 1);
}

#[test]
fn analyze_zero_matrix_is_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("zero.rrst");
    let out = dir.path().join("a.csv");
    ok(&["gen", "--rows", "3", "--cols", "8", "--base", "constant", "--value", "0", "-o", p(&x)]);
    let res = rrs(&["analyze", "--input", p(&x), "-o", p(&out)]);
    assert_eq!(res.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&res.stderr).contains("undefined"));
    assert!(!out.exists());
}

#[test]
fn bad_magic_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("bad.rrst");
    fs::write(&x, b"NOPE\x01\x00\x00\x00garbage").unwrap();
    let res = rrs(&["analyze", "--input", p(&x), "-o", p(&dir.path().join("a.csv"))]);
    assert_eq!(res.status.code(), Some(3));
}

#[test]
fn missing_input_file_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let res = rrs(&["analyze", "--input", p(&dir.path().join("absent.rrst")), "-o", p(&dir.path().join("a.csv"))]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn gemm_check_passes() {
    let out = ok(&["gemm-check", "--cases", "12", "--seed", "4"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("max relative deviation"));
}
