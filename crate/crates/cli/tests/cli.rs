//! End-to-end runs of the `errbound` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use approx::assert_abs_diff_eq;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_errbound"))
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn analyze(spec: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["analyze", spec.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn without_timing(mut v: Value) -> Value {
    v["environment"]["wall_time_s"] = Value::Null;
    v
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(code(&run(&["--help"])), 0);
    let o = run(&["--version"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn usage_errors_exit_6() {
    assert_eq!(code(&run(&[])), 6);
    assert_eq!(code(&run(&["analyze"])), 6);
    assert_eq!(code(&run(&["analyze", "x.json", "--format", "xml"])), 6);
}

#[test]
fn missing_spec_exits_5() {
    let tmp = tempfile::tempdir().unwrap();
    let o = analyze(&tmp.path().join("absent.json"), &tmp.path().join("out"), &[]);
    assert_eq!(code(&o), 5);
}

#[test]
fn modulus_of_abs_is_one() {
    let tmp = tempfile::tempdir().unwrap();
    let o = analyze(&golden("abs_modulus.json"), tmp.path(), &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(tmp.path());
    assert_eq!(r["report_version"], 1);
    assert_eq!(r["results"][0]["type"], "modulus");
    assert_abs_diff_eq!(r["results"][0]["output"]["value"].as_f64().unwrap(), 1.0, epsilon = 1e-3);
    assert_eq!(r["exit_code"], 0);
}

#[test]
fn linear_bound_of_square_fails_with_witness() {
    let tmp = tempfile::tempdir().unwrap();
    let o = analyze(&golden("square_linear_fails.json"), tmp.path(), &[]);
    assert_eq!(code(&o), 1);
    let r = report(tmp.path());
    let first = &r["results"][0];
    assert_eq!(first["status"], "fails");
    let w = &first["output"]["witness"];
    let (fx, d) = (w["f_value"].as_f64().unwrap(), w["distance"].as_f64().unwrap());
    assert!(d > fx, "τ·d = {d} should exceed f = {fx}");
}

#[test]
fn invalid_specs_exit_4_with_a_location() {
    for name in ["malformed.json", "bad_expression.json", "unknown_field.json"] {
        let o = run(&["check", golden(name).to_str().unwrap()]);
        assert_eq!(code(&o), 4, "{name}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains("line") || err.contains("column"), "{name}: {err}");
    }
}

#[test]
fn smooth_pieces_need_one_partial_per_variable() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = tmp.path().join("spec.json");
    fs::write(
        &spec,
        r#"{"function": {"kind": "max_smooth", "dim": 2, "pieces": [{"value": "x1^2 + x2^2", "gradient": ["2*x1"]}]},
            "analysis": [{"type": "modulus"}]}"#,
    )
    .unwrap();
    let o = run(&["check", spec.to_str().unwrap()]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("function.pieces[0].gradient"));
}

#[test]
fn check_accepts_valid_specs() {
    let o = run(&["check", golden("toy_sip.json").to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("4 analyses, sip problem"));
}

#[test]
fn csv_format_writes_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let o = analyze(&golden("abs_modulus.json"), tmp.path(), &["--format", "csv"]);
    assert_eq!(code(&o), 0);
    let results = fs::read_to_string(tmp.path().join("results.csv")).unwrap();
    let mut lines = results.lines();
    assert_eq!(lines.next(), Some("index,type,status,error"));
    assert_eq!(lines.next(), Some("0,modulus,info,"));
    assert_eq!(results.lines().count(), 5);
    assert!(fs::read_to_string(tmp.path().join("modulus_0.csv")).unwrap().starts_with("k,"));
    assert!(tmp.path().join("profile.csv").exists());
    assert!(!tmp.path().join("report.json").exists());
}

#[test]
fn reports_do_not_depend_on_the_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(code(&analyze(&golden("diagonal_mapping.json"), &a, &["--jobs", "1"])), 0);
    assert_eq!(code(&analyze(&golden("diagonal_mapping.json"), &b, &[])), 0);
    assert_eq!(without_timing(report(&a)), without_timing(report(&b)));
}

#[test]
fn command_line_overrides_reach_the_report() {
    let tmp = tempfile::tempdir().unwrap();
    let o = analyze(&golden("abs_modulus.json"), tmp.path(), &["--seed", "7", "--grid", "51", "--tol", "1e-8"]);
    assert_eq!(code(&o), 0);
    let env = &report(tmp.path())["environment"];
    assert_eq!(env["seed"], 7);
    assert_eq!(env["grid"], 51);
    assert_eq!(env["tol"], 1e-8);
    let o = analyze(&golden("abs_modulus.json"), tmp.path(), &["--grid", "1"]);
    assert_eq!(code(&o), 4);
}
