use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opweight")).args(args).output().expect("binary runs")
}

fn run_fixture(cmd: &str, names: &[&str], extra: &[&str]) -> (i32, Value) {
    let paths: Vec<String> = names.iter().map(|n| fixture(n).to_string_lossy().into_owned()).collect();
    let mut args = vec![cmd];
    args.extend(paths.iter().map(String::as_str));
    args.extend_from_slice(extra);
    let out = run(&args);
    let doc = serde_json::from_slice(&out.stdout).expect("json document on stdout");
    (out.status.code().expect("exit code"), doc)
}

fn max_abs_diff(a: &Value, b: &Value) -> f64 {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => (x.as_f64().unwrap() - y.as_f64().unwrap()).abs(),
        (Value::Array(x), Value::Array(y)) => {
            assert_eq!(x.len(), y.len());
            x.iter().zip(y).map(|(p, q)| max_abs_diff(p, q)).fold(0.0, f64::max)
        }
        (Value::Object(x), Value::Object(y)) => {
            assert_eq!(x.len(), y.len());
            x.iter().map(|(k, v)| max_abs_diff(v, &y[k])).fold(0.0, f64::max)
        }
        _ => {
            assert_eq!(a, b);
            0.0
        }
    }
}

#[test]
fn identity_weight_passes_ksgns() {
    let (code, doc) = run_fixture("ksgns", &["identity_weight.json"], &[]);
    assert_eq!(code, 0);
    assert_eq!(doc["pass"], true);
    assert_eq!(doc["command"], "ksgns");
    assert!(doc["triplet"]["E"]["dim"].as_u64().unwrap() > 0);
}

#[test]
fn zero_weight_has_trivial_module() {
    let (code, doc) = run_fixture("ksgns", &["zero_weight.json"], &[]);
    assert_eq!(code, 0);
    assert_eq!(doc["triplet"]["E"]["dim"], 0);
}

#[test]
fn transpose_rejected_with_witness() {
    let (code, doc) = run_fixture("ksgns", &["transpose_weight.json"], &[]);
    assert_eq!(code, 3);
    assert_eq!(doc["error"]["kind"], "not-completely-positive");
    assert!(doc["error"]["witness"].is_object());
}

#[test]
fn malformed_input_reports_position() {
    let (code, doc) = run_fixture("verify", &["malformed.json"], &[]);
    assert_eq!(code, 2);
    assert_eq!(doc["error"]["kind"], "parse");
    assert_eq!(doc["error"]["line"], 4);
}

#[test]
fn missing_file_is_io_error() {
    let out = run(&["ksgns", "/nonexistent/weight.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_reports_net_and_semicontinuity() {
    let (code, doc) = run_fixture("verify", &["roundtrip_weight.json"], &["--samples", "40"]);
    assert_eq!(code, 0);
    let labels: Vec<&str> = doc["checks"].as_array().unwrap().iter().map(|c| c["check"].as_str().unwrap()).collect();
    assert!(labels.iter().any(|l| l.starts_with("def3.1/")));
    assert!(labels.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn unreachable_tolerance_fails_verify() {
    let (code, doc) = run_fixture("verify", &["faithful_weight.json"], &["--tol", "1e-30"]);
    assert_eq!(code, 1);
    assert_eq!(doc["pass"], false);
}

#[test]
fn construct_reproduces_weight() {
    let (code, doc) = run_fixture("construct", &["roundtrip_seed.json"], &[]);
    assert_eq!(code, 0);
    let original: Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("roundtrip_weight.json")).unwrap()).unwrap();
    assert!(max_abs_diff(&original["coeffs"], &doc["weight"]["coeffs"]) <= 1e-9);
}

#[test]
fn inconsistent_seed_rejected() {
    let (code, doc) = run_fixture("construct", &["inconsistent_seed.json"], &[]);
    assert_eq!(code, 3);
    assert_eq!(doc["error"]["kind"], "seed-inconsistent");
}

#[test]
fn tensor_of_identity_weights_factorizes() {
    let (code, doc) = run_fixture("tensor", &["tensor_first.json", "tensor_second.json"], &[]);
    assert_eq!(code, 0);
    let checks = doc["checks"].as_array().unwrap();
    assert!(checks.iter().any(|c| c["check"].as_str().unwrap().starts_with("corol9.1")));
    assert!(checks.iter().all(|c| c["pass"] == true));
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("report.json");
    let w = fixture("identity_weight.json");
    let out = run(&["ksgns", w.to_str().unwrap(), "--out", target.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&target).unwrap()).unwrap();
    assert_eq!(doc["pass"], true);
}

#[test]
fn text_format_lists_checks() {
    let w = fixture("identity_weight.json");
    let out = run(&["ksgns", w.to_str().unwrap(), "--format", "text"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("ksgns: PASS"));
    assert!(text.contains("[ok]"));
}
