use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gausscover(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gausscover")).args(args).output().expect("binary runs")
}

fn write_input(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn pair(v: &Value) -> (f64, f64) {
    (v[0].as_f64().unwrap(), v[1].as_f64().unwrap())
}

#[test]
fn boson_rotation_by_pi_has_unit_modulus_and_quarter_phase() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(
        dir.path(),
        "k.json",
        r#"{"reference": {"statistics": "boson", "n_modes": 1}, "k": [[0.0, 3.141592653589793], [-3.141592653589793, 0.0]]}"#,
    );
    let out = gausscover(&["phase", "--input", &input]);
    assert!(out.status.success());
    let v = json_of(&out);
    assert!((v["modulus"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((v["phase"].as_f64().unwrap() + std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    assert_eq!(v["defined"], Value::Bool(true));
}

#[test]
fn random_requests_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), "r.json", r#"{"reference": {"statistics": "fermion", "n_modes": 3}, "random": {"scale": 1.0}}"#);
    let first = gausscover(&["phase", "--input", &input, "--seed", "7"]);
    let second = gausscover(&["phase", "--input", &input, "--seed", "7"]);
    let other = gausscover(&["phase", "--input", &input, "--seed", "8"]);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
    assert_ne!(first.stdout, other.stdout);
}

#[test]
fn fermion_phase_agrees_with_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), "r.json", r#"{"reference": {"statistics": "fermion", "n_modes": 3}, "random": {"scale": 1.5}}"#);
    let out = gausscover(&["phase", "--input", &input, "--compare-oracle"]);
    assert!(out.status.success());
    let v = json_of(&out);
    assert_eq!(v["oracle"]["agrees"], Value::Bool(true), "{v}");
}

#[test]
fn malformed_input_gives_error_json() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), "bad.json", r#"{"reference": {"statistics": "boson", "n_modes": 1}, "k": [[1.0]]}"#);
    let out = gausscover(&["phase", "--input", &input]);
    assert_eq!(out.status.code(), Some(2));
    let v = json_of(&out);
    assert_eq!(v["error"]["kind"], "shape");
    assert!(v["error"]["message"].as_str().unwrap().contains("2x2"));

    let out = gausscover(&["phase", "--input", &dir.path().join("missing.json").display().to_string()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json_of(&out)["error"]["kind"], "io");

    let input = write_input(dir.path(), "extra.json", r#"{"reference": {"statistics": "boson", "n_modes": 1}, "kk": []}"#);
    let out = gausscover(&["phase", "--input", &input]);
    assert_eq!(json_of(&out)["error"]["kind"], "invalid_input");
}

#[test]
fn trajectory_csv_columns_and_precision() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(
        dir.path(),
        "t.json",
        r#"{"reference": {"statistics": "boson", "n_modes": 1}, "k": [[0.0, 1.0], [-1.0, 0.0]], "t_max": 10.0, "steps": 50}"#,
    );
    let out = gausscover(&["trajectory", "--input", &input, "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,modulus,phase_wrapped,phase_unwrapped,phase_naive,defined");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 51);
    assert_eq!(rows[0][0], "0.0000000000000000");
    // a rotation by t has phase −t/2, so the unwrapped column ends at −5
    let last: f64 = rows[50][3].parse().unwrap();
    assert!((last + 5.0).abs() < 1e-10);
}

#[test]
fn wick_indices_override_and_two_point_function() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(
        dir.path(),
        "w.json",
        r#"{"reference": {"statistics": "boson", "n_modes": 1}, "cover": {"m": [[1.0, 0.0], [0.0, 1.0]], "psi": [1.0, 0.0]}, "indices": [1, 1, 1]}"#,
    );
    let out = gausscover(&["wick", "--input", &input]);
    assert_eq!(pair(&json_of(&out)["value"]), (0.0, 0.0));
    // ⟨ξ¹ξ²⟩ = ½(G + iΩ)₁₂ = i/2 in the vacuum
    let out = gausscover(&["wick", "--input", &input, "--indices", "1,2"]);
    let (re, im) = pair(&json_of(&out)["value"]);
    assert!(re.abs() < 1e-15 && (im - 0.5).abs() < 1e-15);

    let out = gausscover(&["wick", "--input", &input, "--indices", "3"]);
    assert_eq!(json_of(&out)["error"]["kind"], "index_out_of_range");
}

#[test]
fn overlap_and_evolve_of_two_branches() {
    let dir = tempfile::tempdir().unwrap();
    let state = r#"{"reference": {"statistics": "boson", "n_modes": 1},
        "coefficients": [[0.7071067811865476, 0.0], [0.7071067811865476, 0.0]],
        "branches": [{"m": [[1.0, 0.0], [0.0, 1.0]], "psi": [1.0, 0.0]},
                     {"generator": [[0.5, 0.0], [0.0, -0.5]]}]}"#;
    let input = write_input(dir.path(), "s.json", state);
    let out = gausscover(&["overlap", "--input", &input, "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.starts_with("k,l,re,im\n1,1,1.0000000000000000,0.0000000000000000\n"));

    let evolve = format!(r#"{{"state": {state}, "directions": [[[0.0, 1.0], [-1.0, 0.0]], [[0.0, 1.0], [-1.0, 0.0]]], "epsilon": 0.05, "steps": 40}}"#);
    let input = write_input(dir.path(), "e.json", &evolve);
    let out = gausscover(&["evolve", "--input", &input]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let v = json_of(&out);
    let steps = v["steps"].as_array().unwrap();
    assert_eq!(steps.len(), 41);
    // a common rotation leaves the norm unchanged
    let n0 = steps[0]["norm_squared"].as_f64().unwrap();
    let n40 = steps[40]["norm_squared"].as_f64().unwrap();
    assert!((n0 - n40).abs() < 1e-9);

    let out = gausscover(&["evolve", "--input", &input, "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("step,t,norm_squared,x_1_2_re,x_1_2_im\n"));
}

#[test]
fn fermion_case_study_matches_closed_form() {
    let out = gausscover(&["case-study", "fermion", "--points", "9", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<f64>> = text.lines().skip(1).map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 81);
    for r in rows {
        assert!((r[4] - r[6]).abs() < 1e-10 && (r[5] - r[7]).abs() < 1e-10, "{r:?}");
    }
}

#[test]
fn oracle_moment_matches_wick() {
    let dir = tempfile::tempdir().unwrap();
    let k = r#"[[0.0, 0.3, 0.1, 0.0], [-0.3, 0.0, 0.0, 0.2], [-0.1, 0.0, 0.0, 0.4], [0.0, -0.2, -0.4, 0.0]]"#;
    let gen = write_input(dir.path(), "g.json", &format!(r#"{{"reference": {{"statistics": "fermion", "n_modes": 2}}, "k": {k}}}"#));
    let wick =
        write_input(dir.path(), "w.json", &format!(r#"{{"reference": {{"statistics": "fermion", "n_modes": 2}}, "cover": {{"generator": {k}}}}}"#));
    let exact = pair(&json_of(&gausscover(&["oracle", "--input", &gen, "--indices", "1,3,2,4"]))["value"]);
    let lib = pair(&json_of(&gausscover(&["wick", "--input", &wick, "--indices", "1,3,2,4"]))["value"]);
    assert!((exact.0 - lib.0).abs() < 1e-10 && (exact.1 - lib.1).abs() < 1e-10, "{exact:?} vs {lib:?}");
}

#[test]
fn selftest_subset_and_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = gausscover(&["selftest", "--criteria", "4,10"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.contains("criterion  4 [PASS]"));

    let path = dir.path().join("report.json");
    let out = gausscover(&["selftest", "--criteria", "5", "--format", "json", "--output", &path.display().to_string()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(v["passed"], Value::Bool(true));
    assert_eq!(v["criteria"][0]["id"], 5);
}
