use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qbd-poisson")).args(args).output().expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn levels(v: &Value) -> Vec<f64> {
    v["u"].as_array().unwrap().iter().map(|r| r[0].as_f64().unwrap()).collect()
}

#[test]
fn solve_pr1_writes_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pr1.json");
    let input = fixture("pr1.json");
    let res = run(&["solve", "--levels", "10", input.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["class"], "PositiveRecurrent");
    let x = v["x"][0].as_f64().unwrap();
    let u = levels(&v);
    assert_eq!(u.len(), 11);
    assert!((u[0] - (x - 2.5)).abs() < 1e-12);
    assert!(u[1..].iter().all(|&w| (w - (x - 7.5)).abs() < 1e-12));
    assert_eq!(v["residuals"]["pass"], true);

    let csv = std::fs::read_to_string(dir.path().join("pr1.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "level,u_1");
    assert_eq!(lines.len(), 12);
    let last: Vec<&str> = lines[11].split(',').collect();
    assert_eq!(last[0], "10");
    assert!((last[1].parse::<f64>().unwrap() - u[10]).abs() == 0.0);
}

#[test]
fn explicit_csv_path_and_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("levels.csv");
    let input = fixture("pr1.json");
    let res = run(&["solve", "--alpha", "1.5", "--csv", csv.to_str().unwrap(), input.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0));
    let v = json_of(&res);
    assert!((v["x"][0].as_f64().unwrap() - 1.5).abs() < 1e-12);
    assert!(csv.exists());
}

#[test]
fn classify_nr1() {
    let input = fixture("nr1.json");
    let res = run(&["classify", input.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0));
    let v = json_of(&res);
    assert_eq!(v["class"], "NullRecurrent");
    assert!(v["drift"].as_f64().unwrap().abs() < 1e-15);
    let roots: Vec<f64> = v["roots"].as_array().unwrap().iter().map(|r| r.as_f64().unwrap()).collect();
    assert_eq!(roots.len(), 2);
    assert!(roots.iter().all(|r| (r - 1.0).abs() < 1e-8));
}

#[test]
fn solve_nr1_differences() {
    let input = fixture("nr1.json");
    let res = run(&["solve", input.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0));
    let v = json_of(&res);
    assert_eq!(v["path"], "RightShift");
    let u = levels(&v);
    assert!((u[1] - u[0] + 2.5).abs() < 1e-9);
    assert!((u[2] - u[1] - 2.5).abs() < 1e-9);
    assert!((u[3] - u[2] - 2.5).abs() < 1e-9);
}

#[test]
fn invalid_row_sum_exits_one() {
    let input = fixture("bad_rows.json");
    let res = run(&["solve", input.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&res.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "invalid_model");
    let res = run(&["validate", input.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    assert_eq!(json_of(&res)["valid"], false);
}

#[test]
fn missing_file_and_bad_flags_exit_one() {
    assert_eq!(run(&["solve", "/nonexistent/problem.json"]).status.code(), Some(1));
    let input = fixture("pr1.json");
    assert_eq!(run(&["solve", "--levels", "ten", input.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn infeasible_y_perp_exits_three() {
    let input = fixture("pr2.json");
    let res = run(&["solve", "--y-perp", "zero", input.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(3));
    let err: Value = serde_json::from_slice(&res.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "infeasible");
}

#[test]
fn output_is_deterministic() {
    let input = fixture("pr2.json");
    let a = run(&["solve", input.to_str().unwrap()]);
    let b = run(&["solve", input.to_str().unwrap()]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn lemmas_compare_and_oracle() {
    for name in ["pr1.json", "tr1.json", "nr1.json", "pr2.json"] {
        let input = fixture(name);
        let path = input.to_str().unwrap();
        let res = run(&["lemmas", path]);
        assert_eq!(res.status.code(), Some(0), "{name}");
        assert_eq!(json_of(&res)["pass"], true, "{name}");
        let res = run(&["compare-prob", "--center", path]);
        assert_eq!(res.status.code(), Some(0), "{name}");
        assert_eq!(json_of(&res)["comparison"]["is_match"], true, "{name}");
        let res = run(&["oracle", path]);
        assert_eq!(res.status.code(), Some(0), "{name}");
        assert_eq!(json_of(&res)["pass"], true, "{name}");
    }
}

#[test]
fn compare_without_centering_is_infeasible() {
    let input = fixture("nr1.json");
    assert_eq!(run(&["compare-prob", input.to_str().unwrap()]).status.code(), Some(3));
}
