use std::path::PathBuf;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_copyfair"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_temp(name: &str, contents: &str) -> PathBuf {
    let path = std::env::temp_dir().join(format!("copyfair-cli-{}-{name}", std::process::id()));
    std::fs::write(&path, contents).unwrap();
    path
}

const ORTHOGONAL_EIGHT: &str = r#"{"kind":"goods","groups":[{"size":1},{"size":1}],
"types":[{"copies":8,"values":["1","0"]},{"copies":8,"values":["0","1"]}]}"#;

#[test]
fn allocate_reports_envy_free_json() {
    let input = write_temp("alloc.json", ORTHOGONAL_EIGHT);
    let out = run(&["allocate", "--input", input.to_str().unwrap(), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["envy_free"], serde_json::Value::Bool(true));
    assert_eq!(json["allocation"], serde_json::json!([[8, 0], [0, 8]]));
}

#[test]
fn frobenius_decomposition() {
    let out = run(&["frobenius", "--sizes", "5,7", "--k", "24", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains('2'));
    let none = run(&["frobenius", "--sizes", "5,7", "--k", "23"]);
    assert_eq!(none.status.code(), Some(2));
}

#[test]
fn verify_flags_envy() {
    let input = write_temp("verify.json", ORTHOGONAL_EIGHT);
    let swapped = write_temp("swapped.json", r#"{"counts":[[0,8],[8,0]]}"#);
    let out = run(&[
        "verify",
        "--input",
        input.to_str().unwrap(),
        "--allocation",
        swapped.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_input_is_an_error() {
    let input = write_temp("bad.json", r#"{"kind":"goods","groups":[]}"#);
    let out = run(&["check", "--input", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn experiment_csv_has_one_row_per_trial() {
    let out = run(&[
        "experiment", "--n", "3", "--m", "12", "--trials", "4", "--seed", "9", "--target", "PROP_CONDITION",
        "--format", "csv",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 5);
}
