use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

use stackel_cli::commands::{self, SampleOptions};

fn examples() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/examples")
}

fn example(name: &str) -> String {
    examples().join(name).display().to_string()
}

fn stackel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stackel")).args(args).output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn verify_passes_on_shipped_examples() {
    for name in ["flat.json", "polar.json", "liouville.json"] {
        let out = stackel(&["verify", &example(name)]);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&out.stdout));
        let r = report(&out);
        assert_eq!(r["passed"], Value::Bool(true));
        assert_eq!(r["command"], "verify");
        assert_eq!(r["observations"]["n"], 2);
    }
}

#[test]
fn theorem1_reports_two_blocks() {
    for name in ["polar.json", "liouville.json"] {
        let out = stackel(&["theorem1", &example(name), "--samples", "8"]);
        assert_eq!(out.status.code(), Some(0), "{name}");
        let r = report(&out);
        assert_eq!(r["observations"]["m"], 2);
        assert_eq!(r["observations"]["rank"]["min"], 2);
        assert_eq!(r["observations"]["rank"]["max"], 2);
    }
}

#[test]
fn generate_reproduces_shipped_system_files() {
    for name in ["flat", "polar", "liouville"] {
        let out = stackel(&["generate", &example(&format!("{name}.stackel.json"))]);
        assert_eq!(out.status.code(), Some(0), "{name}");
        let shipped = std::fs::read_to_string(examples().join(format!("{name}.json"))).unwrap();
        let got: Value = serde_json::from_slice(&out.stdout).unwrap();
        let want: Value = serde_json::from_str(&shipped).unwrap();
        assert_eq!(got, want, "{name}");
        let r: Value = serde_json::from_slice(&out.stderr).unwrap();
        assert_eq!(r["passed"], Value::Bool(true));
    }
}

#[test]
fn generate_writes_system_file_with_out() {
    let path = scratch("polar.generated.json");
    let out = stackel(&["generate", &example("polar.stackel.json"), "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["command"], "generate");
    let regenerated = stackel(&["verify", path.to_str().unwrap()]);
    assert_eq!(regenerated.status.code(), Some(0));
}

#[test]
fn univariance_violation_fails_checks() {
    let path = scratch("mixed.stackel.json");
    std::fs::write(&path, r#"{ "chart": ["x1", "x2"], "stackel": [["1", "x2"], ["0", "1"]] }"#).unwrap();
    let out = stackel(&["generate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["checks"][0]["name"], "stackel:valid");
    assert_eq!(r["checks"][0]["pass"], Value::Bool(false));
}

#[test]
fn non_killing_integral_fails_with_residual() {
    let path = scratch("bad.json");
    std::fs::write(
        &path,
        r#"{ "chart": ["r", "theta"], "metric": [["1", "0"], ["1/r^2"]],
             "integrals": [{ "label": "K", "components": [["r", "0"], ["0"]] }] }"#,
    )
    .unwrap();
    let out = stackel(&["verify", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    let killing = r["checks"].as_array().unwrap().iter().find(|c| c["name"] == "killing:K").unwrap();
    assert_eq!(killing["pass"], Value::Bool(false));
    assert!(killing["residual"].as_f64().unwrap() > 0.0);
}

#[test]
fn input_errors_exit_two() {
    let path = scratch("broken.json");
    std::fs::write(&path, "{ not json").unwrap();
    assert_eq!(stackel(&["verify", path.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(stackel(&["verify", &example("missing.json")]).status.code(), Some(2));
    let out = stackel(&["flow", &example("polar.json"), "--init", "1,0,0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("init needs 4 numbers"));
}

#[test]
fn unknown_variable_is_an_input_error() {
    let path = scratch("unknown.json");
    std::fs::write(&path, r#"{ "chart": ["r", "theta"], "metric": [["1", "0"], ["1/x2^2"]], "integrals": [] }"#).unwrap();
    assert_eq!(stackel(&["verify", path.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn flow_writes_trajectory_csv() {
    let path = scratch("flat.csv");
    let out = stackel(&[
        "flow",
        &example("flat.json"),
        "--init",
        "0,0,1,-0.5",
        "--steps",
        "100",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(&path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,x1,x2,p1,p2,I1,I2"));
    assert_eq!(lines.count(), 101);
    assert_eq!(report(&out)["observations"]["steps"], 100);
}

#[test]
fn reports_are_deterministic_and_seeded() {
    let input = std::fs::read(examples().join("liouville.json")).unwrap();
    let opts = SampleOptions { seed: 3, ..SampleOptions::default() };
    let a = commands::theorem1(&input, &opts).unwrap().to_json();
    let b = commands::theorem1(&input, &opts).unwrap().to_json();
    assert_eq!(a, b);
    let first = stackel(&["verify", &example("polar.json"), "--seed", "5"]);
    let second = stackel(&["verify", &example("polar.json"), "--seed", "5"]);
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(report(&first)["seed"], 5);
}

#[test]
fn out_flag_matches_stdout() {
    let path = scratch("verify.json");
    let out = stackel(&["verify", &example("flat.json"), "--out", path.to_str().unwrap()]);
    assert_eq!(std::fs::read(&path).unwrap(), out.stdout);
}
