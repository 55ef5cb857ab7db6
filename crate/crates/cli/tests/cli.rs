use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn model(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models").join(name);
    p.to_str().expect("utf-8 path").to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn pwa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pwa")).args(args).output().expect("run pwa")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout_json(o: &Output) -> Value {
    assert!(o.status.code().is_some(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!("{e}\nstdout: {}\nstderr: {}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
    })
}

fn labels(edges: &Value) -> Vec<String> {
    let lab = |v: &Value| v.as_array().unwrap().iter().map(|d| d.to_string()).collect::<String>();
    edges.as_array().unwrap().iter().map(|e| format!("{}>{}", lab(&e["from"]), lab(&e["to"]))).collect()
}

fn synthesis_file(dir: &Path) -> PathBuf {
    let o = pwa(&["synthesize", &model("example1.json"), &model("example1_target.json"), "--out-dir", s(dir)]);
    assert_eq!(code(&o), 0);
    dir.join("synthesis.json")
}

#[test]
fn check_reports_self_dependence_without_failing() {
    let o = pwa(&["check", &model("example1.json")]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["clean"], false);
    let h1 = v["report"]["h1_violations"].as_array().unwrap();
    assert!(!h1.is_empty() && h1.iter().all(|e| e["var"] == 1));

    let o = pwa(&["check", &model("toy.json")]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["clean"], true);
}

#[test]
fn check_rejects_malformed_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"variables": [{"name": "x", "thresholds": [0, 0.8, 0.5]}], "decay0": [{"target": "x", "coefficient": 1}]}"#,
    )
    .unwrap();
    let o = pwa(&["check", s(&path)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("strictly increasing"));
    assert_eq!(code(&pwa(&["check", "/nonexistent/net.json"])), 2);
}

#[test]
fn graph_of_example_one_with_and_without_law() {
    let o = pwa(&["graph", &model("example1.json")]);
    let v = stdout_json(&o);
    assert_eq!(labels(&v["graph"]["edges"]), ["00>10", "01>00", "10>20", "11>01", "20>21", "21>11"]);
    assert!(v["graph"]["fixed"].as_array().unwrap().is_empty());
    assert_eq!(v["cycles"]["cycles"].as_array().unwrap().len(), 1);

    let o = pwa(&["graph", &model("example1.json"), "--law", &model("example1_law.json")]);
    let v = stdout_json(&o);
    assert_eq!(labels(&v["graph"]["edges"]), ["00>10", "01>00", "11>01", "20>10", "20>21", "21>11"]);
    assert_eq!(v["graph"]["fixed"], serde_json::json!([[1, 0]]));
}

#[test]
fn graph_of_example_two_and_dot_output() {
    let dir = tempfile::tempdir().unwrap();
    let o = pwa(&["graph", &model("example2.json"), "--dot", "--out-dir", s(dir.path())]);
    assert_eq!(code(&o), 0);
    let dot = String::from_utf8(o.stdout).unwrap();
    assert!(dot.starts_with("digraph TG {"));
    assert!(dot.contains("\"200\" -> \"210\""));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("graph.json")).unwrap()).unwrap();
    assert_eq!(v["graph"]["edges"].as_array().unwrap().len(), 20);
}

#[test]
fn simulate_example_one_both_ways() {
    let o = pwa(&["simulate", &model("example1.json"), "--x0", "0.85,0.15"]);
    let v = stdout_json(&o);
    let verdict = &v["runs"][0]["verdict"];
    assert_eq!(verdict["kind"], "periodic");
    assert_eq!(verdict["boxes"].as_array().unwrap().len(), 6);

    let o = pwa(&["simulate", &model("example1.json"), "--law", &model("example1_law.json"), "--x0", "0.85,0.15"]);
    let verdict = &stdout_json(&o)["runs"][0]["verdict"];
    assert_eq!(verdict["kind"], "equilibrium");
    assert_eq!(verdict["box"], serde_json::json!([1, 0]));
    let p: Vec<f64> = serde_json::from_value(verdict["point"].clone()).unwrap();
    assert!((p[0] - 0.6).abs() < 1e-9 && p[1].abs() < 1e-9);
}

#[test]
fn simulate_example_two_and_strict_mode() {
    let net = model("example2.json");
    let base = ["simulate", &net, "--x0", "0.95,0.95,0.1", "--max-events", "5000"];
    let o = pwa(&base);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["runs"][0]["verdict"]["kind"], "budget_exhausted");

    let mut strict = base.to_vec();
    strict.extend(["--zeno-eps", "1e-3", "--strict"]);
    let o = pwa(&strict);
    assert_eq!(code(&o), 4);
    assert_eq!(stdout_json(&o)["runs"][0]["verdict"]["kind"], "zeno");
}

#[test]
fn simulate_writes_csv_and_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "simulate",
        &model("example1.json"),
        "--law",
        &model("example1_law.json"),
        "--x0",
        "0.85,0.15",
        "--x0",
        "0.2,0.7",
        "--t-end",
        "5",
        "--out-dir",
        s(dir.path()),
    ];
    let first = pwa(&args);
    let second = pwa(&args);
    assert_eq!(code(&first), 0);
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(stdout_json(&first)["runs"].as_array().unwrap().len(), 2);
    let csv = std::fs::read_to_string(dir.path().join("trajectory_0.csv")).unwrap();
    assert!(csv.starts_with("t,x1,x2,box\n0,0.85,0.15,20\n"));
    assert!(csv.lines().last().unwrap().starts_with("5,"));
    assert!(dir.path().join("events_1.json").exists());
}

#[test]
fn simulate_requires_an_initial_point() {
    let o = pwa(&["simulate", &model("example1.json")]);
    assert_eq!(code(&o), 2);
    let o = pwa(&["simulate", &model("example1.json"), "--x0", "0.5,0.2"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn analyze_examples() {
    let o = pwa(&["analyze", &model("example1.json")]);
    let v = stdout_json(&o);
    let c = &v["cycles"][0];
    assert_eq!(c["verdict"]["case"], "B");
    assert!(c["spread"]["max_pairwise"].as_f64().unwrap() < 1e-8);

    let o = pwa(&[
        "analyze",
        &model("example2.json"),
        "--law",
        &model("example2_uniform_law.json"),
        "--cycle",
        "001>000>010>110>111>101",
    ]);
    let v = stdout_json(&o);
    assert_eq!(v["cycles"][0]["verdict"]["case"], "A-ii");
    assert!(v["cycles"][0]["verdict"]["lambda"].as_f64().unwrap() > 1.0);

    let o = pwa(&[
        "analyze",
        &model("example1.json"),
        "--law",
        &model("example1_law.json"),
        "--cycle",
        "00 10 20 21 11 01",
    ]);
    assert_eq!(stdout_json(&o)["cycles"][0]["verdict"]["case"], "inapplicable");
}

#[test]
fn analyze_is_deterministic_per_seed() {
    let run = |seed: &str| pwa(&["analyze", &model("example1.json"), "--seed", seed]).stdout;
    assert_eq!(run("3"), run("3"));
    assert_ne!(run("3"), run("4"));
}

#[test]
fn synthesize_examples() {
    let o = pwa(&["synthesize", &model("example1.json"), &model("example1_target.json")]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    for iv in v["intervals"].as_array().unwrap() {
        assert!((iv["lo"].as_f64().unwrap() - 0.2).abs() < 1e-12);
        assert!((iv["hi"].as_f64().unwrap() - 0.8).abs() < 1e-12);
    }
    assert_eq!(v["verified"], true);

    let o = pwa(&["synthesize", &model("example2.json"), &model("example2_target.json")]);
    let v = stdout_json(&o);
    assert!((v["effective"]["lo"].as_f64().unwrap() - 0.2).abs() < 1e-12);
    assert!((v["effective"]["hi"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(v["verified"], true);
}

#[test]
fn infeasible_synthesis_exits_with_certificate() {
    let o = pwa(&["synthesize", &model("example1.json"), &model("example1_target.json"), "--u-bound", "0.1"]);
    assert_eq!(code(&o), 3);
    let v = stdout_json(&o);
    assert_eq!(v["feasible"], false);
    assert!(!v["certificates"].as_array().unwrap().is_empty());
    assert!(v["law"].is_null());
}

#[test]
fn extend_checks_controller_speed() {
    let dir = tempfile::tempdir().unwrap();
    let syn = synthesis_file(dir.path());
    let run = |gamma: &str| pwa(&["extend", &model("example1.json"), s(&syn), "--theta-y", "0.5", "--gamma-y", gamma]);
    let slow = run("0.1");
    assert_eq!(code(&slow), 0);
    let v = stdout_json(&slow);
    assert_eq!(v["fast_controller"]["satisfied"], true);
    assert_eq!(v["network"]["variables"][2]["name"], "y");
    assert_eq!(stdout_json(&run("1.7"))["fast_controller"]["satisfied"], false);
    let rejected = run("2");
    assert_eq!(code(&rejected), 2);
    assert!(String::from_utf8_lossy(&rejected.stderr).contains("θy·γy"));
}

#[test]
fn extended_network_settles_in_box_101() {
    let dir = tempfile::tempdir().unwrap();
    let syn = synthesis_file(dir.path());
    let ext = dir.path().join("ext.json");
    let o =
        pwa(&["extend", &model("example1.json"), s(&syn), "--theta-y", "0.5", "--gamma-y", "0.1", "--out", s(&ext)]);
    assert_eq!(code(&o), 0);
    let o = pwa(&["simulate", s(&ext), "--x0", "0.95,0.95,0.1", "--x0", "0.95,0.95,0.95"]);
    for run in stdout_json(&o)["runs"].as_array().unwrap() {
        assert_eq!(run["verdict"]["kind"], "equilibrium");
        assert_eq!(run["verdict"]["box"], serde_json::json!([1, 0, 1]));
    }
}
