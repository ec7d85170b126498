use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn spb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spb")).args(args).output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const CYCLE_CONFIG: &str = r#"{
    "problem": {"type": "graph", "graph": {"k": 3, "edges": [[1,2],[2,3],[3,1]]}},
    "env": {"regime": "stochastic", "profile": {"means": [0.2, 0.5, 0.5]}},
    "horizon": 1024,
    "replicates": 2,
    "seed": 5,
    "output": "out"
}"#;

#[test]
fn run_writes_traces_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", CYCLE_CONFIG);
    let out = spb(&["run", "--config", &cfg, "--strict", "--parallel", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json(&out);
    assert_eq!(summary["replicates"], 2);
    assert_eq!(summary["violations"], 0);
    let csv = fs::read_to_string(dir.path().join("out/trace_1.csv")).unwrap();
    assert!(csv.starts_with("round,action,beta,h,gamma,inst_regret,cum_regret,round_cost\n"));
    assert_eq!(csv.lines().count(), 1025);
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", CYCLE_CONFIG);
    assert!(spb(&["run", "--config", &cfg]).status.success());
    let first = fs::read(dir.path().join("out/trace_0.csv")).unwrap();
    assert!(spb(&["run", "--config", &cfg, "--parallel", "1"]).status.success());
    assert_eq!(first, fs::read(dir.path().join("out/trace_0.csv")).unwrap());
}

#[test]
fn fit_reads_trace_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", CYCLE_CONFIG);
    assert!(spb(&["run", "--config", &cfg]).status.success());
    let fit_path = dir.path().join("fit.json");
    let traces = dir.path().join("out");
    let out = spb(&["fit", "--traces", traces.to_str().unwrap(), "--out", fit_path.to_str().unwrap()]);
    assert!(out.status.success());
    let saved: serde_json::Value = serde_json::from_str(&fs::read_to_string(fit_path).unwrap()).unwrap();
    assert_eq!(saved["traces"], 2);
    assert!(saved["fit"]["slope"].is_number());
}

#[test]
fn strict_contract_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    // beta1 far below the default drives the exploration rate above 1/2
    let cfg = write(
        dir.path(),
        "cfg.json",
        r#"{
            "problem": {"type": "paid", "arms": 4, "cost": 1.0},
            "env": {"regime": "stochastic", "profile": {"means": [0.2, 0.5, 0.5, 0.5]}},
            "horizon": 256,
            "overrides": {"beta1": 0.01}
        }"#,
    );
    assert_eq!(spb(&["run", "--config", &cfg, "--strict"]).status.code(), Some(3));
    let lenient = spb(&["run", "--config", &cfg]);
    assert_eq!(lenient.status.code(), Some(0));
    assert!(json(&lenient)["violations"].as_u64().unwrap() > 0);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.json");
    assert_eq!(spb(&["run", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
    let bad = write(dir.path(), "bad.json", r#"{"problem": {"type": "paid", "arms": 3, "cost": 1}, "horizon": 0}"#);
    assert_eq!(spb(&["run", "--config", &bad]).status.code(), Some(2));
    let zero = write(
        dir.path(),
        "zero.json",
        r#"{"problem": {"type": "paid", "arms": 3, "cost": 1},
            "env": {"regime": "stochastic", "profile": {"means": [0.2, 0.5, 0.5]}}, "horizon": 0}"#,
    );
    assert_eq!(spb(&["run", "--config", &zero]).status.code(), Some(2));
}

#[test]
fn analyze_reports_structure() {
    let dir = tempfile::tempdir().unwrap();
    let game = write(
        dir.path(),
        "game.json",
        r#"{"loss": [[0.4, 0.4], [1, 0], [0, 1]], "feedback": [[0, 1], [0, 0], [0, 0]]}"#,
    );
    let out = spb(&["analyze", &game]);
    assert!(out.status.success());
    let rep = json(&out);
    assert_eq!(rep["pareto"], serde_json::json!([true, true, true]));
    assert_eq!(rep["global_observability"], true);
    assert!(rep["c_g"].as_f64().unwrap() >= 1.0);

    // action 3 is dominated
    let dominated = write(
        dir.path(),
        "dominated.json",
        r#"{"loss": [[0, 1], [1, 0], [1, 1]], "feedback": [[0, 1], [0, 1], [0, 1]]}"#,
    );
    assert_eq!(spb(&["analyze", &dominated]).status.code(), Some(2));
}

#[test]
fn analyze_graph_reports_domination() {
    let dir = tempfile::tempdir().unwrap();
    let tri = write(
        dir.path(),
        "tri.json",
        r#"{"k": 3, "edges": [[1,1],[2,1],[2,2],[3,2],[1,3],[3,3]]}"#,
    );
    let out = spb(&["analyze-graph", &tri]);
    assert!(out.status.success());
    let rep = json(&out);
    assert_eq!(rep["class"], "strong");
    assert!((rep["delta_star"].as_f64().unwrap() - 1.5).abs() < 1e-9);
    assert_eq!(rep["integer_domination"], 2);

    let cycle = write(dir.path(), "cycle.json", r#"{"k": 3, "edges": [[1,2],[2,3],[3,1]]}"#);
    assert_eq!(json(&spb(&["analyze-graph", &cycle]))["class"], "weak");

    let zero_id = write(dir.path(), "zero.json", r#"{"k": 2, "edges": [[0,1]]}"#);
    assert_eq!(spb(&["analyze-graph", &zero_id]).status.code(), Some(2));
}

#[test]
fn verify_command_passes() {
    let out = spb(&["verify-lemmas", "--instances", "100", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let rep = json(&out);
    assert_eq!(rep["lemma1_rule1"]["checked"], 102);
    assert_eq!(rep["lemma1_rule1"]["passed"], 102);
    assert_eq!(rep["theorem3"].as_array().unwrap().len(), 6);
}
