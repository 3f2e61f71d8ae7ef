use std::path::Path;
use std::process::{Command, Output};

fn misinfo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_misinfo")).args(args).output().unwrap()
}

fn code(args: &[&str]) -> i32 {
    misinfo(args).status.code().unwrap()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

fn simulate(dir: &Path, n: &str) -> String {
    let data = p(dir, "data");
    assert_eq!(code(&["simulate", "--out", &data, "--n", n, "--seed", "5"]), 0);
    data
}

#[test]
fn pipeline_writes_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "30");
    for f in ["edges.tsv", "nodes.tsv", "traces.jsonl"] {
        assert!(Path::new(&data).join(f).exists());
    }
    let model = p(dir.path(), "model.json");
    assert_eq!(code(&["train", "--data", &data, "--out", &model, "--split", "all"]), 0);
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(doc["Z"], 4);
    assert!(doc["classifier"]["weights"].is_array());

    let det = p(dir.path(), "det");
    let out = misinfo(&["detect", "--data", &data, "--model", &model, "--out", &det, "--max-path-len", "256"]);
    assert!(out.status.success());
    let rec: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let file: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(Path::new(&det).join("decision.json")).unwrap()).unwrap();
    assert_eq!(rec, file);
    assert!(rec["T"].as_u64().unwrap() >= 1);
    assert!(["dp_threshold", "sprt", "convergence", "horizon"].contains(&rec["rule_used"].as_str().unwrap()));
    let csv = std::fs::read_to_string(Path::new(&det).join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("ℓ,A0,A1,posterior,log_lr\n"));

    let ev = p(dir.path(), "eval");
    let out = misinfo(&["eval", "--data", &data, "--model", &model, "--out", &ev, "--policy", "sprt", "--max-path-len", "256"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("accuracy="));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(Path::new(&ev).join("report.json")).unwrap()).unwrap();
    assert!(report["mean_detection_events"].as_f64().unwrap() >= 1.0);
    assert!(report["error_bounds"]["b_up"].as_f64().unwrap() > 18.9);
    for f in ["per_trace.csv", "accuracy_curve.csv"] {
        assert!(Path::new(&ev).join(f).exists());
    }
}

#[test]
fn thresholds_reports_and_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let th = p(dir.path(), "th.csv");
    let out = misinfo(&["thresholds", "--c", "20", "--out", &th]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("pi_low=0.5 pi_up=0.5"));
    let table = std::fs::read_to_string(&th).unwrap();
    assert!(table.starts_with("# c_I=10,c_II=10,c=20,pi_low=0.5,pi_up=0.5\npi,value\n"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["eval", "--no-such-flag"]), 2);
    // Missing input file.
    assert_eq!(code(&["detect", "--graph", &p(dir.path(), "none.tsv"), "--traces", &p(dir.path(), "none.jsonl")]), 1);
    // Malformed model.
    let bad = p(dir.path(), "bad.json");
    std::fs::write(&bad, "{\"Z\": 4}").unwrap();
    assert_eq!(code(&["thresholds", "--model", &bad]), 2);
    // Invalid cost.
    assert_eq!(code(&["thresholds", "--c", "-1"]), 2);
    // Solver out of sweeps, table still written.
    let th = p(dir.path(), "th.csv");
    assert_eq!(code(&["thresholds", "--max-sweeps", "1", "--out", &th]), 4);
    assert!(Path::new(&th).exists());

    let data = simulate(dir.path(), "20");
    // A single-label corpus cannot train a classifier.
    let one = p(dir.path(), "one");
    assert_eq!(code(&["simulate", "--out", &one, "--n", "10", "--label", "1"]), 0);
    assert_eq!(code(&["train", "--data", &one, "--out", &p(dir.path(), "m.json"), "--split", "all"]), 3);
    // Trace index past the end.
    assert_eq!(code(&["detect", "--data", &data, "--index", "999"]), 2);
}

#[test]
fn empty_trace_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("edges.tsv"), "0\t1\n").unwrap();
    std::fs::write(d.join("traces.jsonl"), "{\"label\":1,\"source\":0,\"events\":[]}\n").unwrap();
    let out = misinfo(&["detect", "--data", &d.display().to_string()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_over_a_given_graph() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let edges: String = (0..30).map(|i| format!("{}\t{}\n{}\t{}\n", i, i + 1, i, (i + 7) % 31)).collect();
    std::fs::write(d.join("g.tsv"), edges).unwrap();
    let out = p(d, "sim");
    assert_eq!(code(&["simulate", "--graph", &p(d, "g.tsv"), "--source", "0", "--n", "5", "--out", &out]), 0);
    let traces = std::fs::read_to_string(Path::new(&out).join("traces.jsonl")).unwrap();
    assert_eq!(traces.lines().count(), 5);
    assert!(traces.lines().all(|l| l.contains("\"source\":0")));
    assert_eq!(
        std::fs::read_to_string(Path::new(&out).join("edges.tsv")).unwrap().lines().count(),
        60
    );
}

#[test]
fn config_file_and_flags_merge() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = p(dir.path(), "run.json");
    std::fs::write(&cfg, "{\"costs\": {\"c\": 20.0}}").unwrap();
    let out = misinfo(&["thresholds", "--config", &cfg]);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("pi_low=0.5 pi_up=0.5"));
    let out = misinfo(&["thresholds", "--config", &cfg, "--c", "0.05"]);
    assert!(!String::from_utf8_lossy(&out.stdout).starts_with("pi_low=0.5 pi_up=0.5"));
    std::fs::write(&cfg, "{\"unknown\": 1}").unwrap();
    assert_eq!(code(&["thresholds", "--config", &cfg]), 2);
}
