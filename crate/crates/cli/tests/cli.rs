use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fair_cohort(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fair-cohort"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const FOUR_SCORES_JSONL: &str = r#"{"id":"a","score":0.1}
{"id":"b","score":0.3}
{"id":"c","score":0.6}
{"id":"d","score":0.9}
"#;

#[test]
fn marginals_four_scores_from_jsonl_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let jsonl = write(dir.path(), "s.jsonl", FOUR_SCORES_JSONL);
    let csv = write(dir.path(), "s.csv", "id,score\na,0.1\nb,0.3\nc,0.6\nd,0.9\n");
    for input in [jsonl, csv] {
        let report = json(&fair_cohort(&["marginals", "--mode", "offline-linear", "--k", "2", "--input", &input]));
        assert_eq!(report["schema"], 1);
        let marginals: Vec<f64> = report["candidates"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| c["marginal"].as_f64().unwrap())
            .collect();
        for (m, e) in marginals.iter().zip([0.125, 0.325, 0.625, 0.925]) {
            assert!((m - e).abs() < 1e-9);
        }
        assert!((report["utilities"]["linear"].as_f64().unwrap() - 1.3175).abs() < 1e-9);
        assert_eq!(report["fairness"]["satisfied"], true);
    }
}

#[test]
fn simulate_replays_byte_identically() {
    let args = [
        "simulate", "--mode", "online-ratio", "--k", "3", "--gen", "beta(2,5):40", "--seed", "9", "--trials", "5000",
    ];
    let a = fair_cohort(&args);
    let b = fair_cohort(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let report = json(&a);
    assert_eq!(report["config"]["seed"], 9);
    assert_eq!(report["config"]["source"]["generated"]["spec"], "beta(2,5)");
    assert!(report["coverage"].as_f64().unwrap() >= 0.9);
    assert!(report["pending"]["max"].as_u64().unwrap() <= report["pending"]["bound"].as_u64().unwrap());
}

#[test]
fn csv_output_and_out_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let status = fair_cohort(&[
        "simulate", "--k", "2", "--gen", "two-point{0.5:2,1.0:1}", "--mode", "offline-ratio", "--trials", "1000",
        "--format", "csv", "--out", out.to_str().unwrap(),
    ]);
    assert!(status.status.success());
    assert!(status.stdout.is_empty());
    let text = std::fs::read_to_string(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("id,score,marginal,frequency,half_width"));
    assert_eq!(lines.last().unwrap().split(',').take(4).collect::<Vec<_>>(), ["3", "1.0", "1.0", "1.0"]);
}

#[test]
fn select_returns_k_ids() {
    let report = json(&fair_cohort(&["select", "--mode", "online-linear", "--epsilon", "0.2", "--k", "4", "--gen", "uniform01:50"]));
    assert_eq!(report["cohort"].as_array().unwrap().len(), 4);
    let csv = fair_cohort(&["select", "--k", "2", "--gen", "uniform01:5", "--format", "csv"]);
    assert_eq!(String::from_utf8(csv.stdout).unwrap().lines().count(), 3);
}

#[test]
fn trace_goes_to_stderr() {
    let out = fair_cohort(&["select", "--mode", "online-ratio", "--k", "2", "--gen", "uniform01:12", "--trace"]);
    assert!(out.status.success());
    let events: Vec<Value> = String::from_utf8_lossy(&out.stderr)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(events.len(), 12);
    assert_eq!(events[11]["step"], 11);
    json(&out);
}

#[test]
fn baseline_three_scores() {
    let report = json(&fair_cohort(&["baseline", "--k", "2", "--gen", "two-point{0.5:2,1.0:1}", "--trials", "1000"]));
    assert_eq!(report["config"]["mode"], "baseline-weighted");
    let probs: Vec<f64> = report["subsets"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["probability"].as_f64().unwrap())
        .collect();
    assert_eq!(probs.len(), 3);
    for (p, e) in probs.iter().zip([0.25, 0.375, 0.375]) {
        assert!((p - e).abs() < 1e-12);
    }
    assert!((report["utilities"]["maxmin"].as_f64().unwrap() - 0.75).abs() < 1e-12);
    let uniform = json(&fair_cohort(&["baseline", "--mode", "baseline-uniform", "--k", "1", "--gen", "uniform01:4"]));
    assert_eq!(uniform["candidates"][0]["marginal"], 0.25);
    let wrong = fair_cohort(&["baseline", "--mode", "offline-linear", "--k", "1", "--gen", "uniform01:4"]);
    assert_eq!(wrong.status.code(), Some(2));
}

#[test]
fn verify_passes_and_reports() {
    for target in ["rounding", "fairness", "invariants", "oracle", "worst-case", "all"] {
        let out = fair_cohort(&[
            "verify", "--target", target, "--mode", "online-linear", "--epsilon", "0.25", "--k", "3", "--gen",
            "adversarial-boundary(0.25):60", "--trials", "200",
        ]);
        let outcome = json(&out);
        assert_eq!(outcome["passed"], true, "{target}: {outcome}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.jsonl", "{\"id\":\"a\",\"score\":1.2}\n");
    assert_eq!(fair_cohort(&["marginals", "--k", "1", "--input", &bad]).status.code(), Some(2));
    assert_eq!(fair_cohort(&["marginals", "--k", "5", "--gen", "uniform01:3"]).status.code(), Some(2));
    assert_eq!(fair_cohort(&["marginals", "--k", "1", "--gen", "uniform01:3", "--mode", "nope"]).status.code(), Some(2));
    assert_eq!(fair_cohort(&["marginals", "--k", "1", "--gen", "uniform01:3", "--alpha", "0.8"]).status.code(), Some(2));
    assert_eq!(fair_cohort(&["marginals", "--k", "1", "--gen", "uniform01:0"]).status.code(), Some(2));
    assert_eq!(fair_cohort(&["frobnicate"]).status.code(), Some(2));
    let missing = dir.path().join("missing.jsonl");
    assert_eq!(fair_cohort(&["marginals", "--k", "1", "--input", missing.to_str().unwrap()]).status.code(), Some(1));
}
