use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_minipatch"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn simulate(dir: &Path, name: &str, extra: &[&str]) {
    let mut args = vec!["simulate", "--n-obs", "120", "--n-features", "12", "--snr", "5", "--out", name];
    args.extend_from_slice(extra);
    let o = run(dir, &args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn simulate_writes_data_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "d.csv", &["--seed", "4"]);
    let csv = std::fs::read_to_string(dir.path().join("d.csv")).unwrap();
    assert_eq!(csv.lines().count(), 121);
    assert!(csv.starts_with("x0,x1,"));
    let sidecar: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("d.json")).unwrap()).unwrap();
    assert_eq!(sidecar["beta"].as_array().unwrap().len(), 12);
    assert_eq!(sidecar["support"].as_array().unwrap().len(), 10);
    assert_eq!(sidecar["spec"]["seed"], 4);
}

#[test]
fn infer_reports_every_feature() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "d.csv", &[]);
    let o = run(dir.path(), &["infer", "--data", "d.csv", "--K", "800", "--out", "r.csv"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "r.csv");
    let table = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert_eq!(table.lines().count(), 13);

    let o = run(dir.path(), &["infer", "--data", "d.csv", "--K", "800", "--bonferroni", "--format", "json"]);
    assert!(o.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["report"]["bonferroni"], true);
    assert!(doc["report"]["b_hat"].as_f64().unwrap() > 0.0);
    assert_eq!(doc["config"]["k"], 800);
    assert_eq!(doc["report"]["features"].as_array().unwrap().len(), 12);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "d.csv", &[]);
    let code = |args: &[&str]| run(dir.path(), args).status.code().unwrap();
    assert_eq!(code(&["infer", "--data", "missing.csv"]), 3);
    assert_eq!(code(&["infer", "--data", "d.csv", "--target-col", "nope", "--K", "50"]), 3);
    assert_eq!(code(&["infer", "--data", "d.csv", "--alpha", "1.5", "--K", "50"]), 2);
    assert_eq!(code(&["infer", "--data", "d.csv", "--no-such-flag"]), 2);
    assert_eq!(code(&["infer", "--data", "d.csv", "--K", "3", "--n", "60", "--m", "11"]), 4);
    assert_eq!(code(&["--help"]), 0);
}

#[test]
fn predict_from_snapshot_matches_fresh_training() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "d.csv", &[]);
    simulate(dir.path(), "t.csv", &["--seed", "9"]);
    let o = run(dir.path(), &["infer", "--data", "d.csv", "--K", "600", "--seed", "2", "--save-ensemble", "e.bin", "--out", "r.csv"]);
    assert!(o.status.success());
    let a = run(dir.path(), &["predict", "--ensemble", "e.bin", "--test", "t.csv", "--format", "json"]);
    let b = run(dir.path(), &["predict", "--data", "d.csv", "--K", "600", "--seed", "2", "--test", "t.csv", "--format", "json"]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
    let doc: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    let preds = doc["predictions"].as_array().unwrap();
    assert_eq!(preds.len(), 120);
    assert!(preds.iter().all(|p| p["lo"].as_f64().unwrap() <= p["hi"].as_f64().unwrap()));
}

#[test]
fn predict_sets_use_class_names() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "c.csv", &["--task", "classification", "--signal", "1"]);
    let o = run(
        dir.path(),
        &["predict", "--data", "c.csv", "--task", "classification", "--K", "400", "--test", "c.csv", "--out", "p.csv"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(dir.path().join("p.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("row_id,labels"));
    for line in lines {
        let labels = line.split(',').nth(1).unwrap();
        assert!(labels.split(';').all(|l| l.is_empty() || l == "0" || l == "1"), "{line}");
    }
}

#[test]
fn oracle_emits_targets() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["oracle", "--n-obs", "300", "--n-features", "12", "--snr", "5", "--m", "3", "--K", "500", "--n-test", "500", "--ridge-lambda", "0"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let (mc, cf, gap) = (doc["target_mc"].as_f64().unwrap(), doc["target_closed_form"].as_f64().unwrap(), doc["gap"].as_f64().unwrap());
    assert!((mc - cf - gap).abs() < 1e-12);
    assert!(doc["mc_se"].as_f64().unwrap() > 0.0);
}

#[test]
fn bench_output_is_independent_of_threads() {
    let dir = tempfile::tempdir().unwrap();
    let args = |t: &'static str| {
        vec![
            "bench", "selection", "--n-obs", "80", "--n-features", "12", "--snr", "5", "--K", "300", "--replicates", "3", "--seed", "7", "--threads", t, "--format", "json",
        ]
    };
    let one = run(dir.path(), &args("1"));
    let three = run(dir.path(), &args("3"));
    assert!(one.status.success());
    assert_eq!(one.stdout, three.stdout);
    let report: serde_json::Value = serde_json::from_slice(&one.stdout).unwrap();
    assert_eq!(report["experiment"], "selection");
    assert_eq!(report["master_seed"], 7);
    let f1 = report["summary"][0]["metrics"]["f1"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&f1));

    let o = run(dir.path(), &["bench", "coverage", "--n-obs", "60", "--n-features", "12", "--K", "300", "--replicates", "2", "--sizes", "40,60", "--n-test", "200", "--out", "cov.csv"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o), "cov.csv\ncov_summary.csv\n");
    let raw = std::fs::read_to_string(dir.path().join("cov.csv")).unwrap();
    assert_eq!(raw.lines().count(), 5);

    let o = run(dir.path(), &["bench", "power", "--snrs", "", "--replicates", "1"]);
    assert_eq!(o.status.code(), Some(2));
}
