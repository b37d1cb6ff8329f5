use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bestofn::experiment::{load_spec, ExperimentError};

const SYMMETRIC: &str = r#"{"n": 2, "quality": [1, 1], "cost": [1, 1], "interaction": "na"}"#;

fn bestofn(args: &[&str], spec: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bestofn"))
        .args(args)
        .arg("--spec")
        .arg(spec)
        .arg("--out")
        .arg(out)
        .arg("--quiet")
        .output()
        .unwrap()
}

fn write_spec(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("spec.json");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn simulate_writes_one_row_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        &format!(r#"{{"instance": {SYMMETRIC}, "swarm": {{"population": 20}}, "repetitions": 100}}"#),
    );
    let out = dir.path().join("out");
    let o = bestofn(&[], &spec, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let runs = fs::read_to_string(out.join("runs.csv")).unwrap();
    let mut lines = runs.lines();
    assert_eq!(lines.next(), Some("seed,decided,winner,decision_time"));
    assert_eq!(lines.count(), 100);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["command"], "simulate");
    assert_eq!(summary["results"]["repetitions"], 100);
    assert_eq!(summary["config"]["swarm"]["gain"], 10.0);
    assert_eq!(summary["config"]["swarm"]["buffer_capacity"], 3);
    assert!(summary["results"]["exit_probability_se"].is_array());
    assert!(summary["version"].is_string());
    assert!(!out.join("trajectory.csv").exists());
}

#[test]
fn sweep_writes_one_record_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        &format!(
            r#"{{"command": "sweep", "instance": {SYMMETRIC}, "swarm": {{"population": 10}},
                "repetitions": 20, "sweep": {{"parameter": "q_2", "values": [0.5, 0.75, 1.0]}}}}"#
        ),
    );
    let out = dir.path().join("out");
    let o = bestofn(&[], &spec, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let sweep = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<&str> = sweep.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("parameter,value,"));
    assert!(rows[1].starts_with("q_2,0.5,"));
    assert!(rows[3].starts_with("q_2,1,"));
}

#[test]
fn absorb_over_the_limit_fails() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        &format!(r#"{{"instance": {SYMMETRIC}, "swarm": {{"population": 200}}}}"#),
    );
    let o = bestofn(&["absorb"], &spec, &dir.path().join("out"));
    assert!(!o.status.success());
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("state space") && stderr.contains("exceeds the limit"), "{stderr}");
}

#[test]
fn absorb_and_meanfield_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        r#"{"instance": {"n": 2, "quality": [1, 0.5], "cost": [1, 1], "interaction": "na"},
            "swarm": {"population": 10}, "meanfield": {"horizon": 5, "dt": 0.5}}"#,
    );
    let out = dir.path().join("out");
    assert!(bestofn(&["absorb"], &spec, &out).status.success());
    let absorption = fs::read_to_string(out.join("absorption.csv")).unwrap();
    let rows: Vec<&str> = absorption.lines().collect();
    assert_eq!(rows[0], "option,probability,mean_time");
    assert_eq!(rows.len(), 3);

    assert!(bestofn(&["meanfield"], &spec, &out).status.success());
    let traj = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let rows: Vec<&str> = traj.lines().collect();
    assert_eq!(rows[0], "time,e_1,e_2,d_1,d_2");
    assert_eq!(rows.len(), 12);
    assert!(rows[11].starts_with("5,"));
}

#[test]
fn identical_spec_and_seed_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        r#"{"instance": {"n": 2, "quality": [1, 0.8], "cost": [1, 2], "interaction": "synergistic"},
            "swarm": {"population": 30, "trajectory_interval": 2.0, "rule": {"type": "majority"}},
            "repetitions": 25}"#,
    );
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for (out, seed) in [(&a, "7"), (&b, "7"), (&c, "8")] {
        assert!(bestofn(&["--seed", seed], &spec, out).status.success());
    }
    for file in ["runs.csv", "trajectory.csv", "summary.json"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
    assert_ne!(fs::read(a.join("runs.csv")).unwrap(), fs::read(c.join("runs.csv")).unwrap());
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 7);
    let first = fs::read_to_string(a.join("runs.csv")).unwrap();
    assert!(first.lines().nth(1).unwrap().starts_with("7,"));
}

#[test]
fn repetitions_flag_overrides_spec() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), &format!(r#"{{"instance": {SYMMETRIC}, "swarm": {{"population": 10}}}}"#));
    let out = dir.path().join("out");
    assert!(bestofn(&["--repetitions", "7"], &spec, &out).status.success());
    assert_eq!(fs::read_to_string(out.join("runs.csv")).unwrap().lines().count(), 8);
}

#[test]
fn scenario_file_is_resolved_relative_to_spec() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("paths.json"), r#"{"type": "shortest_path", "lengths": [1, 2]}"#).unwrap();
    let spec = write_spec(dir.path(), r#"{"scenario_file": "paths.json", "swarm": {"population": 10}, "repetitions": 5}"#);
    let out = dir.path().join("out");
    let o = bestofn(&[], &spec, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["instance"]["cost"], serde_json::json!([1.0, 2.0]));
}

#[test]
fn bad_specs_are_rejected_with_a_reason() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), &format!(r#"{{"instance": {SYMMETRIC}, "speling": 1}}"#));
    assert!(matches!(load_spec(&spec), Err(ExperimentError::UnknownKey { key }) if key == "speling"));
    let o = bestofn(&[], &spec, &dir.path().join("out"));
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("speling"));

    let spec = write_spec(dir.path(), &format!(r#"{{"instance": {SYMMETRIC}, "swarm": {{"tau": 0.4}}}}"#));
    assert!(matches!(load_spec(&spec), Err(ExperimentError::Validation { field, .. }) if field == "tau"));

    let missing = dir.path().join("nope.json");
    let o = bestofn(&[], &missing, &dir.path().join("out"));
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.json"));
}
