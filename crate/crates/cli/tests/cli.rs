use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn madogram(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_madogram"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn error_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stderr).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) {
    fs::write(dir.join(name), body).unwrap();
}

const MODEL: &str = r#"{"family": "symmetric-logistic", "d": 2, "params": {"theta": 2.0}}"#;
const PROFILE: &str = r#"{"mode": "independent", "p": [0.75, 0.75]}"#;

#[test]
fn sample_writes_requested_rows() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["sample", "--family", "symmetric-logistic", "--theta", "2", "--d", "2", "--n", "1000", "--seed", "7"];
    let text = ok(&madogram(&args, dir.path()));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x1,x2");
    assert_eq!(lines.len(), 1001);
    for line in &lines[1..] {
        for cell in line.split(',') {
            let u: f64 = cell.parse().unwrap();
            assert!(u > 0.0 && u < 1.0);
        }
    }
    assert_eq!(text, ok(&madogram(&args, dir.path())));
}

#[test]
fn masked_sample_round_trips_through_estimate() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "p.json", PROFILE);
    let args = ["sample", "--family", "symmetric-logistic", "--theta", "2", "--n", "400", "--seed", "3", "--profile", "p.json", "-o", "m.csv"];
    ok(&madogram(&args, dir.path()));
    let data = fs::read_to_string(dir.path().join("m.csv")).unwrap();
    assert!(data.contains("NA"));

    let table = ok(&madogram(&["estimate", "--input", "m.csv", "--grid", "9"], dir.path()));
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows[0], "w1,w2,nu_H,nu_Hstar,A,clipped,N");
    assert_eq!(rows.len(), 10);

    let theta: serde_json::Value =
        serde_json::from_str(&ok(&madogram(&["estimate", "--input", "m.csv", "--extremal"], dir.path()))).unwrap();
    let t = theta["theta"].as_f64().unwrap();
    assert!((1.0..=2.0).contains(&t), "{t}");
}

#[test]
fn variance_grid_has_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "m.json", MODEL);
    write(dir.path(), "p.json", PROFILE);
    let text = ok(&madogram(&["variance", "--model", "m.json", "--profile", "p.json", "--grid", "19"], dir.path()));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "w1,w2,A,sigma_dplus1_sq,S_H,S_Hstar,V_Hstar");
    assert_eq!(lines.len(), 20);
    for line in &lines[1..] {
        let v: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert!(v[4] > 0.0 && v[5] > 0.0);
    }
}

fn experiment(dir: &Path, out: &str, workers: &str) -> (String, String) {
    let args = ["--workers", workers, "experiment", "--preset", "desk-e1", "--seed", "11", "--n-iter", "60", "--output-dir", out];
    ok(&madogram(&args, dir));
    let base = dir.join(out).join("desk-e1-log");
    (
        fs::read_to_string(base.join("result.csv")).unwrap(),
        fs::read_to_string(base.join("summary.json")).unwrap(),
    )
}

#[test]
fn experiment_outputs_are_reproducible_and_worker_independent() {
    let dir = tempfile::tempdir().unwrap();
    let first = experiment(dir.path(), "a", "1");
    let again = experiment(dir.path(), "b", "1");
    let parallel = experiment(dir.path(), "c", "4");
    assert_eq!(first, again);
    assert_eq!(first, parallel);

    let summary: serde_json::Value = serde_json::from_str(&first.1).unwrap();
    for key in ["mise_hybrid", "mise_corrected", "median_delta_hybrid", "median_delta_corrected"] {
        assert!(summary[key].as_f64().unwrap() > 0.0, "{key}");
    }
    assert_eq!(summary["grid_points"], 39);
    assert!(dir.path().join("a/runtime.json").exists());
}

#[test]
fn clusters_on_fixture() {
    let dir = tempfile::tempdir().unwrap();
    ok(&madogram(
        &["fixture", "--seed", "4", "--years", "600", "--short-cluster", "3", "--short-overlap", "9", "--output-dir", "fx"],
        dir.path(),
    ));
    let args = [
        "clusters", "--input", "fx/stations.csv", "--coords", "fx/coords.csv", "--k", "7", "--size", "7", "--seed", "1",
        "--output-dir", "out",
    ];
    ok(&madogram(&args, dir.path()));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/clusters.json")).unwrap()).unwrap();
    assert_eq!(report["assignments"].as_array().unwrap().len(), 49);
    assert_eq!(report["retained"].as_array().unwrap().len(), 6);
    let omitted = &report["omitted"][0];
    assert_eq!(omitted["overlap"], 9);
    assert_eq!(omitted["reason"], "insufficient overlap");
    let csv = fs::read_to_string(dir.path().join("out/clusters.csv")).unwrap();
    assert_eq!(csv.lines().count(), 8);
}

#[test]
fn schema_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = madogram(&["sample", "--n", "5"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["kind"], "schema");

    let out = madogram(&["sample", "--family", "nope", "--n", "5", "--seed", "1"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    write(dir.path(), "bad.json", r#"{"name": "x", "niter": 3}"#);
    let out = madogram(&["experiment", "--config", "bad.json", "--seed", "1", "--output-dir", "o"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["kind"], "schema");
}

#[test]
fn computation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    // every row has a missing cell, so no complete row is left
    write(dir.path(), "holes.csv", "x1,x2\n0.1,NA\nNA,0.4\n0.3,NA\n");
    let out = madogram(&["estimate", "--input", "holes.csv", "--grid", "3"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"]["kind"], "computation");
}
