use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn looplab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_looplab"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .arg("--quiet")
        .env_remove("LOOPLAB_OUT")
        .output()
        .expect("binary runs")
}

fn records(dir: &Path) -> Vec<Value> {
    fs::read_to_string(dir.join("records.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

const DISK_A: &str = r#"{"disk":{"center":[0,0],"radius":0.25}}"#;
const OUTSIDE: &str = r#"{"complement":{"disk":{"center":[0,0],"radius":0.6}}}"#;

#[test]
fn unknown_command_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(looplab(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(looplab(dir.path(), &["energy", "--route", "sideways"]).status.code(), Some(2));
}

#[test]
fn malformed_config_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, "{\n  \"command\": \"energy\",\n  \"curve\": \"circle:64\",\n  \"nonsense\": 1\n}\n").unwrap();
    let out = looplab(dir.path(), &["energy", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("bad.json:4:"), "{msg}");
}

#[test]
fn missing_inputs_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(looplab(dir.path(), &["werner", "--v1", DISK_A, "--v2", OUTSIDE]).status.code(), Some(2));
    assert_eq!(looplab(dir.path(), &["energy"]).status.code(), Some(2));
    let cfg = dir.path().join("mass.json");
    fs::write(&cfg, r#"{"command": "mass"}"#).unwrap();
    assert_eq!(looplab(dir.path(), &["energy", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn config_echo_reproduces_the_payload() {
    let dir = tempfile::tempdir().unwrap();
    let out = looplab(dir.path(), &["energy", "--curve", "quadratic:0.1:256", "--eps", "0.2,0.1"]);
    assert_eq!(out.status.code(), Some(0));
    let first = records(dir.path()).remove(0);
    let cfg = dir.path().join("echo.json");
    fs::write(&cfg, serde_json::to_string(&first["config"]).unwrap()).unwrap();
    assert_eq!(looplab(dir.path(), &["energy", "--config", cfg.to_str().unwrap()]).status.code(), Some(0));
    let recs = records(dir.path());
    assert_eq!(recs.len(), 2);
    assert_eq!(recs[0]["payload"], recs[1]["payload"]);
    assert_eq!(recs[0]["config"], recs[1]["config"]);
    assert!(recs[0]["version"].as_str().unwrap().starts_with('v'));
    let csv = fs::read_to_string(dir.path().join("energy.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("eps,energy"));
    assert_eq!(csv.lines().filter(|l| l.starts_with("eps")).count(), 1);
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn werner_is_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let common = ["werner", "--v1", DISK_A, "--v2", OUTSIDE, "--box-half", "1", "--mesh", "1/16", "--replicas", "100"];
    for threads in ["1", "3"] {
        let mut args = common.to_vec();
        args.extend(["--seed", "9", "--threads", threads]);
        assert_eq!(looplab(dir.path(), &args).status.code(), Some(0));
    }
    let recs = records(dir.path());
    assert_eq!(recs[0]["payload"], recs[1]["payload"]);
    let csv = fs::read_to_string(dir.path().join("werner_counts.csv")).unwrap();
    assert_eq!(csv.lines().count(), 201);
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    let (a, b) = rows.split_at(100);
    assert_eq!(a, b);
}

#[test]
fn lambda_star_table_has_fixed_columns() {
    let dir = tempfile::tempdir().unwrap();
    let v2 = r#"{"disk":{"center":[1,0],"radius":0.25}}"#;
    let out = looplab(dir.path(), &["lambda-star", "--v1", DISK_A, "--v2", v2, "--meshes", "1/8,1/16", "--r-factors", "4,16,64"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("lambda_star.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("mesh,R,mass,renormalized"));
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn restriction_verification_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = looplab(
        dir.path(),
        &[
            "verify",
            "--identity",
            "restriction",
            "--k",
            DISK_A,
            "--d-prime",
            r#"{"disk":{"center":[0,0],"radius":0.5}}"#,
            "--domain",
            r#"{"disk":{"center":[0,0],"radius":1}}"#,
            "--meshes",
            "1/16,1/32",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let rec = records(dir.path()).remove(0);
    assert_eq!(rec["payload"]["reports"][0]["verdict"], "pass");
}

#[test]
fn om_prediction_at_eight_thirds_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = looplab(dir.path(), &["om", "--kappa", "8/3", "--map", "quadratic:0.2"]);
    assert_eq!(out.status.code(), Some(0));
    let rec = records(dir.path()).remove(0);
    assert_eq!(rec["payload"]["prediction"]["value"].as_f64(), Some(1.0));
}

#[test]
fn soup_files_are_never_overwritten() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["soup", "--domain", r#"{"square":{"center":[0,0],"half":0.25}}"#, "--mesh", "1/8", "--seed", "4"];
    for _ in 0..2 {
        assert_eq!(looplab(dir.path(), &args).status.code(), Some(0));
    }
    let a = fs::read_to_string(dir.path().join("soup-4-0.jsonl")).unwrap();
    let b = fs::read_to_string(dir.path().join("soup-4-1.jsonl")).unwrap();
    assert_eq!(a, b);
    let header: Value = serde_json::from_str(a.lines().next().unwrap()).unwrap();
    assert_eq!(header["seed"], 4);
}
