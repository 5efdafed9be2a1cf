use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn halfmass(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_halfmass"))
        .args(args)
        .env("HALFMASS_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn flat_dec_passes() {
    let out = halfmass(&["check-dec", "--family", "flat", "--samples", "32", "--theta", "45"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["passed"], true);
    assert_eq!(v["worst_margin"].as_f64(), Some(0.0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("PASS tilted-dec"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&halfmass(&["check-dec", "--family", "kerr"])), 2);
    assert_eq!(code(&halfmass(&["teleport"])), 2);
    assert_eq!(code(&halfmass(&["adm", "--theta", "120"])), 2);
    assert_eq!(code(&halfmass(&["adm", "--n", "9"])), 2);
    assert_eq!(code(&halfmass(&["adm", "--radii", "16,x"])), 2);
}

#[test]
fn failing_check_exits_one() {
    // synthetic momentum violates the interior condition
    let out = halfmass(&["check-dec", "--family", "synthetic-momentum", "--samples", "32"]);
    assert_eq!(code(&out), 1);
    let v = json(&out);
    assert_eq!(v["passed"], false);
    assert!(!v["violations"].as_array().unwrap().is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("failed checks: interior-dec"));
}

#[test]
fn json_output_is_reproducible() {
    // the report echoes its own path, so both runs write to the same file
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let mut snapshots = Vec::new();
    for threads in ["1", "4", "4"] {
        let out = Command::new(env!("CARGO_BIN_EXE_halfmass"))
            .args(["witten-flux", "--family", "bowen-york", "--theta", "30", "--sign", "-", "--json"])
            .arg(&path)
            .env("HALFMASS_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty());
        snapshots.push(std::fs::read_to_string(&path).unwrap());
    }
    assert!(snapshots.iter().all(|s| s == &snapshots[0]));
}

#[test]
fn schwarzschild_energy_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("flux.csv");
    let out = halfmass(&["adm", "--family", "schwarzschild", "--csv", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let e = json(&out)["charges"]["energy"].as_f64().unwrap();
    assert!((e - 8.0 * PI).abs() < 1e-3 * 8.0 * PI, "{e}");
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("r,E,P1,P2,P3"));
    assert_eq!(lines.count(), 4);

    let out = halfmass(&["adm", "--family", "schwarzschild", "--normalize", &(8.0 * PI).to_string()]);
    let e = json(&out)["charges"]["energy"].as_f64().unwrap();
    assert!((e - 1.0).abs() < 1e-3);
}

#[test]
fn clifford_identities() {
    let out = halfmass(&["verify-clifford", "--n", "5", "--theta-grid", "9"]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["identities_passed"], "13/13");
}

#[test]
fn mots_free_boundary() {
    let out = halfmass(&["mots", "--family", "shifted-free", "--basis", "4", "--trace-samples", "20"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let names: Vec<String> = json(&out)["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap().to_string())
        .collect();
    assert!(names.contains(&"free-boundary".to_string()));
    assert_eq!(code(&halfmass(&["mots", "--family", "nowhere"])), 2);
}

#[test]
fn config_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = halfmass(&["invariance", "--family", "synthetic-momentum", "--rotations", "2", "--print-config"]);
    assert_eq!(code(&out), 0);
    let path = dir.path().join("run.toml");
    std::fs::write(&path, &out.stdout).unwrap();
    let again = halfmass(&["invariance", "--config", path.to_str().unwrap(), "--print-config"]);
    assert_eq!(again.stdout, out.stdout);

    let report = dir.path().join("report.json");
    let run = halfmass(&["invariance", "--config", path.to_str().unwrap(), "--json", report.to_str().unwrap()]);
    assert_eq!(code(&run), 0);
    let v = read_json(&report);
    assert_eq!(v["config"]["rotations"], 2);
    assert_eq!(v["trials"].as_array().unwrap().len(), 2);

    std::fs::write(&path, "command = \"adm\"\nwobble = 1\n[family]\nname = \"flat\"\n").unwrap();
    assert_eq!(code(&halfmass(&["adm", "--config", path.to_str().unwrap()])), 2);
}
