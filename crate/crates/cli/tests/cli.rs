use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_aoigame");

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn aoigame(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = aoigame(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("scenario.toml");
    std::fs::write(&p, text).unwrap();
    p
}

/// Parses a CSV table and re-renders every numeric cell, which must reproduce the input exactly.
fn csv_round_trip(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
    let rows: Vec<Vec<String>> = rd
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    let mut wr = csv::Writer::from_writer(Vec::new());
    wr.write_record(&header).unwrap();
    for r in &rows {
        let cells: Vec<String> = r
            .iter()
            .map(|c| match c.parse::<f64>() {
                Ok(x) if !c.contains('e') => x.to_string(),
                Ok(x) => {
                    assert_eq!(x, c.parse::<f64>().unwrap());
                    c.clone()
                }
                Err(_) => c.clone(),
            })
            .collect();
        wr.write_record(&cells).unwrap();
    }
    let again = String::from_utf8(wr.into_inner().unwrap()).unwrap();
    assert_eq!(again, text);
    (header, rows)
}

fn json_round_trip(text: &str) -> Value {
    let v: Value = serde_json::from_str(text).unwrap();
    let again: Value = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
    assert_eq!(v, again);
    v
}

#[test]
fn solve_reports_two_platform_equilibrium() {
    let v = json_round_trip(&ok(&["solve", "--config", scenario("two_platform.toml").to_str().unwrap()]));
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    let nash0 = rows[0][2].as_f64().unwrap();
    // Best response to the rival: x0 = sqrt((1 + x1) / c0) with mu = 1.
    let nash1 = rows[1][2].as_f64().unwrap();
    assert!((nash0 - (1.0 + nash1).sqrt()).abs() < 1e-9);
    assert!((nash1 - ((1.0 + nash0) / 1.5).sqrt()).abs() < 1e-9);
    assert!(v["summary"]["poa"].as_f64().unwrap() > 1.0);
}

#[test]
fn single_platform_has_unit_poa() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "schema_version = 1\nmode = \"complete\"\n[params]\nmu = 2.0\ncosts = [0.7]\n");
    let v = json_round_trip(&ok(&["solve", "--config", cfg.to_str().unwrap()]));
    assert!((v["summary"]["poa"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn every_csv_table_round_trips() {
    for (cmd, file) in [
        ("solve", "two_platform.toml"),
        ("thresholds", "bayesian.toml"),
        ("profile", "two_platform.toml"),
        ("profile", "bayesian.toml"),
        ("ratio", "two_platform.toml"),
        ("ratio", "family.toml"),
        ("simulate", "two_platform.toml"),
        ("simulate", "bayesian.toml"),
    ] {
        let text = ok(&[cmd, "--config", scenario(file).to_str().unwrap(), "--format", "csv"]);
        let (header, rows) = csv_round_trip(&text);
        assert!(!rows.is_empty(), "{cmd} {file}");
        assert!(rows.iter().all(|r| r.len() == header.len()));
    }
}

#[test]
fn every_json_table_round_trips() {
    for (cmd, file) in [
        ("solve", "bayesian.toml"),
        ("thresholds", "two_platform.toml"),
        ("profile", "bayesian.toml"),
        ("ratio", "family.toml"),
        ("simulate", "bayesian.toml"),
    ] {
        let v = json_round_trip(&ok(&[cmd, "--config", scenario(file).to_str().unwrap(), "--format", "json"]));
        assert!(v.get("summary").is_some(), "{cmd} {file}");
    }
}

#[test]
fn csv_output_file_gets_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trace.csv");
    ok(&["simulate", "--config", scenario("two_platform.toml").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let (header, rows) = csv_round_trip(&std::fs::read_to_string(&out).unwrap());
    assert_eq!(header[0], "round");
    assert_eq!(rows.len(), 50);
    let summary = json_round_trip(&std::fs::read_to_string(dir.path().join("trace.csv.summary.json")).unwrap());
    // The one-shot deviation in round 5 is detected in the same round.
    assert_eq!(summary["trigger_round"], 5);
}

#[test]
fn jobs_do_not_change_output() {
    for (cmd, file) in [("profile", "bayesian.toml"), ("ratio", "two_platform.toml"), ("ratio", "family.toml")] {
        let path = scenario(file);
        let one = ok(&[cmd, "--config", path.to_str().unwrap(), "--jobs", "1"]);
        let four = ok(&[cmd, "--config", path.to_str().unwrap(), "--jobs", "4"]);
        assert_eq!(one, four, "{cmd} {file}");
    }
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "schema_version = 1\nmode = \"complete\"\n[params]\nmu = 1.0\ncosts = [1.0]\n[queue]\nevents = 20000\n",
    );
    let one = ok(&["queue-validate", "--config", cfg.to_str().unwrap(), "--jobs", "1"]);
    let three = ok(&["queue-validate", "--config", cfg.to_str().unwrap(), "--jobs", "3"]);
    assert_eq!(one, three);
    let other = ok(&["queue-validate", "--config", cfg.to_str().unwrap(), "--seed", "99"]);
    assert_ne!(one, other);
    csv_round_trip(&one);
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_config(dir.path(), "schema_version = 1\nmode = \"complete\"\nbogus = 1\n[params]\nmu = 1.0\ncosts = [1.0]\n");
    let out = aoigame(&["solve", "--config", unknown.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));

    let version = write_config(dir.path(), "schema_version = 9\nmode = \"complete\"\n[params]\nmu = 1.0\ncosts = [1.0]\n");
    assert_eq!(aoigame(&["solve", "--config", version.to_str().unwrap()]).status.code(), Some(1));

    assert_eq!(aoigame(&["solve"]).status.code(), Some(1));

    let blowup = write_config(dir.path(), "schema_version = 1\nmode = \"complete\"\n[params]\nmu = 1e-300\ncosts = [1e-300, 1.0]\n");
    let out = aoigame(&["profile", "--config", blowup.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}
