use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_roughman"));
    c.env_remove("ROUGHMAN_OUT");
    c
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const BLOW_UP: &str = r#"{"scenario": "blow_up_detection", "initial": [1.0]}"#;

#[test]
fn list_scenarios_names_all_eight() {
    let o = run(&["list-scenarios"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 8);
    for name in ["spinning_line_bracket_flow", "cartan_roundtrip", "blow_up_detection"] {
        assert!(text.contains(name), "{text}");
    }
}

#[test]
fn run_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", BLOW_UP);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        let o = run(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "7"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let dir_a = a.join("blow_up_detection");
    let mut csvs = 0;
    for entry in fs::read_dir(&dir_a).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "csv") {
            let other = b.join("blow_up_detection").join(path.file_name().unwrap());
            assert_eq!(fs::read(&path).unwrap(), fs::read(other).unwrap(), "{}", path.display());
            csvs += 1;
        }
    }
    assert!(csvs >= 2, "expected trajectory and checks csv files");
}

#[test]
fn unknown_scenario_is_usage_error_and_writes_nothing() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"scenario": "no_such_thing"}"#);
    let out = tmp.path().join("out");
    let o = run(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("spinning_line_bracket_flow"), "{err}");
    assert!(!out.exists());
}

#[test]
fn unknown_key_reports_its_path() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"scenario": "blow_up_detection", "solver": {"stepz": 3}}"#,
    );
    let o = run(&["run", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("solver.stepz"), "{}", stderr(&o));
}

#[test]
fn unused_field_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"scenario": "blow_up_detection", "polar_angles": [0.5]}"#,
    );
    let o = run(&["run", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("polar_angles"), "{}", stderr(&o));
}

#[test]
fn env_var_sets_output_dir() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", BLOW_UP);
    let out = tmp.path().join("from_env");
    let o = bin()
        .args(["run", cfg.to_str().unwrap()])
        .env("ROUGHMAN_OUT", &out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("blow_up_detection").join("checks.csv").exists());
}

#[test]
fn single_row_sweep_has_na_slope() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"scenario": "blow_up_detection", "sweep": {"parameter": "mesh", "values": [256]}}"#,
    );
    let o = run(&["sweep", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("N/A"), "{text}");
    let csv = fs::read_to_string(tmp.path().join("blow_up_detection").join("sweep.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().ends_with("NA,NA"), "{csv}");
}

#[test]
fn sweep_without_section_is_usage_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", BLOW_UP);
    let o = run(&["sweep", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_driver_reports_json() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "d.json",
        r#"{"driver": {"kind": "pure_area", "area": [[0.0, 1.0], [-1.0, 0.0]]}, "grid_points": 65}"#,
    );
    let o = run(&["validate-driver", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["pass"], serde_json::Value::Bool(true));
    assert!(v["chen_defect"].as_f64().unwrap() < 1e-10);
    assert!(tmp.path().join("validate_driver").join("report.json").exists());
}

#[test]
fn mesh_flag_out_of_range_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", BLOW_UP);
    let o = run(&["run", cfg.to_str().unwrap(), "--mesh", "40"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn json_format_writes_json_tables() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", BLOW_UP);
    let o = run(&[
        "run",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
        "--format",
        "json",
        "--mesh",
        "8",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let dir = tmp.path().join("blow_up_detection");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["steps_per_unit"].as_u64(), Some(256));
}
