use std::path::Path;
use std::process::{Command, Output};

use mollify_cli::{exit, Experiment, ExperimentConfig, Results};

fn mollify(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mollify"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, json: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn list_names_every_experiment() {
    let out = mollify(&["list"]);
    assert_eq!(out.status.code(), Some(exit::OK));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 7);
    for e in Experiment::ALL {
        assert!(text.contains(e.name()), "{e} missing");
    }
}

#[test]
fn list_json_is_machine_readable() {
    let out = mollify(&["list", "--json"]);
    assert_eq!(out.status.code(), Some(exit::OK));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let names: Vec<&str> = v.as_array().unwrap().iter().map(|x| x["name"].as_str().unwrap()).collect();
    assert_eq!(names, Experiment::ALL.map(|e| e.name()));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = mollify(&["list", "--colour"]);
    assert_eq!(out.status.code(), Some(exit::VALIDATION));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--colour"));
}

#[test]
fn help_exits_cleanly() {
    assert_eq!(mollify(&["--help"]).status.code(), Some(exit::OK));
}

#[test]
fn invalid_kernel_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"experiment": "ou-match", "kernel_id": "psi9"}"#);
    let out = mollify(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(exit::VALIDATION));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("kernel_id"), "{err}");
    assert!(!dir.path().join("results.json").exists());
}

#[test]
fn missing_config_file_is_a_validation_error() {
    let out = mollify(&["run", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(exit::VALIDATION));
}

const SMALL_OU: &str = r#"{
    "experiment": "ou-match",
    "replicas": 8,
    "grid": {"horizon": 10, "lags": [0, 1]}
}"#;

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "timing.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn same_config_twice_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_OU);
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let mut runs = Vec::new();
    for threads in ["1", "3"] {
        let o = mollify(&["run", "--config", &cfg, "--output", out, "--threads", threads]);
        assert_eq!(o.status.code(), Some(exit::OK), "{}", String::from_utf8_lossy(&o.stderr));
        runs.push(read_all(Path::new(out)));
    }
    assert_eq!(runs[0], runs[1]);
    let names: Vec<&str> = runs[0].iter().map(|f| f.0.as_str()).collect();
    assert_eq!(names, ["covariance.csv", "results.json"]);
    let csv = String::from_utf8(runs[0][0].1.clone()).unwrap();
    assert!(csv.starts_with("lag,empirical,se,target,z\n"));
}

#[test]
fn results_schema_and_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_OU);
    let out = dir.path().join("out");
    let o = mollify(&[
        "run",
        "--config",
        &cfg,
        "--output",
        out.to_str().unwrap(),
        "--seed",
        "9",
        "--replicas",
        "5",
    ]);
    assert_eq!(o.status.code(), Some(exit::OK));
    let text = std::fs::read_to_string(out.join("results.json")).unwrap();
    let r: Results = serde_json::from_str(&text).unwrap();
    assert_eq!(r.experiment, Experiment::OuMatch);
    assert_eq!(r.parameters.seed, 9);
    assert_eq!(r.parameters.replicas, 5);
    assert_eq!(r.timing, "timing.json");
    let m = r.metric("covariance_max_z").unwrap();
    assert_eq!(m.tolerance, Some(4.0));
    assert!(m.pass.is_some());
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    for key in ["experiment", "parameters", "metrics", "timing"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    let t: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("timing.json")).unwrap()).unwrap();
    assert!(t["wall_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn strict_turns_failed_checks_into_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    // A zero tolerance on a Monte Carlo deviation cannot pass.
    let cfg = write_config(
        dir.path(),
        r#"{"experiment": "ou-match", "replicas": 4, "grid": {"horizon": 5, "lags": [1]},
            "tolerances": {"covariance_z": 0}}"#,
    );
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    assert_eq!(mollify(&["run", "--config", &cfg, "--output", out]).status.code(), Some(exit::OK));
    assert_eq!(
        mollify(&["run", "--config", &cfg, "--output", out, "--strict"]).status.code(),
        Some(exit::ACCEPTANCE)
    );
}

#[test]
fn experiment_flag_runs_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = mollify(&["run", "--experiment", "moment-rate", "--output", out.to_str().unwrap(), "--strict", "--json"]);
    assert_eq!(o.status.code(), Some(exit::OK), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Results = serde_json::from_slice(&o.stdout).unwrap();
    assert!(r.pass);
    assert!(out.join("rate.csv").exists());
}

#[test]
fn written_config_round_trips() {
    for e in Experiment::ALL {
        let c = ExperimentConfig::defaults(e);
        let text = c.to_json();
        assert_eq!(ExperimentConfig::from_json_str(&text).unwrap().to_json(), text);
    }
}
