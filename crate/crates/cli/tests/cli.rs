//! End-to-end tests of the experiment runner: exit codes, report formats and
//! the determinism contract.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_qcompound")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir()
        .join("qcompound-cli-tests")
        .join(format!("{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(bin()).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn info_pipeline_reports_reference_values() {
    let dir = scratch("info");
    let cfg = write(
        &dir,
        "cfg.json",
        r#"{ "pipeline": "info", "seed": 1, "family": { "members": ["identity"] } }"#,
    );
    let out = dir.join("out");
    let (code, _, err) = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "stderr: {err}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let row = &report["rows"][0];
    assert!((row["coherent_information"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!((row["entanglement_fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!(report["config_hash"].as_str().unwrap().len() == 64);
    assert_eq!(report["config"]["seed"].as_u64(), Some(1));
}

#[test]
fn malformed_json_exits_one() {
    let dir = scratch("badjson");
    let cfg = write(&dir, "cfg.json", "{ not json");
    let (code, _, _) = run(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 1);
}

#[test]
fn missing_seed_exits_one() {
    let dir = scratch("noseed");
    let cfg = write(
        &dir,
        "cfg.json",
        r#"{ "pipeline": "info", "family": { "members": ["identity"] } }"#,
    );
    let (code, _, err) = run(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 1, "stderr: {err}");
    assert!(err.contains("seed"));
    // validate mode reports the same class.
    let (code, out, _) = run(&["--config", cfg.to_str().unwrap(), "--validate"]);
    assert_eq!(code, 1);
    assert!(out.contains("seed is mandatory"));
}

#[test]
fn oversized_block_length_is_guard_rejected() {
    let dir = scratch("guard");
    let cfg = write(
        &dir,
        "cfg.json",
        r#"{ "pipeline": "one-shot", "seed": 2,
             "family": { "members": ["phase_flip(0.1)"] },
             "l": 30, "k": 2, "trials": 5 }"#,
    );
    let (code, out, _) = run(&["--config", cfg.to_str().unwrap(), "--validate"]);
    assert_eq!(code, 3, "validate output: {out}");
    assert!(out.contains("exceeds"));
    let (code, _, _) = run(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 3);
}

#[test]
fn invalid_channel_exits_two() {
    // A Kraus family that is not trace preserving violates the channel
    // invariant at load time.
    let dir = scratch("badchan");
    let chan = write(
        &dir,
        "chan.json",
        r#"{ "in_dim": 2, "out_dim": 2,
             "kraus": [ [ [[0.5,0],[0,0]], [[0,0],[0.5,0]] ] ] }"#,
    );
    let cfg = write(
        &dir,
        "cfg.json",
        &format!(
            r#"{{ "pipeline": "info", "seed": 3,
                 "family": {{ "members": [ {{ "file": "{}" }} ] }} }}"#,
            chan.to_str().unwrap().replace('\\', "/")
        ),
    );
    let (code, _, err) = run(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 2, "stderr: {err}");
}

#[test]
fn validate_ok_prints_estimates() {
    let dir = scratch("estimates");
    let cfg = write(
        &dir,
        "cfg.json",
        r#"{ "pipeline": "one-shot", "seed": 4,
             "family": { "members": ["phase_flip(0.01)", "phase_flip(0.01)"] },
             "l": 8, "delta": 0.2, "k": 2, "trials": 10 }"#,
    );
    let (code, out, _) = run(&["--config", cfg.to_str().unwrap(), "--validate"]);
    assert_eq!(code, 0);
    let diag: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(diag["ok"], serde_json::Value::Bool(true));
    assert_eq!(diag["estimated_peak_dim"].as_u64(), Some(256));
}

#[test]
fn reports_are_deterministic_across_runs_and_threads() {
    let dir = scratch("determinism");
    let cfg = write(
        &dir,
        "cfg.json",
        r#"{ "pipeline": "one-shot", "seed": 77,
             "family": { "members": ["phase_flip(0.02)", "phase_flip(0.05)"] },
             "l": 4, "delta": 0.3, "k": 2, "trials": 12 }"#,
    );
    let outs: Vec<PathBuf> = ["a", "b", "c"].iter().map(|s| dir.join(s)).collect();
    for (i, out) in outs.iter().enumerate() {
        let threads = ["1", "4", "2"][i];
        let (code, _, err) = run(&[
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert_eq!(code, 0, "stderr: {err}");
    }
    let csv_a = std::fs::read_to_string(outs[0].join("report.csv")).unwrap();
    for out in &outs[1..] {
        let other = std::fs::read_to_string(out.join("report.csv")).unwrap();
        assert_eq!(csv_a, other, "report.csv differs across runs/threads");
    }
    // Trial streams identical apart from the wall-clock column.
    let strip_runtime = |text: &str| -> String {
        text.lines()
            .map(|line| {
                let mut cells: Vec<&str> = line.split(',').collect();
                cells.pop();
                cells.join(",")
            })
            .collect::<Vec<_>>()
            .join("\n")
    };
    let t_a = strip_runtime(&std::fs::read_to_string(outs[0].join("trials.csv")).unwrap());
    for out in &outs[1..] {
        let other = strip_runtime(&std::fs::read_to_string(out.join("trials.csv")).unwrap());
        assert_eq!(t_a, other, "trials.csv numeric columns differ");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = scratch("seedflag");
    let cfg = write(
        &dir,
        "cfg.json",
        r#"{ "pipeline": "capacity", "seed": 5,
             "family": { "members": ["phase_flip(0.1)"] },
             "l": 1, "opt_iters": 30, "starts": 2 }"#,
    );
    let out = dir.join("out");
    let (code, _, _) = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "99",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["seed"].as_u64(), Some(99));
    let v = report["rows"][0]["value"].as_f64().unwrap();
    assert!((v - 0.5310044064107189).abs() < 1e-4);
}

#[test]
fn discriminate_pipeline_outputs_sweep() {
    let dir = scratch("disc");
    let cfg = write(
        &dir,
        "cfg.json",
        r#"{ "pipeline": "discriminate", "seed": 6,
             "family": { "members": ["phase_flip(0.02)", "phase_flip(0.25)"] },
             "m": 3 }"#,
    );
    let out = dir.join("out");
    let (code, _, err) = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "stderr: {err}");
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4); // header + m = 1..3
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    // Success grows with m.
    let s1 = report["rows"][0]["min_success"].as_f64().unwrap();
    let s3 = report["rows"][2]["min_success"].as_f64().unwrap();
    assert!(s3 > s1);
}
