//! End-to-end runs: records, resume, reports and the command-line front end.

use std::path::Path;
use std::process::Command;

use rfim::runner::{report, run, ExperimentConfig, RunKind, RunOptions};
use rfim::RfimError;

const CONFIG: &str = r#"
d = 1
n_list = [4, 8]
beta_list = [0.5]
h_list = [0.5, 1.0, 1.5]
ensemble_size = 12
seed = 11
checks = ["fkg", "hn_identity", "gg_ibp", "concentration", "gg_trend", "convexity_p", "block_bound"]
"#;

fn config() -> ExperimentConfig {
    ExperimentConfig::from_toml(CONFIG).unwrap()
}

fn opts(out: &Path, workers: usize) -> RunOptions {
    RunOptions {
        out: Some(out.into()),
        workers: Some(workers),
        ..RunOptions::default()
    }
}

fn records(dir: &Path) -> String {
    std::fs::read_to_string(dir.join("records.jsonl")).unwrap()
}

#[test]
fn minimal_config_passes() {
    let cfg = ExperimentConfig::from_toml(
        "d = 1\nn_list = [8]\nbeta_list = [0.5]\nh_list = [0.5]\nchecks = [\"fkg\"]\nensemble_size = 20\n",
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = run(&cfg, RunKind::Verify, &opts(dir.path(), 2)).unwrap();
    assert_eq!((out.passed, out.failed, out.errors), (1, 0, 0));
    assert_eq!(out.exit_code(), 0);
    let summary = std::fs::read_to_string(&out.summary_path).unwrap();
    assert!(summary.starts_with("PASS fkg"), "{summary}");
}

#[test]
fn zero_field_is_rejected() {
    let err = ExperimentConfig::from_toml(&CONFIG.replace("[0.5, 1.0, 1.5]", "[0.0, 1.0, 1.5]")).unwrap_err();
    assert!(matches!(&err, RfimError::Config { key, message } if key == "h_list" && message == "h must be > 0"));
}

#[test]
fn records_do_not_depend_on_workers() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = run(&config(), RunKind::Run, &opts(a.path(), 1)).unwrap();
    run(&config(), RunKind::Run, &opts(b.path(), 4)).unwrap();
    assert_eq!(records(a.path()), records(b.path()));
    assert_eq!(ra.errors, 0, "{}", ra.summary);
    for line in records(a.path()).lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["config_hash"], ra.config_hash.as_str());
        assert!(v["cell"].is_string() && v["type"].is_string());
    }
}

#[test]
fn resume_after_interrupt_is_byte_identical() {
    let full_dir = tempfile::tempdir().unwrap();
    let full = run(&config(), RunKind::Run, &opts(full_dir.path(), 3)).unwrap();
    let reference = records(full_dir.path());
    let len = reference.len();
    for cut in [1, len / 5, len / 3, len / 2 + 7, len - 1] {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("records.jsonl"), &reference.as_bytes()[..cut]).unwrap();
        let resumed = run(
            &config(),
            RunKind::Run,
            &RunOptions {
                resume: true,
                ..opts(dir.path(), 2)
            },
        )
        .unwrap();
        assert_eq!(records(dir.path()), reference, "cut at byte {cut}");
        assert_eq!(resumed.summary, full.summary);
    }
    let rerun = run(
        &config(),
        RunKind::Run,
        &RunOptions {
            resume: true,
            ..opts(full_dir.path(), 2)
        },
    )
    .unwrap();
    assert_eq!(rerun.cells_skipped, rerun.cells_total);
    assert_eq!(records(full_dir.path()), reference);
}

#[test]
fn resume_refuses_other_config() {
    let dir = tempfile::tempdir().unwrap();
    run(&config(), RunKind::Sweep, &opts(dir.path(), 1)).unwrap();
    let other = RunOptions {
        seed: Some(99),
        resume: true,
        ..opts(dir.path(), 1)
    };
    assert!(run(&config(), RunKind::Sweep, &other).is_err());
}

#[test]
fn report_tables_and_grouping() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(&config(), RunKind::Run, &opts(&dir.path().join("a"), 2)).unwrap();
    let b = run(
        &config(),
        RunKind::Verify,
        &RunOptions {
            seed: Some(12),
            ..opts(&dir.path().join("b"), 2)
        },
    )
    .unwrap();
    let mixed = dir.path().join("mixed");
    std::fs::create_dir(&mixed).unwrap();
    std::fs::copy(&a.records_path, mixed.join("a.jsonl")).unwrap();
    let mut second = std::fs::read_to_string(&b.records_path).unwrap();
    second.push_str("{truncated\n");
    std::fs::write(mixed.join("b.jsonl"), second).unwrap();

    let out = report(&mixed).unwrap();
    assert_eq!(out.groups.len(), 2);
    assert_eq!(out.corrupt.len(), 1);
    let conc = std::fs::read_to_string(out.groups[&a.config_hash].join("concentration.csv")).unwrap();
    let mut lines = conc.lines();
    assert!(lines.next().unwrap().starts_with("n,mean_r12,var_r12,var_se"));
    // Two sizes for each of three h values.
    assert_eq!(lines.count(), 6);
    let obs = std::fs::read_to_string(out.groups[&a.config_hash].join("observables.csv")).unwrap();
    assert_eq!(obs.lines().count(), 1 + 2 * 3 * 12);
    let obs_b = std::fs::read_to_string(out.groups[&b.config_hash].join("observables.csv")).unwrap();
    assert_eq!(obs_b.lines().count(), 1);

    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let err = report(&empty).unwrap_err();
    assert_eq!(err.to_string(), format!("no records found in {}", empty.display()));
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        "d = 1\nn_list = [8]\nbeta_list = [0.5]\nh_list = [0.5]\nchecks = [\"fkg\"]\nensemble_size = 4\n",
    )
    .unwrap();
    let bin = env!("CARGO_BIN_EXE_rfim");
    let out = dir.path().join("out");
    let status = Command::new(bin)
        .args(["verify", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--workers", "2"])
        .output()
        .unwrap();
    assert!(status.status.success());
    assert!(String::from_utf8_lossy(&status.stdout).contains("1 passed, 0 failed"));

    let report = Command::new(bin).args(["report", out.to_str().unwrap()]).output().unwrap();
    assert!(report.status.success());

    std::fs::write(&cfg, "d = 1\nn_list = [8]\nbeta_list = [0.5]\nh_list = [0.5]\nbeta = 2\n").unwrap();
    let bad = Command::new(bin).args(["run", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("config key `beta`"));
}
