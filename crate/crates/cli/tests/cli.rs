//! Black-box tests of the `ptcate` binary: exit codes, output files, and
//! the one-line error contract.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ptcate"))
}

fn write_tiny_config(dir: &Path) -> std::path::PathBuf {
    let yaml = r#"
version: 1
experiment: synthetic
dgp:
  name: fig2_sigmoid
  n_train: 150
  n_val: 50
  n_test: 200
nuisance:
  oracle: true
second_stage:
  g_hidden: []
  alpha_hidden: [8]
  alpha_floor: 1.0
  epochs_init: 80
  epochs_alpha: 40
  epochs_refine: 40
  lr_g: 0.01
  lr_alpha: 0.01
sweep:
  gamma_grid: [0.0, 0.9]
  seeds: [0]
  pseudo_kinds: [pi]
"#;
    let path = dir.join("tiny.yaml");
    std::fs::write(&path, yaml).unwrap();
    path
}

#[test]
fn sweep_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tiny_config(dir.path());
    let out = dir.path().join("runs");
    let status = bin()
        .args(["sweep", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("metrics.csv").exists());
    assert!(out.join("result.json").exists());
    assert!(out.join("pehe_pi.svg").exists());
    assert!(out.join("policy_loss_pi.svg").exists());
}

#[test]
fn simulate_writes_dataset_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tiny_config(dir.path());
    let out = dir.path().join("data");
    let status = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .args(["--seed", "7", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(out.join("dataset.csv")).unwrap();
    assert!(text.starts_with("x_0,a,y,tau,pi_b"));
    assert_eq!(text.lines().count(), 1 + 150 + 50 + 200);
}

#[test]
fn train_logs_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tiny_config(dir.path());
    let out = dir.path().join("model");
    let output = bin()
        .args(["train", "--config"])
        .arg(&config)
        .args(["--gamma", "0.9", "--kind", "pi", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    assert!(out.join("model.json").exists());
    let run: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    let overrides: Vec<String> = run["overrides"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    assert!(overrides.contains(&"gamma=0.9".to_string()));
    assert!(overrides.contains(&"kind=pi".to_string()));
}

#[test]
fn gradcheck_reports_all_losses_and_exits_zero() {
    let output = bin().arg("gradcheck").output().unwrap();
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(text.contains("loss_g_gamma_0.5"));
    assert!(text.contains("loss_alpha"));
    assert!(text.lines().all(|l| l.is_empty() || l.starts_with("PASS")));
}

#[test]
fn check_consistency_passes_on_fig2() {
    let output = bin()
        .args(["check-consistency", "--dgp", "fig2_sigmoid", "--n", "20000", "--bins", "10"])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stdout));
    let text = String::from_utf8_lossy(&output.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 4);
}

#[test]
fn unknown_flags_rejected_with_usage() {
    let output = bin().args(["sweep", "--bogus-flag", "x"]).output().unwrap();
    assert!(!output.status.success());
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains("Usage") || err.contains("usage"), "{err}");
}

#[test]
fn missing_hillstrom_file_gives_one_line_error() {
    let dir = tempfile::tempdir().unwrap();
    let yaml = r#"
version: 1
experiment: hillstrom
hillstrom:
  csv_path: /nonexistent/hillstrom.csv
sweep:
  gamma_grid: [0.0]
  seeds: [0]
  pseudo_kinds: [dr]
"#;
    let config = dir.path().join("h.yaml");
    std::fs::write(&config, yaml).unwrap();
    let output = bin()
        .args(["hillstrom", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert!(!output.status.success());
    let err = String::from_utf8_lossy(&output.stderr);
    let error_lines: Vec<&str> = err.lines().filter(|l| l.starts_with("error:")).collect();
    assert_eq!(error_lines.len(), 1, "{err}");
    assert!(error_lines[0].contains("dataset not bundled"), "{err}");
}
