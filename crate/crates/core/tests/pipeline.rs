//! End-to-end harness tests on desk-scale configs: determinism of the CSV
//! artifact, pseudo-dataset sharing across gammas, crash isolation, and
//! plot emission.

use ptcate_core::evalkit::write_metrics_csv;
use ptcate_core::harness::{emit_plots, run_sweep, write_outputs, LoadedConfig};

fn tiny_yaml(extra_second_stage: &str, gamma_grid: &str) -> String {
    format!(
        r#"
version: 1
experiment: synthetic
dgp:
  name: fig2_sigmoid
  n_train: 200
  n_val: 50
  n_test: 300
nuisance:
  oracle: true
second_stage:
  g_hidden: []
  alpha_hidden: [8, 8]
  alpha_floor: 1.0
  epochs_init: 120
  epochs_alpha: 60
  epochs_refine: 60
  lr_g: 0.01
  lr_alpha: 0.01
{extra_second_stage}
sweep:
  gamma_grid: {gamma_grid}
  seeds: [0, 1]
  pseudo_kinds: [pi, dr]
"#
    )
}

#[test]
fn sweep_produces_one_report_per_cell_and_sorted_csv() {
    let loaded = LoadedConfig::from_yaml_str(&tiny_yaml("", "[0.0, 0.5, 0.9]")).unwrap();
    let result = run_sweep(&loaded).unwrap();
    assert!(result.failures.is_empty());
    // 2 kinds x 2 seeds x 3 gammas
    assert_eq!(result.reports.len(), 12);
    assert_eq!(result.cells.len(), 4);
    assert_eq!(result.timings.len(), 12);
    assert!(result.timings.iter().all(|t| t.train_seconds > 0.0));

    // sorted by (kind, gamma, seed)
    let keys: Vec<(String, f64, u64)> = result
        .reports
        .iter()
        .map(|r| (r.kind.to_string(), r.gamma, r.seed))
        .collect();
    let mut sorted = keys.clone();
    sorted.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    assert_eq!(keys, sorted);

    // config snapshot is byte-identical to the input
    assert_eq!(result.config_snapshot, loaded.raw_yaml);
}

#[test]
fn rerun_with_identical_config_gives_identical_csv_bytes() {
    let yaml = tiny_yaml("", "[0.0, 0.9]");
    let loaded = LoadedConfig::from_yaml_str(&yaml).unwrap();
    let dir = tempfile::tempdir().unwrap();

    let a = run_sweep(&loaded).unwrap();
    let b = run_sweep(&loaded).unwrap();
    let path_a = dir.path().join("a.csv");
    let path_b = dir.path().join("b.csv");
    write_metrics_csv(&a.reports, &path_a).unwrap();
    write_metrics_csv(&b.reports, &path_b).unwrap();
    assert_eq!(
        std::fs::read(&path_a).unwrap(),
        std::fs::read(&path_b).unwrap(),
        "rerun must produce identical CSV bytes"
    );
}

#[test]
fn pseudo_dataset_is_shared_across_gammas() {
    // The per-cell pseudo hash must not depend on the gamma grid at all.
    let one = LoadedConfig::from_yaml_str(&tiny_yaml("", "[0.0]")).unwrap();
    let many = LoadedConfig::from_yaml_str(&tiny_yaml("", "[0.0, 0.5, 0.9]")).unwrap();
    let ra = run_sweep(&one).unwrap();
    let rb = run_sweep(&many).unwrap();
    assert_eq!(ra.cells.len(), rb.cells.len());
    for (a, b) in ra.cells.iter().zip(rb.cells.iter()) {
        assert_eq!((a.kind, a.seed), (b.kind, b.seed));
        assert_eq!(a.pseudo_sha256, b.pseudo_sha256);
    }
}

#[test]
fn failing_cells_are_isolated() {
    // A negative weight decay for one kind makes exactly that kind's cells
    // fail config validation at training time; the others must complete.
    let yaml = tiny_yaml("  weight_decay_by_kind: { dr: -1.0 }", "[0.0, 0.9]");
    let loaded = LoadedConfig::from_yaml_str(&yaml).unwrap();
    let result = run_sweep(&loaded).unwrap();
    assert_eq!(result.failures.len(), 2, "both dr cells fail");
    assert!(result
        .failures
        .iter()
        .all(|f| f.kind == ptcate_core::pseudo::PseudoOutcomeKind::Dr));
    // pi cells unaffected: 1 kind x 2 seeds x 2 gammas
    assert_eq!(result.reports.len(), 4);
    assert!(result
        .reports
        .iter()
        .all(|r| r.kind == ptcate_core::pseudo::PseudoOutcomeKind::Pi));
}

#[test]
fn outputs_include_csv_snapshot_json_and_plots() {
    let loaded = LoadedConfig::from_yaml_str(&tiny_yaml("", "[0.0, 0.9]")).unwrap();
    let result = run_sweep(&loaded).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_outputs(&result, dir.path()).unwrap();

    for file in ["metrics.csv", "result.json", "config_snapshot.yaml"] {
        assert!(dir.path().join(file).exists(), "{file} missing");
    }
    assert_eq!(
        std::fs::read_to_string(dir.path().join("config_snapshot.yaml")).unwrap(),
        loaded.raw_yaml
    );

    let plots = emit_plots(&result, dir.path()).unwrap();
    assert!(plots.len() >= 4, "expected pehe + policy loss per kind");
    // fig2 overlay marks the analytic root
    let overlay = std::fs::read_to_string(dir.path().join("overlay_pi.svg")).unwrap();
    assert!(overlay.contains("x* = -0.109861"), "overlay must mark x*");
    let pehe_chart = std::fs::read_to_string(dir.path().join("pehe_pi.svg")).unwrap();
    assert!(pehe_chart.contains("polyline"));
}

#[test]
fn empty_result_emits_no_plots() {
    let loaded = LoadedConfig::from_yaml_str(&tiny_yaml("", "[0.0]")).unwrap();
    let mut result = run_sweep(&loaded).unwrap();
    result.reports.clear();
    let dir = tempfile::tempdir().unwrap();
    let plots = emit_plots(&result, dir.path()).unwrap();
    assert!(plots.is_empty());
}

#[test]
fn oracle_nuisance_sweeps_are_bit_reproducible() {
    let yaml = tiny_yaml("", "[0.0, 0.9]");
    let loaded = LoadedConfig::from_yaml_str(&yaml).unwrap();
    let a = run_sweep(&loaded).unwrap();
    let b = run_sweep(&loaded).unwrap();
    for (ra, rb) in a.reports.iter().zip(b.reports.iter()) {
        assert_eq!(ra.pehe.to_bits(), rb.pehe.to_bits());
        assert_eq!(ra.policy_loss.to_bits(), rb.policy_loss.to_bits());
    }
}
