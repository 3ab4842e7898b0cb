//! Experiment orchestration: gamma sweeps over seeds and pseudo-outcome
//! kinds, the Hillstrom experiment, result persistence, and plots.
//!
//! Within one (seed, kind) cell, stage 1 runs once and every gamma consumes
//! the identical pseudo dataset, so gamma is the only varying factor. Cells
//! are independent jobs; failures are recorded and do not abort the sweep.
//! The final CSV is sorted by (kind, gamma, seed) and reruns of the same
//! config produce identical bytes.

mod config;
mod svg;

pub use config::{
    DgpConfig, ExperimentConfig, ExperimentKind, HillstromConfig, LoadedConfig, NuisanceConfig,
    SecondStageConfig, SweepConfig, CONFIG_VERSION,
};
pub use svg::{Chart, Series, PALETTE};

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datagen::{
    load_hillstrom, sample_dgp, split, true_cate, Dataset, DgpName, DgpSpec, PreprocessOptions,
    SplitSpec,
};
use crate::error::{Error, Result};
use crate::evalkit::{
    dr_policy_value_values, improvement_table, pehe_values, policy_loss_values, write_improvement_csv,
    write_metrics_csv, ImprovementRow, MetricReport,
};
use crate::math::{derive_seed, mean, sample_std};
use crate::ndnet::{finite_diff_check, net_init, Matrix, BceLoss, MseLoss};
use crate::nuisance::{fit_all, oracle_nuisance, NuisanceSet};
use crate::pseudo::{build_pseudo_dataset, PseudoOutcomeKind};
use crate::ptcate::{alpha_net_spec, train_ptcate, RetargetLoss, SharpnessLoss};

/// Environment variable overriding the sweep worker count.
pub const WORKERS_ENV: &str = "PTCATE_WORKERS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub kind: PseudoOutcomeKind,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTiming {
    pub kind: PseudoOutcomeKind,
    pub seed: u64,
    pub gamma: f64,
    pub train_seconds: f64,
}

/// Per-cell audit record; `pseudo_sha256` certifies that every gamma within
/// the cell trained on the same pseudo dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellInfo {
    pub kind: PseudoOutcomeKind,
    pub seed: u64,
    pub pseudo_sha256: String,
}

/// Curves for the 1-D overlay chart (true CATE vs fitted estimators).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayCurve {
    pub kind: PseudoOutcomeKind,
    pub seed: u64,
    pub grid: Vec<f64>,
    pub tau: Vec<f64>,
    /// Analytic zero crossing of the true CATE, when it has exactly one.
    pub x_star: Option<f64>,
    /// `(gamma, fitted g on the grid)` per swept gamma.
    pub curves: Vec<(f64, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub reports: Vec<MetricReport>,
    pub failures: Vec<CellFailure>,
    pub timings: Vec<RunTiming>,
    pub cells: Vec<CellInfo>,
    pub overlays: Vec<OverlayCurve>,
    /// Byte-identical copy of the input YAML.
    pub config_snapshot: String,
    pub code_version: String,
    /// SHA-256 of the input data file, for real-data experiments.
    pub data_sha256: Option<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

/// Runs `f` on a dedicated pool when [`WORKERS_ENV`] is set, otherwise on
/// the global rayon pool.
fn with_worker_pool<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    match std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
    {
        Some(w) if w >= 1 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
            Ok(pool.install(f))
        }
        _ => Ok(f()),
    }
}

struct CellOutput {
    reports: Vec<MetricReport>,
    timings: Vec<RunTiming>,
    info: CellInfo,
    overlay: Option<OverlayCurve>,
}

fn analytic_root(name: DgpName) -> Option<f64> {
    match name {
        // 2*sigmoid(10x) - 0.5 = 0  <=>  x = ln(1/3)/10
        DgpName::Fig2Sigmoid | DgpName::SettingA => Some((1.0f64 / 3.0).ln() / 10.0),
        DgpName::Fig1Piecewise | DgpName::SettingB => None,
    }
}

fn stage_one(
    cfg: &ExperimentConfig,
    dgp: &DgpSpec,
    train: &Dataset,
    seed: u64,
) -> Result<(NuisanceSet, Dataset)> {
    if cfg.nuisance.oracle {
        Ok((oracle_nuisance(dgp), train.clone()))
    } else {
        let fit = fit_all(train, &cfg.nuisance.to_fit_config(), derive_seed(seed, 1004))?;
        Ok((fit.nuisances, fit.stage2_data))
    }
}

fn run_synthetic_cell(
    cfg: &ExperimentConfig,
    dgp: &DgpSpec,
    kind: PseudoOutcomeKind,
    seed: u64,
    gammas: &[f64],
    want_overlay: bool,
) -> Result<CellOutput> {
    let train = sample_dgp(dgp, dgp.n_train, derive_seed(seed, 1001))?;
    let test = sample_dgp(dgp, dgp.n_test, derive_seed(seed, 1003))?;
    let (nuisances, stage2) = stage_one(cfg, dgp, &train, seed)?;
    let pseudo = build_pseudo_dataset(kind, &nuisances, &stage2)?;
    let info = CellInfo {
        kind,
        seed,
        pseudo_sha256: sha256_hex(&serde_json::to_vec(&pseudo)?),
    };

    let tau_ref = test
        .true_cates()
        .ok_or_else(|| Error::InvalidData("synthetic test split lacks ground-truth CATE".into()))?;
    let test_xs = test.xs();

    let grid: Vec<f64> = (0..201)
        .map(|i| dgp.support.0 + (dgp.support.1 - dgp.support.0) * i as f64 / 200.0)
        .collect();
    let mut overlay = want_overlay.then(|| OverlayCurve {
        kind,
        seed,
        grid: grid.clone(),
        tau: grid.iter().map(|&x| true_cate(dgp, x)).collect(),
        x_star: analytic_root(dgp.name),
        curves: Vec::new(),
    });

    let mut reports = Vec::with_capacity(gammas.len());
    let mut timings = Vec::with_capacity(gammas.len());
    for &gamma in gammas {
        let pt_cfg = cfg.second_stage.to_pt_config(stage2.dim(), kind, gamma)?;
        let started = Instant::now();
        let model = train_ptcate(&pseudo, &pt_cfg, seed)?;
        let train_seconds = started.elapsed().as_secs_f64();
        let pred = model.predict_cate_batch(&test_xs)?;
        let policy_loss = policy_loss_values(&pred, &tau_ref)?;
        reports.push(MetricReport {
            gamma,
            seed,
            kind,
            pehe: pehe_values(&pred, &tau_ref)?,
            policy_loss,
            policy_value: -policy_loss,
            n_eval: test.len(),
        });
        timings.push(RunTiming {
            kind,
            seed,
            gamma,
            train_seconds,
        });
        if let Some(o) = overlay.as_mut() {
            let rows: Vec<Vec<f64>> = grid.iter().map(|&x| vec![x]).collect();
            o.curves.push((gamma, model.predict_cate_batch(&rows)?));
        }
    }
    Ok(CellOutput {
        reports,
        timings,
        info,
        overlay,
    })
}

fn sort_reports(reports: &mut [MetricReport]) {
    reports.sort_by(|a, b| {
        a.kind
            .to_string()
            .cmp(&b.kind.to_string())
            .then(a.gamma.total_cmp(&b.gamma))
            .then(a.seed.cmp(&b.seed))
    });
}

/// Runs the synthetic gamma sweep described by the config.
pub fn run_sweep(loaded: &LoadedConfig) -> Result<ExperimentResult> {
    let cfg = &loaded.config;
    cfg.validate()?;
    if cfg.experiment != ExperimentKind::Synthetic {
        return Err(Error::Config("run_sweep expects a synthetic experiment".into()));
    }
    let dgp = cfg.dgp.as_ref().expect("validated").resolve()?;
    let kinds = cfg.sweep.kinds()?;
    let gammas = cfg.sweep.sorted_gammas();
    let seeds = cfg.sweep.seeds.clone();
    let first_seed = seeds[0];

    let cells: Vec<(PseudoOutcomeKind, u64)> = kinds
        .iter()
        .flat_map(|&k| seeds.iter().map(move |&s| (k, s)))
        .collect();

    let outputs: Vec<(PseudoOutcomeKind, u64, Result<CellOutput>)> = with_worker_pool(|| {
        cells
            .par_iter()
            .map(|&(kind, seed)| {
                let out = run_synthetic_cell(cfg, &dgp, kind, seed, &gammas, seed == first_seed);
                (kind, seed, out)
            })
            .collect()
    })?;

    let mut result = ExperimentResult {
        reports: Vec::new(),
        failures: Vec::new(),
        timings: Vec::new(),
        cells: Vec::new(),
        overlays: Vec::new(),
        config_snapshot: loaded.raw_yaml.clone(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        data_sha256: None,
    };
    for (kind, seed, out) in outputs {
        match out {
            Ok(cell) => {
                result.reports.extend(cell.reports);
                result.timings.extend(cell.timings);
                result.cells.push(cell.info);
                if let Some(o) = cell.overlay {
                    result.overlays.push(o);
                }
            }
            Err(e) => result.failures.push(CellFailure {
                kind,
                seed,
                message: e.to_string(),
            }),
        }
    }
    sort_reports(&mut result.reports);
    result
        .cells
        .sort_by(|a, b| a.kind.to_string().cmp(&b.kind.to_string()).then(a.seed.cmp(&b.seed)));
    Ok(result)
}

/// Outcome of the Hillstrom experiment: the usual sweep result plus the
/// improvement-over-observational-policy table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HillstromOutcome {
    pub result: ExperimentResult,
    pub table: Vec<ImprovementRow>,
}

struct HillstromCell {
    reports: Vec<MetricReport>,
    timings: Vec<RunTiming>,
    info: CellInfo,
    /// DR policy value per gamma plus the behavioral-policy value.
    values: Vec<(f64, f64)>,
    obs_value: f64,
}

fn run_hillstrom_cell(
    cfg: &ExperimentConfig,
    train: &Dataset,
    test: &Dataset,
    kind: PseudoOutcomeKind,
    seed: u64,
    gammas: &[f64],
) -> Result<HillstromCell> {
    let fit = fit_all(train, &cfg.nuisance.to_fit_config(), derive_seed(seed, 2001))?;
    let nuis = fit.nuisances;
    let pseudo = build_pseudo_dataset(kind, &nuis, &fit.stage2_data)?;
    let pseudo_test = build_pseudo_dataset(kind, &nuis, test)?;
    let info = CellInfo {
        kind,
        seed,
        pseudo_sha256: sha256_hex(&serde_json::to_vec(&pseudo)?),
    };

    let test_xs = test.xs();
    let prop_test = nuis.prop.eval_batch(&test_xs)?;
    let obs_value = dr_policy_value_values(&prop_test, &nuis, test)?;

    let mut reports = Vec::new();
    let mut timings = Vec::new();
    let mut values = Vec::new();
    for &gamma in gammas {
        let pt_cfg = cfg.second_stage.to_pt_config(train.dim(), kind, gamma)?;
        let started = Instant::now();
        let model = train_ptcate(&pseudo, &pt_cfg, seed)?;
        let train_seconds = started.elapsed().as_secs_f64();
        let pred = model.predict_cate_batch(&test_xs)?;
        // thresholded decision rule evaluated doubly robustly
        let decisions: Vec<f64> = pred.iter().map(|&g| f64::from(u8::from(g > 0.0))).collect();
        let policy_value = dr_policy_value_values(&decisions, &nuis, test)?;
        let policy_loss = policy_loss_values(&pred, &pseudo_test.ys)?;
        reports.push(MetricReport {
            gamma,
            seed,
            kind,
            pehe: pehe_values(&pred, &pseudo_test.ys)?,
            policy_loss,
            policy_value,
            n_eval: test.len(),
        });
        timings.push(RunTiming {
            kind,
            seed,
            gamma,
            train_seconds,
        });
        values.push((gamma, policy_value));
    }
    Ok(HillstromCell {
        reports,
        timings,
        info,
        values,
        obs_value,
    })
}

/// Runs the real-data experiment: fixed 50/20/30 split, learned nuisances,
/// gamma sweep, DR policy values, and the improvement table.
pub fn run_hillstrom(loaded: &LoadedConfig) -> Result<HillstromOutcome> {
    let cfg = &loaded.config;
    cfg.validate()?;
    let hcfg = cfg
        .hillstrom
        .as_ref()
        .ok_or_else(|| Error::Config("missing 'hillstrom' section".into()))?;
    if !hcfg.csv_path.exists() {
        return Err(Error::Config(format!(
            "dataset not bundled: the Hillstrom CSV was not found at '{}'. Download the \
             MineThatData E-Mail Analytics dataset (64,000 rows, CSV) and place it there, \
             or point hillstrom.csv_path at it.",
            hcfg.csv_path.display()
        )));
    }
    let data_sha = sha256_file(&hcfg.csv_path)?;
    if let Some(expected) = &hcfg.expected_sha256 {
        if !expected.eq_ignore_ascii_case(&data_sha) {
            return Err(Error::Config(format!(
                "Hillstrom CSV SHA-256 mismatch: expected {expected}, found {data_sha}"
            )));
        }
    }

    let split_spec = SplitSpec {
        train: 0.5,
        val: 0.2,
        test: 0.3,
        seed: hcfg.split_seed,
    };
    let data = load_hillstrom(
        &hcfg.csv_path,
        &PreprocessOptions {
            split: split_spec,
            standardize: true,
        },
    )?;
    let (train, _val, test) = split(&data, &split_spec)?;

    let kinds = cfg.sweep.kinds()?;
    let gammas = cfg.sweep.sorted_gammas();
    let seeds = cfg.sweep.seeds.clone();
    let cells: Vec<(PseudoOutcomeKind, u64)> = kinds
        .iter()
        .flat_map(|&k| seeds.iter().map(move |&s| (k, s)))
        .collect();

    let outputs: Vec<(PseudoOutcomeKind, u64, Result<HillstromCell>)> = with_worker_pool(|| {
        cells
            .par_iter()
            .map(|&(kind, seed)| {
                let out = run_hillstrom_cell(cfg, &train, &test, kind, seed, &gammas);
                (kind, seed, out)
            })
            .collect()
    })?;

    let mut result = ExperimentResult {
        reports: Vec::new(),
        failures: Vec::new(),
        timings: Vec::new(),
        cells: Vec::new(),
        overlays: Vec::new(),
        config_snapshot: loaded.raw_yaml.clone(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        data_sha256: Some(data_sha),
    };
    // the table follows the first configured kind (DR in the shipped config)
    let table_kind = kinds[0];
    let mut per_gamma: Vec<(f64, Vec<f64>)> = gammas.iter().map(|&g| (g, Vec::new())).collect();
    let mut obs_values = Vec::new();
    for (kind, seed, out) in outputs {
        match out {
            Ok(cell) => {
                result.reports.extend(cell.reports);
                result.timings.extend(cell.timings);
                result.cells.push(cell.info);
                if kind == table_kind {
                    obs_values.push(cell.obs_value);
                    for (g, v) in &cell.values {
                        if let Some(slot) = per_gamma.iter_mut().find(|(gg, _)| gg == g) {
                            slot.1.push(*v);
                        }
                    }
                }
            }
            Err(e) => result.failures.push(CellFailure {
                kind,
                seed,
                message: e.to_string(),
            }),
        }
    }
    sort_reports(&mut result.reports);

    if obs_values.is_empty() {
        return Err(Error::InvalidData(
            "every Hillstrom cell failed; no improvement table".into(),
        ));
    }
    let rows: Vec<(String, Vec<f64>)> = per_gamma
        .into_iter()
        .filter(|(_, vs)| !vs.is_empty())
        .map(|(g, vs)| (format!("gamma = {g}"), vs))
        .collect();
    let table = improvement_table(&rows, mean(&obs_values))?;
    Ok(HillstromOutcome { result, table })
}

// ---------------------------------------------------------------------------
// Output files
// ---------------------------------------------------------------------------

/// Writes metrics.csv, result.json, and the byte-identical config snapshot;
/// plot failures are logged, never fatal.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_metrics_csv(&result.reports, &dir.join("metrics.csv"))?;
    std::fs::write(dir.join("result.json"), serde_json::to_string_pretty(result)?)?;
    std::fs::write(dir.join("config_snapshot.yaml"), &result.config_snapshot)?;
    if let Err(e) = emit_plots(result, dir) {
        eprintln!("warning: plot emission failed ({e}); metrics.csv remains authoritative");
    }
    Ok(())
}

pub fn write_hillstrom_outputs(outcome: &HillstromOutcome, dir: &Path) -> Result<()> {
    write_outputs(&outcome.result, dir)?;
    write_improvement_csv(&outcome.table, &dir.join("improvement.csv"))?;
    Ok(())
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let m = mean(values);
    let se = if values.len() > 1 {
        sample_std(values) / (values.len() as f64).sqrt()
    } else {
        0.0
    };
    (m, se)
}

/// Emits per-kind metric-vs-gamma charts (mean line, standard-error band)
/// and, when overlay curves are present, a true-CATE overlay chart.
pub fn emit_plots(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut kinds: Vec<PseudoOutcomeKind> = result.reports.iter().map(|r| r.kind).collect();
    kinds.sort_by_key(|k| k.to_string());
    kinds.dedup();
    if kinds.is_empty() {
        eprintln!("warning: result contains no pseudo-outcome kinds; no plots emitted");
        return Ok(Vec::new());
    }
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    for kind in &kinds {
        let mut gammas: Vec<f64> = result
            .reports
            .iter()
            .filter(|r| r.kind == *kind)
            .map(|r| r.gamma)
            .collect();
        gammas.sort_by(|a, b| a.total_cmp(b));
        gammas.dedup();

        for (metric, label) in [("pehe", "PEHE"), ("policy_loss", "policy loss")] {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            let mut lo = Vec::new();
            let mut hi = Vec::new();
            for &g in &gammas {
                let vals: Vec<f64> = result
                    .reports
                    .iter()
                    .filter(|r| r.kind == *kind && r.gamma == g)
                    .map(|r| if metric == "pehe" { r.pehe } else { r.policy_loss })
                    .collect();
                if vals.is_empty() {
                    continue;
                }
                let (m, se) = mean_and_se(&vals);
                xs.push(g);
                ys.push(m);
                lo.push(m - se);
                hi.push(m + se);
            }
            let chart = Chart {
                title: format!("{label} over gamma ({kind})"),
                x_label: "gamma".into(),
                y_label: label.into(),
                series: vec![Series {
                    label: format!("mean +- se ({} seeds)", result.cells.iter().filter(|c| c.kind == *kind).count()),
                    xs,
                    ys,
                    band: Some((lo, hi)),
                    color: PALETTE[0].into(),
                }],
                vline: None,
            };
            let path = dir.join(format!("{metric}_{kind}.svg"));
            std::fs::write(&path, chart.render())?;
            written.push(path);
        }

        if let Some(overlay) = result.overlays.iter().find(|o| o.kind == *kind) {
            let mut series = vec![Series {
                label: "true CATE".into(),
                xs: overlay.grid.clone(),
                ys: overlay.tau.clone(),
                band: None,
                color: PALETTE[1].into(),
            }];
            let mut shown: Vec<&(f64, Vec<f64>)> = Vec::new();
            if let Some(first) = overlay.curves.first() {
                shown.push(first);
            }
            if overlay.curves.len() > 1 {
                shown.push(overlay.curves.last().expect("nonempty"));
            }
            for (i, (g, ys)) in shown.into_iter().enumerate() {
                series.push(Series {
                    label: format!("g at gamma = {g}"),
                    xs: overlay.grid.clone(),
                    ys: ys.clone(),
                    band: None,
                    color: PALETTE[2 + i].into(),
                });
            }
            let chart = Chart {
                title: format!("retargeted CATE overlay ({kind}, seed {})", overlay.seed),
                x_label: "x".into(),
                y_label: "CATE".into(),
                series,
                vline: overlay.x_star.map(|x| (x, format!("x* = {x:.6}"))),
            };
            let path = dir.join(format!("overlay_{kind}.svg"));
            std::fs::write(&path, chart.render())?;
            written.push(path);
        }
    }
    Ok(written)
}

// ---------------------------------------------------------------------------
// Gradient oracle suite
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct GradOracleCase {
    pub label: String,
    pub max_relative_error: f64,
}

/// Checks every loss in the crate against central finite differences on
/// random small networks (under 200 parameters) and batches of 32 rows.
pub fn gradient_oracle_suite(seed: u64) -> Result<Vec<GradOracleCase>> {
    use crate::ndnet::{HiddenActivation, NetSpec, OutputActivation};
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5;
    let n = 32;
    let dim = 2;
    let mut rows = || -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect()
    };
    let x_mse = Matrix::from_rows(&rows())?;
    let x_bce = Matrix::from_rows(&rows())?;
    let x_g = Matrix::from_rows(&rows())?;
    let x_alpha = Matrix::from_rows(&rows())?;

    let mut cases = Vec::new();

    let reg_spec = NetSpec::new(
        dim,
        vec![8, 6],
        HiddenActivation::Tanh,
        OutputActivation::Identity,
    )?;
    debug_assert!(reg_spec.param_count() <= 200);
    let targets: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let params = net_init(&reg_spec, derive_seed(seed, 1))?;
    let report = finite_diff_check(&params, &reg_spec, &x_mse, &MseLoss::new(targets), h)?;
    cases.push(GradOracleCase {
        label: "nuisance_mse".into(),
        max_relative_error: report.max_relative_error,
    });

    let cls_spec = NetSpec::new(
        dim,
        vec![8, 6],
        HiddenActivation::Tanh,
        OutputActivation::Sigmoid,
    )?;
    let labels: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.gen_bool(0.5)))).collect();
    let params = net_init(&cls_spec, derive_seed(seed, 2))?;
    let report = finite_diff_check(&params, &cls_spec, &x_bce, &BceLoss::new(labels)?, h)?;
    cases.push(GradOracleCase {
        label: "nuisance_bce".into(),
        max_relative_error: report.max_relative_error,
    });

    let pseudo: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();
    let alphas: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..6.0)).collect();
    let g_params = net_init(&reg_spec, derive_seed(seed, 3))?;
    for gamma in [0.0, 0.5, 1.0] {
        for inv in [false, true] {
            let loss = RetargetLoss::new(pseudo.clone(), alphas.clone(), gamma, inv)?;
            let report = finite_diff_check(&g_params, &reg_spec, &x_g, &loss, h)?;
            cases.push(GradOracleCase {
                label: format!("loss_g_gamma_{gamma}{}", if inv { "_inv_alpha" } else { "" }),
                max_relative_error: report.max_relative_error,
            });
        }
    }

    let alpha_spec = alpha_net_spec(dim, vec![8, 6], 0.4)?;
    debug_assert!(alpha_spec.param_count() <= 200);
    let mut pseudo_a = pseudo.clone();
    pseudo_a[0] = 0.0;
    let g_out: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let alpha_params = net_init(&alpha_spec, derive_seed(seed, 4))?;
    let loss = SharpnessLoss::from_pseudo(pseudo_a, g_out)?;
    let report = finite_diff_check(&alpha_params, &alpha_spec, &x_alpha, &loss, h)?;
    cases.push(GradOracleCase {
        label: "loss_alpha".into(),
        max_relative_error: report.max_relative_error,
    });

    Ok(cases)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_oracle_suite_passes() {
        let cases = gradient_oracle_suite(0).unwrap();
        assert!(cases.len() >= 8);
        for c in &cases {
            assert!(
                c.max_relative_error < 1e-4,
                "{}: {}",
                c.label,
                c.max_relative_error
            );
        }
    }

    #[test]
    fn sha256_of_known_input() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
