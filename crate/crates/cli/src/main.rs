//! Command-line interface for policy-targeted CATE experiments.
//!
//! Subcommands:
//! * `simulate`  — write a synthetic dataset CSV from a config
//! * `train`     — train one model (config values overridable from flags)
//! * `sweep`     — run the full gamma sweep and emit CSV + SVG outputs
//! * `hillstrom` — run the real-data experiment and the improvement table
//! * `gradcheck` — run the analytic-vs-finite-difference gradient oracle
//! * `check-consistency` — Monte Carlo check of the pseudo-outcome
//!   conditional-mean property across all four kinds

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use ptcate_core::datagen::{sample_dgp, write_csv, DgpName, DgpSpec};
use ptcate_core::harness::{
    gradient_oracle_suite, run_hillstrom, run_sweep, write_hillstrom_outputs, write_outputs,
    ExperimentKind, LoadedConfig,
};
use ptcate_core::math::derive_seed;
use ptcate_core::nuisance::{fit_all, oracle_nuisance};
use ptcate_core::pseudo::{
    build_pseudo_dataset, conditional_mean_check, PseudoOutcomeKind,
};
use ptcate_core::ptcate::train_ptcate;

#[derive(Parser)]
#[command(name = "ptcate", version, about = "Policy-targeted CATE estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset (train + val + test rows) as CSV.
    Simulate {
        /// Experiment config (synthetic).
        #[arg(long)]
        config: PathBuf,
        /// Sampling seed; defaults to the first sweep seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a single model and dump it as JSON.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Override the configured gamma.
        #[arg(long)]
        gamma: Option<f64>,
        /// Override the pseudo-outcome kind (pi, ra, ipw, dr).
        #[arg(long)]
        kind: Option<String>,
        /// Override the training seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the synthetic gamma sweep: CSV metrics plus SVG charts.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides output_dir in the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the Hillstrom experiment and emit the improvement table.
    Hillstrom {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check every analytic gradient against central finite differences.
    Gradcheck {
        /// Seed for the random networks and batches.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Verify the conditional-mean property of all pseudo-outcome kinds.
    CheckConsistency {
        /// DGP name (fig1_piecewise, fig2_sigmoid, setting_a, setting_b).
        #[arg(long, default_value = "fig2_sigmoid")]
        dgp: String,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        bins: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate { config, seed, out } => simulate(&config, seed, &out),
        Command::Train {
            config,
            gamma,
            kind,
            seed,
            out,
        } => train_single(&config, gamma, kind, seed, &out),
        Command::Sweep { config, out } => sweep(&config, out),
        Command::Hillstrom { config, out } => hillstrom(&config, out),
        Command::Gradcheck { seed } => gradcheck(seed),
        Command::CheckConsistency { dgp, n, bins, seed } => check_consistency(&dgp, n, bins, seed),
    }
}

fn load(config: &PathBuf) -> Result<LoadedConfig> {
    LoadedConfig::from_path(config).with_context(|| format!("loading {}", config.display()))
}

fn resolve_out(flag: Option<PathBuf>, loaded: &LoadedConfig) -> Result<PathBuf> {
    match flag.or_else(|| loaded.config.output_dir.clone()) {
        Some(dir) => Ok(dir),
        None => bail!("no output directory: pass --out or set output_dir in the config"),
    }
}

fn synthetic_spec(loaded: &LoadedConfig) -> Result<DgpSpec> {
    match (&loaded.config.experiment, &loaded.config.dgp) {
        (ExperimentKind::Synthetic, Some(dgp)) => Ok(dgp.resolve()?),
        _ => bail!("this command needs a synthetic experiment config"),
    }
}

fn simulate(config: &PathBuf, seed: Option<u64>, out: &PathBuf) -> Result<ExitCode> {
    let loaded = load(config)?;
    let spec = synthetic_spec(&loaded)?;
    let seed = seed.unwrap_or(loaded.config.sweep.seeds[0]);
    let n = spec.n_train + spec.n_val + spec.n_test;
    let data = sample_dgp(&spec, n, seed)?;
    std::fs::create_dir_all(out)?;
    let path = out.join("dataset.csv");
    write_csv(&data, &path)?;
    println!("wrote {} rows ({}) to {}", n, spec.name, path.display());
    Ok(ExitCode::SUCCESS)
}

fn train_single(
    config: &PathBuf,
    gamma: Option<f64>,
    kind: Option<String>,
    seed: Option<u64>,
    out: &PathBuf,
) -> Result<ExitCode> {
    let loaded = load(config)?;
    let cfg = &loaded.config;
    let spec = synthetic_spec(&loaded)?;

    let mut overrides = Vec::new();
    let gamma = match gamma {
        Some(g) => {
            overrides.push(format!("gamma={g}"));
            g
        }
        None => cfg.second_stage.gamma,
    };
    let kind = match kind {
        Some(k) => {
            overrides.push(format!("kind={k}"));
            PseudoOutcomeKind::parse(&k)?
        }
        None => cfg.sweep.kinds()?[0],
    };
    let seed = match seed {
        Some(s) => {
            overrides.push(format!("seed={s}"));
            s
        }
        None => cfg.sweep.seeds[0],
    };

    let train_data = sample_dgp(&spec, spec.n_train, derive_seed(seed, 1001))?;
    let test = sample_dgp(&spec, spec.n_test, derive_seed(seed, 1003))?;
    let (nuis, stage2) = if cfg.nuisance.oracle {
        (oracle_nuisance(&spec), train_data)
    } else {
        let fit = fit_all(&train_data, &cfg.nuisance.to_fit_config(), derive_seed(seed, 1004))?;
        (fit.nuisances, fit.stage2_data)
    };
    let pseudo = build_pseudo_dataset(kind, &nuis, &stage2)?;
    let pt_cfg = cfg.second_stage.to_pt_config(stage2.dim(), kind, gamma)?;
    let model = train_ptcate(&pseudo, &pt_cfg, seed)?;

    let pred = model.predict_cate_batch(&test.xs())?;
    let tau = test
        .true_cates()
        .context("synthetic test split lacks ground-truth CATE")?;
    let pehe = ptcate_core::evalkit::pehe_values(&pred, &tau)?;
    let policy_loss = ptcate_core::evalkit::policy_loss_values(&pred, &tau)?;

    std::fs::create_dir_all(out)?;
    let model_path = out.join("model.json");
    model.save_json(&model_path)?;
    let run_summary = serde_json::json!({
        "config_snapshot": loaded.raw_yaml,
        "overrides": overrides,
        "gamma": gamma,
        "kind": kind.to_string(),
        "seed": seed,
        "metrics": { "pehe": pehe, "policy_loss": policy_loss },
        "model_path": model_path,
    });
    std::fs::write(out.join("run.json"), serde_json::to_string_pretty(&run_summary)?)?;
    println!(
        "trained {kind} model at gamma={gamma} seed={seed}: pehe={pehe:.6} policy_loss={policy_loss:.6}"
    );
    Ok(ExitCode::SUCCESS)
}

fn sweep(config: &PathBuf, out: Option<PathBuf>) -> Result<ExitCode> {
    let loaded = load(config)?;
    let dir = resolve_out(out, &loaded)?;
    let result = run_sweep(&loaded)?;
    write_outputs(&result, &dir)?;
    println!(
        "sweep finished: {} reports, {} failed cells -> {}",
        result.reports.len(),
        result.failures.len(),
        dir.display()
    );
    for f in &result.failures {
        eprintln!("warning: cell (kind={}, seed={}) failed: {}", f.kind, f.seed, f.message);
    }
    Ok(ExitCode::SUCCESS)
}

fn hillstrom(config: &PathBuf, out: Option<PathBuf>) -> Result<ExitCode> {
    let loaded = load(config)?;
    let dir = resolve_out(out, &loaded)?;
    let outcome = run_hillstrom(&loaded)?;
    write_hillstrom_outputs(&outcome, &dir)?;
    println!("hillstrom experiment finished -> {}", dir.display());
    println!("{:<14} {:>12} {:>10} {:>12} {:>12}", "policy", "value", "std", "improv", "improv_pct");
    for row in &outcome.table {
        println!(
            "{:<14} {:>12.4} {:>10.4} {:>12} {:>12}",
            row.label,
            row.mean,
            row.std,
            row.improvement_abs
                .map_or_else(|| "-".into(), |v| format!("{v:.4}")),
            row.improvement_pct
                .map_or_else(|| "-".into(), |v| format!("{v:.3}%")),
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn gradcheck(seed: u64) -> Result<ExitCode> {
    let cases = gradient_oracle_suite(seed)?;
    let mut ok = true;
    for c in &cases {
        let pass = c.max_relative_error < 1e-4;
        ok &= pass;
        println!(
            "{} loss={} max_rel_err={:.3e}",
            if pass { "PASS" } else { "FAIL" },
            c.label,
            c.max_relative_error
        );
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn check_consistency(dgp: &str, n: usize, bins: usize, seed: u64) -> Result<ExitCode> {
    let name = DgpName::parse(dgp)?;
    let spec = DgpSpec::preset(name);
    let mut ok = true;
    for kind in PseudoOutcomeKind::ALL {
        let report = conditional_mean_check(kind, &spec, n, bins, seed)?;
        let z = report.max_abs_z();
        let pass = z < 4.0;
        ok &= pass;
        println!(
            "{} kind={kind} scored_bins={} max_abs_z={z:.3}",
            if pass { "PASS" } else { "FAIL" },
            report.scored_bins()
        );
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
