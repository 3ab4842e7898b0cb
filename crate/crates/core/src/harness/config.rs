//! YAML experiment configuration.
//!
//! The schema is versioned (`version: 1`) and rejects unknown keys so typos
//! surface instead of silently falling back to defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datagen::{DgpName, DgpSpec};
use crate::error::{Error, Result};
use crate::ndnet::{HiddenActivation, NetSpec, OutputActivation};
use crate::nuisance::{NetShape, NuisanceFitConfig};
use crate::pseudo::PseudoOutcomeKind;
use crate::ptcate::{alpha_net_spec, PtConfig};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Synthetic,
    Hillstrom,
}

/// Synthetic-data section; unspecified fields fall back to the DGP preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpConfig {
    pub name: String,
    #[serde(default)]
    pub support: Option<[f64; 2]>,
    #[serde(default)]
    pub noise_sd: Option<f64>,
    #[serde(default)]
    pub n_train: Option<usize>,
    #[serde(default)]
    pub n_val: Option<usize>,
    #[serde(default)]
    pub n_test: Option<usize>,
}

impl DgpConfig {
    pub fn resolve(&self) -> Result<DgpSpec> {
        let name = DgpName::parse(&self.name)?;
        let mut spec = DgpSpec::preset(name);
        if let Some([lo, hi]) = self.support {
            spec.support = (lo, hi);
        }
        if let Some(sd) = self.noise_sd {
            spec.noise_sd = sd;
        }
        if let Some(n) = self.n_train {
            spec.n_train = n;
        }
        if let Some(n) = self.n_val {
            spec.n_val = n;
        }
        if let Some(n) = self.n_test {
            spec.n_test = n;
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn default_nuisance_hidden() -> Vec<usize> {
    vec![32, 32, 32, 32]
}

fn default_activation() -> HiddenActivation {
    HiddenActivation::Tanh
}

fn default_nuisance_epochs() -> usize {
    500
}

fn default_nuisance_lr() -> f64 {
    1e-3
}

fn default_p_min() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NuisanceConfig {
    /// Use ground-truth nuisance functions (synthetic experiments only).
    #[serde(default)]
    pub oracle: bool,
    #[serde(default)]
    pub sample_splitting: bool,
    #[serde(default = "default_nuisance_hidden")]
    pub hidden_dims: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: HiddenActivation,
    #[serde(default = "default_nuisance_epochs")]
    pub epochs: usize,
    #[serde(default = "default_nuisance_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_p_min")]
    pub propensity_clamp: f64,
    #[serde(default)]
    pub batch_size: Option<usize>,
}

impl Default for NuisanceConfig {
    fn default() -> Self {
        NuisanceConfig {
            oracle: false,
            sample_splitting: false,
            hidden_dims: default_nuisance_hidden(),
            activation: default_activation(),
            epochs: default_nuisance_epochs(),
            learning_rate: default_nuisance_lr(),
            propensity_clamp: default_p_min(),
            batch_size: None,
        }
    }
}

impl NuisanceConfig {
    pub fn to_fit_config(&self) -> NuisanceFitConfig {
        let shape = NetShape {
            hidden_dims: self.hidden_dims.clone(),
            activation: self.activation,
        };
        NuisanceFitConfig {
            response_net: shape.clone(),
            propensity_net: shape,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            sample_splitting: self.sample_splitting,
            p_min: self.propensity_clamp,
            batch_size: self.batch_size,
        }
    }
}

fn default_alpha_hidden() -> Vec<usize> {
    vec![32, 32, 32]
}

fn default_alpha_floor() -> f64 {
    1.0
}

fn default_iterations() -> usize {
    1
}

fn default_epochs_init() -> usize {
    2000
}

fn default_epochs_alpha() -> usize {
    1000
}

fn default_epochs_refine() -> usize {
    1000
}

fn default_lr_g() -> f64 {
    1e-3
}

fn default_lr_alpha() -> f64 {
    1e-2
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecondStageConfig {
    /// Hidden layers of the CATE network; empty means linear.
    #[serde(default)]
    pub g_hidden: Vec<usize>,
    #[serde(default = "default_activation")]
    pub g_activation: HiddenActivation,
    #[serde(default = "default_alpha_hidden")]
    pub alpha_hidden: Vec<usize>,
    #[serde(default = "default_alpha_floor")]
    pub alpha_floor: f64,
    /// Gamma used by single-model training; sweeps use `sweep.gamma_grid`.
    #[serde(default)]
    pub gamma: f64,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_epochs_init")]
    pub epochs_init: usize,
    #[serde(default = "default_epochs_alpha")]
    pub epochs_alpha: usize,
    #[serde(default = "default_epochs_refine")]
    pub epochs_refine: usize,
    #[serde(default = "default_lr_g")]
    pub lr_g: f64,
    #[serde(default = "default_lr_alpha")]
    pub lr_alpha: f64,
    #[serde(default)]
    pub weight_decay_g: f64,
    /// Per-pseudo-outcome override of the weight decay (regularized setting).
    #[serde(default)]
    pub weight_decay_by_kind: BTreeMap<String, f64>,
    #[serde(default = "default_true")]
    pub tanh_normalize_step2: bool,
    #[serde(default = "default_true")]
    pub inv_alpha_weight_step3: bool,
    #[serde(default)]
    pub alpha_weight_clip_quantile: Option<f64>,
    #[serde(default)]
    pub batch_size: Option<usize>,
}

impl Default for SecondStageConfig {
    fn default() -> Self {
        serde_yaml::from_str("{}").expect("all fields have defaults")
    }
}

impl SecondStageConfig {
    pub fn to_pt_config(
        &self,
        input_dim: usize,
        kind: PseudoOutcomeKind,
        gamma: f64,
    ) -> Result<PtConfig> {
        let g_spec = NetSpec::new(
            input_dim,
            self.g_hidden.clone(),
            self.g_activation,
            OutputActivation::Identity,
        )?;
        let alpha_spec = alpha_net_spec(input_dim, self.alpha_hidden.clone(), self.alpha_floor)?;
        let weight_decay_g = self
            .weight_decay_by_kind
            .get(&kind.to_string())
            .copied()
            .unwrap_or(self.weight_decay_g);
        let cfg = PtConfig {
            gamma,
            alpha_floor: self.alpha_floor,
            iterations: self.iterations,
            epochs_init: self.epochs_init,
            epochs_alpha: self.epochs_alpha,
            epochs_refine: self.epochs_refine,
            lr_g: self.lr_g,
            lr_alpha: self.lr_alpha,
            pseudo_kind: kind,
            tanh_normalize_step2: self.tanh_normalize_step2,
            inv_alpha_weight_step3: self.inv_alpha_weight_step3,
            g_spec,
            alpha_spec,
            weight_decay_g,
            alpha_weight_clip_quantile: self.alpha_weight_clip_quantile,
            batch_size: self.batch_size,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub gamma_grid: Vec<f64>,
    pub seeds: Vec<u64>,
    pub pseudo_kinds: Vec<String>,
}

impl SweepConfig {
    pub fn kinds(&self) -> Result<Vec<PseudoOutcomeKind>> {
        self.pseudo_kinds
            .iter()
            .map(|s| PseudoOutcomeKind::parse(s))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma_grid.is_empty() {
            return Err(Error::Config("sweep.gamma_grid must be nonempty".into()));
        }
        if self.gamma_grid.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return Err(Error::Config("sweep.gamma_grid entries must lie in [0, 1]".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("sweep.seeds must be nonempty".into()));
        }
        self.kinds()?;
        Ok(())
    }

    /// Gamma grid sorted ascending with duplicates removed.
    pub fn sorted_gammas(&self) -> Vec<f64> {
        let mut gs = self.gamma_grid.clone();
        gs.sort_by(|a, b| a.total_cmp(b));
        gs.dedup();
        gs
    }
}

fn default_split_seed() -> u64 {
    0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HillstromConfig {
    pub csv_path: PathBuf,
    /// Expected SHA-256 of the user-supplied file (hex); verified when set.
    /// The computed hash is always recorded in the result.
    #[serde(default)]
    pub expected_sha256: Option<String>,
    /// Seed of the fixed 50/20/30 split.
    #[serde(default = "default_split_seed")]
    pub split_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub dgp: Option<DgpConfig>,
    #[serde(default)]
    pub hillstrom: Option<HillstromConfig>,
    #[serde(default)]
    pub nuisance: NuisanceConfig,
    #[serde(default)]
    pub second_stage: SecondStageConfig,
    pub sweep: SweepConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {}, expected {CONFIG_VERSION}",
                self.version
            )));
        }
        match self.experiment {
            ExperimentKind::Synthetic => {
                let dgp = self
                    .dgp
                    .as_ref()
                    .ok_or_else(|| Error::Config("synthetic experiment needs a 'dgp' section".into()))?;
                dgp.resolve()?;
                if self.nuisance.oracle && self.nuisance.sample_splitting {
                    return Err(Error::Config(
                        "sample splitting has no effect with oracle nuisances".into(),
                    ));
                }
            }
            ExperimentKind::Hillstrom => {
                if self.hillstrom.is_none() {
                    return Err(Error::Config(
                        "hillstrom experiment needs a 'hillstrom' section".into(),
                    ));
                }
                if self.nuisance.oracle {
                    return Err(Error::Config(
                        "oracle nuisances are unavailable for real data".into(),
                    ));
                }
            }
        }
        self.sweep.validate()?;
        // probe the second stage with a scalar input
        self.second_stage
            .to_pt_config(1, PseudoOutcomeKind::Dr, self.sweep.sorted_gammas()[0])?;
        Ok(())
    }
}

/// Parsed configuration plus the raw YAML for byte-identical snapshots.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub raw_yaml: String,
}

impl LoadedConfig {
    pub fn from_yaml_str(raw: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_yaml::from_str(raw)?;
        config.validate()?;
        Ok(LoadedConfig {
            config,
            raw_yaml: raw.to_string(),
        })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_yaml_str(&raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL_SYNTHETIC: &str = r#"
version: 1
experiment: synthetic
dgp:
  name: setting_a
sweep:
  gamma_grid: [0.0, 0.9]
  seeds: [0, 1]
  pseudo_kinds: [pi, dr]
"#;

    #[test]
    fn minimal_synthetic_parses_with_defaults() {
        let loaded = LoadedConfig::from_yaml_str(MINIMAL_SYNTHETIC).unwrap();
        let cfg = &loaded.config;
        assert_eq!(cfg.version, 1);
        let dgp = cfg.dgp.as_ref().unwrap().resolve().unwrap();
        assert_eq!(dgp.n_train, 2200);
        assert_eq!(cfg.second_stage.epochs_init, 2000);
        assert!(cfg.second_stage.tanh_normalize_step2);
        assert_eq!(cfg.sweep.kinds().unwrap().len(), 2);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = MINIMAL_SYNTHETIC.replace("sweep:", "swep_typo: {}\nsweep:");
        assert!(LoadedConfig::from_yaml_str(&bad).is_err());
    }

    #[test]
    fn version_and_grid_validated() {
        let bad = MINIMAL_SYNTHETIC.replace("version: 1", "version: 9");
        assert!(LoadedConfig::from_yaml_str(&bad).is_err());
        let bad = MINIMAL_SYNTHETIC.replace("[0.0, 0.9]", "[0.0, 1.5]");
        assert!(LoadedConfig::from_yaml_str(&bad).is_err());
        let bad = MINIMAL_SYNTHETIC.replace("[0, 1]", "[]");
        assert!(LoadedConfig::from_yaml_str(&bad).is_err());
    }

    #[test]
    fn weight_decay_by_kind_overrides() {
        let yaml = r#"
version: 1
experiment: synthetic
dgp: { name: setting_b }
second_stage:
  g_hidden: [32, 32]
  weight_decay_g: 0.001
  weight_decay_by_kind: { ipw: 0.01 }
sweep:
  gamma_grid: [0.0]
  seeds: [0]
  pseudo_kinds: [pi, ipw]
"#;
        let loaded = LoadedConfig::from_yaml_str(yaml).unwrap();
        let pi = loaded
            .config
            .second_stage
            .to_pt_config(1, PseudoOutcomeKind::Pi, 0.0)
            .unwrap();
        let ipw = loaded
            .config
            .second_stage
            .to_pt_config(1, PseudoOutcomeKind::Ipw, 0.0)
            .unwrap();
        assert_eq!(pi.weight_decay_g, 0.001);
        assert_eq!(ipw.weight_decay_g, 0.01);
    }

    #[test]
    fn hillstrom_requires_its_section() {
        let yaml = r#"
version: 1
experiment: hillstrom
sweep:
  gamma_grid: [0.0]
  seeds: [0]
  pseudo_kinds: [dr]
"#;
        assert!(LoadedConfig::from_yaml_str(yaml).is_err());
    }

    #[test]
    fn sorted_gammas_dedup() {
        let sweep = SweepConfig {
            gamma_grid: vec![0.9, 0.0, 0.9, 0.4],
            seeds: vec![0],
            pseudo_kinds: vec!["pi".into()],
        };
        assert_eq!(sweep.sorted_gammas(), vec![0.0, 0.4, 0.9]);
    }
}
