//! Stage 1: estimation of the nuisance functions `(mu_1, mu_0, pi_b)`.
//!
//! Responses are MLP regressions fit by MSE on the arm-filtered rows; the
//! propensity is an MLP classifier fit by binary cross-entropy whose output
//! is clamped to `[p_min, 1 - p_min]` so downstream inverse-propensity
//! weights stay bounded. Synthetic experiments can bypass fitting entirely
//! through [`oracle_nuisance`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datagen::{split_indices, Dataset, DgpSpec, PropensityKind, SplitSpec};
use crate::error::{Error, Result};
use crate::math::derive_seed;
use crate::ndnet::{
    net_forward, BatchMode, BceLoss, HiddenActivation, Matrix, MseLoss, NetParams, NetSpec,
    OutputActivation, TrainOptions,
};

/// Where a nuisance function came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Learned,
    Oracle,
    Mixed,
}

/// An evaluable nuisance function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum NuisanceModel {
    /// Closed-form response arm of a synthetic DGP (scalar covariate).
    OracleResponse { dgp: DgpSpec, arm: u8 },
    /// Closed-form propensity of a synthetic DGP (scalar covariate).
    OraclePropensity { kind: PropensityKind },
    /// Trained regression network.
    Net { spec: NetSpec, params: NetParams },
    /// Trained classifier network with outputs clamped to `[p_min, 1-p_min]`.
    ClampedNet {
        spec: NetSpec,
        params: NetParams,
        p_min: f64,
    },
}

impl NuisanceModel {
    pub fn is_oracle(&self) -> bool {
        matches!(
            self,
            NuisanceModel::OracleResponse { .. } | NuisanceModel::OraclePropensity { .. }
        )
    }

    pub fn eval_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        match self {
            NuisanceModel::OracleResponse { dgp, arm } => Ok(xs
                .iter()
                .map(|x| crate::datagen::true_response(dgp, *arm, x[0]))
                .collect()),
            NuisanceModel::OraclePropensity { kind } => {
                Ok(xs.iter().map(|x| kind.eval(x[0])).collect())
            }
            NuisanceModel::Net { spec, params } => {
                if xs.is_empty() {
                    return Ok(Vec::new());
                }
                net_forward(params, spec, &Matrix::from_rows(xs)?)
            }
            NuisanceModel::ClampedNet {
                spec,
                params,
                p_min,
            } => {
                if xs.is_empty() {
                    return Ok(Vec::new());
                }
                let out = net_forward(params, spec, &Matrix::from_rows(xs)?)?;
                Ok(out
                    .into_iter()
                    .map(|p| p.clamp(*p_min, 1.0 - *p_min))
                    .collect())
            }
        }
    }

    pub fn eval_one(&self, x: &[f64]) -> Result<f64> {
        Ok(self.eval_batch(std::slice::from_ref(&x.to_vec()))?[0])
    }
}

/// The nuisance triple used by every pseudo-outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuisanceSet {
    pub mu1: NuisanceModel,
    pub mu0: NuisanceModel,
    pub prop: NuisanceModel,
    pub provenance: Provenance,
}

impl NuisanceSet {
    /// Builds a set, deriving provenance from the three parts.
    pub fn new(mu1: NuisanceModel, mu0: NuisanceModel, prop: NuisanceModel) -> Self {
        let oracle = [&mu1, &mu0, &prop].iter().filter(|m| m.is_oracle()).count();
        let provenance = match oracle {
            0 => Provenance::Learned,
            3 => Provenance::Oracle,
            _ => Provenance::Mixed,
        };
        NuisanceSet {
            mu1,
            mu0,
            prop,
            provenance,
        }
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let wrapper = serde_json::json!({ "version": 1, "nuisances": self });
        std::fs::write(path, serde_json::to_string_pretty(&wrapper)?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        match value.get("version").and_then(|v| v.as_u64()) {
            Some(1) => {}
            other => {
                return Err(Error::Serde(format!(
                    "unsupported nuisance dump version {other:?}"
                )))
            }
        }
        let set = value
            .get("nuisances")
            .ok_or_else(|| Error::Serde("missing 'nuisances' key".into()))?;
        Ok(serde_json::from_value(set.clone())?)
    }
}

/// Hidden architecture of a nuisance network; input dimension comes from the
/// data and the output activation from the task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetShape {
    pub hidden_dims: Vec<usize>,
    pub activation: HiddenActivation,
}

impl Default for NetShape {
    fn default() -> Self {
        // four tanh hidden layers of width 32
        NetShape {
            hidden_dims: vec![32, 32, 32, 32],
            activation: HiddenActivation::Tanh,
        }
    }
}

/// Configuration for stage-1 fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuisanceFitConfig {
    pub response_net: NetShape,
    pub propensity_net: NetShape,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Fit nuisances on one half of the data and hand the other half to
    /// stage 2 (two folds, no cross-fitting).
    pub sample_splitting: bool,
    /// Propensity outputs are clamped to `[p_min, 1 - p_min]`.
    pub p_min: f64,
    /// Mini-batch size; `None` selects full batch up to 4000 rows.
    pub batch_size: Option<usize>,
}

impl Default for NuisanceFitConfig {
    fn default() -> Self {
        NuisanceFitConfig {
            response_net: NetShape::default(),
            propensity_net: NetShape::default(),
            epochs: 500,
            learning_rate: 1e-3,
            sample_splitting: false,
            p_min: 0.01,
            batch_size: None,
        }
    }
}

impl NuisanceFitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_min > 0.0 && self.p_min < 0.5) {
            return Err(Error::InvalidSpec(format!(
                "propensity clamp p_min must lie in (0, 0.5), got {}",
                self.p_min
            )));
        }
        Ok(())
    }

    fn train_options(&self) -> TrainOptions {
        TrainOptions {
            batch: self.batch_size.map_or(BatchMode::Auto, BatchMode::Size),
            ..TrainOptions::new(self.epochs, self.learning_rate)
        }
    }
}

/// Fits the response surface `mu_arm` on the rows with `A = arm`.
pub fn fit_response(
    data: &Dataset,
    arm: u8,
    cfg: &NuisanceFitConfig,
    seed: u64,
) -> Result<NuisanceModel> {
    cfg.validate()?;
    let subset = data.filter_arm(arm);
    if subset.is_empty() {
        return Err(Error::InvalidData(format!(
            "no rows with treatment arm {arm}; cannot fit response"
        )));
    }
    let spec = NetSpec::new(
        subset.dim(),
        cfg.response_net.hidden_dims.clone(),
        cfg.response_net.activation,
        OutputActivation::Identity,
    )?;
    let init = crate::ndnet::net_init(&spec, derive_seed(seed, 100 + u64::from(arm)))?;
    let x = Matrix::from_rows(&subset.xs())?;
    let ys = subset.ys();
    let out = crate::ndnet::train(
        &spec,
        init,
        &x,
        &cfg.train_options(),
        derive_seed(seed, 200 + u64::from(arm)),
        |idx| MseLoss::new(idx.iter().map(|&i| ys[i]).collect()),
    )?;
    Ok(NuisanceModel::Net {
        spec,
        params: out.params,
    })
}

/// Fits the propensity score as a clamped MLP classifier.
pub fn fit_propensity(
    data: &Dataset,
    cfg: &NuisanceFitConfig,
    seed: u64,
) -> Result<NuisanceModel> {
    cfg.validate()?;
    let arms = data.arms();
    if !arms.contains(&0) || !arms.contains(&1) {
        return Err(Error::InvalidData(
            "propensity fitting requires both treatment values in the data".into(),
        ));
    }
    let spec = NetSpec::new(
        data.dim(),
        cfg.propensity_net.hidden_dims.clone(),
        cfg.propensity_net.activation,
        OutputActivation::Sigmoid,
    )?;
    let init = crate::ndnet::net_init(&spec, derive_seed(seed, 300))?;
    let x = Matrix::from_rows(&data.xs())?;
    let labels: Vec<f64> = arms.iter().map(|&a| f64::from(a)).collect();
    let out = crate::ndnet::train(
        &spec,
        init,
        &x,
        &cfg.train_options(),
        derive_seed(seed, 400),
        |idx| BceLoss::new(idx.iter().map(|&i| labels[i]).collect()).expect("labels are 0/1"),
    )?;
    Ok(NuisanceModel::ClampedNet {
        spec,
        params: out.params,
        p_min: cfg.p_min,
    })
}

/// Ground-truth nuisance functions of a synthetic DGP.
pub fn oracle_nuisance(spec: &DgpSpec) -> NuisanceSet {
    NuisanceSet::new(
        NuisanceModel::OracleResponse {
            dgp: spec.clone(),
            arm: 1,
        },
        NuisanceModel::OracleResponse {
            dgp: spec.clone(),
            arm: 0,
        },
        NuisanceModel::OraclePropensity {
            kind: spec.propensity,
        },
    )
}

/// Output of stage 1: the fitted triple plus the rows stage 2 should use.
///
/// Without sample splitting `stage2_data` is the full input; with it, the
/// nuisances are fitted on one half and `stage2_data` is the other half.
#[derive(Debug, Clone)]
pub struct StageOneFit {
    pub nuisances: NuisanceSet,
    pub stage2_data: Dataset,
}

/// Fits all three nuisance functions.
pub fn fit_all(data: &Dataset, cfg: &NuisanceFitConfig, seed: u64) -> Result<StageOneFit> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidData("cannot fit nuisances on an empty dataset".into()));
    }
    let (fit_data, stage2_data) = if cfg.sample_splitting {
        let spec = SplitSpec {
            train: 0.5,
            val: 0.0,
            test: 0.5,
            seed: derive_seed(seed, 500),
        };
        let (fit_idx, _, eval_idx) = split_indices(data.len(), &spec);
        (data.subset(&fit_idx), data.subset(&eval_idx))
    } else {
        (data.clone(), data.clone())
    };

    let mu1 = fit_response(&fit_data, 1, cfg, seed)?;
    let mu0 = fit_response(&fit_data, 0, cfg, seed)?;
    let prop = fit_propensity(&fit_data, cfg, seed)?;
    Ok(StageOneFit {
        nuisances: NuisanceSet::new(mu1, mu0, prop),
        stage2_data,
    })
}
