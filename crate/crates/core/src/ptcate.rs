//! Stage 2: the retargeted CATE learner.
//!
//! Two networks are trained against a pseudo-outcome dataset:
//!
//! * `g` — the CATE surface. Its loss blends squared error with a smoothed
//!   policy-value term,
//!   `(1 - gamma) * mean((y - g)^2) - gamma * mean(y * sigmoid(alpha * g))`,
//!   so `gamma = 0` is plain second-stage regression and `gamma = 1` is pure
//!   (smoothed) policy optimization.
//! * `alpha` — the covariate-dependent sharpness of the sigmoid indicator
//!   approximation. It minimizes a `|y|`-weighted binary cross-entropy on
//!   the sign of the pseudo-outcome, so it grows where `g` already has the
//!   right sign and stays near its floor where `g` is wrong.
//!
//! Training alternates: fit `g` at `gamma = 0` (step 1), fit `alpha` with
//! `g` frozen (step 2), refit `g` at the configured `gamma` with `alpha`
//! frozen (step 3); steps 2 and 3 repeat for `iterations` rounds.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{derive_seed, sigmoid};
use crate::ndnet::{
    net_forward, net_init, train, BatchMode, HiddenActivation, Loss, Matrix, MseLoss, NetParams,
    NetSpec, OutputActivation, TrainOptions,
};
use crate::pseudo::{PseudoDataset, PseudoOutcomeKind};

/// Hyperparameters of the retargeted second stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PtConfig {
    /// Trade-off between squared error (0) and policy value (1).
    pub gamma: f64,
    /// Lower bound `a` of the sharpness network output.
    pub alpha_floor: f64,
    /// Rounds of (step 2, step 3) after the initial fit.
    pub iterations: usize,
    pub epochs_init: usize,
    pub epochs_alpha: usize,
    pub epochs_refine: usize,
    pub lr_g: f64,
    pub lr_alpha: f64,
    pub pseudo_kind: PseudoOutcomeKind,
    /// Pass `tanh(g)` instead of `g` into the sharpness loss in step 2.
    pub tanh_normalize_step2: bool,
    /// Weight the policy term by `1 / alpha(x)` in step 3.
    pub inv_alpha_weight_step3: bool,
    pub g_spec: NetSpec,
    pub alpha_spec: NetSpec,
    /// L2 penalty on the g-network weights (the "regularized g" setting).
    pub weight_decay_g: f64,
    /// Optional quantile at which the `|y|` weights of the sharpness loss
    /// are clipped (tames IPW/DR variance); `None` leaves them unclipped.
    pub alpha_weight_clip_quantile: Option<f64>,
    /// Mini-batch size; `None` selects full batch up to 4000 rows.
    pub batch_size: Option<usize>,
}

/// Sharpness-network spec with the required `softplus + a` output.
pub fn alpha_net_spec(input_dim: usize, hidden_dims: Vec<usize>, floor: f64) -> Result<NetSpec> {
    NetSpec::new(
        input_dim,
        hidden_dims,
        HiddenActivation::Relu,
        OutputActivation::SoftplusPlusA(floor),
    )
}

impl PtConfig {
    /// Baseline configuration: linear `g`, ReLU sharpness net, the default
    /// epoch budget, and the step-2/step-3 stabilizers on.
    pub fn linear_g(input_dim: usize, kind: PseudoOutcomeKind) -> Result<Self> {
        let g_spec = NetSpec::new(
            input_dim,
            vec![],
            HiddenActivation::Tanh,
            OutputActivation::Identity,
        )?;
        let alpha_floor = 1.0;
        let alpha_spec = alpha_net_spec(input_dim, vec![32, 32, 32], alpha_floor)?;
        Ok(PtConfig {
            gamma: 0.0,
            alpha_floor,
            iterations: 1,
            epochs_init: 2000,
            epochs_alpha: 1000,
            epochs_refine: 1000,
            lr_g: 1e-3,
            lr_alpha: 1e-2,
            pseudo_kind: kind,
            tanh_normalize_step2: true,
            inv_alpha_weight_step3: true,
            g_spec,
            alpha_spec,
            weight_decay_g: 0.0,
            alpha_weight_clip_quantile: None,
            batch_size: None,
        })
    }

    /// Baseline configuration with an MLP `g` (for the regularized setting).
    pub fn mlp_g(input_dim: usize, kind: PseudoOutcomeKind) -> Result<Self> {
        let mut cfg = Self::linear_g(input_dim, kind)?;
        cfg.g_spec = NetSpec::new(
            input_dim,
            vec![32, 32, 32],
            HiddenActivation::Tanh,
            OutputActivation::Identity,
        )?;
        Ok(cfg)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    /// Changes the sharpness floor, keeping the output activation in sync.
    pub fn with_alpha_floor(mut self, floor: f64) -> Self {
        self.alpha_floor = floor;
        self.alpha_spec.output_activation = OutputActivation::SoftplusPlusA(floor);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidSpec(format!("gamma must lie in [0, 1], got {}", self.gamma)));
        }
        if !(self.alpha_floor > 0.0) {
            return Err(Error::InvalidSpec("alpha_floor must be positive".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidSpec("iterations must be at least 1".into()));
        }
        if !(self.lr_g > 0.0 && self.lr_alpha > 0.0) {
            return Err(Error::InvalidSpec("learning rates must be positive".into()));
        }
        if self.weight_decay_g < 0.0 {
            return Err(Error::InvalidSpec("weight decay must be non-negative".into()));
        }
        if let Some(q) = self.alpha_weight_clip_quantile {
            if !(q > 0.0 && q <= 1.0) {
                return Err(Error::InvalidSpec(format!(
                    "alpha weight clip quantile must lie in (0, 1], got {q}"
                )));
            }
        }
        self.g_spec.validate()?;
        self.alpha_spec.validate()?;
        match self.alpha_spec.output_activation {
            OutputActivation::SoftplusPlusA(a) if a == self.alpha_floor => Ok(()),
            other => Err(Error::InvalidSpec(format!(
                "alpha_spec output must be softplus_plus_a({}), got {other:?}",
                self.alpha_floor
            ))),
        }
    }

    fn g_train_options(&self, epochs: usize) -> TrainOptions {
        TrainOptions {
            batch: self.batch_size.map_or(BatchMode::Auto, BatchMode::Size),
            weight_decay: self.weight_decay_g,
            ..TrainOptions::new(epochs, self.lr_g)
        }
    }

    fn alpha_train_options(&self) -> TrainOptions {
        TrainOptions {
            batch: self.batch_size.map_or(BatchMode::Auto, BatchMode::Size),
            ..TrainOptions::new(self.epochs_alpha, self.lr_alpha)
        }
    }
}

/// Which phase of the algorithm an epoch belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmStep {
    InitCate,
    SharpnessDetect,
    Refine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub step: AlgorithmStep,
    pub iteration: usize,
    pub epoch: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub records: Vec<EpochRecord>,
    /// Cutoff actually applied to the `|y|` sharpness weights, when clipping
    /// was configured.
    pub alpha_weight_clip: Option<f64>,
}

impl TrainingLog {
    fn extend_from(&mut self, step: AlgorithmStep, iteration: usize, losses: &[f64]) {
        self.records
            .extend(losses.iter().enumerate().map(|(epoch, &loss)| EpochRecord {
                step,
                iteration,
                epoch,
                loss,
            }));
    }

    fn completed_iterations(&self, step: AlgorithmStep) -> usize {
        self.records
            .iter()
            .filter(|r| r.step == step)
            .map(|r| r.iteration)
            .max()
            .unwrap_or(0)
    }
}

/// The trained pair `(g, alpha)` plus its configuration and history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PtModel {
    pub g_params: NetParams,
    pub alpha_params: NetParams,
    pub config: PtConfig,
    pub seed: u64,
    pub log: TrainingLog,
}

impl PtModel {
    pub fn predict_cate_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        if xs.is_empty() {
            return Ok(Vec::new());
        }
        net_forward(&self.g_params, &self.config.g_spec, &Matrix::from_rows(xs)?)
    }

    pub fn predict_cate(&self, x: &[f64]) -> Result<f64> {
        Ok(self.predict_cate_batch(std::slice::from_ref(&x.to_vec()))?[0])
    }

    pub fn predict_alpha_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        if xs.is_empty() {
            return Ok(Vec::new());
        }
        net_forward(
            &self.alpha_params,
            &self.config.alpha_spec,
            &Matrix::from_rows(xs)?,
        )
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let wrapper = serde_json::json!({ "version": 1, "model": self });
        std::fs::write(path, serde_json::to_string_pretty(&wrapper)?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        match value.get("version").and_then(|v| v.as_u64()) {
            Some(1) => {}
            other => return Err(Error::Serde(format!("unsupported model dump version {other:?}"))),
        }
        let model = value
            .get("model")
            .ok_or_else(|| Error::Serde("missing 'model' key".into()))?;
        Ok(serde_json::from_value(model.clone())?)
    }
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

fn check_same_len(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch(format!(
            "{what}: lengths {a} and {b} differ"
        )));
    }
    Ok(())
}

/// Retargeting loss for `g` given frozen per-row sharpness values.
///
/// `mean((1 - gamma)(y - g)^2 - gamma * w * y * sigmoid(alpha * g))`
/// with `w = 1 / alpha` when inverse-alpha weighting is on.
#[derive(Debug, Clone)]
pub struct RetargetLoss {
    pseudo: Vec<f64>,
    alpha: Vec<f64>,
    gamma: f64,
    inv_alpha_weight: bool,
}

impl RetargetLoss {
    pub fn new(
        pseudo: Vec<f64>,
        alpha: Vec<f64>,
        gamma: f64,
        inv_alpha_weight: bool,
    ) -> Result<Self> {
        check_same_len(pseudo.len(), alpha.len(), "retarget loss")?;
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidSpec(format!("gamma must lie in [0, 1], got {gamma}")));
        }
        if alpha.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
            return Err(Error::InvalidData("alpha values must be positive and finite".into()));
        }
        if pseudo.iter().any(|y| !y.is_finite()) {
            return Err(Error::NonFinite("pseudo-outcomes must be finite".into()));
        }
        Ok(RetargetLoss {
            pseudo,
            alpha,
            gamma,
            inv_alpha_weight,
        })
    }
}

impl Loss for RetargetLoss {
    fn eval(&self, pre_out: &[f64], act: OutputActivation) -> Result<(f64, Vec<f64>)> {
        check_same_len(pre_out.len(), self.pseudo.len(), "retarget loss batch")?;
        if pre_out.is_empty() {
            return Err(Error::InvalidData("retarget loss: empty batch".into()));
        }
        let n = pre_out.len() as f64;
        let gamma = self.gamma;
        let mut sum_sq = 0.0;
        let mut sum_pol = 0.0;
        let mut grad = vec![0.0; pre_out.len()];
        for (i, &z) in pre_out.iter().enumerate() {
            let g = act.apply(z);
            let y = self.pseudo[i];
            let a = self.alpha[i];
            let d = g - y;
            let s = sigmoid(a * g);
            let w = if self.inv_alpha_weight { 1.0 / a } else { 1.0 };
            sum_sq += d * d;
            sum_pol += w * y * s;
            let pol_grad = w * y * s * (1.0 - s) * a;
            grad[i] = (2.0 * (1.0 - gamma) * d - gamma * pol_grad) * act.derivative(z) / n;
        }
        let value = ((1.0 - gamma) * sum_sq - gamma * sum_pol) / n;
        Ok((value, grad))
    }
}

/// Sharpness loss for `alpha` given frozen per-row `g` values:
/// `mean(w * bce(sigmoid(alpha * g); 1(y > 0)))` with `w = |y|` (possibly
/// clipped). Rows with `y = 0` contribute nothing.
#[derive(Debug, Clone)]
pub struct SharpnessLoss {
    pseudo: Vec<f64>,
    g_out: Vec<f64>,
    weights: Vec<f64>,
}

impl SharpnessLoss {
    pub fn new(pseudo: Vec<f64>, g_out: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        check_same_len(pseudo.len(), g_out.len(), "sharpness loss")?;
        check_same_len(pseudo.len(), weights.len(), "sharpness loss weights")?;
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidData("sharpness weights must be finite and >= 0".into()));
        }
        Ok(SharpnessLoss {
            pseudo,
            g_out,
            weights,
        })
    }

    /// Unclipped `|y|` weights.
    pub fn from_pseudo(pseudo: Vec<f64>, g_out: Vec<f64>) -> Result<Self> {
        let weights = pseudo.iter().map(|y| y.abs()).collect();
        SharpnessLoss::new(pseudo, g_out, weights)
    }
}

impl Loss for SharpnessLoss {
    fn eval(&self, pre_out: &[f64], act: OutputActivation) -> Result<(f64, Vec<f64>)> {
        let floor = match act {
            OutputActivation::SoftplusPlusA(a) => a,
            other => {
                return Err(Error::InvalidSpec(format!(
                    "sharpness loss requires a softplus_plus_a output, got {other:?}"
                )))
            }
        };
        debug_assert!(floor > 0.0);
        check_same_len(pre_out.len(), self.pseudo.len(), "sharpness loss batch")?;
        if pre_out.is_empty() {
            return Err(Error::InvalidData("sharpness loss: empty batch".into()));
        }
        let n = pre_out.len() as f64;
        let mut sum = 0.0;
        let mut grad = vec![0.0; pre_out.len()];
        for (i, &z) in pre_out.iter().enumerate() {
            let w = self.weights[i];
            let y = self.pseudo[i];
            if w == 0.0 || y == 0.0 {
                continue;
            }
            let alpha = act.apply(z);
            let u = self.g_out[i];
            let sign = if y > 0.0 { 1.0 } else { -1.0 };
            // bce(sigmoid(alpha*u); label) = softplus(-sign * alpha * u)
            let m = -sign * alpha * u;
            sum += w * crate::math::softplus(m);
            // d/d alpha = sigmoid(m) * (-sign * u); d alpha/dz = sigmoid(z)
            grad[i] = w * sigmoid(m) * (-sign * u) * sigmoid(z) / n;
        }
        Ok((sum / n, grad))
    }
}

// ---------------------------------------------------------------------------
// Loss values on given outputs (validation / reporting forms)
// ---------------------------------------------------------------------------

/// Smoothed retargeting loss evaluated on network *outputs*.
pub fn loss_g(
    g_out: &[f64],
    alpha_out: &[f64],
    y_pseudo: &[f64],
    gamma: f64,
    inv_alpha_weight: bool,
) -> Result<f64> {
    let loss = RetargetLoss::new(
        y_pseudo.to_vec(),
        alpha_out.to_vec(),
        gamma,
        inv_alpha_weight,
    )?;
    if g_out.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("g outputs must be finite".into()));
    }
    // Outputs are pre-activations under an identity head.
    let (value, _) = loss.eval(g_out, OutputActivation::Identity)?;
    Ok(value)
}

/// Sharpness loss evaluated on network *outputs*.
pub fn loss_alpha(alpha_out: &[f64], g_out: &[f64], y_pseudo: &[f64]) -> Result<f64> {
    check_same_len(alpha_out.len(), g_out.len(), "loss_alpha")?;
    check_same_len(alpha_out.len(), y_pseudo.len(), "loss_alpha")?;
    if alpha_out.is_empty() {
        return Err(Error::InvalidData("loss_alpha: empty batch".into()));
    }
    let n = alpha_out.len() as f64;
    let mut sum = 0.0;
    for i in 0..alpha_out.len() {
        let y = y_pseudo[i];
        if y == 0.0 {
            continue;
        }
        let sign = if y > 0.0 { 1.0 } else { -1.0 };
        sum += y.abs() * crate::math::softplus(-sign * alpha_out[i] * g_out[i]);
    }
    Ok(sum / n)
}

/// Non-smoothed loss on outputs:
/// `(1 - gamma) * mean((y - g)^2) - gamma * mean(1(g > 0) * y)`.
/// Used for validation-based selection of the sharpness floor.
pub fn threshold_loss(g_out: &[f64], y_pseudo: &[f64], gamma: f64) -> Result<f64> {
    check_same_len(g_out.len(), y_pseudo.len(), "threshold_loss")?;
    if g_out.is_empty() {
        return Err(Error::InvalidData("threshold_loss: empty batch".into()));
    }
    let n = g_out.len() as f64;
    let mut sq = 0.0;
    let mut pol = 0.0;
    for (&g, &y) in g_out.iter().zip(y_pseudo.iter()) {
        let d = y - g;
        sq += d * d;
        if g > 0.0 {
            pol += y;
        }
    }
    Ok((1.0 - gamma) * sq / n - gamma * pol / n)
}

// ---------------------------------------------------------------------------
// The three-step algorithm
// ---------------------------------------------------------------------------

fn pseudo_matrix(pseudo: &PseudoDataset) -> Result<Matrix> {
    if pseudo.is_empty() {
        return Err(Error::InvalidData("pseudo dataset is empty".into()));
    }
    Matrix::from_rows(&pseudo.xs)
}

/// Step 1: train `g` at `gamma = 0` from fresh initializations of both
/// networks. The sharpness network is initialized but untouched.
pub fn step1_init(pseudo: &PseudoDataset, cfg: &PtConfig, seed: u64) -> Result<PtModel> {
    cfg.validate()?;
    let x = pseudo_matrix(pseudo)?;
    let g0 = net_init(&cfg.g_spec, derive_seed(seed, 1))?;
    let alpha0 = net_init(&cfg.alpha_spec, derive_seed(seed, 2))?;

    // Frozen alpha outputs; mathematically irrelevant at gamma = 0 but the
    // loss shape stays identical across steps.
    let alpha_out = net_forward(&alpha0, &cfg.alpha_spec, &x)?;
    let ys = &pseudo.ys;
    let outcome = train(
        &cfg.g_spec,
        g0,
        &x,
        &cfg.g_train_options(cfg.epochs_init),
        derive_seed(seed, 11),
        |idx| {
            RetargetLoss::new(
                idx.iter().map(|&i| ys[i]).collect(),
                idx.iter().map(|&i| alpha_out[i]).collect(),
                0.0,
                cfg.inv_alpha_weight_step3,
            )
            .expect("validated inputs")
        },
    )?;

    let mut log = TrainingLog::default();
    log.extend_from(AlgorithmStep::InitCate, 0, &outcome.epoch_losses);
    Ok(PtModel {
        g_params: outcome.params,
        alpha_params: alpha0,
        config: cfg.clone(),
        seed,
        log,
    })
}

/// Step 2: train `alpha` with `g` frozen. The frozen `g` outputs (optionally
/// tanh-normalized) and the `|y|` weights are precomputed once.
pub fn step2_alpha(model: &PtModel, pseudo: &PseudoDataset) -> Result<PtModel> {
    let cfg = &model.config;
    let x = pseudo_matrix(pseudo)?;
    let iteration = model.log.completed_iterations(AlgorithmStep::SharpnessDetect) + 1;

    let mut g_out = net_forward(&model.g_params, &cfg.g_spec, &x)?;
    if cfg.tanh_normalize_step2 {
        for v in g_out.iter_mut() {
            *v = v.tanh();
        }
    }
    let mut weights: Vec<f64> = pseudo.ys.iter().map(|y| y.abs()).collect();
    let mut applied_clip = model.log.alpha_weight_clip;
    if let Some(q) = cfg.alpha_weight_clip_quantile {
        let mut sorted = weights.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite weights"));
        let pos = ((sorted.len() - 1) as f64 * q).round() as usize;
        let cutoff = sorted[pos];
        for w in weights.iter_mut() {
            *w = w.min(cutoff);
        }
        applied_clip = Some(cutoff);
    }

    let ys = &pseudo.ys;
    let outcome = train(
        &cfg.alpha_spec,
        model.alpha_params.clone(),
        &x,
        &cfg.alpha_train_options(),
        derive_seed(model.seed, 20 + iteration as u64),
        |idx| {
            SharpnessLoss::new(
                idx.iter().map(|&i| ys[i]).collect(),
                idx.iter().map(|&i| g_out[i]).collect(),
                idx.iter().map(|&i| weights[i]).collect(),
            )
            .expect("validated inputs")
        },
    )?;

    let mut next = model.clone();
    next.alpha_params = outcome.params;
    next.log.alpha_weight_clip = applied_clip;
    next.log
        .extend_from(AlgorithmStep::SharpnessDetect, iteration, &outcome.epoch_losses);
    Ok(next)
}

/// Step 3: retrain `g` at the configured `gamma` with `alpha` frozen.
pub fn step3_refine(model: &PtModel, pseudo: &PseudoDataset) -> Result<PtModel> {
    let cfg = &model.config;
    let x = pseudo_matrix(pseudo)?;
    let iteration = model.log.completed_iterations(AlgorithmStep::Refine) + 1;

    let alpha_out = net_forward(&model.alpha_params, &cfg.alpha_spec, &x)?;
    let ys = &pseudo.ys;
    let outcome = train(
        &cfg.g_spec,
        model.g_params.clone(),
        &x,
        &cfg.g_train_options(cfg.epochs_refine),
        derive_seed(model.seed, 40 + iteration as u64),
        |idx| {
            RetargetLoss::new(
                idx.iter().map(|&i| ys[i]).collect(),
                idx.iter().map(|&i| alpha_out[i]).collect(),
                cfg.gamma,
                cfg.inv_alpha_weight_step3,
            )
            .expect("validated inputs")
        },
    )?;

    let mut next = model.clone();
    next.g_params = outcome.params;
    next.log
        .extend_from(AlgorithmStep::Refine, iteration, &outcome.epoch_losses);
    Ok(next)
}

/// Full training: step 1 once, then `iterations` rounds of steps 2 and 3.
pub fn train_ptcate(pseudo: &PseudoDataset, cfg: &PtConfig, seed: u64) -> Result<PtModel> {
    let mut model = step1_init(pseudo, cfg, seed)?;
    for _ in 0..cfg.iterations {
        model = step2_alpha(&model, pseudo)?;
        model = step3_refine(&model, pseudo)?;
    }
    Ok(model)
}

/// The `gamma = 0` reference path: the same trainer and seed streams with a
/// plain MSE loss in place of the retargeting loss. Used to assert that the
/// pipeline at `gamma = 0` degenerates to standard two-stage regression
/// bit-for-bit.
pub fn train_mse_baseline(pseudo: &PseudoDataset, cfg: &PtConfig, seed: u64) -> Result<PtModel> {
    cfg.validate()?;
    let x = pseudo_matrix(pseudo)?;
    let g0 = net_init(&cfg.g_spec, derive_seed(seed, 1))?;
    let alpha0 = net_init(&cfg.alpha_spec, derive_seed(seed, 2))?;
    let ys = &pseudo.ys;

    let mut log = TrainingLog::default();
    let first = train(
        &cfg.g_spec,
        g0,
        &x,
        &cfg.g_train_options(cfg.epochs_init),
        derive_seed(seed, 11),
        |idx| MseLoss::new(idx.iter().map(|&i| ys[i]).collect()),
    )?;
    log.extend_from(AlgorithmStep::InitCate, 0, &first.epoch_losses);

    let mut params = first.params;
    for iteration in 1..=cfg.iterations {
        let cont = train(
            &cfg.g_spec,
            params,
            &x,
            &cfg.g_train_options(cfg.epochs_refine),
            derive_seed(seed, 40 + iteration as u64),
            |idx| MseLoss::new(idx.iter().map(|&i| ys[i]).collect()),
        )?;
        log.extend_from(AlgorithmStep::Refine, iteration, &cont.epoch_losses);
        params = cont.params;
    }

    Ok(PtModel {
        g_params: params,
        alpha_params: alpha0,
        config: cfg.clone(),
        seed,
        log,
    })
}

/// Picks the sharpness floor from `candidates` by training one model per
/// candidate on `train_pseudo` and evaluating the non-smoothed loss on
/// `val_pseudo`; ties resolve to the smallest floor.
pub fn select_alpha_floor(
    candidates: &[f64],
    train_pseudo: &PseudoDataset,
    val_pseudo: &PseudoDataset,
    cfg: &PtConfig,
    seed: u64,
) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::InvalidData("no alpha floor candidates".into()));
    }
    if val_pseudo.is_empty() {
        return Err(Error::InvalidData("validation pseudo dataset is empty".into()));
    }
    let mut sorted: Vec<f64> = candidates.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite candidates"));

    let mut best: Option<(f64, f64)> = None;
    for &a in &sorted {
        let candidate_cfg = cfg.clone().with_alpha_floor(a);
        let model = train_ptcate(train_pseudo, &candidate_cfg, seed)?;
        let g_val = model.predict_cate_batch(&val_pseudo.xs)?;
        let loss = threshold_loss(&g_val, &val_pseudo.ys, cfg.gamma)?;
        match best {
            Some((_, best_loss)) if loss >= best_loss => {}
            _ => best = Some((a, loss)),
        }
    }
    Ok(best.expect("nonempty candidates").0)
}

/// The smoothed policy `pi(x) = sigmoid(alpha(x) * g(x))`.
#[derive(Debug, Clone)]
pub struct StochasticPolicy {
    g_spec: NetSpec,
    g_params: NetParams,
    alpha_spec: NetSpec,
    alpha_params: NetParams,
}

impl StochasticPolicy {
    pub fn eval_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        if xs.is_empty() {
            return Ok(Vec::new());
        }
        let m = Matrix::from_rows(xs)?;
        let g = net_forward(&self.g_params, &self.g_spec, &m)?;
        let a = net_forward(&self.alpha_params, &self.alpha_spec, &m)?;
        Ok(g.iter().zip(a.iter()).map(|(&g, &a)| sigmoid(a * g)).collect())
    }

    pub fn eval_one(&self, x: &[f64]) -> Result<f64> {
        Ok(self.eval_batch(std::slice::from_ref(&x.to_vec()))?[0])
    }
}

/// Treatment probabilities from a trained model.
pub fn stochastic_policy(model: &PtModel) -> StochasticPolicy {
    StochasticPolicy {
        g_spec: model.config.g_spec.clone(),
        g_params: model.g_params.clone(),
        alpha_spec: model.config.alpha_spec.clone(),
        alpha_params: model.alpha_params.clone(),
    }
}
