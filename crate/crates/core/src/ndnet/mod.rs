//! Minimal dense feed-forward networks in f64.
//!
//! Everything the second stage needs and nothing more: forward pass,
//! hand-derived backward pass for the fixed loss zoo (see [`loss`] and the
//! retargeting losses built on top of it), Adam, and a central-difference
//! gradient oracle that keeps the analytic gradients honest.
//!
//! A network maps a row of covariates to one scalar. The output activation
//! is *not* applied inside the backward pass; each [`Loss`] receives the
//! pre-activation outputs and differentiates through the output activation
//! itself, which allows numerically fused forms (e.g. logits + binary
//! cross-entropy).
//!
//! All training is deterministic given (spec, seed, data, hyperparameters).

mod loss;
mod optim;
mod train;

pub use loss::{BceLoss, Loss, MseLoss};
pub use optim::{adam_step, AdamHyper, AdamState};
pub use train::{train, BatchMode, TrainOptions, TrainOutcome};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{sigmoid, softplus};

/// Activation applied after every hidden layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HiddenActivation {
    Tanh,
    Relu,
}

/// Activation applied to the final scalar output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Identity,
    Tanh,
    Sigmoid,
    /// `softplus(z) + a`; output is strictly greater than `a`.
    SoftplusPlusA(f64),
}

impl OutputActivation {
    pub fn apply(&self, z: f64) -> f64 {
        match self {
            OutputActivation::Identity => z,
            OutputActivation::Tanh => z.tanh(),
            OutputActivation::Sigmoid => sigmoid(z),
            OutputActivation::SoftplusPlusA(a) => softplus(z) + a,
        }
    }

    pub fn derivative(&self, z: f64) -> f64 {
        match self {
            OutputActivation::Identity => 1.0,
            OutputActivation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            OutputActivation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            // d/dz softplus(z) = sigmoid(z)
            OutputActivation::SoftplusPlusA(_) => sigmoid(z),
        }
    }
}

/// Architecture of a scalar-output dense network.
///
/// `hidden_dims` may be empty, which yields a single linear layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub hidden_activation: HiddenActivation,
    pub output_activation: OutputActivation,
}

impl NetSpec {
    pub fn new(
        input_dim: usize,
        hidden_dims: Vec<usize>,
        hidden_activation: HiddenActivation,
        output_activation: OutputActivation,
    ) -> Result<Self> {
        let spec = NetSpec {
            input_dim,
            hidden_dims,
            hidden_activation,
            output_activation,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidSpec("input_dim must be positive".into()));
        }
        if self.hidden_dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidSpec("hidden dims must be positive".into()));
        }
        if let OutputActivation::SoftplusPlusA(a) = self.output_activation {
            if !(a > 0.0) || !a.is_finite() {
                return Err(Error::InvalidSpec(format!(
                    "softplus_plus_a requires a > 0, got {a}"
                )));
            }
        }
        Ok(())
    }

    /// `(in_dim, out_dim)` for each layer, ending in the scalar output layer.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 1);
        let mut prev = self.input_dim;
        for &h in &self.hidden_dims {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, 1));
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims()
            .iter()
            .map(|&(p, q)| p * q + q)
            .sum()
    }
}

/// One dense layer: row-major `weights` with shape `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// All parameters of a network, shaped by its [`NetSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetParams {
    pub layers: Vec<LayerParams>,
}

impl NetParams {
    /// Zero-valued parameters shaped by `spec`.
    pub fn zeros(spec: &NetSpec) -> Self {
        let layers = spec
            .layer_dims()
            .into_iter()
            .map(|(p, q)| LayerParams {
                in_dim: p,
                out_dim: q,
                weights: vec![0.0; p * q],
                biases: vec![0.0; q],
            })
            .collect();
        NetParams { layers }
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    pub fn matches_spec(&self, spec: &NetSpec) -> Result<()> {
        let dims = spec.layer_dims();
        if dims.len() != self.layers.len() {
            return Err(Error::ShapeMismatch(format!(
                "params have {} layers, spec needs {}",
                self.layers.len(),
                dims.len()
            )));
        }
        for (l, &(p, q)) in self.layers.iter().zip(dims.iter()) {
            if l.in_dim != p || l.out_dim != q || l.weights.len() != p * q || l.biases.len() != q {
                return Err(Error::ShapeMismatch(format!(
                    "layer shaped {}x{}, spec needs {}x{}",
                    l.out_dim, l.in_dim, q, p
                )));
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.biases.iter()).all(|v| v.is_finite()))
    }

    /// Reads the parameter at a flat index (weights then biases, per layer).
    pub fn get_flat(&self, index: usize) -> Option<f64> {
        let (layer, offset) = self.locate(index)?;
        let l = &self.layers[layer];
        if offset < l.weights.len() {
            Some(l.weights[offset])
        } else {
            Some(l.biases[offset - l.weights.len()])
        }
    }

    pub fn set_flat(&mut self, index: usize, value: f64) {
        if let Some((layer, offset)) = self.locate(index) {
            let l = &mut self.layers[layer];
            if offset < l.weights.len() {
                l.weights[offset] = value;
            } else {
                let o = offset - l.weights.len();
                l.biases[o] = value;
            }
        }
    }

    pub fn coord(&self, index: usize) -> Option<ParamCoord> {
        let (layer, offset) = self.locate(index)?;
        let l = &self.layers[layer];
        if offset < l.weights.len() {
            Some(ParamCoord {
                layer,
                kind: ParamKind::Weight,
                index: offset,
            })
        } else {
            Some(ParamCoord {
                layer,
                kind: ParamKind::Bias,
                index: offset - l.weights.len(),
            })
        }
    }

    fn locate(&self, mut index: usize) -> Option<(usize, usize)> {
        for (i, l) in self.layers.iter().enumerate() {
            let len = l.weights.len() + l.biases.len();
            if index < len {
                return Some((i, index));
            }
            index -= len;
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
}

/// Identifies one scalar parameter inside a [`NetParams`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamCoord {
    pub layer: usize,
    pub kind: ParamKind,
    pub index: usize,
}

impl std::fmt::Display for ParamCoord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.kind {
            ParamKind::Weight => "weight",
            ParamKind::Bias => "bias",
        };
        write!(f, "layer {} {}[{}]", self.layer, kind, self.index)
    }
}

/// Row-major matrix of covariate rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Matrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::ShapeMismatch(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            data,
            rows: rows.len(),
            cols,
        })
    }

    pub fn from_flat(data: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "flat data of length {} cannot be {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Matrix { data, rows, cols })
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Copies the selected rows into a new matrix (mini-batch gather).
    pub fn gather(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            data,
            rows: idx.len(),
            cols: self.cols,
        }
    }
}

/// Initializes parameters: weights uniform on `[-1/sqrt(fan_in), +1/sqrt(fan_in)]`
/// per layer, biases zero. Deterministic given `seed`.
pub fn net_init(spec: &NetSpec, seed: u64) -> Result<NetParams> {
    use rand::{Rng, SeedableRng};
    spec.validate()?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let layers = spec
        .layer_dims()
        .into_iter()
        .map(|(p, q)| {
            let bound = 1.0 / (p as f64).sqrt();
            let weights = (0..p * q).map(|_| rng.gen_range(-bound..bound)).collect();
            LayerParams {
                in_dim: p,
                out_dim: q,
                weights: weights,
                biases: vec![0.0; q],
            }
        })
        .collect();
    Ok(NetParams { layers })
}

fn check_batch(params: &NetParams, spec: &NetSpec, x: &Matrix) -> Result<()> {
    params.matches_spec(spec)?;
    if x.n_cols() != spec.input_dim {
        return Err(Error::ShapeMismatch(format!(
            "batch has {} columns, spec input_dim is {}",
            x.n_cols(),
            spec.input_dim
        )));
    }
    Ok(())
}

fn apply_hidden(act: HiddenActivation, z: f64) -> f64 {
    match act {
        HiddenActivation::Tanh => z.tanh(),
        HiddenActivation::Relu => z.max(0.0),
    }
}

/// Hidden-activation derivative recovered from the activation *output*.
fn hidden_derivative_from_output(act: HiddenActivation, a: f64) -> f64 {
    match act {
        HiddenActivation::Tanh => 1.0 - a * a,
        HiddenActivation::Relu => {
            if a > 0.0 {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Runs the hidden layers and returns the per-hidden-layer activations plus
/// the pre-activation scalar output of the final layer for every row.
fn forward_hidden(params: &NetParams, spec: &NetSpec, x: &Matrix) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = x.n_rows();
    let n_hidden = spec.hidden_dims.len();
    let mut hidden_acts: Vec<Vec<f64>> = Vec::with_capacity(n_hidden);

    for (li, layer) in params.layers.iter().enumerate() {
        let p = layer.in_dim;
        let q = layer.out_dim;
        let input: &[f64] = if li == 0 {
            &x.data
        } else {
            &hidden_acts[li - 1]
        };
        let mut out = vec![0.0; n * q];
        for r in 0..n {
            let xin = &input[r * p..(r + 1) * p];
            for j in 0..q {
                let wrow = &layer.weights[j * p..(j + 1) * p];
                let mut z = layer.biases[j];
                for (w, v) in wrow.iter().zip(xin.iter()) {
                    z += w * v;
                }
                out[r * q + j] = z;
            }
        }
        if li < n_hidden {
            for v in out.iter_mut() {
                *v = apply_hidden(spec.hidden_activation, *v);
            }
            hidden_acts.push(out);
        } else {
            // final layer: q == 1, keep pre-activations
            return (hidden_acts, out);
        }
    }
    unreachable!("layer list always ends with the output layer");
}

/// Forward pass: one scalar per row with the output activation applied.
pub fn net_forward(params: &NetParams, spec: &NetSpec, x: &Matrix) -> Result<Vec<f64>> {
    check_batch(params, spec, x)?;
    let (_, pre) = forward_hidden(params, spec, x);
    Ok(pre
        .into_iter()
        .map(|z| spec.output_activation.apply(z))
        .collect())
}

/// Convenience forward pass over covariate rows.
pub fn net_forward_rows(params: &NetParams, spec: &NetSpec, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    if rows.is_empty() {
        return Ok(Vec::new());
    }
    net_forward(params, spec, &Matrix::from_rows(rows)?)
}

/// Forward pass for one covariate row.
pub fn net_forward_one(params: &NetParams, spec: &NetSpec, x: &[f64]) -> Result<f64> {
    let m = Matrix::from_flat(x.to_vec(), 1, x.len())?;
    Ok(net_forward(params, spec, &m)?[0])
}

/// Evaluates the mean loss of `loss` on the batch without computing gradients.
pub fn net_loss(params: &NetParams, spec: &NetSpec, x: &Matrix, loss: &dyn Loss) -> Result<f64> {
    check_batch(params, spec, x)?;
    let (_, pre) = forward_hidden(params, spec, x);
    let (value, _) = loss.eval(&pre, spec.output_activation)?;
    Ok(value)
}

/// Exact analytic gradient of the mean batch loss with respect to every
/// parameter. Returns `(loss value, gradients shaped like the parameters)`.
///
/// A non-finite loss value is reported as an error rather than propagated as
/// NaN gradients.
pub fn net_backward(
    params: &NetParams,
    spec: &NetSpec,
    x: &Matrix,
    loss: &dyn Loss,
) -> Result<(f64, NetParams)> {
    check_batch(params, spec, x)?;
    let n = x.n_rows();
    if n == 0 {
        return Err(Error::InvalidData("cannot take gradients on an empty batch".into()));
    }

    let (hidden_acts, pre_out) = forward_hidden(params, spec, x);
    let (value, dz_out) = loss.eval(&pre_out, spec.output_activation)?;
    if !value.is_finite() {
        return Err(Error::NonFinite(format!("loss evaluated to {value}")));
    }
    if dz_out.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("loss gradient contains NaN or infinity".into()));
    }

    let mut grads = NetParams::zeros(spec);
    // dz holds dL/d(pre-activation) of the layer currently being processed.
    let mut dz = dz_out;
    for li in (0..params.layers.len()).rev() {
        let layer = &params.layers[li];
        let p = layer.in_dim;
        let q = layer.out_dim;
        let input: &[f64] = if li == 0 {
            &x.data
        } else {
            &hidden_acts[li - 1]
        };

        let g = &mut grads.layers[li];
        for r in 0..n {
            let xin = &input[r * p..(r + 1) * p];
            for j in 0..q {
                let d = dz[r * q + j];
                g.biases[j] += d;
                let wrow = &mut g.weights[j * p..(j + 1) * p];
                for (gw, v) in wrow.iter_mut().zip(xin.iter()) {
                    *gw += d * v;
                }
            }
        }

        if li > 0 {
            // Propagate to the previous hidden layer through its activation.
            let mut dz_prev = vec![0.0; n * p];
            for r in 0..n {
                for j in 0..q {
                    let d = dz[r * q + j];
                    let wrow = &layer.weights[j * p..(j + 1) * p];
                    let drow = &mut dz_prev[r * p..(r + 1) * p];
                    for (dp, w) in drow.iter_mut().zip(wrow.iter()) {
                        *dp += w * d;
                    }
                }
            }
            let acts = &hidden_acts[li - 1];
            for (dp, a) in dz_prev.iter_mut().zip(acts.iter()) {
                *dp *= hidden_derivative_from_output(spec.hidden_activation, *a);
            }
            dz = dz_prev;
        }
    }
    Ok((value, grads))
}

/// Result of comparing analytic gradients against central differences.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Maximum over parameters of
    /// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
    pub max_relative_error: f64,
    pub worst_parameter: ParamCoord,
    pub perturbation: f64,
}

/// Compares [`net_backward`] against central finite differences
/// `(L(w + h) - L(w - h)) / 2h` for every parameter.
pub fn finite_diff_check(
    params: &NetParams,
    spec: &NetSpec,
    x: &Matrix,
    loss: &dyn Loss,
    h: f64,
) -> Result<GradCheckReport> {
    if !(h > 0.0) {
        return Err(Error::InvalidSpec(format!("perturbation h must be positive, got {h}")));
    }
    let (_, analytic) = net_backward(params, spec, x, loss)?;
    let mut work = params.clone();
    let mut max_rel = 0.0f64;
    let mut worst = ParamCoord {
        layer: 0,
        kind: ParamKind::Weight,
        index: 0,
    };
    let count = params.param_count();
    for i in 0..count {
        let orig = work.get_flat(i).expect("index in range");
        work.set_flat(i, orig + h);
        let plus = net_loss(&work, spec, x, loss)?;
        work.set_flat(i, orig - h);
        let minus = net_loss(&work, spec, x, loss)?;
        work.set_flat(i, orig);

        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic.get_flat(i).expect("index in range");
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        if rel > max_rel {
            max_rel = rel;
            worst = work.coord(i).expect("index in range");
        }
    }
    Ok(GradCheckReport {
        max_relative_error: max_rel,
        worst_parameter: worst,
        perturbation: h,
    })
}
