//! Batch losses with hand-derived gradients.
//!
//! A loss receives the *pre-activation* scalar outputs of the network and
//! differentiates through the output activation itself. This keeps fused
//! numerically stable forms possible (logits + BCE) and makes the gradient
//! of the mean loss exact rather than autodiff-approximate.

use crate::error::{Error, Result};
use crate::math::{sigmoid, softplus};
use crate::ndnet::OutputActivation;

/// A scalar mean loss over a batch of network outputs.
pub trait Loss {
    /// Returns `(mean loss, d(mean loss)/d pre_out[i] for every row)`.
    fn eval(&self, pre_out: &[f64], act: OutputActivation) -> Result<(f64, Vec<f64>)>;
}

fn check_len(name: &str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::ShapeMismatch(format!(
            "{name}: batch has {got} outputs but {expected} rows of loss data"
        )));
    }
    if expected == 0 {
        return Err(Error::InvalidData(format!("{name}: empty batch")));
    }
    Ok(())
}

/// Mean squared error `mean((f(z) - y)^2)` under any output activation.
#[derive(Debug, Clone)]
pub struct MseLoss {
    targets: Vec<f64>,
}

impl MseLoss {
    pub fn new(targets: Vec<f64>) -> Self {
        MseLoss { targets }
    }
}

impl Loss for MseLoss {
    fn eval(&self, pre_out: &[f64], act: OutputActivation) -> Result<(f64, Vec<f64>)> {
        check_len("mse", pre_out.len(), self.targets.len())?;
        let n = pre_out.len() as f64;
        let mut sum_sq = 0.0;
        let mut grad = vec![0.0; pre_out.len()];
        for (i, (&z, &y)) in pre_out.iter().zip(self.targets.iter()).enumerate() {
            let out = act.apply(z);
            let d = out - y;
            sum_sq += d * d;
            grad[i] = 2.0 * d * act.derivative(z) / n;
        }
        Ok((sum_sq / n, grad))
    }
}

/// Binary cross-entropy against labels in `{0, 1}`, fused with the sigmoid
/// output activation: the loss is computed from logits as
/// `mean(softplus(z) - y*z)`, whose gradient is `(sigmoid(z) - y)/n`.
#[derive(Debug, Clone)]
pub struct BceLoss {
    labels: Vec<f64>,
}

impl BceLoss {
    pub fn new(labels: Vec<f64>) -> Result<Self> {
        if labels.iter().any(|&y| !(0.0..=1.0).contains(&y)) {
            return Err(Error::InvalidData("bce labels must lie in [0, 1]".into()));
        }
        Ok(BceLoss { labels })
    }
}

impl Loss for BceLoss {
    fn eval(&self, pre_out: &[f64], act: OutputActivation) -> Result<(f64, Vec<f64>)> {
        if act != OutputActivation::Sigmoid {
            return Err(Error::InvalidSpec(
                "bce loss requires a sigmoid output activation".into(),
            ));
        }
        check_len("bce", pre_out.len(), self.labels.len())?;
        let n = pre_out.len() as f64;
        let mut sum = 0.0;
        let mut grad = vec![0.0; pre_out.len()];
        for (i, (&z, &y)) in pre_out.iter().zip(self.labels.iter()).enumerate() {
            sum += softplus(z) - y * z;
            grad[i] = (sigmoid(z) - y) / n;
        }
        Ok((sum / n, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_hand_values() {
        let loss = MseLoss::new(vec![1.0, -1.0]);
        let (v, g) = loss.eval(&[0.0, 0.0], OutputActivation::Identity).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        assert!((g[0] - (-1.0)).abs() < 1e-12); // 2*(0-1)/2
        assert!((g[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bce_matches_naive_formula() {
        let loss = BceLoss::new(vec![1.0, 0.0]).unwrap();
        let z = [0.7, -1.3];
        let (v, g) = loss.eval(&z, OutputActivation::Sigmoid).unwrap();
        let p0 = sigmoid(z[0]);
        let p1 = sigmoid(z[1]);
        let naive = (-(p0.ln()) - (1.0 - p1).ln()) / 2.0;
        assert!((v - naive).abs() < 1e-12);
        assert!((g[0] - (p0 - 1.0) / 2.0).abs() < 1e-12);
        assert!((g[1] - p1 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn bce_requires_sigmoid_and_valid_labels() {
        assert!(BceLoss::new(vec![2.0]).is_err());
        let loss = BceLoss::new(vec![1.0]).unwrap();
        assert!(loss.eval(&[0.0], OutputActivation::Identity).is_err());
    }

    #[test]
    fn losses_reject_length_mismatch_and_empty() {
        let loss = MseLoss::new(vec![1.0]);
        assert!(loss.eval(&[0.0, 0.0], OutputActivation::Identity).is_err());
        let empty = MseLoss::new(vec![]);
        assert!(empty.eval(&[], OutputActivation::Identity).is_err());
    }
}
