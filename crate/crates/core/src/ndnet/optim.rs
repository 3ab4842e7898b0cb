//! Adam optimizer with bias correction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndnet::{NetParams, NetSpec};

/// Adam moment-decay and stability constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Optimizer state: step counter plus first/second moment accumulators
/// shaped like the parameters they update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub t: u64,
    pub m: NetParams,
    pub v: NetParams,
    pub hyper: AdamHyper,
    pub learning_rate: f64,
}

impl AdamState {
    pub fn new(spec: &NetSpec, learning_rate: f64, hyper: AdamHyper) -> Result<Self> {
        if !(learning_rate > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        Ok(AdamState {
            t: 0,
            m: NetParams::zeros(spec),
            v: NetParams::zeros(spec),
            hyper,
            learning_rate,
        })
    }
}

/// One Adam update in place: `t` increments by exactly one, moments decay by
/// `beta1`/`beta2`, and parameters move by `lr * m_hat / (sqrt(v_hat) + eps)`.
pub fn adam_step(state: &mut AdamState, params: &mut NetParams, grads: &NetParams) -> Result<()> {
    if params.layers.len() != grads.layers.len() || params.layers.len() != state.m.layers.len() {
        return Err(Error::ShapeMismatch(
            "adam state, params, and grads must have the same layer structure".into(),
        ));
    }
    state.t += 1;
    let t = state.t as i32;
    let AdamHyper {
        beta1,
        beta2,
        epsilon,
    } = state.hyper;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    let lr = state.learning_rate;

    for li in 0..params.layers.len() {
        let pl = &mut params.layers[li];
        let gl = &grads.layers[li];
        let ml = &mut state.m.layers[li];
        let vl = &mut state.v.layers[li];
        if pl.weights.len() != gl.weights.len() || pl.biases.len() != gl.biases.len() {
            return Err(Error::ShapeMismatch(format!(
                "gradient layer {li} does not match parameter shapes"
            )));
        }
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + epsilon);
        };
        for ((p, &g), (m, v)) in pl
            .weights
            .iter_mut()
            .zip(gl.weights.iter())
            .zip(ml.weights.iter_mut().zip(vl.weights.iter_mut()))
        {
            update(p, g, m, v);
        }
        for ((p, &g), (m, v)) in pl
            .biases
            .iter_mut()
            .zip(gl.biases.iter())
            .zip(ml.biases.iter_mut().zip(vl.biases.iter_mut()))
        {
            update(p, g, m, v);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndnet::{HiddenActivation, OutputActivation};

    fn one_param_spec() -> NetSpec {
        NetSpec::new(
            1,
            vec![],
            HiddenActivation::Tanh,
            OutputActivation::Identity,
        )
        .unwrap()
    }

    #[test]
    fn zero_gradient_is_identity_on_params() {
        let spec = one_param_spec();
        let mut params = NetParams::zeros(&spec);
        params.layers[0].weights[0] = 1.5;
        let before = params.clone();
        let grads = NetParams::zeros(&spec);
        let mut state = AdamState::new(&spec, 0.01, AdamHyper::default()).unwrap();
        adam_step(&mut state, &mut params, &grads).unwrap();
        assert_eq!(params, before);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // g=1, lr=0.01: bias correction gives m_hat = v_hat = 1, so the
        // parameter decreases by lr/(1 + eps) ~ 0.01.
        let spec = one_param_spec();
        let mut params = NetParams::zeros(&spec);
        let mut grads = NetParams::zeros(&spec);
        grads.layers[0].weights[0] = 1.0;
        let mut state = AdamState::new(&spec, 0.01, AdamHyper::default()).unwrap();
        adam_step(&mut state, &mut params, &grads).unwrap();
        let w = params.layers[0].weights[0];
        assert!((w + 0.01).abs() < 1e-9, "w = {w}");

        adam_step(&mut state, &mut params, &grads).unwrap();
        let w = params.layers[0].weights[0];
        assert!((w + 0.02).abs() < 1e-6, "two identical steps: w = {w}");
        assert_eq!(state.t, 2);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let spec = one_param_spec();
        let other = NetSpec::new(
            2,
            vec![3],
            HiddenActivation::Tanh,
            OutputActivation::Identity,
        )
        .unwrap();
        let mut params = NetParams::zeros(&spec);
        let grads = NetParams::zeros(&other);
        let mut state = AdamState::new(&spec, 0.01, AdamHyper::default()).unwrap();
        assert!(adam_step(&mut state, &mut params, &grads).is_err());
    }
}
