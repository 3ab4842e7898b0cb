//! Deterministic Adam training loop.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ndnet::{adam_step, net_backward, AdamHyper, AdamState, Loss, Matrix, NetParams, NetSpec};

/// Rows per gradient step.
///
/// `Auto` uses one full-batch step per epoch up to 4000 rows (the scale the
/// synthetic experiments run at) and seeded mini-batches of 1024 above that.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchMode {
    Auto,
    Full,
    Size(usize),
}

impl BatchMode {
    fn resolve(self, n: usize) -> usize {
        match self {
            BatchMode::Full => n,
            BatchMode::Size(s) => s.max(1).min(n),
            BatchMode::Auto => {
                if n <= 4000 {
                    n
                } else {
                    1024.min(n)
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub epochs: usize,
    pub learning_rate: f64,
    /// L2 penalty strength added to the weight gradients (biases excluded).
    pub weight_decay: f64,
    pub batch: BatchMode,
    pub adam: AdamHyper,
}

impl TrainOptions {
    pub fn new(epochs: usize, learning_rate: f64) -> Self {
        TrainOptions {
            epochs,
            learning_rate,
            weight_decay: 0.0,
            batch: BatchMode::Auto,
            adam: AdamHyper::default(),
        }
    }

    pub fn with_weight_decay(mut self, wd: f64) -> Self {
        self.weight_decay = wd;
        self
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: NetParams,
    /// Mean data loss per epoch (weight-decay penalty not included).
    pub epoch_losses: Vec<f64>,
}

/// Trains `params` on the rows of `x` for `opts.epochs` epochs.
///
/// `make_loss` builds the loss view for a batch of row indices; it must
/// return per-row data aligned with those indices. Mini-batch order is drawn
/// from a ChaCha stream seeded with `shuffle_seed`, so identical inputs give
/// bit-identical trajectories.
pub fn train<L, F>(
    spec: &NetSpec,
    mut params: NetParams,
    x: &Matrix,
    opts: &TrainOptions,
    shuffle_seed: u64,
    make_loss: F,
) -> Result<TrainOutcome>
where
    L: Loss,
    F: Fn(&[usize]) -> L,
{
    params.matches_spec(spec)?;
    let n = x.n_rows();
    if n == 0 {
        return Err(Error::InvalidData("cannot train on an empty dataset".into()));
    }
    if opts.epochs == 0 {
        return Ok(TrainOutcome {
            params,
            epoch_losses: Vec::new(),
        });
    }

    let batch_size = opts.batch.resolve(n);
    let full_batch = batch_size == n;
    let mut state = AdamState::new(spec, opts.learning_rate, opts.adam)?;
    let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_losses = Vec::with_capacity(opts.epochs);

    for _ in 0..opts.epochs {
        if !full_batch {
            order.shuffle(&mut rng);
        }
        let mut weighted_loss = 0.0;
        for chunk in order.chunks(batch_size) {
            let (value, mut grads) = if full_batch {
                let loss = make_loss(chunk);
                net_backward(&params, spec, x, &loss)?
            } else {
                let xb = x.gather(chunk);
                let loss = make_loss(chunk);
                net_backward(&params, spec, &xb, &loss)?
            };
            if opts.weight_decay > 0.0 {
                for (gl, pl) in grads.layers.iter_mut().zip(params.layers.iter()) {
                    for (g, w) in gl.weights.iter_mut().zip(pl.weights.iter()) {
                        *g += opts.weight_decay * w;
                    }
                }
            }
            adam_step(&mut state, &mut params, &grads)?;
            weighted_loss += value * chunk.len() as f64;
        }
        epoch_losses.push(weighted_loss / n as f64);
    }

    if !params.is_finite() {
        return Err(Error::NonFinite(
            "training diverged: parameters contain NaN or infinity".into(),
        ));
    }
    Ok(TrainOutcome {
        params,
        epoch_losses,
    })
}
