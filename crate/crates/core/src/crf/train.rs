//! Mini-batch gradient ascent on the regularized conditional log-likelihood.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gradient::{log_likelihood, value_and_gradient_of, EmissionGradient, Gradient};
use super::{Crf, EmissionParams, Instance};
use crate::error::{Error, Result};

/// Optimizer settings. All randomness comes from `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Initial step size.
    pub learning_rate: f64,
    /// Inverse-time decay: epoch `e` uses `learning_rate / (1 + decay·e)`.
    pub decay: f64,
    /// L2 strength λ on the mean per-sequence log-likelihood.
    pub l2: f64,
    /// Maximum Euclidean norm of a batch gradient.
    pub clip: f64,
    pub seed: u64,
    /// Stop after this many epochs without dev improvement.
    pub patience: Option<usize>,
    /// Keep sentences with no attribute token in the training set.
    pub include_untagged: bool,
}

impl TrainConfig {
    pub fn with_seed(seed: u64) -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 16,
            learning_rate: 0.5,
            decay: 0.05,
            l2: 1e-4,
            clip: 10.0,
            seed,
            patience: None,
            include_untagged: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch size must be positive"));
        }
        positive(self.learning_rate, "learning rate")?;
        positive(self.clip, "clip norm")?;
        if !(self.l2.is_finite() && self.l2 >= 0.0) || !(self.decay.is_finite() && self.decay >= 0.0) {
            return Err(Error::invalid("l2 and decay must be non-negative"));
        }
        if self.patience == Some(0) {
            return Err(Error::invalid("patience must be positive"));
        }
        Ok(())
    }
}

/// What happened during training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs_run: u32,
    /// Regularized mean training log-likelihood of the returned parameters.
    pub final_objective: f64,
}

/// Trains from `init`, returning the parameters with the best mean dev
/// log-likelihood seen (the initial parameters included). Without a dev set
/// the final parameters are returned.
pub fn train(
    train: &[Instance],
    dev: &[Instance],
    init: Crf,
    config: &TrainConfig,
) -> Result<(Crf, TrainingMeta)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if dev.is_empty() && config.patience.is_some() {
        return Err(Error::invalid("early stopping requires a non-empty dev set"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut crf = init;
    let mut best = if dev.is_empty() {
        None
    } else {
        Some((mean_ll(dev, &crf)?, crf.clone()))
    };
    let mut stale = 0;
    let mut epochs_run = 0;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let rate = config.learning_rate / (1.0 + config.decay * epoch as f64);
        let shrink = 1.0 / (1.0 + 2.0 * rate * config.l2);
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let (ll, mut grad) = value_and_gradient_of(chunk.iter().map(|&i| &train[i]), &crf, 0.0)?;
            grad.scale(1.0 / chunk.len() as f64);
            let norm = grad.norm_sq().sqrt();
            if !ll.is_finite() || !norm.is_finite() {
                return Err(Error::Diverged { epoch, batch: b });
            }
            if norm > config.clip {
                grad.scale(config.clip / norm);
            }
            apply_step(&mut crf, &grad, rate, shrink);
        }
        epochs_run = epoch + 1;

        if let Some((best_ll, best_crf)) = best.as_mut() {
            let ll = mean_ll(dev, &crf)?;
            if !ll.is_finite() {
                return Err(Error::Diverged { epoch, batch: 0 });
            }
            if ll > *best_ll {
                *best_ll = ll;
                *best_crf = crf.clone();
                stale = 0;
            } else {
                stale += 1;
                if config.patience.is_some_and(|p| stale >= p) {
                    break;
                }
            }
        }
    }

    let crf = best.map_or(crf, |(_, c)| c);
    let final_objective = mean_ll(train, &crf)? - config.l2 * crf.norm_sq();
    if !final_objective.is_finite() {
        return Err(Error::Diverged {
            epoch: epochs_run,
            batch: 0,
        });
    }
    Ok((
        crf,
        TrainingMeta {
            seed: config.seed,
            epochs_run: epochs_run as u32,
            final_objective,
        },
    ))
}

/// Mean per-sequence log-likelihood, without regularization.
pub fn mean_ll(data: &[Instance], crf: &Crf) -> Result<f64> {
    Ok(log_likelihood(data, crf, 0.0)? / data.len() as f64)
}

/// Proximal L2 step: `θ ← (θ + rate·g) · shrink`.
fn apply_step(crf: &mut Crf, grad: &Gradient, rate: f64, shrink: f64) {
    let chain = &mut crf.chain;
    chain.transitions.scaled_add(rate, &grad.transitions);
    chain.start.scaled_add(rate, &grad.start);
    chain.stop.scaled_add(rate, &grad.stop);
    chain.transitions *= shrink;
    chain.start *= shrink;
    chain.stop *= shrink;
    match (&mut crf.emission, &grad.emission) {
        (EmissionParams::Sparse(w), EmissionGradient::Sparse(rows)) => {
            for (f, g) in rows {
                for (t, g) in w.row_mut(*f).iter_mut().zip(g) {
                    *t += rate * g;
                }
            }
            if shrink != 1.0 {
                w.rows_mut().values_mut().flatten().for_each(|t| *t *= shrink);
            }
        }
        (EmissionParams::Dense(p), EmissionGradient::Dense { weights, bias }) => {
            p.weights.scaled_add(rate, weights);
            p.bias.scaled_add(rate, bias);
            p.weights *= shrink;
            p.bias *= shrink;
        }
        _ => unreachable!("gradient shaped from the same model"),
    }
}
