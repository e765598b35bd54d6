//! Conditional log-likelihood and its analytic gradient.
//!
//! The gradient of each sequence's log-likelihood is the empirical count of
//! every feature minus its expectation under the model, with expectations
//! taken from forward-backward marginals.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};

use super::inference::{score_sequence, ForwardBackward};
use super::{Crf, EmissionInput, EmissionParams, Instance};
use crate::error::{Error, Result};

/// Gradient with the same shape as a [`Crf`]'s parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub transitions: Array2<f64>,
    pub start: Array1<f64>,
    pub stop: Array1<f64>,
    pub emission: EmissionGradient,
}

#[derive(Clone, Debug, PartialEq)]
pub enum EmissionGradient {
    /// Non-zero rows of the `D × L` sparse weight gradient.
    Sparse(BTreeMap<u32, Vec<f64>>),
    Dense { weights: Array2<f64>, bias: Array1<f64> },
}

impl Gradient {
    fn zeros_like(crf: &Crf) -> Self {
        let l = crf.num_labels();
        let emission = match &crf.emission {
            EmissionParams::Sparse(_) => EmissionGradient::Sparse(BTreeMap::new()),
            EmissionParams::Dense(p) => EmissionGradient::Dense {
                weights: Array2::zeros(p.weights.dim()),
                bias: Array1::zeros(l),
            },
        };
        Gradient {
            transitions: Array2::zeros((l, l)),
            start: Array1::zeros(l),
            stop: Array1::zeros(l),
            emission,
        }
    }

    /// Squared Euclidean norm, summed in a fixed order.
    pub fn norm_sq(&self) -> f64 {
        let mut s = self.transitions.iter().map(|g| g * g).sum::<f64>();
        s += self.start.iter().map(|g| g * g).sum::<f64>();
        s += self.stop.iter().map(|g| g * g).sum::<f64>();
        s + match &self.emission {
            EmissionGradient::Sparse(rows) => rows.values().flatten().map(|g| g * g).sum::<f64>(),
            EmissionGradient::Dense { weights, bias } => {
                weights.iter().map(|g| g * g).sum::<f64>() + bias.iter().map(|g| g * g).sum::<f64>()
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.transitions *= factor;
        self.start *= factor;
        self.stop *= factor;
        match &mut self.emission {
            EmissionGradient::Sparse(rows) => {
                rows.values_mut().flatten().for_each(|g| *g *= factor);
            }
            EmissionGradient::Dense { weights, bias } => {
                *weights *= factor;
                *bias *= factor;
            }
        }
    }

    /// Adds `-2λθ` for every parameter of `crf`.
    fn add_l2(&mut self, crf: &Crf, l2: f64) {
        if l2 == 0.0 {
            return;
        }
        self.transitions.scaled_add(-2.0 * l2, &crf.chain.transitions);
        self.start.scaled_add(-2.0 * l2, &crf.chain.start);
        self.stop.scaled_add(-2.0 * l2, &crf.chain.stop);
        match (&mut self.emission, &crf.emission) {
            (EmissionGradient::Sparse(rows), EmissionParams::Sparse(w)) => {
                for (f, theta) in w.rows() {
                    let g = rows.entry(*f).or_insert_with(|| vec![0.0; theta.len()]);
                    for (g, t) in g.iter_mut().zip(theta) {
                        *g -= 2.0 * l2 * t;
                    }
                }
            }
            (EmissionGradient::Dense { weights, bias }, EmissionParams::Dense(p)) => {
                weights.scaled_add(-2.0 * l2, &p.weights);
                bias.scaled_add(-2.0 * l2, &p.bias);
            }
            _ => unreachable!("gradient shaped from the same model"),
        }
    }
}

/// Adds one sequence's `log p(y | x)` gradient into `grad` and returns
/// `log p(y | x)`.
fn accumulate(crf: &Crf, instance: &Instance, grad: &mut Gradient) -> Result<f64> {
    let em = crf.emissions(&instance.input)?;
    let em = em.view();
    let fb = ForwardBackward::new(em, &crf.chain)?;
    let labels = &instance.labels;
    let ll = score_sequence(em, &crf.chain, labels)? - fb.log_z;

    let n = labels.len();
    let mut delta = fb.marginals();
    delta.mapv_inplace(|p| -p);
    for (i, &y) in labels.iter().enumerate() {
        delta[[i, y]] += 1.0;
    }

    grad.start += &delta.row(0);
    grad.stop += &delta.row(n - 1);
    grad.transitions -= &fb.expected_transitions(em, &crf.chain);
    for w in labels.windows(2) {
        grad.transitions[[w[0], w[1]]] += 1.0;
    }

    match (&mut grad.emission, &instance.input) {
        (EmissionGradient::Sparse(rows), EmissionInput::Sparse(features)) => {
            let l = crf.num_labels();
            for (i, fv) in features.iter().enumerate() {
                for &(f, v) in fv.entries() {
                    let row = rows.entry(f).or_insert_with(|| vec![0.0; l]);
                    for (g, d) in row.iter_mut().zip(delta.row(i)) {
                        *g += v * d;
                    }
                }
            }
        }
        (EmissionGradient::Dense { weights, bias }, EmissionInput::Dense(emb)) => {
            *weights += &emb.t().dot(&delta);
            *bias += &delta.sum_axis(ndarray::Axis(0));
        }
        _ => return Err(Error::invalid("instance input does not match the model's emission mode")),
    }
    Ok(ll)
}

/// `Σ (score − log Z) − λ‖θ‖²` over the batch.
pub fn log_likelihood(batch: &[Instance], crf: &Crf, l2: f64) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let mut total = 0.0;
    for inst in batch {
        let em = crf.emissions(&inst.input)?;
        let fb = ForwardBackward::new(em.view(), &crf.chain)?;
        total += score_sequence(em.view(), &crf.chain, &inst.labels)? - fb.log_z;
    }
    Ok(total - l2 * crf.norm_sq())
}

/// Gradient of [`log_likelihood`] with respect to every parameter.
pub fn gradient(batch: &[Instance], crf: &Crf, l2: f64) -> Result<Gradient> {
    Ok(value_and_gradient(batch, crf, l2)?.1)
}

/// Log-likelihood and gradient from one pass. Sequences are reduced in
/// batch order.
pub fn value_and_gradient(batch: &[Instance], crf: &Crf, l2: f64) -> Result<(f64, Gradient)> {
    value_and_gradient_of(batch, crf, l2)
}

pub(crate) fn value_and_gradient_of<'a>(
    batch: impl IntoIterator<Item = &'a Instance>,
    crf: &Crf,
    l2: f64,
) -> Result<(f64, Gradient)> {
    let mut grad = Gradient::zeros_like(crf);
    let mut ll = 0.0;
    let mut count = 0;
    for inst in batch {
        ll += accumulate(crf, inst, &mut grad)?;
        count += 1;
    }
    if count == 0 {
        return Err(Error::invalid("empty batch"));
    }
    grad.add_l2(crf, l2);
    Ok((ll - l2 * crf.norm_sq(), grad))
}
