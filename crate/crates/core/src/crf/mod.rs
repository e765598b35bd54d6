//! Linear-chain conditional random field over the attribute tag set.
//!
//! A labeling `y` of a sentence `x` scores
//! `start[y0] + Σ emission(x, i)[yi] + Σ transition[y(i-1)][yi] + stop[y(n-1)]`
//! and `p(y | x) = exp(score − log Z)`. Emission scores come from the
//! [`crate::emission`] module; everything here works for any label count so
//! small instances can be checked against brute-force enumeration.

mod gradient;
mod inference;
mod model;
mod spans;
mod train;

use ndarray::Array2;

use crate::corpus::LabeledSequence;
use crate::emission::{
    featurize_sequence, project_embeddings, sparse_emissions, DenseProjection, EmbeddingSource,
    EmissionMatrix, SparseFeatureVector, SparseWeights,
};
use crate::error::{Error, Result};
use crate::tagset::Tag;

pub use gradient::{gradient, log_likelihood, value_and_gradient, EmissionGradient, Gradient};
pub use inference::{
    log_partition, log_sum_exp, marginals, score_sequence, viterbi, Chain, ForwardBackward,
};
pub use model::{deserialize, serialize, train_model, CrfModel, EmissionMode, MODEL_FORMAT_VERSION};
pub use spans::{extract_spans, ExtractedSpan};
pub use train::{mean_ll, train, TrainConfig, TrainingMeta};

/// Emission parameters; the variant fixes how inputs are scored.
#[derive(Clone, Debug, PartialEq)]
pub enum EmissionParams {
    Sparse(SparseWeights),
    Dense(DenseProjection),
}

/// Per-sequence emission input matching an [`EmissionParams`] variant.
#[derive(Clone, Debug, PartialEq)]
pub enum EmissionInput {
    /// One hashed feature vector per token.
    Sparse(Vec<SparseFeatureVector>),
    /// `n × d` token embeddings.
    Dense(Array2<f64>),
}

impl EmissionInput {
    pub fn len(&self) -> usize {
        match self {
            EmissionInput::Sparse(f) => f.len(),
            EmissionInput::Dense(e) => e.nrows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A training sequence: emission input plus gold label indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub input: EmissionInput,
    pub labels: Vec<usize>,
}

/// CRF parameters for an arbitrary number of labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Crf {
    pub chain: Chain,
    pub emission: EmissionParams,
}

/// Decoded labels, their score, and optionally the posterior marginals.
#[derive(Clone, Debug, PartialEq)]
pub struct TagPrediction {
    pub labels: Vec<usize>,
    pub score: f64,
    pub marginals: Option<Array2<f64>>,
}

impl TagPrediction {
    /// Labels as tags; indices outside the tag set map to `NoTag`.
    pub fn tags(&self) -> Vec<Tag> {
        self.labels
            .iter()
            .map(|&i| Tag::from_index(i).unwrap_or(Tag::NoTag))
            .collect()
    }
}

impl Crf {
    pub fn sparse(labels: usize, feature_dim: u32) -> Self {
        Crf {
            chain: Chain::zeros(labels),
            emission: EmissionParams::Sparse(SparseWeights::zeros(feature_dim, labels)),
        }
    }

    pub fn dense(labels: usize, input_dim: usize) -> Self {
        Crf {
            chain: Chain::zeros(labels),
            emission: EmissionParams::Dense(DenseProjection::zeros(input_dim, labels)),
        }
    }

    pub fn num_labels(&self) -> usize {
        self.chain.num_labels()
    }

    pub fn emissions(&self, input: &EmissionInput) -> Result<EmissionMatrix> {
        match (&self.emission, input) {
            (EmissionParams::Sparse(w), EmissionInput::Sparse(f)) => sparse_emissions(w, f),
            (EmissionParams::Dense(p), EmissionInput::Dense(e)) => project_embeddings(p, e.view()),
            _ => Err(Error::invalid("input does not match the model's emission mode")),
        }
    }

    /// Builds the emission input for `seq` in this model's mode. Dense
    /// models need an embedding source.
    pub fn input_for(&self, seq: &LabeledSequence, source: Option<&EmbeddingSource>) -> Result<EmissionInput> {
        match &self.emission {
            EmissionParams::Sparse(w) => Ok(EmissionInput::Sparse(featurize_sequence(seq, w.dim()))),
            EmissionParams::Dense(p) => {
                let source = source.ok_or_else(|| Error::invalid("dense model needs embeddings"))?;
                let e = source.sequence_matrix(seq)?;
                if e.ncols() != p.input_dim() {
                    return Err(Error::Dimension {
                        expected: p.input_dim(),
                        actual: e.ncols(),
                    });
                }
                Ok(EmissionInput::Dense(e))
            }
        }
    }

    /// Viterbi decoding, with marginals when asked.
    pub fn predict(&self, input: &EmissionInput, with_marginals: bool) -> Result<TagPrediction> {
        let em = self.emissions(input)?;
        let (labels, score) = viterbi(em.view(), &self.chain)?;
        let marginals = if with_marginals {
            Some(marginals(em.view(), &self.chain)?)
        } else {
            None
        };
        Ok(TagPrediction {
            labels,
            score,
            marginals,
        })
    }

    /// Squared norm of all parameters, summed in a fixed order.
    pub fn norm_sq(&self) -> f64 {
        let mut s = sum_sq(&self.chain.transitions) + sum_sq(&self.chain.start) + sum_sq(&self.chain.stop);
        s += match &self.emission {
            EmissionParams::Sparse(w) => sum_sq(w.rows().values().flatten()),
            EmissionParams::Dense(p) => sum_sq(&p.weights) + sum_sq(&p.bias),
        };
        s
    }

    pub fn is_finite(&self) -> bool {
        let chain = self.chain.transitions.iter().chain(&self.chain.start).chain(&self.chain.stop);
        let ok = chain.clone().all(|v| v.is_finite());
        ok && match &self.emission {
            EmissionParams::Sparse(w) => w.rows().values().flatten().all(|v| v.is_finite()),
            EmissionParams::Dense(p) => p.weights.iter().chain(&p.bias).all(|v| v.is_finite()),
        }
    }
}

fn sum_sq<'a>(values: impl IntoIterator<Item = &'a f64>) -> f64 {
    values.into_iter().map(|v| v * v).sum()
}
