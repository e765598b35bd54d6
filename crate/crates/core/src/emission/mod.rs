//! Per-token, per-tag emission scores.
//!
//! Scores come either from hashed sparse features times a weight matrix or
//! from externally computed token embeddings times a dense projection plus
//! bias. Scores are unbounded reals; normalization happens only inside the
//! CRF partition function.

mod embeddings;
mod features;

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, ArrayView2};

use crate::corpus::LabeledSequence;
use crate::error::{Error, Result};

pub use embeddings::{
    load_embeddings, write_embeddings, write_embeddings_jsonl, EmbeddingSource, EmbeddingTable,
    HashedEmbedder, TokenKey, EMBEDDING_FORMAT_VERSION,
};
pub use features::{
    feature_strings, featurize, featurize_sequence, featurize_surfaces, fnv1a64, hash_feature,
    word_shape, SparseFeatureVector, DEFAULT_FEATURE_DIM,
};

/// An `n × L` matrix of finite emission scores.
#[derive(Clone, Debug, PartialEq)]
pub struct EmissionMatrix(Array2<f64>);

impl EmissionMatrix {
    pub fn new(scores: Array2<f64>) -> Result<Self> {
        if let Some(((i, j), v)) = scores.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite(format!("emission[{i}][{j}] = {v}")));
        }
        Ok(EmissionMatrix(scores))
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    pub fn num_tokens(&self) -> usize {
        self.0.nrows()
    }

    pub fn num_labels(&self) -> usize {
        self.0.ncols()
    }
}

/// Sparse-feature weights: a `D × L` matrix stored by non-zero row.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseWeights {
    dim: u32,
    labels: usize,
    rows: BTreeMap<u32, Vec<f64>>,
}

impl SparseWeights {
    pub fn zeros(dim: u32, labels: usize) -> Self {
        SparseWeights {
            dim,
            labels,
            rows: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn num_labels(&self) -> usize {
        self.labels
    }

    pub fn rows(&self) -> &BTreeMap<u32, Vec<f64>> {
        &self.rows
    }

    pub fn row(&self, feature: u32) -> Option<&[f64]> {
        self.rows.get(&feature).map(Vec::as_slice)
    }

    pub fn get(&self, feature: u32, label: usize) -> f64 {
        self.row(feature).map_or(0.0, |r| r[label])
    }

    pub fn row_mut(&mut self, feature: u32) -> &mut [f64] {
        assert!(feature < self.dim, "feature index out of range");
        let labels = self.labels;
        self.rows.entry(feature).or_insert_with(|| vec![0.0; labels])
    }

    pub fn set(&mut self, feature: u32, label: usize, value: f64) {
        self.row_mut(feature)[label] = value;
    }

    pub(crate) fn rows_mut(&mut self) -> &mut BTreeMap<u32, Vec<f64>> {
        &mut self.rows
    }
}

/// Dense projection `d × L` plus per-tag bias.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseProjection {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseProjection {
    pub fn zeros(dim: usize, labels: usize) -> Self {
        DenseProjection {
            weights: Array2::zeros((dim, labels)),
            bias: Array1::zeros(labels),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn num_labels(&self) -> usize {
        self.bias.len()
    }
}

/// Row `i` is `features[i] · W`.
pub fn sparse_emissions(
    weights: &SparseWeights,
    features: &[SparseFeatureVector],
) -> Result<EmissionMatrix> {
    let mut out = Array2::zeros((features.len(), weights.labels));
    for (i, fv) in features.iter().enumerate() {
        if fv.dim() != weights.dim {
            return Err(Error::Dimension {
                expected: weights.dim as usize,
                actual: fv.dim() as usize,
            });
        }
        let mut row = out.row_mut(i);
        for &(f, v) in fv.entries() {
            if let Some(w) = weights.row(f) {
                for (o, w) in row.iter_mut().zip(w) {
                    *o += v * w;
                }
            }
        }
    }
    EmissionMatrix::new(out)
}

/// Featurizes `seq` and scores it against sparse weights.
pub fn sparse_sequence_emissions(weights: &SparseWeights, seq: &LabeledSequence) -> Result<EmissionMatrix> {
    sparse_emissions(weights, &featurize_sequence(seq, weights.dim))
}

/// Row `i` is `embeddings[i] · P + b` for an `n × d` embedding matrix.
pub fn project_embeddings(
    projection: &DenseProjection,
    embeddings: ArrayView2<'_, f64>,
) -> Result<EmissionMatrix> {
    if embeddings.ncols() != projection.input_dim() {
        return Err(Error::Dimension {
            expected: projection.input_dim(),
            actual: embeddings.ncols(),
        });
    }
    let scores = embeddings.dot(&projection.weights) + &projection.bias;
    EmissionMatrix::new(scores)
}

/// Looks up every token of `seq` in `table` and projects the embeddings.
pub fn dense_emissions(
    projection: &DenseProjection,
    table: &EmbeddingTable,
    seq: &LabeledSequence,
) -> Result<EmissionMatrix> {
    let embeddings = table.sequence_matrix(seq)?;
    project_embeddings(projection, embeddings.view())
}
