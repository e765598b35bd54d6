//! Downstream judgment prediction from documents augmented with extracted
//! attributes.
//!
//! Each document becomes a token list in one of three compositions (plain
//! text, text plus the extracted tag names, text plus the extracted spans),
//! is reduced to the mean embedding of its final 510 tokens, and is
//! classified by L2-regularized logistic regression.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{project_spans, Document, LabeledSequence};
use crate::crf::{extract_spans, CrfModel};
use crate::emission::{EmbeddingSource, TokenKey};
use crate::error::{Error, Result};
use crate::tagset::Tag;

/// Tokens kept from the end of each composed document.
pub const WINDOW: usize = 510;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CompositionMode {
    #[serde(rename = "Text")]
    Text,
    #[serde(rename = "Text+Tag")]
    TextPlusTag,
    #[serde(rename = "Text+Span")]
    TextPlusSpan,
}

impl CompositionMode {
    pub const ALL: [CompositionMode; 3] = [
        CompositionMode::Text,
        CompositionMode::TextPlusTag,
        CompositionMode::TextPlusSpan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CompositionMode::Text => "Text",
            CompositionMode::TextPlusTag => "Text+Tag",
            CompositionMode::TextPlusSpan => "Text+Span",
        }
    }
}

impl fmt::Display for CompositionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CompositionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s.chars().filter(|c| !c.is_whitespace() && *c != '_' && *c != '-').collect();
        match norm.to_lowercase().as_str() {
            "text" => Ok(CompositionMode::Text),
            "text+tag" | "textplustag" => Ok(CompositionMode::TextPlusTag),
            "text+span" | "textplusspan" => Ok(CompositionMode::TextPlusSpan),
            _ => Err(Error::invalid(format!("unknown composition mode `{s}`"))),
        }
    }
}

/// A token of a composed document. Appended tag names carry no key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComposedToken {
    pub surface: String,
    pub key: Option<TokenKey>,
}

impl ComposedToken {
    pub fn pseudo(surface: impl Into<String>) -> Self {
        ComposedToken {
            surface: surface.into(),
            key: None,
        }
    }
}

/// A predicted span with the document tokens it covers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DocumentSpan {
    pub tag: Tag,
    pub tokens: Vec<ComposedToken>,
}

fn sentence_tokens(seq: &LabeledSequence) -> impl Iterator<Item = ComposedToken> + '_ {
    seq.tokens.iter().enumerate().map(|(i, t)| ComposedToken {
        surface: t.surface.clone(),
        key: Some(TokenKey::new(seq.doc_id.clone(), seq.sentence_index, i)),
    })
}

/// All tokens of a document's sentences, in order.
pub fn document_tokens(sentences: &[LabeledSequence]) -> Vec<ComposedToken> {
    sentences.iter().flat_map(sentence_tokens).collect()
}

/// Spans extracted from per-sentence predictions, in document order.
pub fn document_spans(sentences: &[LabeledSequence], predicted: &[Vec<Tag>]) -> Result<Vec<DocumentSpan>> {
    if sentences.len() != predicted.len() {
        return Err(Error::Dimension {
            expected: sentences.len(),
            actual: predicted.len(),
        });
    }
    let mut out = Vec::new();
    for (seq, labels) in sentences.iter().zip(predicted) {
        let toks: Vec<ComposedToken> = sentence_tokens(seq).collect();
        for span in extract_spans(&seq.tokens, labels)? {
            out.push(DocumentSpan {
                tag: span.tag,
                tokens: toks[span.start..span.end].to_vec(),
            });
        }
    }
    Ok(out)
}

/// Builds the token list for one composition mode.
pub fn compose_input(
    tokens: &[ComposedToken],
    mode: CompositionMode,
    spans: &[DocumentSpan],
) -> Vec<ComposedToken> {
    let mut out = tokens.to_vec();
    match mode {
        CompositionMode::Text => {}
        CompositionMode::TextPlusTag => {
            let mut present = [false; 8];
            for s in spans {
                present[s.tag.index()] = true;
            }
            out.extend(
                Tag::ALL
                    .into_iter()
                    .filter(|t| present[t.index()])
                    .map(|t| ComposedToken::pseudo(t.name())),
            );
        }
        CompositionMode::TextPlusSpan => {
            for s in spans {
                out.push(ComposedToken::pseudo(s.tag.name()));
                out.extend(s.tokens.iter().cloned());
            }
        }
    }
    out
}

/// Mean embedding of the final `min(510, n)` tokens.
pub fn document_vector(tokens: &[ComposedToken], source: &EmbeddingSource) -> Result<Vec<f64>> {
    if tokens.is_empty() {
        return Err(Error::invalid("cannot embed an empty document"));
    }
    let window = &tokens[tokens.len().saturating_sub(WINDOW)..];
    let mut sum = vec![0.0; source.dim()];
    for tok in window {
        let v = source.lookup(tok.key.as_ref(), &tok.surface)?;
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
    }
    let n = window.len() as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    if sum.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("document vector".into()));
    }
    Ok(sum)
}

/// A document vector and its binary outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct JudgmentExample {
    pub doc_id: String,
    pub features: Vec<f64>,
    pub label: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogRegConfig {
    pub epochs: usize,
    pub rate: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            epochs: 2000,
            rate: 0.5,
            l2: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRegMeta {
    pub seed: u64,
    pub iterations: usize,
    pub final_loss: f64,
}

/// Binary logistic regression `p = σ(w·x + b)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub meta: LogRegMeta,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Trains with full-batch proximal gradient descent on
/// `mean NLL + λ‖w‖²` (bias unpenalized), returning the loss before every
/// epoch.
///
/// Features are standardized internally; the returned weights and bias act
/// on raw features. Stops when the gradient norm drops below 1e-6.
pub fn train_logreg_traced(examples: &[JudgmentExample], config: &LogRegConfig) -> Result<(LogRegModel, Vec<f64>)> {
    let first = examples.first().ok_or_else(|| Error::invalid("no training examples"))?;
    let d = first.features.len();
    if !(config.rate > 0.0 && config.rate.is_finite()) || !(config.l2 >= 0.0 && config.l2.is_finite()) {
        return Err(Error::invalid("rate must be positive and l2 non-negative"));
    }
    for ex in examples {
        if ex.features.len() != d {
            return Err(Error::Dimension {
                expected: d,
                actual: ex.features.len(),
            });
        }
        if ex.label > 1 {
            return Err(Error::invalid(format!("label {} is not binary", ex.label)));
        }
        if ex.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("features of `{}`", ex.doc_id)));
        }
    }
    let positives = examples.iter().filter(|e| e.label == 1).count();
    if positives == 0 || positives == examples.len() {
        return Err(Error::invalid("training data contains a single class"));
    }

    let n = examples.len() as f64;
    let mut mean = vec![0.0; d];
    for ex in examples {
        mean.iter_mut().zip(&ex.features).for_each(|(m, x)| *m += x / n);
    }
    let mut scale = vec![0.0; d];
    for ex in examples {
        for k in 0..d {
            scale[k] += (ex.features[k] - mean[k]).powi(2) / n;
        }
    }
    scale.iter_mut().for_each(|s| *s = if *s > 1e-24 { s.sqrt() } else { 1.0 });
    let xs: Vec<Vec<f64>> = examples
        .iter()
        .map(|e| (0..d).map(|k| (e.features[k] - mean[k]) / scale[k]).collect())
        .collect();
    let ys: Vec<f64> = examples.iter().map(|e| f64::from(e.label)).collect();

    let loss = |w: &[f64], b: f64| {
        let nll: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| {
                let z = dot(w, x) + b;
                softplus(z) - y * z
            })
            .sum::<f64>()
            / n;
        nll + config.l2 * dot(w, w)
    };

    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut history = Vec::with_capacity(config.epochs + 1);
    let mut iterations = 0;
    let shrink = 1.0 / (1.0 + 2.0 * config.rate * config.l2);
    for _ in 0..config.epochs {
        history.push(loss(&w, b));
        let mut gw = vec![0.0; d];
        let mut gb = 0.0;
        for (x, y) in xs.iter().zip(&ys) {
            let r = sigmoid(dot(&w, x) + b) - y;
            gw.iter_mut().zip(x).for_each(|(g, xi)| *g += r * xi / n);
            gb += r / n;
        }
        let full_norm = gw
            .iter()
            .zip(&w)
            .map(|(g, wi)| (g + 2.0 * config.l2 * wi).powi(2))
            .sum::<f64>()
            + gb * gb;
        if full_norm.sqrt() < 1e-6 {
            break;
        }
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi = (*wi - config.rate * g) * shrink;
        }
        b -= config.rate * gb;
        iterations += 1;
    }
    let final_loss = loss(&w, b);
    history.push(final_loss);
    if !final_loss.is_finite() {
        return Err(Error::Diverged {
            epoch: iterations,
            batch: 0,
        });
    }

    let weights: Vec<f64> = (0..d).map(|k| w[k] / scale[k]).collect();
    let bias = b - (0..d).map(|k| w[k] * mean[k] / scale[k]).sum::<f64>();
    Ok((
        LogRegModel {
            weights,
            bias,
            meta: LogRegMeta {
                seed: config.seed,
                iterations,
                final_loss,
            },
        },
        history,
    ))
}

pub fn train_logreg(examples: &[JudgmentExample], config: &LogRegConfig) -> Result<LogRegModel> {
    Ok(train_logreg_traced(examples, config)?.0)
}

/// Probability of class 1 and the thresholded label (`p ≥ 0.5` → 1).
pub fn predict_logreg(model: &LogRegModel, features: &[f64]) -> Result<(f64, u8)> {
    if features.len() != model.weights.len() {
        return Err(Error::Dimension {
            expected: model.weights.len(),
            actual: features.len(),
        });
    }
    let p = sigmoid(dot(&model.weights, features) + model.bias);
    Ok((p, u8::from(p >= 0.5)))
}

/// Per-class precision and recall plus accuracy. Precision or recall is
/// `None` when its denominator is zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JudgmentMetrics {
    pub class0_precision: Option<f64>,
    pub class0_recall: Option<f64>,
    pub class1_precision: Option<f64>,
    pub class1_recall: Option<f64>,
    pub accuracy: f64,
}

pub fn judgment_metrics(gold: &[u8], predicted: &[u8]) -> Result<JudgmentMetrics> {
    if gold.len() != predicted.len() || gold.is_empty() {
        return Err(Error::Dimension {
            expected: gold.len(),
            actual: predicted.len(),
        });
    }
    let mut m = [[0usize; 2]; 2];
    for (&g, &p) in gold.iter().zip(predicted) {
        if g > 1 || p > 1 {
            return Err(Error::invalid("labels must be 0 or 1"));
        }
        m[g as usize][p as usize] += 1;
    }
    let r = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    Ok(JudgmentMetrics {
        class0_precision: r(m[0][0], m[0][0] + m[1][0]),
        class0_recall: r(m[0][0], m[0][0] + m[0][1]),
        class1_precision: r(m[1][1], m[1][1] + m[0][1]),
        class1_recall: r(m[1][1], m[1][1] + m[1][0]),
        accuracy: (m[0][0] + m[1][1]) as f64 / gold.len() as f64,
    })
}

/// A document ready for composition: tokens, predicted spans, outcome.
#[derive(Clone, Debug)]
pub struct PreparedDocument {
    pub doc_id: String,
    pub tokens: Vec<ComposedToken>,
    pub spans: Vec<DocumentSpan>,
    pub label: u8,
}

/// Splits and tokenizes a labeled document and tags it with `crf`.
pub fn prepare_document(
    doc: &Document,
    crf: &CrfModel,
    crf_embeddings: Option<&EmbeddingSource>,
) -> Result<PreparedDocument> {
    let label = doc
        .judgment
        .ok_or_else(|| Error::invalid(format!("document `{}` has no judgment label", doc.id)))?;
    let sentences = project_spans(doc)?;
    let predicted = sentences
        .iter()
        .map(|s| crf.tag(s, crf_embeddings).map(|p| p.tags()))
        .collect::<Result<Vec<_>>>()?;
    Ok(PreparedDocument {
        doc_id: doc.id.clone(),
        tokens: document_tokens(&sentences),
        spans: document_spans(&sentences, &predicted)?,
        label,
    })
}

pub fn build_examples(
    docs: &[PreparedDocument],
    mode: CompositionMode,
    source: &EmbeddingSource,
) -> Result<Vec<JudgmentExample>> {
    docs.iter()
        .map(|d| {
            let tokens = compose_input(&d.tokens, mode, &d.spans);
            Ok(JudgmentExample {
                doc_id: d.doc_id.clone(),
                features: document_vector(&tokens, source)?,
                label: d.label,
            })
        })
        .collect()
}

/// One result row: embedding provenance, composition mode and metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JudgmentRow {
    pub embedding: String,
    pub mode: CompositionMode,
    #[serde(flatten)]
    pub metrics: JudgmentMetrics,
}

/// Trains and evaluates one classifier per composition mode.
pub fn run_experiment(
    train: &[PreparedDocument],
    test: &[PreparedDocument],
    source: &EmbeddingSource,
    modes: &[CompositionMode],
    config: &LogRegConfig,
) -> Result<Vec<JudgmentRow>> {
    modes
        .iter()
        .map(|&mode| {
            let train_x = build_examples(train, mode, source)?;
            let test_x = build_examples(test, mode, source)?;
            let model = train_logreg(&train_x, config)?;
            let predicted = test_x
                .iter()
                .map(|e| predict_logreg(&model, &e.features).map(|(_, y)| y))
                .collect::<Result<Vec<_>>>()?;
            let gold: Vec<u8> = test_x.iter().map(|e| e.label).collect();
            Ok(JudgmentRow {
                embedding: source.provenance(),
                mode,
                metrics: judgment_metrics(&gold, &predicted)?,
            })
        })
        .collect()
}

/// Table with per-class precision/recall and accuracy, one row per run.
pub fn render_judgment_table(rows: &[JudgmentRow]) -> String {
    let cell = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.2}"));
    let mut out = String::from(
        "Embedding\tInput Format\tClass 0 Precision\tClass 0 Recall\tClass 1 Precision\tClass 1 Recall\tAcc\n",
    );
    for r in rows {
        let m = &r.metrics;
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{:.2}",
            r.embedding,
            r.mode,
            cell(m.class0_precision),
            cell(m.class0_recall),
            cell(m.class1_precision),
            cell(m.class1_recall),
            m.accuracy
        );
    }
    out
}
