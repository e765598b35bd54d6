//! The eight-tag model: training entry point and the versioned model file.
//!
//! Model file layout (little-endian):
//!
//! ```text
//! "LXCRF" | version u16 | mode u8 (0 sparse, 1 dense)
//! tag_count u8 | tag_count × (name_len u8 | name)
//! labels u32
//! sparse: feature_dim u32 | row_count u64      dense: input_dim u32
//! transitions L×L f64 | start L f64 | stop L f64
//! sparse: row_count × (feature u32 | L f64)     dense: d×L f64 | bias L f64
//! seed u64 | epochs_run u32 | final_objective f64
//! crc32 u32 over every preceding byte
//! ```

use ndarray::{Array1, Array2};

use super::train::{train, TrainConfig, TrainingMeta};
use super::{Crf, EmissionInput, EmissionParams, Instance, TagPrediction};
use crate::corpus::LabeledSequence;
use crate::emission::{DenseProjection, EmbeddingSource, SparseWeights};
use crate::error::{Error, Result};
use crate::tagset::{TagSet, NUM_TAGS};

const MAGIC: &[u8; 5] = b"LXCRF";
pub const MODEL_FORMAT_VERSION: u16 = 1;

/// How token emissions are produced during training.
#[derive(Clone, Copy, Debug)]
pub enum EmissionMode<'a> {
    /// Hashed sparse features in a space of the given size.
    Sparse { feature_dim: u32 },
    /// Token embeddings from a source, linearly projected.
    Dense(&'a EmbeddingSource),
}

/// A trained CRF over the attribute tag set.
#[derive(Clone, Debug, PartialEq)]
pub struct CrfModel {
    pub tagset: TagSet,
    pub crf: Crf,
    pub meta: TrainingMeta,
}

impl CrfModel {
    pub fn new(crf: Crf, meta: TrainingMeta) -> Result<Self> {
        if crf.num_labels() != NUM_TAGS {
            return Err(Error::Dimension {
                expected: NUM_TAGS,
                actual: crf.num_labels(),
            });
        }
        if !crf.is_finite() {
            return Err(Error::NonFinite("model parameters".into()));
        }
        Ok(CrfModel {
            tagset: TagSet::default(),
            crf,
            meta,
        })
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.crf.emission, EmissionParams::Dense(_))
    }

    /// Decodes one sentence.
    pub fn tag(&self, seq: &LabeledSequence, source: Option<&EmbeddingSource>) -> Result<TagPrediction> {
        let input = self.crf.input_for(seq, source)?;
        self.crf.predict(&input, false)
    }
}

fn instance(crf: &Crf, seq: &LabeledSequence, source: Option<&EmbeddingSource>) -> Result<Instance> {
    Ok(Instance {
        input: crf.input_for(seq, source)?,
        labels: seq.label_indices(),
    })
}

/// Trains an eight-tag model from projected sentences.
///
/// Unless `config.include_untagged` is set, only sentences containing at
/// least one attribute token enter training. The dev set is used as given.
pub fn train_model(
    train_seqs: &[LabeledSequence],
    dev_seqs: &[LabeledSequence],
    mode: EmissionMode<'_>,
    config: &TrainConfig,
) -> Result<CrfModel> {
    let (init, source) = match mode {
        EmissionMode::Sparse { feature_dim } => {
            if feature_dim == 0 {
                return Err(Error::invalid("feature dimension must be positive"));
            }
            (Crf::sparse(NUM_TAGS, feature_dim), None)
        }
        EmissionMode::Dense(src) => (Crf::dense(NUM_TAGS, src.dim()), Some(src)),
    };
    let train_set: Vec<Instance> = train_seqs
        .iter()
        .filter(|s| !s.is_empty() && (config.include_untagged || s.is_highlighted()))
        .map(|s| instance(&init, s, source))
        .collect::<Result<_>>()?;
    if train_set.is_empty() {
        return Err(Error::invalid("no training sentences (none contain an attribute tag)"));
    }
    let dev_set: Vec<Instance> = dev_seqs
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| instance(&init, s, source))
        .collect::<Result<_>>()?;
    let (crf, meta) = train(&train_set, &dev_set, init, config)?;
    CrfModel::new(crf, meta)
}

fn put_f64s<'a>(buf: &mut Vec<u8>, values: impl IntoIterator<Item = &'a f64>) {
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

/// Encodes a model in the versioned binary format.
pub fn serialize(model: &CrfModel) -> Vec<u8> {
    let crf = &model.crf;
    let l = crf.num_labels();
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
    buf.push(match crf.emission {
        EmissionParams::Sparse(_) => 0,
        EmissionParams::Dense(_) => 1,
    });
    buf.push(model.tagset.len() as u8);
    for name in model.tagset.names() {
        buf.push(name.len() as u8);
        buf.extend_from_slice(name.as_bytes());
    }
    buf.extend_from_slice(&(l as u32).to_le_bytes());
    match &crf.emission {
        EmissionParams::Sparse(w) => {
            buf.extend_from_slice(&w.dim().to_le_bytes());
            buf.extend_from_slice(&(w.rows().len() as u64).to_le_bytes());
        }
        EmissionParams::Dense(p) => buf.extend_from_slice(&(p.input_dim() as u32).to_le_bytes()),
    }
    put_f64s(&mut buf, &crf.chain.transitions);
    put_f64s(&mut buf, &crf.chain.start);
    put_f64s(&mut buf, &crf.chain.stop);
    match &crf.emission {
        EmissionParams::Sparse(w) => {
            for (f, row) in w.rows() {
                buf.extend_from_slice(&f.to_le_bytes());
                put_f64s(&mut buf, row);
            }
        }
        EmissionParams::Dense(p) => {
            put_f64s(&mut buf, &p.weights);
            put_f64s(&mut buf, &p.bias);
        }
    }
    buf.extend_from_slice(&model.meta.seed.to_le_bytes());
    buf.extend_from_slice(&model.meta.epochs_run.to_le_bytes());
    buf.extend_from_slice(&model.meta.final_objective.to_le_bytes());
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        match self.pos.checked_add(n) {
            Some(end) if end <= self.bytes.len() => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            _ => Err(Error::Truncated(format!("model file ends inside {what}"))),
        }
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let len = n.checked_mul(8).ok_or_else(|| Error::invalid(format!("{what} too large")))?;
        let raw = self.take(len, what)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

/// Decodes a model file. Checks, in order: magic, version, structure
/// (truncation), checksum, and parameter validity.
pub fn deserialize(bytes: &[u8]) -> Result<CrfModel> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len(), "magic").ok() != Some(MAGIC.as_slice()) {
        return Err(Error::BadMagic("model"));
    }
    let version = u16::from_le_bytes(r.take(2, "version")?.try_into().unwrap());
    if version != MODEL_FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let mode = r.u8("mode")?;
    let tag_count = r.u8("tag set")? as usize;
    let mut names = Vec::with_capacity(tag_count);
    for _ in 0..tag_count {
        let len = r.u8("tag name")? as usize;
        let raw = r.take(len, "tag name")?;
        names.push(String::from_utf8_lossy(raw).into_owned());
    }
    let l = r.u32("label count")? as usize;
    if l != tag_count {
        return Err(Error::Dimension {
            expected: tag_count,
            actual: l,
        });
    }
    let header = match mode {
        0 => (r.u32("feature dimension")?, r.u64("row count")?),
        1 => (r.u32("input dimension")?, 0),
        m => return Err(Error::invalid(format!("unknown emission mode byte {m}"))),
    };
    let transitions = r.f64s(l * l, "transitions")?;
    let start = r.f64s(l, "start scores")?;
    let stop = r.f64s(l, "stop scores")?;
    let emission = if mode == 0 {
        let (dim, rows) = header;
        let mut w = SparseWeights::zeros(dim, l);
        for _ in 0..rows {
            let f = r.u32("sparse row index")?;
            let values = r.f64s(l, "sparse row")?;
            if f >= dim {
                return Err(Error::invalid(format!("sparse row {f} outside dimension {dim}")));
            }
            w.row_mut(f).copy_from_slice(&values);
        }
        EmissionParams::Sparse(w)
    } else {
        let d = header.0 as usize;
        let weights = r.f64s(d * l, "projection")?;
        let bias = r.f64s(l, "bias")?;
        EmissionParams::Dense(DenseProjection {
            weights: Array2::from_shape_vec((d, l), weights).expect("length checked"),
            bias: Array1::from(bias),
        })
    };
    let seed = r.u64("seed")?;
    let epochs_run = r.u32("epochs")?;
    let final_objective = f64::from_le_bytes(r.take(8, "objective")?.try_into().unwrap());
    let body_end = r.pos;
    let stored = r.u32("checksum")?;
    if r.pos != bytes.len() {
        return Err(Error::invalid(format!("{} trailing bytes after checksum", bytes.len() - r.pos)));
    }
    let computed = crc32fast::hash(&bytes[..body_end]);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }

    let tagset = TagSet::from_names(&names)?;
    let crf = Crf {
        chain: super::Chain {
            transitions: Array2::from_shape_vec((l, l), transitions).expect("length checked"),
            start: Array1::from(start),
            stop: Array1::from(stop),
        },
        emission,
    };
    let mut model = CrfModel::new(
        crf,
        TrainingMeta {
            seed,
            epochs_run,
            final_objective,
        },
    )?;
    model.tagset = tagset;
    Ok(model)
}

impl CrfModel {
    /// Emission input for a sentence, for callers that batch decoding.
    pub fn input_for(&self, seq: &LabeledSequence, source: Option<&EmbeddingSource>) -> Result<EmissionInput> {
        self.crf.input_for(seq, source)
    }
}
