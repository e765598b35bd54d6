//! Hashed sparse token features.

use crate::corpus::LabeledSequence;

/// Default size of the hashed feature space (2^20).
pub const DEFAULT_FEATURE_DIM: u32 = 1 << 20;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Maps a feature string into `[0, dim)`.
pub fn hash_feature(feature: &str, dim: u32) -> u32 {
    (fnv1a64(feature.as_bytes()) % u64::from(dim)) as u32
}

/// Sparse vector over a hashed feature space. Entries are sorted by index
/// and indices are unique.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseFeatureVector {
    dim: u32,
    entries: Vec<(u32, f64)>,
}

impl SparseFeatureVector {
    /// Builds a vector, summing values of repeated indices.
    ///
    /// # Panics
    ///
    /// If an index is not below `dim`.
    pub fn new(dim: u32, mut entries: Vec<(u32, f64)>) -> Self {
        assert!(entries.iter().all(|&(i, _)| i < dim), "feature index out of range");
        entries.sort_by_key(|&(i, _)| i);
        let mut merged: Vec<(u32, f64)> = Vec::with_capacity(entries.len());
        for (i, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => merged.push((i, v)),
            }
        }
        SparseFeatureVector { dim, entries: merged }
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn contains(&self, index: u32) -> bool {
        self.entries.binary_search_by_key(&index, |&(i, _)| i).is_ok()
    }
}

/// Coarse character-class shape: `X` upper, `x` lower, `d` digit, other
/// characters kept; runs of one class longer than four are cut to four.
pub fn word_shape(surface: &str) -> String {
    let mut shape = String::new();
    let mut last = None;
    let mut run = 0;
    for c in surface.chars() {
        let class = if c.is_uppercase() {
            'X'
        } else if c.is_lowercase() {
            'x'
        } else if c.is_numeric() {
            'd'
        } else {
            c
        };
        if Some(class) == last {
            run += 1;
        } else {
            last = Some(class);
            run = 1;
        }
        if run <= 4 {
            shape.push(class);
        }
    }
    shape
}

/// Feature strings for the token at `position`, before hashing.
pub fn feature_strings<S: AsRef<str>>(surfaces: &[S], position: usize) -> Vec<String> {
    let word = surfaces[position].as_ref();
    let lower = word.to_lowercase();
    let chars: Vec<char> = lower.chars().collect();
    let mut feats = vec![format!("w={lower}"), format!("shape={}", word_shape(word))];
    for k in 1..=chars.len().min(3) {
        feats.push(format!("p{k}={}", chars[..k].iter().collect::<String>()));
        feats.push(format!("s{k}={}", chars[chars.len() - k..].iter().collect::<String>()));
    }
    match position.checked_sub(1) {
        Some(prev) => feats.push(format!("w-1={}", surfaces[prev].as_ref().to_lowercase())),
        None => feats.push("BOS".to_string()),
    }
    if let Some(next) = surfaces.get(position + 1) {
        feats.push(format!("w+1={}", next.as_ref().to_lowercase()));
    }
    feats
}

/// Hashed features of one token; every feature has value 1.
pub fn featurize(seq: &LabeledSequence, position: usize, dim: u32) -> SparseFeatureVector {
    let surfaces: Vec<&str> = seq.surfaces().collect();
    featurize_surfaces(&surfaces, position, dim)
}

pub fn featurize_surfaces<S: AsRef<str>>(surfaces: &[S], position: usize, dim: u32) -> SparseFeatureVector {
    let entries = feature_strings(surfaces, position)
        .iter()
        .map(|f| (hash_feature(f, dim), 1.0))
        .collect();
    SparseFeatureVector::new(dim, entries)
}

/// Features for every token of a sequence.
pub fn featurize_sequence(seq: &LabeledSequence, dim: u32) -> Vec<SparseFeatureVector> {
    let surfaces: Vec<&str> = seq.surfaces().collect();
    (0..surfaces.len())
        .map(|i| featurize_surfaces(&surfaces, i, dim))
        .collect()
}
