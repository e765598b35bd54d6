//! External token embeddings and their file format.
//!
//! Binary layout (all integers little-endian):
//!
//! ```text
//! "LXEM" | version u16 | dim u32 | count u64 | provenance_len u32 | provenance
//! count × ( doc_id_len u32 | doc_id | sentence u32 | token u32 | dim × f32 )
//! ```
//!
//! A JSON-lines variant is accepted when the stream starts with `{`: a
//! header object `{"magic","version","dim","count","provenance"}` followed
//! by one `{"doc_id","sentence","token","vector"}` object per line.

use std::fmt;
use std::io::{Read, Write};

use indexmap::IndexMap;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::fnv1a64;
use crate::corpus::LabeledSequence;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"LXEM";
pub const EMBEDDING_FORMAT_VERSION: u16 = 1;

/// Position of a whitespace token inside a corpus.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TokenKey {
    pub doc_id: String,
    pub sentence: u32,
    pub token: u32,
}

impl TokenKey {
    pub fn new(doc_id: impl Into<String>, sentence: usize, token: usize) -> Self {
        TokenKey {
            doc_id: doc_id.into(),
            sentence: sentence as u32,
            token: token as u32,
        }
    }
}

impl fmt::Display for TokenKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.doc_id, self.sentence, self.token)
    }
}

/// Per-token vectors of a fixed dimension, in insertion order.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    provenance: String,
    entries: IndexMap<TokenKey, Vec<f32>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize, provenance: impl Into<String>) -> Self {
        EmbeddingTable {
            dim,
            provenance: provenance.into(),
            entries: IndexMap::new(),
        }
    }

    pub fn insert(&mut self, key: TokenKey, vector: Vec<f32>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("embedding for token {key}")));
        }
        if self.entries.contains_key(&key) {
            return Err(Error::invalid(format!("duplicate embedding key {key}")));
        }
        self.entries.insert(key, vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &TokenKey) -> Option<&[f32]> {
        self.entries.get(key).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TokenKey, &[f32])> {
        self.entries.iter().map(|(k, v)| (k, v.as_slice()))
    }

    /// `n × d` matrix of the embeddings of every token in `seq`.
    pub fn sequence_matrix(&self, seq: &LabeledSequence) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((seq.len(), self.dim));
        for i in 0..seq.len() {
            let key = TokenKey::new(seq.doc_id.clone(), seq.sentence_index, i);
            let v = self
                .get(&key)
                .ok_or_else(|| Error::MissingEmbedding(format!("token {key}")))?;
            for (o, x) in out.row_mut(i).iter_mut().zip(v) {
                *o = f64::from(*x);
            }
        }
        Ok(out)
    }
}

/// Deterministic pseudo-random vectors keyed by lowercased surface.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashedEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl HashedEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        HashedEmbedder { dim, seed }
    }

    /// Coordinates are uniform in `[-1, 1)`, drawn from a generator seeded
    /// by the FNV-1a hash of the lowercased surface mixed with `seed`.
    pub fn embed(&self, surface: &str) -> Vec<f64> {
        let h = fnv1a64(surface.to_lowercase().as_bytes()) ^ self.seed.rotate_left(17);
        let mut rng = ChaCha8Rng::seed_from_u64(h);
        (0..self.dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    pub fn provenance(&self) -> String {
        format!("hashed-fnv1a-chacha8:dim={}:seed={}", self.dim, self.seed)
    }
}

/// Where token vectors come from: a loaded table, the hashed fallback, or a
/// table that falls back to hashing for tokens it does not cover.
#[derive(Clone, Debug)]
pub struct EmbeddingSource {
    table: Option<EmbeddingTable>,
    fallback: Option<HashedEmbedder>,
}

impl EmbeddingSource {
    pub fn table(table: EmbeddingTable) -> Self {
        EmbeddingSource {
            table: Some(table),
            fallback: None,
        }
    }

    pub fn hashed(embedder: HashedEmbedder) -> Self {
        EmbeddingSource {
            table: None,
            fallback: Some(embedder),
        }
    }

    pub fn with_fallback(table: EmbeddingTable, embedder: HashedEmbedder) -> Result<Self> {
        if table.dim() != embedder.dim {
            return Err(Error::Dimension {
                expected: table.dim(),
                actual: embedder.dim,
            });
        }
        Ok(EmbeddingSource {
            table: Some(table),
            fallback: Some(embedder),
        })
    }

    pub fn dim(&self) -> usize {
        match (&self.table, &self.fallback) {
            (Some(t), _) => t.dim(),
            (None, Some(h)) => h.dim,
            (None, None) => 0,
        }
    }

    pub fn provenance(&self) -> String {
        match (&self.table, &self.fallback) {
            (Some(t), Some(h)) => format!("{}+{}", t.provenance(), h.provenance()),
            (Some(t), None) => t.provenance().to_string(),
            (None, Some(h)) => h.provenance(),
            (None, None) => String::new(),
        }
    }

    /// Vector for one token. `key` is `None` for tokens that do not come
    /// from the corpus, such as appended tag names.
    pub fn lookup(&self, key: Option<&TokenKey>, surface: &str) -> Result<Vec<f64>> {
        if let (Some(table), Some(key)) = (&self.table, key) {
            if let Some(v) = table.get(key) {
                return Ok(v.iter().map(|&x| f64::from(x)).collect());
            }
        }
        match &self.fallback {
            Some(h) => Ok(h.embed(surface)),
            None => Err(Error::MissingEmbedding(match key {
                Some(k) => format!("token `{surface}` at {k}"),
                None => format!("token `{surface}`"),
            })),
        }
    }

    /// `n × d` matrix for the tokens of `seq`.
    pub fn sequence_matrix(&self, seq: &LabeledSequence) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((seq.len(), self.dim()));
        for (i, tok) in seq.tokens.iter().enumerate() {
            let key = TokenKey::new(seq.doc_id.clone(), seq.sentence_index, i);
            let v = self.lookup(Some(&key), &tok.surface)?;
            out.row_mut(i).iter_mut().zip(v).for_each(|(o, x)| *o = x);
        }
        Ok(out)
    }
}

/// Serializes a table in the binary format.
pub fn write_embeddings<W: Write>(table: &EmbeddingTable, mut out: W) -> Result<()> {
    let mut buf = Vec::with_capacity(32 + table.len() * (16 + 4 * table.dim));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&EMBEDDING_FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(table.dim as u32).to_le_bytes());
    buf.extend_from_slice(&(table.len() as u64).to_le_bytes());
    buf.extend_from_slice(&(table.provenance.len() as u32).to_le_bytes());
    buf.extend_from_slice(table.provenance.as_bytes());
    for (key, v) in &table.entries {
        buf.extend_from_slice(&(key.doc_id.len() as u32).to_le_bytes());
        buf.extend_from_slice(key.doc_id.as_bytes());
        buf.extend_from_slice(&key.sentence.to_le_bytes());
        buf.extend_from_slice(&key.token.to_le_bytes());
        for x in v {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct JsonHeader {
    magic: String,
    version: u16,
    dim: usize,
    count: u64,
    provenance: String,
}

#[derive(Serialize, Deserialize)]
struct JsonEntry {
    doc_id: String,
    sentence: u32,
    token: u32,
    vector: Vec<f32>,
}

/// Serializes a table in the JSON-lines debug format.
pub fn write_embeddings_jsonl<W: Write>(table: &EmbeddingTable, mut out: W) -> Result<()> {
    let header = JsonHeader {
        magic: "LXEM".into(),
        version: EMBEDDING_FORMAT_VERSION,
        dim: table.dim,
        count: table.len() as u64,
        provenance: table.provenance.clone(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for (key, v) in &table.entries {
        let entry = JsonEntry {
            doc_id: key.doc_id.clone(),
            sentence: key.sentence,
            token: key.token,
            vector: v.clone(),
        };
        serde_json::to_writer(&mut out, &entry)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads a table in either the binary or the JSON-lines format.
pub fn load_embeddings<R: Read>(mut input: R) -> Result<EmbeddingTable> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.first() == Some(&b'{') {
        load_jsonl(&bytes)
    } else {
        load_binary(&bytes)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                Error::Truncated(format!("payload ends before {what} at byte {}", self.pos))
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let len = self.u32(what)? as usize;
        let raw = self.take(len, what)?;
        String::from_utf8(raw.to_vec()).map_err(|_| Error::invalid(format!("{what} is not UTF-8")))
    }
}

fn load_binary(bytes: &[u8]) -> Result<EmbeddingTable> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4, "magic").ok() != Some(MAGIC.as_slice()) {
        return Err(Error::BadMagic("embedding"));
    }
    let version = cur.u16("version")?;
    if version != EMBEDDING_FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: EMBEDDING_FORMAT_VERSION,
        });
    }
    let dim = cur.u32("dimension")? as usize;
    let count = cur.u64("entry count")?;
    let provenance = cur.string("provenance")?;
    let mut table = EmbeddingTable::new(dim, provenance);
    for _ in 0..count {
        let doc_id = cur.string("doc id")?;
        let sentence = cur.u32("sentence index")?;
        let token = cur.u32("token index")?;
        let key = TokenKey {
            doc_id,
            sentence,
            token,
        };
        let raw = cur.take(4 * dim, "vector")?;
        let vector = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        table.insert(key, vector)?;
    }
    if cur.pos != bytes.len() {
        return Err(Error::invalid(format!(
            "header declares {count} entries but {} trailing bytes remain",
            bytes.len() - cur.pos
        )));
    }
    Ok(table)
}

fn load_jsonl(bytes: &[u8]) -> Result<EmbeddingTable> {
    let text = std::str::from_utf8(bytes).map_err(|_| Error::invalid("embedding file is not UTF-8"))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or_else(|| Error::Truncated("missing header".into()))?;
    let header: JsonHeader = serde_json::from_str(first).map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if header.magic != "LXEM" {
        return Err(Error::BadMagic("embedding"));
    }
    if header.version != EMBEDDING_FORMAT_VERSION {
        return Err(Error::Version {
            found: header.version,
            expected: EMBEDDING_FORMAT_VERSION,
        });
    }
    let mut table = EmbeddingTable::new(header.dim, header.provenance);
    for (i, line) in lines {
        let e: JsonEntry = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        let key = TokenKey {
            doc_id: e.doc_id,
            sentence: e.sentence,
            token: e.token,
        };
        table.insert(key, e.vector)?;
    }
    if table.len() as u64 != header.count {
        return Err(Error::Truncated(format!(
            "header declares {} entries, found {}",
            header.count,
            table.len()
        )));
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small_table() -> EmbeddingTable {
        let mut t = EmbeddingTable::new(4, "test-encoder:mean-subwords");
        t.insert(TokenKey::new("d1", 0, 0), vec![0.5, -1.25, 3.0, 1e-7]).unwrap();
        t.insert(TokenKey::new("d1", 0, 1), vec![f32::MAX, f32::MIN_POSITIVE, -0.0, 2.0]).unwrap();
        t
    }

    fn to_bytes(t: &EmbeddingTable) -> Vec<u8> {
        let mut buf = Vec::new();
        write_embeddings(t, &mut buf).unwrap();
        buf
    }

    #[test]
    fn binary_round_trip() {
        let t = small_table();
        let bytes = to_bytes(&t);
        assert_eq!(&bytes[..4], b"LXEM");
        let back = load_embeddings(bytes.as_slice()).unwrap();
        assert_eq!(back, t);
        assert_eq!(to_bytes(&back), bytes);
    }

    #[test]
    fn jsonl_round_trip() {
        let t = small_table();
        let mut buf = Vec::new();
        write_embeddings_jsonl(&t, &mut buf).unwrap();
        let back = load_embeddings(buf.as_slice()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn truncated_payload() {
        let bytes = to_bytes(&small_table());
        let err = load_embeddings(&bytes[..bytes.len() - 3]).unwrap_err();
        assert!(matches!(err, Error::Truncated(_)), "{err}");
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(load_embeddings(extra.as_slice()).is_err());
    }

    #[test]
    fn nan_is_rejected_with_key() {
        let mut bytes = to_bytes(&small_table());
        let n = bytes.len();
        bytes[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
        let err = load_embeddings(bytes.as_slice()).unwrap_err();
        assert!(err.to_string().contains("(d1, 0, 1)"), "{err}");
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let mut t = small_table();
        assert!(t.insert(TokenKey::new("d1", 0, 0), vec![0.0; 4]).is_err());
        let mut bytes = to_bytes(&small_table());
        // rewrite the second key's token index to collide with the first
        let second_token = bytes.len() - 16 - 4;
        bytes[second_token..second_token + 4].copy_from_slice(&0u32.to_le_bytes());
        assert!(load_embeddings(bytes.as_slice()).unwrap_err().to_string().contains("duplicate"));
    }

    #[test]
    fn version_and_magic_are_checked() {
        let mut bytes = to_bytes(&small_table());
        bytes[4] = 9;
        assert!(matches!(load_embeddings(bytes.as_slice()), Err(Error::Version { found: 9, .. })));
        assert!(matches!(load_embeddings(&b"XXXX"[..]), Err(Error::BadMagic(_))));
    }

    #[test]
    fn missing_token_is_named() {
        let t = small_table();
        let seq = LabeledSequence::from_surfaces("d1", 0, &["a", "b", "c"], vec![crate::Tag::NoTag; 3]);
        let err = t.sequence_matrix(&seq).unwrap_err();
        assert!(err.to_string().contains("(d1, 0, 2)"), "{err}");
    }

    #[test]
    fn hashed_fallback_is_deterministic_and_case_insensitive() {
        let h = HashedEmbedder::new(16, 7);
        assert_eq!(h.embed("Murder"), h.embed("murder"));
        assert_ne!(h.embed("murder"), h.embed("theft"));
        assert_ne!(h.embed("murder"), HashedEmbedder::new(16, 8).embed("murder"));
        assert!(h.embed("x").iter().all(|v| (-1.0..1.0).contains(v)));

        let src = EmbeddingSource::with_fallback(small_table(), HashedEmbedder::new(4, 1)).unwrap();
        assert_eq!(src.lookup(Some(&TokenKey::new("d1", 0, 0)), "zz").unwrap()[0], 0.5);
        assert_eq!(src.lookup(None, "Homicide").unwrap(), HashedEmbedder::new(4, 1).embed("Homicide"));
        let strict = EmbeddingSource::table(small_table());
        assert!(strict.lookup(None, "Homicide").is_err());
    }

    proptest! {
        #[test]
        fn arbitrary_tables_round_trip_bit_exact(
            rows in proptest::collection::vec(proptest::collection::vec(-1e30f32..1e30, 3), 0..12)
        ) {
            let mut t = EmbeddingTable::new(3, "p");
            for (i, r) in rows.into_iter().enumerate() {
                t.insert(TokenKey::new(format!("doc{}", i % 3), i / 3, i), r).unwrap();
            }
            let bytes = to_bytes(&t);
            let back = load_embeddings(bytes.as_slice()).unwrap();
            for ((ka, va), (kb, vb)) in t.iter().zip(back.iter()) {
                prop_assert_eq!(ka, kb);
                let a: Vec<u32> = va.iter().map(|x| x.to_bits()).collect();
                let b: Vec<u32> = vb.iter().map(|x| x.to_bits()).collect();
                prop_assert_eq!(a, b);
            }
            prop_assert_eq!(back.len(), t.len());
        }
    }
}
