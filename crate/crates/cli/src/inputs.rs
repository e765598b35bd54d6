//! Loading corpora, embeddings and models from disk.

use std::fs;
use std::io::BufReader;
use std::path::Path;
use std::str::FromStr;

use lexattr::corpus::{import_conll, parse_annotation_file, project_corpus, Document, LabeledSequence};
use lexattr::crf::{deserialize, CrfModel};
use lexattr::emission::{load_embeddings, EmbeddingSource, HashedEmbedder};
use lexattr::{Error, Result};

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_error(path, e))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| io_error(path, e))
}

fn is_annotation_file(text: &str) -> bool {
    text.trim_start().starts_with('{')
}

/// Annotation JSONL documents.
pub fn load_documents(path: &Path) -> Result<Vec<Document>> {
    let text = read_text(path)?;
    parse_annotation_file(text.as_bytes())
}

/// Sentences from an annotation JSONL file (projected) or a token TSV.
pub fn load_sequences(path: &Path) -> Result<Vec<LabeledSequence>> {
    let text = read_text(path)?;
    if is_annotation_file(&text) {
        project_corpus(&parse_annotation_file(text.as_bytes())?)
    } else {
        import_conll(text.as_bytes())
    }
}

pub fn load_model(path: &Path) -> Result<CrfModel> {
    deserialize(&read_bytes(path)?)
}

/// Where embeddings come from: `hashed:DIM[:SEED]`, a table file, or
/// `FILE,hashed:DIM[:SEED]` for a table with hashed fallback.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmbeddingSpec {
    pub table: Option<String>,
    pub hashed: Option<(usize, u64)>,
}

fn parse_hashed(s: &str) -> Option<std::result::Result<(usize, u64), String>> {
    let rest = s.strip_prefix("hashed:")?;
    let mut parts = rest.split(':');
    let dim = parts.next().and_then(|d| d.parse::<usize>().ok()).filter(|&d| d > 0);
    let seed = match parts.next() {
        None => Some(0),
        Some(s) => s.parse::<u64>().ok(),
    };
    Some(match (dim, seed, parts.next()) {
        (Some(d), Some(s), None) => Ok((d, s)),
        _ => Err(format!("bad hashed embedding spec `{s}`, expected hashed:DIM[:SEED]")),
    })
}

impl FromStr for EmbeddingSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if let Some(h) = parse_hashed(s) {
            return Ok(EmbeddingSpec {
                table: None,
                hashed: Some(h?),
            });
        }
        if let Some((file, tail)) = s.rsplit_once(',') {
            if let Some(h) = parse_hashed(tail) {
                return Ok(EmbeddingSpec {
                    table: Some(file.to_string()),
                    hashed: Some(h?),
                });
            }
        }
        if s.is_empty() {
            return Err("empty embedding spec".into());
        }
        Ok(EmbeddingSpec {
            table: Some(s.to_string()),
            hashed: None,
        })
    }
}

impl std::fmt::Display for EmbeddingSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (&self.table, self.hashed) {
            (Some(t), Some((d, s))) => write!(f, "{t},hashed:{d}:{s}"),
            (Some(t), None) => f.write_str(t),
            (None, Some((d, s))) => write!(f, "hashed:{d}:{s}"),
            (None, None) => Ok(()),
        }
    }
}

impl EmbeddingSpec {
    pub fn table_path(&self) -> Option<&Path> {
        self.table.as_deref().map(Path::new)
    }

    pub fn load(&self) -> Result<EmbeddingSource> {
        let table = match &self.table {
            Some(p) => Some(load_embeddings(BufReader::new(fs::File::open(p).map_err(|e| io_error(Path::new(p), e))?))?),
            None => None,
        };
        let hashed = self.hashed.map(|(d, s)| HashedEmbedder::new(d, s));
        match (table, hashed) {
            (Some(t), Some(h)) => EmbeddingSource::with_fallback(t, h),
            (Some(t), None) => Ok(EmbeddingSource::table(t)),
            (None, Some(h)) => Ok(EmbeddingSource::hashed(h)),
            (None, None) => Err(Error::invalid("empty embedding spec")),
        }
    }
}
