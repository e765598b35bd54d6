//! Annotated documents and their projection onto token-level tag sequences.
//!
//! Documents carry character-offset span annotations (offsets count Unicode
//! scalar values). Projection splits each document into sentences, splits
//! sentences on whitespace, and gives every token the tag of the span it
//! overlaps, or `NoTag`.

mod annotation;
mod conll;
mod project;
mod stats;
mod text;

use serde::{Deserialize, Serialize};

use crate::tagset::Tag;

pub use annotation::{parse_annotation_file, write_annotation_file};
pub use conll::{export_conll, import_conll, read_tagged, write_tagged, LabelScheme};
pub use project::{project_corpus, project_spans};
pub use stats::{corpus_stats, render_stats_table, render_stats_tsv, StatsReport, TagCount};
pub use text::{split_sentences, tokenize, ABBREVIATIONS};

/// A highlighted character range `[start, end)` labeled with an attribute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanAnnotation {
    pub start: usize,
    pub end: usize,
    pub tag: Tag,
}

impl SpanAnnotation {
    pub fn overlaps(&self, start: usize, end: usize) -> bool {
        self.start < end && start < self.end
    }
}

/// A legal document with its expert annotations.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub spans: Vec<SpanAnnotation>,
    /// Case outcome: 0 = rejected, 1 = accepted.
    pub judgment: Option<u8>,
}

/// A whitespace-delimited token with its character offsets in the source.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn new(surface: impl Into<String>, start: usize, end: usize) -> Self {
        Token {
            surface: surface.into(),
            start,
            end,
        }
    }
}

/// One sentence of tokens, one tag per token.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledSequence {
    pub doc_id: String,
    pub sentence_index: usize,
    pub tokens: Vec<Token>,
    pub labels: Vec<Tag>,
}

impl LabeledSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.surface.as_str())
    }

    /// True when at least one token carries an attribute tag.
    pub fn is_highlighted(&self) -> bool {
        self.labels.iter().any(|t| t.is_attribute())
    }

    pub fn label_indices(&self) -> Vec<usize> {
        self.labels.iter().map(|t| t.index()).collect()
    }

    /// Builds a sequence from bare surfaces, laying them out separated by
    /// single spaces starting at offset 0.
    pub fn from_surfaces<S: AsRef<str>>(
        doc_id: impl Into<String>,
        sentence_index: usize,
        surfaces: &[S],
        labels: Vec<Tag>,
    ) -> Self {
        let mut offset = 0;
        let tokens = surfaces
            .iter()
            .map(|s| {
                let len = s.as_ref().chars().count();
                let tok = Token::new(s.as_ref(), offset, offset + len);
                offset += len + 1;
                tok
            })
            .collect();
        LabeledSequence {
            doc_id: doc_id.into(),
            sentence_index,
            tokens,
            labels,
        }
    }
}
