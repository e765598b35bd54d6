//! Token TSV ("CoNLL-style") reading and writing.
//!
//! One `surface<TAB>tag` line per token, a blank line after each sentence
//! and a `# doc_id = …` comment before each document. The tagged variant
//! adds a third `predicted_tag` column.

use std::io::{BufRead, Write};

use super::LabeledSequence;
use crate::error::{Error, Result};
use crate::tagset::Tag;

const DOC_PREFIX: &str = "# doc_id = ";

/// Label encoding used on the tag column.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LabelScheme {
    /// Bare tag names, `NoTag` outside spans.
    #[default]
    Io,
    /// `B-`/`I-` prefixes on attribute tags, `O` outside.
    Bio,
}

impl LabelScheme {
    fn encode(self, labels: &[Tag]) -> Vec<String> {
        match self {
            LabelScheme::Io => labels.iter().map(|t| t.name().to_string()).collect(),
            LabelScheme::Bio => labels
                .iter()
                .enumerate()
                .map(|(i, &t)| match t {
                    Tag::NoTag => "O".to_string(),
                    t if i > 0 && labels[i - 1] == t => format!("I-{t}"),
                    t => format!("B-{t}"),
                })
                .collect(),
        }
    }
}

fn decode_label(s: &str) -> Result<Tag> {
    match s {
        "O" => Ok(Tag::NoTag),
        _ => {
            let bare = s.strip_prefix("B-").or_else(|| s.strip_prefix("I-")).unwrap_or(s);
            bare.parse()
        }
    }
}

/// Writes sequences as token TSV. Sequences of one document must be
/// contiguous to share a `# doc_id` header.
pub fn export_conll<W: Write>(seqs: &[LabeledSequence], scheme: LabelScheme, out: W) -> Result<()> {
    write_columns(seqs, None, scheme, out)
}

/// Writes gold and predicted tags side by side (`surface, tag, predicted_tag`).
pub fn write_tagged<W: Write>(
    gold: &[LabeledSequence],
    predicted: &[Vec<Tag>],
    out: W,
) -> Result<()> {
    if gold.len() != predicted.len() {
        return Err(Error::Dimension {
            expected: gold.len(),
            actual: predicted.len(),
        });
    }
    write_columns(gold, Some(predicted), LabelScheme::Io, out)
}

fn write_columns<W: Write>(
    seqs: &[LabeledSequence],
    predicted: Option<&[Vec<Tag>]>,
    scheme: LabelScheme,
    mut out: W,
) -> Result<()> {
    let mut current_doc: Option<&str> = None;
    for (k, seq) in seqs.iter().enumerate() {
        if current_doc != Some(seq.doc_id.as_str()) {
            writeln!(out, "{DOC_PREFIX}{}", seq.doc_id)?;
            current_doc = Some(&seq.doc_id);
        }
        let labels = scheme.encode(&seq.labels);
        let pred = predicted.map(|p| &p[k]);
        if let Some(p) = pred {
            if p.len() != seq.len() {
                return Err(Error::Dimension {
                    expected: seq.len(),
                    actual: p.len(),
                });
            }
        }
        for (i, tok) in seq.tokens.iter().enumerate() {
            match pred {
                Some(p) => writeln!(out, "{}\t{}\t{}", tok.surface, labels[i], p[i])?,
                None => writeln!(out, "{}\t{}", tok.surface, labels[i])?,
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Reads token TSV back into sequences. Offsets are regenerated by laying
/// surfaces out separated by single spaces. Both label schemes are accepted.
pub fn import_conll<R: BufRead>(reader: R) -> Result<Vec<LabeledSequence>> {
    let rows = read_columns(reader, 2)?;
    Ok(rows.into_iter().map(|(seq, _)| seq).collect())
}

/// Reads a tagged TSV into gold sequences and predicted tag lists.
pub fn read_tagged<R: BufRead>(reader: R) -> Result<(Vec<LabeledSequence>, Vec<Vec<Tag>>)> {
    Ok(read_columns(reader, 3)?.into_iter().unzip())
}

fn read_columns<R: BufRead>(reader: R, columns: usize) -> Result<Vec<(LabeledSequence, Vec<Tag>)>> {
    struct Pending {
        surfaces: Vec<String>,
        labels: Vec<Tag>,
        predicted: Vec<Tag>,
    }
    let mut out = Vec::new();
    let mut doc_id = String::new();
    let mut sentence_index = 0;
    let mut pending = Pending {
        surfaces: Vec::new(),
        labels: Vec::new(),
        predicted: Vec::new(),
    };
    let mut flush = |pending: &mut Pending, doc_id: &str, sentence_index: &mut usize| {
        if pending.surfaces.is_empty() {
            return;
        }
        let seq = LabeledSequence::from_surfaces(
            doc_id,
            *sentence_index,
            &pending.surfaces,
            std::mem::take(&mut pending.labels),
        );
        pending.surfaces.clear();
        out.push((seq, std::mem::take(&mut pending.predicted)));
        *sentence_index += 1;
    };

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            flush(&mut pending, &doc_id, &mut sentence_index);
            continue;
        }
        let is_comment = line.starts_with('#') && !line.contains('\t');
        if let Some(id) = line.strip_prefix(DOC_PREFIX).filter(|_| is_comment) {
            flush(&mut pending, &doc_id, &mut sentence_index);
            doc_id = id.to_string();
            sentence_index = 0;
            continue;
        }
        if is_comment {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != columns || fields.iter().any(|f| f.is_empty()) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {columns} tab-separated columns, found {}", fields.len()),
            });
        }
        let tag = |s: &str| {
            decode_label(s).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })
        };
        pending.surfaces.push(fields[0].to_string());
        pending.labels.push(tag(fields[1])?);
        if columns == 3 {
            pending.predicted.push(tag(fields[2])?);
        }
    }
    flush(&mut pending, &doc_id, &mut sentence_index);
    Ok(out)
}
