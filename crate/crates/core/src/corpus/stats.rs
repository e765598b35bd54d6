use std::fmt::Write as _;

use serde::Serialize;

use super::{project_spans, Document, LabeledSequence};
use crate::error::Result;
use crate::tagset::Tag;

/// Sentence and token counts for one attribute tag.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TagCount {
    /// Sentences containing at least one token of the tag.
    pub sentences: usize,
    /// Tokens carrying the tag.
    pub tokens: usize,
}

/// Per-tag dataset statistics for one split.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StatsReport {
    pub split: String,
    /// Indexed by tag index; only the seven attribute tags are counted.
    pub counts: [TagCount; 7],
}

impl StatsReport {
    pub fn get(&self, tag: Tag) -> TagCount {
        self.counts.get(tag.index()).copied().unwrap_or_default()
    }

    pub fn from_sequences<'a>(
        split: impl Into<String>,
        seqs: impl IntoIterator<Item = &'a LabeledSequence>,
    ) -> Self {
        let mut counts = [TagCount::default(); 7];
        for seq in seqs {
            let mut present = [false; 7];
            for tag in seq.labels.iter().filter(|t| t.is_attribute()) {
                counts[tag.index()].tokens += 1;
                present[tag.index()] = true;
            }
            for (c, p) in counts.iter_mut().zip(present) {
                c.sentences += usize::from(p);
            }
        }
        StatsReport {
            split: split.into(),
            counts,
        }
    }
}

/// Projects the corpus and counts tagged sentences and tokens per tag.
pub fn corpus_stats(corpus: &[Document], split: &str) -> Result<StatsReport> {
    let mut seqs = Vec::new();
    for doc in corpus {
        seqs.extend(project_spans(doc)?);
    }
    Ok(StatsReport::from_sequences(split, &seqs))
}

/// TSV with a `tag, sentences, tokens` header for each split.
pub fn render_stats_tsv(reports: &[StatsReport]) -> String {
    let mut out = String::new();
    for r in reports {
        let _ = writeln!(out, "# split = {}", r.split);
        out.push_str("tag\tsentences\ttokens\n");
        for tag in Tag::REPORT_ORDER {
            let c = r.get(tag);
            let _ = writeln!(out, "{tag}\t{}\t{}", c.sentences, c.tokens);
        }
    }
    out
}

/// Tags as columns, two rows (`#sentences`, `#tokens`) per split.
pub fn render_stats_table(reports: &[StatsReport]) -> String {
    let mut out = String::from("Type\tStatistics");
    for tag in Tag::REPORT_ORDER {
        let _ = write!(out, "\t{tag}");
    }
    out.push('\n');
    for r in reports {
        for (label, pick) in [
            ("#sentences", (|c: TagCount| c.sentences) as fn(TagCount) -> usize),
            ("#tokens", |c: TagCount| c.tokens),
        ] {
            let _ = write!(out, "{}\t{label}", r.split);
            for tag in Tag::REPORT_ORDER {
                let _ = write!(out, "\t{}", pick(r.get(tag)));
            }
            out.push('\n');
        }
    }
    out
}
