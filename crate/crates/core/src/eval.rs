//! Token-level accuracy per tag.
//!
//! A tag's accuracy is the fraction of its gold tokens predicted with that
//! tag (token recall). "Overall" is reported twice: micro-averaged over the
//! seven attribute tags' gold tokens, and over all tokens including `NoTag`.

use std::fmt::Write as _;

use serde_json::{json, Map, Value};

use crate::corpus::LabeledSequence;
use crate::error::{Error, Result};
use crate::tagset::{Tag, NUM_TAGS};

/// Confusion counts between gold (rows) and predicted (columns) tags.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TagReport {
    pub confusion: [[usize; NUM_TAGS]; NUM_TAGS],
}

impl TagReport {
    /// Gold tokens of `tag`.
    pub fn gold_count(&self, tag: Tag) -> usize {
        self.confusion[tag.index()].iter().sum()
    }

    pub fn correct(&self, tag: Tag) -> usize {
        self.confusion[tag.index()][tag.index()]
    }

    /// `None` when the tag has no gold tokens.
    pub fn accuracy(&self, tag: Tag) -> Option<f64> {
        ratio(self.correct(tag), self.gold_count(tag))
    }

    pub fn overall_excl_notag(&self) -> Option<f64> {
        let (c, g) = Tag::ATTRIBUTES
            .iter()
            .fold((0, 0), |(c, g), &t| (c + self.correct(t), g + self.gold_count(t)));
        ratio(c, g)
    }

    pub fn overall_incl_notag(&self) -> Option<f64> {
        let trace: usize = (0..NUM_TAGS).map(|i| self.confusion[i][i]).sum();
        ratio(trace, self.total())
    }

    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    fn add(&mut self, gold: Tag, predicted: Tag) {
        self.confusion[gold.index()][predicted.index()] += 1;
    }

    pub fn merge(&mut self, other: &TagReport) {
        for (row, orow) in self.confusion.iter_mut().zip(&other.confusion) {
            for (c, o) in row.iter_mut().zip(orow) {
                *c += o;
            }
        }
    }

    /// Machine-readable form: per-tag accuracies (null when undefined),
    /// both overall variants, gold counts and the confusion matrix.
    pub fn to_json(&self) -> Value {
        let mut per_tag = Map::new();
        let mut gold = Map::new();
        for tag in Tag::ALL {
            per_tag.insert(tag.name().into(), json!(self.accuracy(tag)));
            gold.insert(tag.name().into(), json!(self.gold_count(tag)));
        }
        json!({
            "per_tag": per_tag,
            "overall_excl_notag": self.overall_excl_notag(),
            "overall_incl_notag": self.overall_incl_notag(),
            "gold_tokens": gold,
            "confusion": self.confusion,
        })
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Compares aligned gold and predicted sequences.
pub fn token_accuracy(gold: &[LabeledSequence], predicted: &[LabeledSequence]) -> Result<TagReport> {
    let mut report = TagReport::default();
    for (i, g) in gold.iter().enumerate() {
        let p = predicted.get(i).filter(|p| {
            p.doc_id == g.doc_id && p.sentence_index == g.sentence_index && p.len() == g.len()
        });
        let Some(p) = p else {
            return Err(Error::Misaligned {
                doc_id: g.doc_id.clone(),
                sentence: g.sentence_index,
            });
        };
        for (&gt, &pt) in g.labels.iter().zip(&p.labels) {
            report.add(gt, pt);
        }
    }
    if let Some(extra) = predicted.get(gold.len()) {
        return Err(Error::Misaligned {
            doc_id: extra.doc_id.clone(),
            sentence: extra.sentence_index,
        });
    }
    Ok(report)
}

/// Same as [`token_accuracy`] with predictions given as bare tag lists.
pub fn token_accuracy_labels(gold: &[LabeledSequence], predicted: &[Vec<Tag>]) -> Result<TagReport> {
    let mut report = TagReport::default();
    for (i, g) in gold.iter().enumerate() {
        match predicted.get(i) {
            Some(p) if p.len() == g.len() => {
                for (&gt, &pt) in g.labels.iter().zip(p) {
                    report.add(gt, pt);
                }
            }
            _ => {
                return Err(Error::Misaligned {
                    doc_id: g.doc_id.clone(),
                    sentence: g.sentence_index,
                })
            }
        }
    }
    if predicted.len() != gold.len() {
        return Err(Error::Dimension {
            expected: gold.len(),
            actual: predicted.len(),
        });
    }
    Ok(report)
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.2}"))
}

/// Text table: one row for `method` with the seven attribute columns and
/// Overall (attribute tokens only), followed by NoTag and the overall
/// accuracy including NoTag tokens.
pub fn render_report(report: &TagReport, method: &str) -> String {
    let mut out = String::from("Method");
    for tag in Tag::REPORT_ORDER {
        let _ = write!(out, "\t{tag}");
    }
    out.push_str("\tOverall\n");
    out.push_str(method);
    for tag in Tag::REPORT_ORDER {
        let _ = write!(out, "\t{}", cell(report.accuracy(tag)));
    }
    let _ = writeln!(out, "\t{}", cell(report.overall_excl_notag()));
    let _ = writeln!(out, "NoTag\t{}", cell(report.accuracy(Tag::NoTag)));
    let _ = writeln!(out, "Overall (incl. NoTag)\t{}", cell(report.overall_incl_notag()));
    out
}
