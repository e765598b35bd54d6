use serde::Serialize;

use crate::corpus::Token;
use crate::error::{Error, Result};
use crate::tagset::Tag;

/// A maximal run of tokens sharing one attribute tag.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExtractedSpan {
    pub tag: Tag,
    /// First token of the run.
    pub start: usize,
    /// One past the last token of the run.
    pub end: usize,
    /// Token surfaces joined by single spaces.
    pub text: String,
}

/// Groups consecutive identical attribute tags into spans.
pub fn extract_spans(tokens: &[Token], labels: &[Tag]) -> Result<Vec<ExtractedSpan>> {
    if tokens.len() != labels.len() {
        return Err(Error::Dimension {
            expected: tokens.len(),
            actual: labels.len(),
        });
    }
    let mut spans = Vec::new();
    let mut i = 0;
    while i < labels.len() {
        let tag = labels[i];
        let mut j = i + 1;
        while j < labels.len() && labels[j] == tag {
            j += 1;
        }
        if tag.is_attribute() {
            let text = tokens[i..j]
                .iter()
                .map(|t| t.surface.as_str())
                .collect::<Vec<_>>()
                .join(" ");
            spans.push(ExtractedSpan {
                tag,
                start: i,
                end: j,
                text,
            });
        }
        i = j;
    }
    Ok(spans)
}
