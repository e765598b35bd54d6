//! JSON-lines annotation files: one document object per line.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use serde::Deserialize;

use super::{Document, SpanAnnotation};
use crate::error::{Error, Result};
use crate::tagset::Tag;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    id: String,
    text: String,
    #[serde(default)]
    spans: Vec<RawSpan>,
    #[serde(default)]
    judgment: Option<u8>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpan {
    start: usize,
    end: usize,
    tag: String,
}

/// Reads and validates every document in a JSON-lines annotation stream.
///
/// Blank lines are skipped. Spans are returned sorted by start offset.
pub fn parse_annotation_file<R: BufRead>(reader: R) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let raw: RawDocument = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let doc = validate(raw, line_no)?;
        if !seen.insert(doc.id.clone()) {
            return Err(Error::DuplicateDocument(doc.id));
        }
        docs.push(doc);
    }
    Ok(docs)
}

fn validate(raw: RawDocument, line: usize) -> Result<Document> {
    if raw.id.is_empty() {
        return Err(Error::Parse {
            line,
            message: "empty document id".into(),
        });
    }
    if let Some(j) = raw.judgment {
        if j > 1 {
            return Err(Error::Parse {
                line,
                message: format!("judgment must be 0, 1 or null, got {j}"),
            });
        }
    }
    let len = raw.text.chars().count();
    let mut spans = Vec::with_capacity(raw.spans.len());
    for s in raw.spans {
        let tag: Tag = s.tag.parse()?;
        if !tag.is_attribute() {
            return Err(Error::Parse {
                line,
                message: "spans cannot carry NoTag".into(),
            });
        }
        if s.start >= s.end || s.end > len {
            return Err(Error::SpanBounds {
                doc_id: raw.id,
                start: s.start,
                end: s.end,
                len,
            });
        }
        spans.push(SpanAnnotation {
            start: s.start,
            end: s.end,
            tag,
        });
    }
    spans.sort_by_key(|s| (s.start, s.end));
    if let Some(w) = spans.windows(2).find(|w| w[1].start < w[0].end) {
        return Err(Error::OverlappingSpans {
            doc_id: raw.id,
            first_start: w[0].start,
            first_end: w[0].end,
            second_start: w[1].start,
            second_end: w[1].end,
        });
    }
    Ok(Document {
        id: raw.id,
        text: raw.text,
        spans,
        judgment: raw.judgment,
    })
}

/// Writes documents in the JSON-lines annotation format.
pub fn write_annotation_file<W: Write>(docs: &[Document], mut out: W) -> Result<()> {
    for doc in docs {
        serde_json::to_writer(&mut out, doc)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Vec<Document>> {
        parse_annotation_file(s.as_bytes())
    }

    #[test]
    fn minimal_record() {
        let docs = parse(
            r#"{"id":"d1","text":"the accused was convicted","spans":[{"start":4,"end":11,"tag":"Homicide"}],"judgment":null}"#,
        )
        .unwrap();
        assert_eq!(docs.len(), 1);
        assert_eq!(
            docs[0].spans,
            [SpanAnnotation {
                start: 4,
                end: 11,
                tag: Tag::Homicide
            }]
        );
        assert_eq!(docs[0].judgment, None);
    }

    #[test]
    fn span_past_end_is_rejected() {
        let err = parse(r#"{"id":"d1","text":"short","spans":[{"start":2,"end":9,"tag":"Riot"}]}"#)
            .unwrap_err();
        assert!(matches!(err, Error::SpanBounds { end: 9, len: 5, .. }));
    }

    #[test]
    fn overlapping_spans_name_document_and_offsets() {
        let err = parse(
            r#"{"id":"case-7","text":"abcdefghijkl","spans":[{"start":3,"end":9,"tag":"Riot"},{"start":0,"end":5,"tag":"Assault"}]}"#,
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("case-7"), "{msg}");
        assert!(msg.contains("[0, 5)") && msg.contains("[3, 9)"), "{msg}");
    }

    #[test]
    fn adjacent_spans_are_fine() {
        let docs = parse(
            r#"{"id":"a","text":"abcdefghij","spans":[{"start":0,"end":5,"tag":"Riot"},{"start":5,"end":9,"tag":"Riot"}]}"#,
        )
        .unwrap();
        assert_eq!(docs[0].spans.len(), 2);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let input = "\n{\"id\":\"a\",\"text\":\"x\",\"spans\":[]}\n{not json\n";
        let err = parse(input).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn unknown_tag_is_named() {
        let err = parse(r#"{"id":"a","text":"abc","spans":[{"start":0,"end":1,"tag":"Murder"}]}"#)
            .unwrap_err();
        assert!(err.to_string().contains("Murder"));
    }

    #[test]
    fn duplicate_ids_and_bad_judgments_are_rejected() {
        let dup = "{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"a\",\"text\":\"y\"}";
        assert!(matches!(parse(dup), Err(Error::DuplicateDocument(_))));
        assert!(parse(r#"{"id":"a","text":"x","judgment":2}"#).is_err());
        assert!(parse(r#"{"id":"","text":"x"}"#).is_err());
    }

    #[test]
    fn write_then_parse() {
        let docs = parse(
            r#"{"id":"d1","text":"Wé saw it","spans":[{"start":0,"end":2,"tag":"ExpWitTest"}],"judgment":1}"#,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_annotation_file(&docs, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).contains("\"ExpertWittest\""));
        assert_eq!(parse_annotation_file(buf.as_slice()).unwrap(), docs);
    }
}
