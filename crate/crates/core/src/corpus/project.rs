use super::text::{split_sentence_chars, tokenize_chars};
use super::{Document, LabeledSequence};
use crate::error::{Error, Result};
use crate::tagset::Tag;

/// Projects a document's character spans onto token tags, one sequence per
/// sentence.
///
/// A token takes a span's tag when any of its characters lies inside the
/// span; spans crossing a sentence boundary tag tokens on both sides.
pub fn project_spans(doc: &Document) -> Result<Vec<LabeledSequence>> {
    let chars: Vec<char> = doc.text.chars().collect();
    let mut spans = doc.spans.clone();
    spans.sort_by_key(|s| (s.start, s.end));

    let mut out = Vec::new();
    for (sentence_index, range) in split_sentence_chars(&chars).into_iter().enumerate() {
        let tokens = tokenize_chars(&chars, range);
        let mut labels = Vec::with_capacity(tokens.len());
        for tok in &tokens {
            // spans are disjoint and sorted, so their ends are sorted too
            let first = spans.partition_point(|s| s.end <= tok.start);
            let mut tag = Tag::NoTag;
            for span in spans[first..].iter().take_while(|s| s.start < tok.end) {
                if tag != Tag::NoTag && tag != span.tag {
                    return Err(Error::AmbiguousToken {
                        doc_id: doc.id.clone(),
                        start: tok.start,
                        end: tok.end,
                    });
                }
                tag = span.tag;
            }
            labels.push(tag);
        }
        out.push(LabeledSequence {
            doc_id: doc.id.clone(),
            sentence_index,
            tokens,
            labels,
        });
    }
    Ok(out)
}

/// Projects every document in order.
pub fn project_corpus(docs: &[Document]) -> Result<Vec<LabeledSequence>> {
    let mut out = Vec::new();
    for doc in docs {
        out.extend(project_spans(doc)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SpanAnnotation;
    use proptest::prelude::*;

    fn doc(text: &str, spans: &[(usize, usize, Tag)]) -> Document {
        Document {
            id: "d".into(),
            text: text.into(),
            spans: spans
                .iter()
                .map(|&(start, end, tag)| SpanAnnotation { start, end, tag })
                .collect(),
            judgment: None,
        }
    }

    #[test]
    fn direct_projection() {
        let d = doc("the witness testified clearly", &[(4, 21, Tag::Wittest)]);
        let seqs = project_spans(&d).unwrap();
        assert_eq!(seqs.len(), 1);
        assert_eq!(
            seqs[0].labels,
            [Tag::NoTag, Tag::Wittest, Tag::Wittest, Tag::NoTag]
        );
    }

    #[test]
    fn partial_token_overlap_takes_the_tag() {
        let d = doc("the witness testified clearly", &[(4, 8, Tag::Wittest)]);
        let seqs = project_spans(&d).unwrap();
        assert_eq!(
            seqs[0].labels,
            [Tag::NoTag, Tag::Wittest, Tag::NoTag, Tag::NoTag]
        );
    }

    #[test]
    fn span_crossing_a_sentence_boundary() {
        let text = "He was stabbed twice. The knife was found nearby.";
        //          0         1         2         3
        //          0123456789012345678901234567890123456789
        let d = doc(text, &[(7, 30, Tag::Assault)]);
        let seqs = project_spans(&d).unwrap();
        assert_eq!(seqs.len(), 2);
        assert_eq!(
            seqs[0].labels,
            [Tag::NoTag, Tag::NoTag, Tag::Assault, Tag::Assault]
        );
        assert_eq!(
            seqs[1].labels,
            [Tag::Assault, Tag::Assault, Tag::NoTag, Tag::NoTag, Tag::NoTag]
        );
        assert_eq!(seqs[1].sentence_index, 1);
    }

    #[test]
    fn token_touching_two_tags_is_ambiguous() {
        let d = doc("ab cd", &[(0, 1, Tag::Riot), (1, 2, Tag::Assault)]);
        assert!(matches!(
            project_spans(&d),
            Err(Error::AmbiguousToken { start: 0, end: 2, .. })
        ));
        let same = doc("ab cd", &[(0, 1, Tag::Riot), (1, 2, Tag::Riot)]);
        assert_eq!(project_spans(&same).unwrap()[0].labels, [Tag::Riot, Tag::NoTag]);
    }

    fn words_and_spans() -> impl Strategy<Value = (String, Vec<(usize, usize, Tag)>)> {
        proptest::collection::vec(("[a-z]{1,6}", 0usize..8, any::<bool>()), 1..25).prop_map(
            |words| {
                let mut text = String::new();
                let mut spans = Vec::new();
                for (i, (w, tag, end_sentence)) in words.iter().enumerate() {
                    if i > 0 {
                        text.push(' ');
                    }
                    let start = text.chars().count();
                    text.push_str(w);
                    let end = text.chars().count();
                    if *tag < 7 {
                        // shrink a little so some spans are partial
                        let s = start + usize::from(end - start > 2);
                        spans.push((s, end, Tag::ALL[*tag]));
                    }
                    if *end_sentence {
                        text.push_str(". X");
                    }
                }
                (text, spans)
            },
        )
    }

    proptest! {
        #[test]
        fn projection_conserves_tagged_tokens((text, spans) in words_and_spans()) {
            let d = doc(&text, &spans);
            let seqs = project_spans(&d).unwrap();
            let tagged: usize = seqs
                .iter()
                .map(|s| s.labels.iter().filter(|t| t.is_attribute()).count())
                .sum();
            let mut expected = 0;
            for s in &seqs {
                for tok in &s.tokens {
                    if spans.iter().any(|&(a, b, _)| a < tok.end && tok.start < b) {
                        expected += 1;
                    }
                }
            }
            prop_assert_eq!(tagged, expected);
            // one span per word, so the per-span sum matches as well
            prop_assert_eq!(tagged, spans.len());
            for s in &seqs {
                prop_assert_eq!(s.tokens.len(), s.labels.len());
            }
        }
    }
}
