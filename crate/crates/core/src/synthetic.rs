//! Seeded synthetic corpora with a known answer.
//!
//! In the attribute corpus every surface belongs to exactly one tag's
//! vocabulary, so the gold tag is a function of the token surface. The
//! judgment corpus hides its class signal in highlighted spans placed at
//! the start of long documents.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Document, SpanAnnotation};
use crate::tagset::Tag;

const SENTENCE_OPENERS: [&str; 6] = ["The", "He", "It", "Then", "She", "Thereafter"];
const PER_DOCUMENT: usize = 5;

/// Disjoint per-tag vocabularies.
#[derive(Clone, Debug)]
pub struct Vocabulary {
    words: Vec<Vec<String>>,
}

impl Vocabulary {
    pub fn generate(seed: u64, words_per_tag: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x05ee_d0f7_0cab);
        let mut seen: HashSet<String> = SENTENCE_OPENERS.iter().map(|w| w.to_lowercase()).collect();
        let mut words = Vec::new();
        for _ in Tag::ALL {
            let mut list = Vec::new();
            while list.len() < words_per_tag {
                let len = rng.gen_range(4..=9);
                let w: String = (0..len).map(|_| rng.gen_range(b'a'..=b'z') as char).collect();
                if seen.insert(w.clone()) {
                    list.push(w);
                }
            }
            words.push(list);
        }
        Vocabulary { words }
    }

    pub fn words(&self, tag: Tag) -> &[String] {
        &self.words[tag.index()]
    }

    /// The tag whose vocabulary contains `surface`, if any. Openers and
    /// punctuation are `NoTag`.
    pub fn tag_of(&self, surface: &str) -> Option<Tag> {
        Tag::ALL.into_iter().find(|t| self.words(*t).iter().any(|w| w == surface))
    }
}

/// Settings for [`attribute_corpus`].
#[derive(Clone, Debug)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub train_sentences: usize,
    pub test_sentences: usize,
    pub words_per_tag: usize,
    /// Fraction of sentences with no highlighted span.
    pub untagged_fraction: f64,
}

impl SyntheticConfig {
    pub fn new(seed: u64) -> Self {
        SyntheticConfig {
            seed,
            train_sentences: 500,
            test_sentences: 200,
            words_per_tag: 12,
            untagged_fraction: 0.1,
        }
    }
}

/// Incrementally builds a document's text and span offsets.
struct DocBuilder {
    text: String,
    chars: usize,
    spans: Vec<SpanAnnotation>,
}

impl DocBuilder {
    fn new() -> Self {
        DocBuilder {
            text: String::new(),
            chars: 0,
            spans: Vec::new(),
        }
    }

    fn push_word(&mut self, word: &str) -> (usize, usize) {
        if !self.text.is_empty() {
            self.text.push(' ');
            self.chars += 1;
        }
        let start = self.chars;
        self.text.push_str(word);
        self.chars += word.chars().count();
        (start, self.chars)
    }

    fn push_span(&mut self, tag: Tag, words: &[&str]) {
        let mut range = None;
        for w in words {
            let (s, e) = self.push_word(w);
            range = Some(range.map_or((s, e), |(s0, _)| (s0, e)));
        }
        if let Some((start, end)) = range {
            self.spans.push(SpanAnnotation { start, end, tag });
        }
    }

    fn finish(self, id: String, judgment: Option<u8>) -> Document {
        Document {
            id,
            text: self.text,
            spans: self.spans,
            judgment,
        }
    }
}

fn pick<'a, R: Rng>(rng: &mut R, words: &'a [String]) -> &'a str {
    words.choose(rng).expect("non-empty vocabulary")
}

/// Appends one sentence: an opener, filler and zero to two attribute runs,
/// and a final `.` token.
fn push_sentence<R: Rng>(rng: &mut R, vocab: &Vocabulary, doc: &mut DocBuilder, untagged: f64) {
    doc.push_word(SENTENCE_OPENERS.choose(rng).unwrap());
    let runs = if rng.gen_bool(untagged) { 0 } else { rng.gen_range(1..=2) };
    let filler = vocab.words(Tag::NoTag);
    for _ in 0..runs {
        for _ in 0..rng.gen_range(1..=3) {
            doc.push_word(pick(rng, filler));
        }
        let tag = *Tag::ATTRIBUTES.choose(rng).unwrap();
        let len = rng.gen_range(1..=4);
        let words: Vec<&str> = (0..len).map(|_| pick(rng, vocab.words(tag))).collect();
        doc.push_span(tag, &words);
    }
    for _ in 0..rng.gen_range(1..=4) {
        doc.push_word(pick(rng, filler));
    }
    doc.push_word(".");
}

fn documents<R: Rng>(
    rng: &mut R,
    vocab: &Vocabulary,
    prefix: &str,
    sentences: usize,
    untagged: f64,
) -> Vec<Document> {
    let mut docs = Vec::new();
    let mut remaining = sentences;
    while remaining > 0 {
        let k = remaining.min(PER_DOCUMENT);
        let mut b = DocBuilder::new();
        for _ in 0..k {
            push_sentence(rng, vocab, &mut b, untagged);
        }
        docs.push(b.finish(format!("{prefix}-{:04}", docs.len()), None));
        remaining -= k;
    }
    docs
}

/// Train and test documents whose tags are a function of surface.
pub fn attribute_corpus(config: &SyntheticConfig) -> (Vocabulary, Vec<Document>, Vec<Document>) {
    let vocab = Vocabulary::generate(config.seed, config.words_per_tag);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let train = documents(&mut rng, &vocab, "train", config.train_sentences, config.untagged_fraction);
    let test = documents(&mut rng, &vocab, "test", config.test_sentences, config.untagged_fraction);
    (vocab, train, test)
}

/// Settings for [`judgment_corpus`].
#[derive(Clone, Debug)]
pub struct JudgmentCorpusConfig {
    pub seed: u64,
    pub train_documents: usize,
    pub test_documents: usize,
    /// Highlighted runs per document, all placed before the filler.
    pub spans_per_document: usize,
    pub span_length: usize,
    /// Filler tokens after the highlighted opening.
    pub filler_tokens: usize,
}

impl JudgmentCorpusConfig {
    pub fn new(seed: u64) -> Self {
        JudgmentCorpusConfig {
            seed,
            train_documents: 300,
            test_documents: 100,
            spans_per_document: 5,
            span_length: 4,
            filler_tokens: 560,
        }
    }
}

/// Long documents labeled by which half of the `Homicide` vocabulary their
/// opening spans draw from. The opening falls outside the final 510-token
/// window, so the class is only visible through extracted spans.
pub fn judgment_corpus(
    vocab: &Vocabulary,
    config: &JudgmentCorpusConfig,
) -> (Vec<Document>, Vec<Document>) {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x006a_0d6e);
    let homicide = vocab.words(Tag::Homicide);
    let (class0, class1) = homicide.split_at(homicide.len() / 2);
    let filler = vocab.words(Tag::NoTag);
    let mut make = |prefix: &str, count: usize| -> Vec<Document> {
        (0..count)
            .map(|i| {
                let label = (i % 2) as u8;
                let pool = if label == 1 { class1 } else { class0 };
                let mut b = DocBuilder::new();
                for _ in 0..config.spans_per_document {
                    b.push_word(SENTENCE_OPENERS.choose(&mut rng).unwrap());
                    b.push_word(pick(&mut rng, filler));
                    let words: Vec<&str> =
                        (0..config.span_length).map(|_| pick(&mut rng, pool)).collect();
                    b.push_span(Tag::Homicide, &words);
                    b.push_word(pick(&mut rng, filler));
                    b.push_word(".");
                }
                let mut written = 0;
                while written < config.filler_tokens {
                    b.push_word(SENTENCE_OPENERS.choose(&mut rng).unwrap());
                    for _ in 0..rng.gen_range(6..=14) {
                        b.push_word(pick(&mut rng, filler));
                        written += 1;
                    }
                    b.push_word(".");
                }
                b.finish(format!("{prefix}-{i:04}"), Some(label))
            })
            .collect()
    };
    let train = make("jtrain", config.train_documents);
    let test = make("jtest", config.test_documents);
    (train, test)
}
