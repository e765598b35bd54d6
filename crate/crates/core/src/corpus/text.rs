//! Rule-based sentence splitting and whitespace tokenization.

use super::Token;

/// Words ending in a period that never close a sentence.
pub const ABBREVIATIONS: [&str; 11] = [
    "v.", "vs.", "Sec.", "No.", "Mr.", "Dr.", "Smt.", "Hon.", "Art.", "Ors.", "Anr.",
];

/// Splits `text` into sentence ranges `[start, end)` over character offsets.
///
/// A boundary follows `.`, `?` or `!` when the next character is whitespace
/// and the next non-whitespace character is uppercase or a digit, unless the
/// word ending in the period is a known abbreviation. Ranges are trimmed of
/// surrounding whitespace.
pub fn split_sentences(text: &str) -> Vec<(usize, usize)> {
    let chars: Vec<char> = text.chars().collect();
    split_sentence_chars(&chars)
}

pub(crate) fn split_sentence_chars(chars: &[char]) -> Vec<(usize, usize)> {
    let mut ranges = Vec::new();
    let mut start: Option<usize> = None;
    let mut last_non_ws = 0;

    for (i, &c) in chars.iter().enumerate() {
        if c.is_whitespace() {
            continue;
        }
        last_non_ws = i;
        if start.is_none() {
            start = Some(i);
        }
        if !matches!(c, '.' | '?' | '!') {
            continue;
        }
        if !chars.get(i + 1).is_some_and(|n| n.is_whitespace()) {
            continue;
        }
        let next = chars[i + 1..].iter().find(|n| !n.is_whitespace());
        if !next.is_some_and(|n| n.is_uppercase() || n.is_ascii_digit()) {
            continue;
        }
        if c == '.' && ends_with_abbreviation(chars, i) {
            continue;
        }
        if let Some(s) = start.take() {
            ranges.push((s, i + 1));
        }
    }
    if let Some(s) = start {
        ranges.push((s, last_non_ws + 1));
    }
    ranges
}

fn ends_with_abbreviation(chars: &[char], period: usize) -> bool {
    let word_start = chars[..period]
        .iter()
        .rposition(|c| c.is_whitespace())
        .map_or(0, |p| p + 1);
    let word: String = chars[word_start..=period]
        .iter()
        .skip_while(|c| !c.is_alphanumeric())
        .collect();
    ABBREVIATIONS.contains(&word.as_str())
}

/// Returns the maximal non-whitespace runs inside `range` with their exact
/// character offsets. Punctuation is not a separator.
pub fn tokenize(text: &str, range: (usize, usize)) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    tokenize_chars(&chars, range)
}

pub(crate) fn tokenize_chars(chars: &[char], (start, end): (usize, usize)) -> Vec<Token> {
    let end = end.min(chars.len());
    let mut tokens = Vec::new();
    let mut run: Option<usize> = None;
    for i in start..end {
        match (chars[i].is_whitespace(), run) {
            (false, None) => run = Some(i),
            (true, Some(s)) => {
                tokens.push(Token::new(chars[s..i].iter().collect::<String>(), s, i));
                run = None;
            }
            _ => {}
        }
    }
    if let Some(s) = run {
        tokens.push(Token::new(chars[s..end].iter().collect::<String>(), s, end));
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn slices(text: &str) -> Vec<String> {
        let chars: Vec<char> = text.chars().collect();
        split_sentences(text)
            .into_iter()
            .map(|(s, e)| chars[s..e].iter().collect())
            .collect()
    }

    #[test]
    fn splits_on_terminator_before_capital() {
        assert_eq!(slices("He fled. She testified."), ["He fled.", "She testified."]);
        assert_eq!(split_sentences("He fled. She testified."), [(0, 8), (9, 23)]);
    }

    #[test]
    fn unterminated_text_is_one_sentence() {
        assert_eq!(split_sentences("No terminator"), [(0, 13)]);
    }

    #[test]
    fn abbreviations_do_not_split() {
        assert_eq!(
            slices("See Sec. 302 IPC. He appealed."),
            ["See Sec. 302 IPC.", "He appealed."]
        );
        assert_eq!(slices("State vs. Ram and Ors. Then"), ["State vs. Ram and Ors. Then"]);
        assert_eq!(slices("(Art. 21) applies"), ["(Art. 21) applies"]);
    }

    #[test]
    fn lowercase_continuation_does_not_split() {
        assert_eq!(slices("i.e. the accused. fled"), ["i.e. the accused. fled"]);
    }

    #[test]
    fn digits_start_sentences() {
        assert_eq!(slices("He died. 3 men fled!  Why?"), ["He died.", "3 men fled!", "Why?"]);
    }

    #[test]
    fn whitespace_only_is_empty() {
        assert!(split_sentences("  \n\t ").is_empty());
        assert!(split_sentences("").is_empty());
    }

    #[test]
    fn whitespace_tokenization() {
        let toks = tokenize("guilty of murder", (0, 16));
        assert_eq!(
            toks,
            [Token::new("guilty", 0, 6), Token::new("of", 7, 9), Token::new("murder", 10, 16)]
        );
        let toks = tokenize(" double  spaces ", (0, 16));
        assert_eq!(toks, [Token::new("double", 1, 7), Token::new("spaces", 9, 15)]);
        let toks = tokenize("Sec.302/34,", (0, 11));
        assert_eq!(toks, [Token::new("Sec.302/34,", 0, 11)]);
    }

    #[test]
    fn offsets_count_scalar_values() {
        let text = "दोषी है. ठीक";
        let toks = tokenize(text, (0, text.chars().count()));
        assert_eq!(toks[1], Token::new("है.", 5, 8));
    }

    proptest! {
        #[test]
        fn sentences_partition_non_whitespace(text in "[a-zA-Z0-9 .?!\n]{0,80}") {
            let chars: Vec<char> = text.chars().collect();
            let ranges = split_sentences(&text);
            let mut covered = vec![false; chars.len()];
            let mut prev_end = 0;
            for &(s, e) in &ranges {
                prop_assert!(s < e && s >= prev_end);
                prop_assert!(!chars[s].is_whitespace() && !chars[e - 1].is_whitespace());
                prop_assert!(chars[prev_end..s].iter().all(|c| c.is_whitespace()));
                covered[s..e].iter_mut().for_each(|c| *c = true);
                prev_end = e;
            }
            prop_assert!(chars[prev_end..].iter().all(|c| c.is_whitespace()));
            for (i, c) in chars.iter().enumerate() {
                prop_assert!(c.is_whitespace() || covered[i]);
            }
        }

        #[test]
        fn tokens_slice_back_to_surfaces(text in "[a-z,. \t]{0,60}") {
            let chars: Vec<char> = text.chars().collect();
            let toks = tokenize(&text, (0, chars.len()));
            let mut prev = 0;
            for t in &toks {
                prop_assert!(t.start >= prev && t.start < t.end);
                let slice: String = chars[t.start..t.end].iter().collect();
                prop_assert_eq!(&slice, &t.surface);
                prop_assert!(!t.surface.chars().any(char::is_whitespace));
                prev = t.end;
            }
            let joined: Vec<&str> = toks.iter().map(|t| t.surface.as_str()).collect();
            let expected: Vec<&str> = text.split_whitespace().collect();
            prop_assert_eq!(joined, expected);
        }
    }
}
