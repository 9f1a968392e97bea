//! Raw text preparation: sentence splitting, tokenization and shuffling.
//!
//! The rules are deliberately small. A sentence ends at a whitespace-separated
//! chunk whose last character is `.`, `!`, `?` or `…` when the next chunk
//! begins (after any opening punctuation) with an uppercase letter or a digit,
//! unless the chunk is a listed abbreviation. Lines are paragraphs: sentences
//! never span a line break. Tokenization splits on whitespace and detaches
//! leading and trailing punctuation one character at a time, so word-internal
//! hyphens and apostrophes stay attached.

use std::collections::HashSet;

use unicode_normalization::char::is_combining_mark;

use crate::nfc;
use crate::rng::SeededRng;

const SENTENCE_FINAL: [char; 4] = ['.', '!', '?', '…'];

const DEFAULT_ABBREVIATIONS: [&str; 14] = [
    "Dr", "Mr", "Mrs", "Ms", "Prof", "St", "Jr", "Sr", "vs", "etc", "e.g", "i.e", "No", "Nr",
];

#[derive(Debug, Clone)]
pub struct SentenceSplitter {
    abbreviations: HashSet<String>,
}

impl Default for SentenceSplitter {
    fn default() -> Self {
        Self::with_abbreviations(DEFAULT_ABBREVIATIONS)
    }
}

impl SentenceSplitter {
    /// Abbreviations may be given with or without the trailing period.
    pub fn with_abbreviations<I, S>(abbreviations: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        SentenceSplitter {
            abbreviations: abbreviations
                .into_iter()
                .map(|a| a.as_ref().trim().trim_end_matches('.').to_owned())
                .filter(|a| !a.is_empty())
                .collect(),
        }
    }

    /// Parses an abbreviation list, one entry per line.
    pub fn from_list(text: &str) -> Self {
        Self::with_abbreviations(text.lines())
    }

    pub fn split(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        for line in text.lines() {
            let chunks: Vec<&str> = line.split_whitespace().collect();
            let mut start = 0;
            for i in 0..chunks.len() {
                let last = i + 1 == chunks.len();
                if last || self.ends_sentence(chunks[i], chunks[i + 1]) {
                    out.push(chunks[start..=i].join(" "));
                    start = i + 1;
                }
            }
        }
        out
    }

    fn ends_sentence(&self, chunk: &str, next: &str) -> bool {
        let Some(final_char) = chunk.chars().last() else {
            return false;
        };
        if !SENTENCE_FINAL.contains(&final_char) {
            return false;
        }
        if final_char == '.' && self.abbreviations.contains(chunk.trim_end_matches('.')) {
            return false;
        }
        next.chars()
            .find(|c| c.is_alphanumeric())
            .is_some_and(|c| c.is_uppercase() || c.is_numeric())
    }
}

/// Splits with the default abbreviation list.
pub fn split_sentences(text: &str) -> Vec<String> {
    SentenceSplitter::default().split(text)
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || is_combining_mark(c)
}

pub fn tokenize(sentence: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in sentence.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let Some(first_word) = chars.iter().position(|&c| is_word_char(c)) else {
            tokens.extend(chars.iter().map(char::to_string));
            continue;
        };
        let last_word = chars.iter().rposition(|&c| is_word_char(c)).unwrap();
        tokens.extend(chars[..first_word].iter().map(char::to_string));
        tokens.push(chars[first_word..=last_word].iter().collect());
        tokens.extend(chars[last_word + 1..].iter().map(char::to_string));
    }
    tokens
}

/// Fisher–Yates shuffle of the sentence list under `seed`.
pub fn shuffle_sentences<T>(mut sentences: Vec<T>, seed: u64) -> Vec<T> {
    SeededRng::new(seed).shuffle(&mut sentences);
    sentences
}

/// Tokenized sentences ready for harvesting.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawCorpus {
    pub sentences: Vec<Vec<String>>,
    pub provenance: Vec<String>,
}

impl RawCorpus {
    /// Splits and tokenizes plain text.
    pub fn from_plain_text(text: &str, source: &str, splitter: &SentenceSplitter) -> Self {
        let text = nfc(text);
        let sentences = splitter
            .split(&text)
            .iter()
            .map(|s| tokenize(s))
            .filter(|t| !t.is_empty())
            .collect();
        RawCorpus {
            sentences,
            provenance: vec![source.to_owned()],
        }
    }

    /// Reads already-tokenized text: one sentence per line, tokens separated by
    /// whitespace.
    pub fn from_tokenized(text: &str, source: &str) -> Self {
        let sentences = text
            .lines()
            .map(|l| l.split_whitespace().map(nfc).collect::<Vec<_>>())
            .filter(|t| !t.is_empty())
            .collect();
        RawCorpus {
            sentences,
            provenance: vec![source.to_owned()],
        }
    }

    pub fn extend(&mut self, other: RawCorpus) {
        self.sentences.extend(other.sentences);
        self.provenance.extend(other.provenance);
    }

    pub fn shuffled(self, seed: u64) -> Self {
        RawCorpus {
            sentences: shuffle_sentences(self.sentences, seed),
            provenance: self.provenance,
        }
    }

    pub fn to_tokenized_text(&self) -> String {
        let mut out = String::new();
        for s in &self.sentences {
            out.push_str(&s.join(" "));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn non_ws(s: &str) -> String {
        s.chars().filter(|c| !c.is_whitespace()).collect()
    }

    #[test]
    fn splits_on_final_punctuation() {
        assert_eq!(split_sentences("A b. C d."), vec!["A b.", "C d."]);
        assert_eq!(
            split_sentences("Kas? Jā! 3 reizes… Labi"),
            vec!["Kas?", "Jā!", "3 reizes…", "Labi"]
        );
        assert!(split_sentences("").is_empty());
    }

    #[test]
    fn lowercase_continuation_does_not_split() {
        assert_eq!(split_sentences("a.b. c d."), vec!["a.b. c d."]);
    }

    #[test]
    fn abbreviation_suppresses_split() {
        let splitter = SentenceSplitter::with_abbreviations(["Dr."]);
        assert_eq!(splitter.split("Dr. Smith runs."), vec!["Dr. Smith runs."]);
        let none = SentenceSplitter::with_abbreviations(Vec::<String>::new());
        assert_eq!(none.split("Dr. Smith runs."), vec!["Dr.", "Smith runs."]);
    }

    #[test]
    fn lines_are_paragraphs() {
        assert_eq!(
            split_sentences("one line\nAnother line"),
            vec!["one line", "Another line"]
        );
    }

    #[test]
    fn tokenizes_latvian_fragment() {
        assert_eq!(
            tokenize("saka pašvaldību ceļu un ielu reģistrs."),
            vec!["saka", "pašvaldību", "ceļu", "un", "ielu", "reģistrs", "."]
        );
        assert_eq!(tokenize("x"), vec!["x"]);
        assert_eq!(tokenize("a-b c"), vec!["a-b", "c"]);
        assert_eq!(tokenize("(don't)"), vec!["(", "don't", ")"]);
        assert_eq!(tokenize("..."), vec![".", ".", "."]);
    }

    #[test]
    fn shuffle_is_deterministic() {
        let s: Vec<_> = (0..5).map(|i| format!("s{i}")).collect();
        assert_eq!(
            shuffle_sentences(s.clone(), 42),
            shuffle_sentences(s.clone(), 42)
        );
        assert_eq!(shuffle_sentences(vec!["only"], 9), vec!["only"]);
    }

    #[test]
    fn corpus_from_text() {
        let c = RawCorpus::from_plain_text(
            "Viens divi. Trīs četri!\n\n",
            "doc",
            &SentenceSplitter::default(),
        );
        assert_eq!(
            c.sentences,
            vec![vec!["Viens", "divi", "."], vec!["Trīs", "četri", "!"]]
        );
        assert_eq!(RawCorpus::from_tokenized(&c.to_tokenized_text(), "doc"), c);
    }

    proptest! {
        #[test]
        fn tokenize_preserves_characters(s in "[a-zA-Z0-9 .,'!?()\\-ļš]{0,40}") {
            let joined: String = tokenize(&s).concat();
            prop_assert_eq!(joined, non_ws(&s));
        }

        #[test]
        fn split_preserves_characters(s in "[a-zA-Z0-9 .!?\n]{0,60}") {
            let joined = split_sentences(&s).join(" ");
            prop_assert_eq!(non_ws(&joined), non_ws(&s));
        }

        #[test]
        fn shuffle_preserves_multiset(v in prop::collection::vec(0u32..10, 0..30), seed in any::<u64>()) {
            let mut a = shuffle_sentences(v.clone(), seed);
            let mut b = v;
            a.sort();
            b.sort();
            prop_assert_eq!(a, b);
        }
    }
}
