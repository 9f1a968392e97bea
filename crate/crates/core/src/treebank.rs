//! Lemma-annotated treebanks in CoNLL-U format.

use std::collections::{BTreeMap, HashSet};

use crate::error::{Error, Result};
use crate::example::ContextualExample;
use crate::nfc;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub form: String,
    pub lemma: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedSentence {
    pub tokens: Vec<Token>,
}

impl AnnotatedSentence {
    pub fn forms(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.form.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Reads FORM (column 2) and LEMMA (column 3) of every syntactic word.
/// Multiword-token ranges (`3-4`) and empty nodes (`5.1`) are skipped.
pub fn parse_conllu(text: &str) -> Result<Vec<AnnotatedSentence>> {
    let mut sentences = Vec::new();
    let mut current = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            if !current.is_empty() {
                sentences.push(AnnotatedSentence {
                    tokens: std::mem::take(&mut current),
                });
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::parse(
                i + 1,
                format!("expected 10 tab-separated columns, found {}", cols.len()),
            ));
        }
        let id = cols[0];
        if id.contains('-') || id.contains('.') {
            continue;
        }
        let (form, lemma) = (cols[1].trim(), cols[2].trim());
        if form.is_empty() || lemma.is_empty() {
            return Err(Error::parse(i + 1, "empty FORM or LEMMA"));
        }
        current.push(Token {
            form: nfc(form),
            lemma: nfc(lemma),
        });
    }
    if !current.is_empty() {
        sentences.push(AnnotatedSentence { tokens: current });
    }
    Ok(sentences)
}

/// Writes sentences as minimal CoNLL-U: ID, FORM and LEMMA filled, the
/// remaining columns `_`.
pub fn write_conllu(sentences: &[AnnotatedSentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        for (i, t) in s.tokens.iter().enumerate() {
            out.push_str(&format!(
                "{}\t{}\t{}\t_\t_\t_\t_\t_\t_\t_\n",
                i + 1,
                t.form,
                t.lemma
            ));
        }
        out.push('\n');
    }
    out
}

fn tokens_in_order(
    sentences: &[AnnotatedSentence],
) -> impl Iterator<Item = (&AnnotatedSentence, usize, &Token)> {
    sentences
        .iter()
        .flat_map(|s| s.tokens.iter().enumerate().map(move |(i, t)| (s, i, t)))
}

fn example_at(sentence: &AnnotatedSentence, index: usize) -> ContextualExample {
    let token = &sentence.tokens[index];
    ContextualExample {
        sentence: sentence.forms(),
        target_index: index,
        form: token.form.clone(),
        lemma: token.lemma.clone(),
    }
}

/// The first `n` tokens in reading order.
pub fn first_n_tokens(sentences: &[AnnotatedSentence], n: usize) -> Vec<ContextualExample> {
    tokens_in_order(sentences)
        .take(n)
        .map(|(s, i, _)| example_at(s, i))
        .collect()
}

/// The first occurrence of each of the first `n` distinct forms. A form seen
/// with several lemmas keeps the lemma of its first occurrence.
pub fn first_n_types(sentences: &[AnnotatedSentence], n: usize) -> Vec<ContextualExample> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (s, i, t) in tokens_in_order(sentences) {
        if out.len() >= n {
            break;
        }
        if seen.insert(t.form.as_str()) {
            out.push(example_at(s, i));
        }
    }
    out
}

/// Every token as an example; the evaluation view of a treebank.
pub fn all_tokens(sentences: &[AnnotatedSentence]) -> Vec<ContextualExample> {
    first_n_tokens(sentences, usize::MAX)
}

/// Token-level (form, lemma) counts over a reference treebank.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LemmaCounts {
    counts: BTreeMap<String, BTreeMap<String, usize>>,
}

impl LemmaCounts {
    pub fn from_sentences(sentences: &[AnnotatedSentence]) -> Self {
        let mut c = LemmaCounts::default();
        for (_, _, t) in tokens_in_order(sentences) {
            c.add(&t.form, &t.lemma);
        }
        c
    }

    pub fn from_pairs<F: AsRef<str>, L: AsRef<str>>(
        pairs: impl IntoIterator<Item = (F, L)>,
    ) -> Self {
        let mut c = LemmaCounts::default();
        for (f, l) in pairs {
            c.add(f.as_ref(), l.as_ref());
        }
        c
    }

    pub fn add(&mut self, form: &str, lemma: &str) {
        self.add_n(form, lemma, 1);
    }

    pub fn add_n(&mut self, form: &str, lemma: &str, n: usize) {
        *self
            .counts
            .entry(form.to_owned())
            .or_default()
            .entry(lemma.to_owned())
            .or_insert(0) += n;
    }

    pub fn lemmas(&self, form: &str) -> Option<&BTreeMap<String, usize>> {
        self.counts.get(form)
    }

    pub fn forms(&self) -> impl Iterator<Item = &String> {
        self.counts.keys()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(id: &str, form: &str, lemma: &str) -> String {
        format!("{id}\t{form}\t{lemma}\t_\t_\t_\t_\t_\t_\t_\n")
    }

    fn sents(forms: &[&[&str]]) -> Vec<AnnotatedSentence> {
        forms
            .iter()
            .map(|s| AnnotatedSentence {
                tokens: s
                    .iter()
                    .map(|f| Token {
                        form: f.to_string(),
                        lemma: f.to_uppercase(),
                    })
                    .collect(),
            })
            .collect()
    }

    #[test]
    fn two_token_sentence() {
        let text = format!(
            "# sent_id = 1\n{}{}\n",
            row("1", "Sveiki", "sveiki"),
            row("2", "!", "!")
        );
        let s = parse_conllu(&text).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].len(), 2);
        assert_eq!(s[0].tokens[0].lemma, "sveiki");
    }

    #[test]
    fn multiword_ranges_and_empty_nodes_are_skipped() {
        let text = [
            row("1", "Vámonos", "_"),
            row("2", "a", "a"),
            row("3-4", "del", "_"),
            row("3", "de", "de"),
            row("4", "el", "el"),
            row("4.1", "x", "x"),
        ]
        .concat();
        let s = parse_conllu(&text).unwrap();
        let forms: Vec<_> = s[0].tokens.iter().map(|t| t.form.as_str()).collect();
        assert_eq!(forms, vec!["Vámonos", "a", "de", "el"]);
    }

    #[test]
    fn blocks_become_sentences_in_order() {
        let text = format!("{}\n{}\n", row("1", "a", "a"), row("1", "b", "b"));
        let s = parse_conllu(&text).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].tokens[0].form, "a");
        assert_eq!(s[1].tokens[0].form, "b");
    }

    #[test]
    fn wrong_column_count_reports_line() {
        let text = format!("# c\n{}1\tbad\tline\n", row("1", "a", "a"));
        match parse_conllu(&text).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn conllu_write_read_round_trip() {
        let s = sents(&[&["a", "b"], &["c"]]);
        assert_eq!(parse_conllu(&write_conllu(&s)).unwrap(), s);
    }

    #[test]
    fn first_tokens() {
        let s = sents(&[&["a", "b"], &["c"]]);
        let ex = first_n_tokens(&s, 2);
        assert_eq!(
            ex.iter().map(|e| e.form.as_str()).collect::<Vec<_>>(),
            vec!["a", "b"]
        );
        assert!(first_n_tokens(&s, 0).is_empty());
        assert_eq!(first_n_tokens(&s, 100).len(), 3);
    }

    #[test]
    fn first_types_at_first_occurrence() {
        let s = sents(&[&["a", "b", "a"], &["c", "b"]]);
        let ex = first_n_types(&s, 3);
        let got: Vec<_> = ex
            .iter()
            .map(|e| (e.form.as_str(), e.sentence.len(), e.target_index))
            .collect();
        assert_eq!(got, vec![("a", 3, 0), ("b", 3, 1), ("c", 2, 0)]);
        assert_eq!(ex[2].sentence, vec!["c", "b"]);
        assert_eq!(first_n_types(&s, 1).len(), 1);
        let same = sents(&[&["x", "x", "x"]]);
        assert_eq!(first_n_types(&same, 5).len(), 1);
    }

    #[test]
    fn first_type_keeps_first_lemma() {
        let mut s = sents(&[&["a"], &["a"]]);
        s[1].tokens[0].lemma = "other".into();
        assert_eq!(first_n_types(&s, 5)[0].lemma, "A");
    }

    fn corpus() -> impl Strategy<Value = Vec<AnnotatedSentence>> {
        let word = prop::sample::select(vec!["a", "b", "c", "d", "e", "f"]);
        prop::collection::vec(prop::collection::vec(word, 1..6), 0..8).prop_map(|v| {
            v.into_iter()
                .map(|s| AnnotatedSentence {
                    tokens: s
                        .into_iter()
                        .map(|f| Token {
                            form: f.to_owned(),
                            lemma: f.to_owned(),
                        })
                        .collect(),
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn sampling_invariants(s in corpus(), n in 0usize..20) {
            let distinct: HashSet<_> = s.iter().flat_map(|x| x.tokens.iter().map(|t| t.form.clone())).collect();
            let types = first_n_types(&s, n);
            prop_assert_eq!(types.len(), n.min(distinct.len()));
            let forms: HashSet<_> = types.iter().map(|e| e.form.clone()).collect();
            prop_assert_eq!(forms.len(), types.len());

            let a = first_n_tokens(&s, n);
            let b = first_n_tokens(&s, n + 1);
            prop_assert_eq!(&b[..a.len()], &a[..]);
            prop_assert!(types.iter().chain(a.iter()).all(ContextualExample::is_consistent));
        }
    }
}
