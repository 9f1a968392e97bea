//! Character-level encoding of lemmatization examples.
//!
//! The source sequence is the target wordform wrapped in `<lc>` … `<rc>`,
//! flanked by up to `N` symbols of left and right context. Context words are
//! spelled out character by character and separated by `<s>`; both characters
//! and `<s>` count toward the budget of `N`, words at the edge of the window
//! are cut mid-word without any marker, and nothing is padded when the
//! sentence runs out. The target sequence is the characters of the lemma.
//!
//! ```text
//! N = 15:  s a k a <s> p a š v a l d ī b u <lc> c e ļ u <rc> u n <s> i e l u <s> r e ģ i s t r
//! N = 0:   <lc> c e ļ u <rc>
//! ```

use std::collections::{BTreeSet, HashMap};

use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::example::ContextualExample;

pub const LEFT_BOUNDARY: &str = "<lc>";
pub const RIGHT_BOUNDARY: &str = "<rc>";
pub const WORD_BOUNDARY: &str = "<s>";
pub const PAD: &str = "<pad>";
pub const EOS: &str = "<eos>";
pub const UNK: &str = "<unk>";

/// Context width meaning "the whole sentence".
pub const UNBOUNDED: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EncodedExample {
    pub source: Vec<String>,
    pub target: Vec<String>,
}

fn spell(word: &str) -> impl Iterator<Item = String> + '_ {
    word.nfc().map(String::from)
}

/// Context words joined by `<s>`, spelled out.
fn context_symbols(words: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    for (i, w) in words.iter().enumerate() {
        if i > 0 {
            out.push(WORD_BOUNDARY.to_owned());
        }
        out.extend(spell(w));
    }
    out
}

pub fn encode_input(example: &ContextualExample, width: usize) -> Vec<String> {
    let idx = example.target_index;
    let left = context_symbols(&example.sentence[..idx]);
    let right = context_symbols(&example.sentence[idx + 1..]);
    let left_start = left.len().saturating_sub(width);
    let right_end = right.len().min(width);

    let mut source =
        Vec::with_capacity(left.len() - left_start + right_end + example.form.len() + 2);
    source.extend_from_slice(&left[left_start..]);
    source.push(LEFT_BOUNDARY.to_owned());
    source.extend(spell(&example.form));
    source.push(RIGHT_BOUNDARY.to_owned());
    source.extend_from_slice(&right[..right_end]);
    source
}

/// One symbol per character of the lemma. Whitespace inside a lemma is
/// written as `<s>` so that symbol files stay space-separated.
pub fn encode_output(lemma: &str) -> Vec<String> {
    lemma
        .nfc()
        .map(|c| {
            if c.is_whitespace() {
                WORD_BOUNDARY.to_owned()
            } else {
                c.to_string()
            }
        })
        .collect()
}

/// Inverse of [`encode_output`]. Reserved symbols are dropped.
pub fn decode_output<S: AsRef<str>>(symbols: &[S]) -> String {
    symbols
        .iter()
        .map(AsRef::as_ref)
        .filter(|s| ![PAD, EOS, UNK, LEFT_BOUNDARY, RIGHT_BOUNDARY].contains(s))
        .map(|s| if s == WORD_BOUNDARY { " " } else { s })
        .collect()
}

pub fn encode_example(example: &ContextualExample, width: usize) -> EncodedExample {
    EncodedExample {
        source: encode_input(example, width),
        target: encode_output(&example.lemma),
    }
}

/// Checks the structural invariants of an encoded source/target pair.
pub fn validate(example: &EncodedExample) -> Result<()> {
    let lc: Vec<_> = positions(&example.source, LEFT_BOUNDARY);
    let rc: Vec<_> = positions(&example.source, RIGHT_BOUNDARY);
    if lc.len() != 1 || rc.len() != 1 || lc[0] >= rc[0] {
        return Err(Error::Invariant(
            "source needs exactly one <lc> followed by one <rc>".into(),
        ));
    }
    if example.source[lc[0] + 1..rc[0]]
        .iter()
        .any(|s| s == WORD_BOUNDARY)
    {
        return Err(Error::Invariant("word boundary inside the wordform".into()));
    }
    if example.target.is_empty() {
        return Err(Error::Invariant("empty target".into()));
    }
    Ok(())
}

fn positions(symbols: &[String], marker: &str) -> Vec<usize> {
    symbols
        .iter()
        .enumerate()
        .filter(|(_, s)| *s == marker)
        .map(|(i, _)| i)
        .collect()
}

/// Symbol ↔ id table. Ids 0, 1, 2 are padding, end-of-sequence and unknown;
/// the three boundary markers follow; content symbols come after in sorted
/// order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolVocab {
    symbols: Vec<String>,
    ids: HashMap<String, usize>,
}

impl SymbolVocab {
    pub const PAD_ID: usize = 0;
    pub const EOS_ID: usize = 1;
    pub const UNK_ID: usize = 2;

    pub fn from_symbols<I, S>(content: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let reserved = [PAD, EOS, UNK, LEFT_BOUNDARY, RIGHT_BOUNDARY, WORD_BOUNDARY];
        let sorted: BTreeSet<String> = content
            .into_iter()
            .map(|s| s.as_ref().to_owned())
            .filter(|s| !reserved.contains(&s.as_str()))
            .collect();
        let symbols: Vec<String> = reserved
            .iter()
            .map(|s| s.to_string())
            .chain(sorted)
            .collect();
        Self::from_ordered(symbols).expect("reserved and content symbols are distinct")
    }

    /// Restores a vocabulary with exactly this id order.
    pub fn from_ordered(symbols: Vec<String>) -> Result<Self> {
        let expected = [PAD, EOS, UNK];
        if symbols.len() < 3 || symbols[..3] != expected {
            return Err(Error::Invariant(
                "vocabulary must start with <pad> <eos> <unk>".into(),
            ));
        }
        let ids: HashMap<String, usize> = symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        if ids.len() != symbols.len() {
            return Err(Error::Invariant("duplicate symbol in vocabulary".into()));
        }
        Ok(SymbolVocab { symbols, ids })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn id(&self, symbol: &str) -> usize {
        self.ids.get(symbol).copied().unwrap_or(Self::UNK_ID)
    }

    pub fn symbol(&self, id: usize) -> &str {
        &self.symbols[id]
    }

    pub fn source_ids<S: AsRef<str>>(&self, source: &[S]) -> Vec<usize> {
        source.iter().map(|s| self.id(s.as_ref())).collect()
    }

    /// Target ids terminated by end-of-sequence.
    pub fn target_ids<S: AsRef<str>>(&self, target: &[S]) -> Vec<usize> {
        target
            .iter()
            .map(|s| self.id(s.as_ref()))
            .chain(std::iter::once(Self::EOS_ID))
            .collect()
    }

    /// Symbols for ids, stopping at end-of-sequence.
    pub fn decode(&self, ids: &[usize]) -> Vec<&str> {
        ids.iter()
            .take_while(|&&i| i != Self::EOS_ID)
            .map(|&i| self.symbol(i))
            .collect()
    }
}

pub fn build_vocab(examples: &[EncodedExample]) -> Result<SymbolVocab> {
    if examples.is_empty() {
        return Err(Error::Input(
            "cannot build a vocabulary from no examples".into(),
        ));
    }
    Ok(SymbolVocab::from_symbols(
        examples
            .iter()
            .flat_map(|e| e.source.iter().chain(e.target.iter())),
    ))
}

/// Renders a dataset as parallel `.src` / `.trg` texts.
pub fn write_dataset(examples: &[EncodedExample]) -> (String, String) {
    let mut src = String::new();
    let mut trg = String::new();
    for e in examples {
        src.push_str(&e.source.join(" "));
        src.push('\n');
        trg.push_str(&e.target.join(" "));
        trg.push('\n');
    }
    (src, trg)
}

pub fn parse_symbols(line: &str) -> Vec<String> {
    line.split_whitespace().map(str::to_owned).collect()
}

pub fn read_dataset(src: &str, trg: &str) -> Result<Vec<EncodedExample>> {
    let src_lines: Vec<&str> = src.lines().collect();
    let trg_lines: Vec<&str> = trg.lines().collect();
    if src_lines.len() != trg_lines.len() {
        return Err(Error::Input(format!(
            "source has {} lines but target has {}",
            src_lines.len(),
            trg_lines.len()
        )));
    }
    src_lines
        .iter()
        .zip(&trg_lines)
        .enumerate()
        .map(|(i, (s, t))| {
            let ex = EncodedExample {
                source: parse_symbols(s),
                target: parse_symbols(t),
            };
            validate(&ex).map_err(|e| Error::parse(i + 1, e.to_string()))?;
            Ok(ex)
        })
        .collect()
}
