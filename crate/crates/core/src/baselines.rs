//! Most-frequent-lemma lookup and autoencoding augmentation.

use std::collections::BTreeMap;

use crate::encoding::{encode_input, encode_output, EncodedExample};
use crate::error::{Error, Result};
use crate::example::ContextualExample;
use crate::rng::SeededRng;

/// Form → lemma → count.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MflTable {
    counts: BTreeMap<String, BTreeMap<String, usize>>,
}

impl MflTable {
    pub fn lemmas(&self, form: &str) -> Option<&BTreeMap<String, usize>> {
        self.counts.get(form)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// `form<TAB>lemma<TAB>count`, sorted.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (form, lemmas) in &self.counts {
            for (lemma, n) in lemmas {
                out.push_str(&format!("{form}\t{lemma}\t{n}\n"));
            }
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut table = MflTable::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(Error::parse(i + 1, "expected form, lemma and count"));
            }
            let n: usize = cols[2]
                .trim()
                .parse()
                .map_err(|_| Error::parse(i + 1, format!("bad count {:?}", cols[2])))?;
            *table
                .counts
                .entry(crate::nfc(cols[0]))
                .or_default()
                .entry(crate::nfc(cols[1]))
                .or_default() += n;
        }
        Ok(table)
    }
}

pub fn train_mfl<F, L>(pairs: impl IntoIterator<Item = (F, L)>) -> MflTable
where
    F: AsRef<str>,
    L: AsRef<str>,
{
    let mut table = MflTable::default();
    for (form, lemma) in pairs {
        *table
            .counts
            .entry(form.as_ref().to_owned())
            .or_default()
            .entry(lemma.as_ref().to_owned())
            .or_default() += 1;
    }
    table
}

/// The most frequent lemma of `form`, breaking ties uniformly at random; an
/// unknown form is returned unchanged.
pub fn predict_mfl(form: &str, table: &MflTable, rng: &mut SeededRng) -> String {
    let Some(lemmas) = table.lemmas(form) else {
        return form.to_owned();
    };
    let top = lemmas.values().copied().max().unwrap_or(0);
    let tied: Vec<&String> = lemmas
        .iter()
        .filter(|(_, &n)| n == top)
        .map(|(l, _)| l)
        .collect();
    if tied.len() == 1 {
        tied[0].clone()
    } else {
        rng.choose(&tied).to_string()
    }
}

/// Autoencoding examples: the form (with `width` symbols of context) mapped
/// to its own characters.
pub fn build_ae_augmentation_with_width(
    examples: &[ContextualExample],
    width: usize,
) -> Vec<EncodedExample> {
    examples
        .iter()
        .map(|e| EncodedExample {
            source: encode_input(e, width),
            target: encode_output(&e.form),
        })
        .collect()
}

/// Autoencoding examples without context.
pub fn build_ae_augmentation(examples: &[ContextualExample]) -> Vec<EncodedExample> {
    build_ae_augmentation_with_width(examples, 0)
}

/// Concatenates the sets in order, then applies one seeded shuffle.
pub fn mix_training_sets<T: Clone>(sets: &[&[T]], seed: u64) -> Vec<T> {
    let mut all: Vec<T> = sets.iter().flat_map(|s| s.iter().cloned()).collect();
    SeededRng::new(seed).shuffle(&mut all);
    all
}
