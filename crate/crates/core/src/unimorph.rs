//! UniMorph inflection tables.
//!
//! A [`Lexicon`] holds every `lemma<TAB>form<TAB>features` cell of the loaded
//! tables together with an index from each form to the set of lemmas it
//! realizes. A form is *unambiguous* when that set has exactly one member;
//! only those forms are used for augmentation, since a corpus occurrence of an
//! ambiguous form cannot be labeled without context.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::nfc;
use crate::treebank::LemmaCounts;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InflectionEntry {
    pub lemma: String,
    pub form: String,
    /// Feature tags in file order, e.g. `["N", "DAT", "SG"]`.
    pub features: Vec<String>,
}

impl InflectionEntry {
    /// Part of speech, taken as the first feature tag.
    pub fn pos(&self) -> Option<&str> {
        self.features.first().map(String::as_str)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: Vec<InflectionEntry>,
    form_index: BTreeMap<String, BTreeSet<String>>,
}

impl Lexicon {
    /// Builds a lexicon from entries, collapsing exact duplicates.
    pub fn from_entries(entries: impl IntoIterator<Item = InflectionEntry>) -> Self {
        let mut seen = HashSet::new();
        let entries: Vec<_> = entries
            .into_iter()
            .filter(|e| seen.insert(e.clone()))
            .collect();
        let form_index = index_forms(&entries);
        Lexicon {
            entries,
            form_index,
        }
    }

    pub fn entries(&self) -> &[InflectionEntry] {
        &self.entries
    }

    pub fn form_index(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.form_index
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lemmas_of(&self, form: &str) -> Option<&BTreeSet<String>> {
        self.form_index.get(form)
    }

    /// Recomputes the form index from the entries alone.
    pub fn rebuild_index(&self) -> BTreeMap<String, BTreeSet<String>> {
        index_forms(&self.entries)
    }

    /// Serializes back to UniMorph TSV, one entry per line.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.lemma);
            out.push('\t');
            out.push_str(&e.form);
            out.push('\t');
            out.push_str(&e.features.join(";"));
            out.push('\n');
        }
        out
    }
}

fn index_forms(entries: &[InflectionEntry]) -> BTreeMap<String, BTreeSet<String>> {
    let mut index: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for e in entries {
        index
            .entry(e.form.clone())
            .or_default()
            .insert(e.lemma.clone());
    }
    index
}

/// Parses UniMorph TSV given as raw bytes.
pub fn parse_unimorph_bytes(bytes: &[u8]) -> Result<Lexicon> {
    let text = String::from_utf8(bytes.to_vec())?;
    parse_unimorph(&text)
}

/// Parses UniMorph TSV: `lemma<TAB>form[<TAB>features]` per line, blank lines
/// allowed. Strings are NFC-normalized; no case folding is applied.
pub fn parse_unimorph(text: &str) -> Result<Lexicon> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split('\t');
        let lemma = cols.next().unwrap_or("").trim();
        let form = match cols.next() {
            Some(f) => f.trim(),
            None => {
                return Err(Error::parse(
                    i + 1,
                    "expected at least 2 tab-separated columns (lemma, form)",
                ))
            }
        };
        if lemma.is_empty() || form.is_empty() {
            return Err(Error::parse(i + 1, "empty lemma or form"));
        }
        let features = cols
            .next()
            .map(|f| {
                f.trim()
                    .split(';')
                    .filter(|t| !t.is_empty())
                    .map(str::to_owned)
                    .collect()
            })
            .unwrap_or_default();
        entries.push(InflectionEntry {
            lemma: nfc(lemma),
            form: nfc(form),
            features,
        });
    }
    Ok(Lexicon::from_entries(entries))
}

/// All `(form, lemma)` pairs whose form realizes exactly one lemma.
pub fn unambiguous_pairs(lexicon: &Lexicon) -> BTreeSet<(String, String)> {
    lexicon
        .form_index
        .iter()
        .filter(|(_, lemmas)| lemmas.len() == 1)
        .map(|(form, lemmas)| (form.clone(), lemmas.iter().next().unwrap().clone()))
        .collect()
}

/// Serializes pairs as `form<TAB>lemma` lines.
pub fn pairs_to_tsv(pairs: &BTreeSet<(String, String)>) -> String {
    let mut out = String::new();
    for (form, lemma) in pairs {
        out.push_str(form);
        out.push('\t');
        out.push_str(lemma);
        out.push('\n');
    }
    out
}

pub fn parse_pairs(text: &str) -> Result<BTreeSet<(String, String)>> {
    let mut pairs = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (form, lemma) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(i + 1, "expected form<TAB>lemma"))?;
        let (form, lemma) = (form.trim(), lemma.trim());
        if form.is_empty() || lemma.is_empty() {
            return Err(Error::parse(i + 1, "empty form or lemma"));
        }
        pairs.insert((nfc(form), nfc(lemma)));
    }
    Ok(pairs)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FormCounts {
    pub total: usize,
    pub unambiguous: usize,
    pub ambiguous: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AmbiguityReport {
    pub forms: FormCounts,
    /// Counts restricted to forms carrying a given part-of-speech tag. A form
    /// listed under several parts of speech is counted under each.
    pub per_pos: BTreeMap<String, FormCounts>,
    /// Types unambiguous in both the tables and a treebank but with different
    /// lemmas. Only present when a treebank was supplied.
    pub resource_conflicts: Option<usize>,
}

pub fn ambiguity_report(lexicon: &Lexicon) -> AmbiguityReport {
    let mut forms = FormCounts::default();
    for lemmas in lexicon.form_index.values() {
        forms.total += 1;
        if lemmas.len() == 1 {
            forms.unambiguous += 1;
        } else {
            forms.ambiguous += 1;
        }
    }

    let mut pos_forms: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for e in &lexicon.entries {
        if let Some(pos) = e.pos() {
            pos_forms.entry(pos).or_default().insert(&e.form);
        }
    }
    let per_pos = pos_forms
        .into_iter()
        .map(|(pos, set)| {
            let mut c = FormCounts::default();
            for form in set {
                c.total += 1;
                if lexicon.form_index[form].len() == 1 {
                    c.unambiguous += 1;
                } else {
                    c.ambiguous += 1;
                }
            }
            (pos.to_owned(), c)
        })
        .collect();

    AmbiguityReport {
        forms,
        per_pos,
        resource_conflicts: None,
    }
}

/// Like [`ambiguity_report`], additionally counting lemma conflicts against a
/// treebank: forms that are unambiguous in both resources but disagree on
/// the lemma.
pub fn ambiguity_report_with_treebank(
    lexicon: &Lexicon,
    treebank: &LemmaCounts,
) -> AmbiguityReport {
    let mut report = ambiguity_report(lexicon);
    let conflicts = unambiguous_pairs(lexicon)
        .iter()
        .filter(|(form, lemma)| match treebank.lemmas(form) {
            Some(counts) if counts.len() == 1 => counts.keys().next() != Some(lemma),
            _ => false,
        })
        .count();
    report.resource_conflicts = Some(conflicts);
    report
}
