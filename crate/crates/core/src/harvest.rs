//! Sentence contexts for unambiguous inflection-table forms.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::corpus::RawCorpus;
use crate::error::{Error, Result};
use crate::example::ContextualExample;
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HarvestSummary {
    pub types_requested: usize,
    pub types_found: usize,
    pub contexts_per_type: usize,
    /// Forms with enough contexts to be selectable (j-per-type mode only).
    pub eligible_types: Option<usize>,
}

impl HarvestSummary {
    pub fn under_collected(&self) -> bool {
        self.types_found < self.types_requested
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Harvest {
    pub examples: Vec<ContextualExample>,
    pub summary: HarvestSummary,
}

/// form → lemma; forms listed with more than one lemma are dropped.
fn lemma_lookup(pairs: &BTreeSet<(String, String)>) -> HashMap<&str, &str> {
    let mut by_form: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (f, l) in pairs {
        by_form.entry(f).or_default().push(l);
    }
    by_form
        .into_iter()
        .filter(|(_, ls)| ls.len() == 1)
        .map(|(f, ls)| (f, ls[0]))
        .collect()
}

fn example(corpus: &RawCorpus, sentence: usize, token: usize, lemma: &str) -> ContextualExample {
    let s = &corpus.sentences[sentence];
    ContextualExample {
        sentence: s.clone(),
        target_index: token,
        form: s[token].clone(),
        lemma: lemma.to_owned(),
    }
}

/// Scans the (already shuffled) corpus and keeps the first context of each
/// unambiguous form until `n` distinct forms are collected.
pub fn harvest_first_n(
    corpus: &RawCorpus,
    unambiguous: &BTreeSet<(String, String)>,
    n: usize,
) -> Harvest {
    let lookup = lemma_lookup(unambiguous);
    let mut collected = HashMap::new();
    let mut examples = Vec::new();
    'scan: for (si, sentence) in corpus.sentences.iter().enumerate() {
        for (ti, token) in sentence.iter().enumerate() {
            if examples.len() >= n {
                break 'scan;
            }
            if let Some(&lemma) = lookup.get(token.as_str()) {
                if collected.insert(token.as_str(), ()).is_none() {
                    examples.push(example(corpus, si, ti, lemma));
                }
            }
        }
    }
    Harvest {
        summary: HarvestSummary {
            types_requested: n,
            types_found: examples.len(),
            contexts_per_type: 1,
            eligible_types: None,
        },
        examples,
    }
}

/// Picks `n` forms uniformly among those with at least `j` contexts, then `j`
/// of each form's contexts uniformly without replacement. Output is grouped
/// by form in selection order; contexts within a form keep corpus order.
pub fn harvest_j_per_type(
    corpus: &RawCorpus,
    unambiguous: &BTreeSet<(String, String)>,
    n: usize,
    j: usize,
    seed: u64,
) -> Result<Harvest> {
    if j == 0 {
        return Err(Error::Input("contexts per type must be at least 1".into()));
    }
    let lookup = lemma_lookup(unambiguous);

    // form -> contexts, forms in first-occurrence order
    let mut order: Vec<&str> = Vec::new();
    let mut contexts: HashMap<&str, Vec<(usize, usize)>> = HashMap::new();
    for (si, sentence) in corpus.sentences.iter().enumerate() {
        for (ti, token) in sentence.iter().enumerate() {
            if lookup.contains_key(token.as_str()) {
                let entry = contexts.entry(token.as_str()).or_default();
                if entry.is_empty() {
                    order.push(token.as_str());
                }
                entry.push((si, ti));
            }
        }
    }
    let eligible: Vec<&str> = order
        .into_iter()
        .filter(|f| contexts[f].len() >= j)
        .collect();

    let mut rng = SeededRng::new(seed);
    let chosen = rng.sample_indices(eligible.len(), n);
    let mut examples = Vec::with_capacity(chosen.len() * j);
    for &k in &chosen {
        let form = eligible[k];
        let ctx = &contexts[form];
        let mut picks = rng.sample_indices(ctx.len(), j);
        picks.sort_unstable();
        for p in picks {
            let (si, ti) = ctx[p];
            examples.push(example(corpus, si, ti, lookup[form]));
        }
    }
    Ok(Harvest {
        summary: HarvestSummary {
            types_requested: n,
            types_found: chosen.len(),
            contexts_per_type: j,
            eligible_types: Some(eligible.len()),
        },
        examples,
    })
}
