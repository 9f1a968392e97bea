//! Exact-match accuracy over type partitions, plus significance testing.

mod significance;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use significance::{
    exact_significance, mc_significance, parse_scores, SignificanceResult, MAX_EXACT_LANGUAGES,
};

use crate::error::{Error, Result};
use crate::treebank::LemmaCounts;

/// Entropy threshold above which a form counts as ambiguous.
pub const AMBIGUITY_THRESHOLD: f64 = 0.1;

/// Empirical entropy in bits of a count distribution.
pub fn entropy_bits(counts: impl IntoIterator<Item = usize>) -> f64 {
    let counts: Vec<usize> = counts.into_iter().filter(|&c| c > 0).collect();
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let h: f64 = counts
        .iter()
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.log2()
        })
        .sum();
    h.max(0.0)
}

/// Entropy of the form's lemma distribution in `reference` and whether it
/// exceeds [`AMBIGUITY_THRESHOLD`]. Unknown forms have entropy 0.
pub fn adjusted_ambiguity(form: &str, reference: &LemmaCounts) -> (f64, bool) {
    let h = reference
        .lemmas(form)
        .map_or(0.0, |l| entropy_bits(l.values().copied()));
    (h, h > AMBIGUITY_THRESHOLD)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionLabel {
    Ambiguous,
    Unseen,
    All,
}

impl PartitionLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            PartitionLabel::Ambiguous => "ambiguous",
            PartitionLabel::Unseen => "unseen",
            PartitionLabel::All => "all",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalPartition {
    pub label: PartitionLabel,
    pub types: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partitions {
    pub ambiguous: EvalPartition,
    pub unseen: EvalPartition,
    pub all: EvalPartition,
}

impl Partitions {
    pub fn iter(&self) -> impl Iterator<Item = &EvalPartition> {
        [&self.ambiguous, &self.unseen, &self.all].into_iter()
    }
}

/// Splits the distinct eval forms into ambiguous, unseen (not ambiguous and
/// in none of `training_forms`) and all.
pub fn partition_types<S: AsRef<str>>(
    eval_forms: &[S],
    training_forms: &[BTreeSet<String>],
    reference: &LemmaCounts,
) -> Partitions {
    let all: BTreeSet<String> = eval_forms.iter().map(|f| f.as_ref().to_owned()).collect();
    let mut ambiguous = BTreeSet::new();
    let mut unseen = BTreeSet::new();
    for form in &all {
        if adjusted_ambiguity(form, reference).1 {
            ambiguous.insert(form.clone());
        } else if !training_forms.iter().any(|t| t.contains(form)) {
            unseen.insert(form.clone());
        }
    }
    Partitions {
        ambiguous: EvalPartition {
            label: PartitionLabel::Ambiguous,
            types: ambiguous,
        },
        unseen: EvalPartition {
            label: PartitionLabel::Unseen,
            types: unseen,
        },
        all: EvalPartition {
            label: PartitionLabel::All,
            types: all,
        },
    }
}

/// How tokens of one type are combined into its score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TypeGrouping {
    /// Mean over all of the type's tokens.
    #[default]
    AllTokens,
    /// Only the type's first token counts.
    FirstToken,
}

fn check_lengths(forms: usize, predicted: usize, gold: usize) -> Result<()> {
    if forms != predicted || forms != gold {
        return Err(Error::Input(format!(
            "{predicted} predictions and {gold} gold lemmas for {forms} tokens"
        )));
    }
    Ok(())
}

/// Unweighted mean over the partition's types of per-type exact-match
/// accuracy. `None` when no token falls in the partition.
pub fn type_macro_accuracy<S: AsRef<str>, P: AsRef<str>, G: AsRef<str>>(
    forms: &[S],
    predicted: &[P],
    gold: &[G],
    partition: &EvalPartition,
    grouping: TypeGrouping,
) -> Result<Option<f64>> {
    check_lengths(forms.len(), predicted.len(), gold.len())?;
    let mut per_type: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for ((f, p), g) in forms.iter().zip(predicted).zip(gold) {
        let f = f.as_ref();
        if !partition.types.contains(f) {
            continue;
        }
        let entry = per_type.entry(f).or_default();
        if grouping == TypeGrouping::FirstToken && entry.1 > 0 {
            continue;
        }
        entry.1 += 1;
        if p.as_ref() == g.as_ref() {
            entry.0 += 1;
        }
    }
    if per_type.is_empty() {
        return Ok(None);
    }
    let sum: f64 = per_type.values().map(|&(c, n)| c as f64 / n as f64).sum();
    Ok(Some(sum / per_type.len() as f64))
}

/// Micro-averaged exact-match accuracy over tokens in the partition.
pub fn token_accuracy<S: AsRef<str>, P: AsRef<str>, G: AsRef<str>>(
    forms: &[S],
    predicted: &[P],
    gold: &[G],
    partition: &EvalPartition,
) -> Result<Option<f64>> {
    check_lengths(forms.len(), predicted.len(), gold.len())?;
    let (mut correct, mut total) = (0usize, 0usize);
    for ((f, p), g) in forms.iter().zip(predicted).zip(gold) {
        if partition.types.contains(f.as_ref()) {
            total += 1;
            correct += usize::from(p.as_ref() == g.as_ref());
        }
    }
    Ok((total > 0).then(|| correct as f64 / total as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionScore {
    pub partition: PartitionLabel,
    pub type_accuracy: Option<f64>,
    pub token_accuracy: Option<f64>,
    pub n_types: usize,
    pub n_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub build: String,
    pub config: BTreeMap<String, String>,
    pub rows: Vec<PartitionScore>,
}

impl EvalReport {
    pub fn row(&self, label: PartitionLabel) -> Option<&PartitionScore> {
        self.rows.iter().find(|r| r.partition == label)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain report") + "\n"
    }
}

/// Scores every partition.
pub fn evaluate<S: AsRef<str>, P: AsRef<str>, G: AsRef<str>>(
    forms: &[S],
    predicted: &[P],
    gold: &[G],
    partitions: &Partitions,
    grouping: TypeGrouping,
    config: BTreeMap<String, String>,
) -> Result<EvalReport> {
    let mut rows = Vec::new();
    for p in partitions.iter() {
        let n_tokens = forms
            .iter()
            .filter(|f| p.types.contains(f.as_ref()))
            .count();
        let n_types = forms
            .iter()
            .map(AsRef::as_ref)
            .filter(|f| p.types.contains(*f))
            .collect::<BTreeSet<_>>()
            .len();
        rows.push(PartitionScore {
            partition: p.label,
            type_accuracy: type_macro_accuracy(forms, predicted, gold, p, grouping)?,
            token_accuracy: token_accuracy(forms, predicted, gold, p)?,
            n_types,
            n_tokens,
        });
    }
    Ok(EvalReport {
        build: crate::BUILD_ID.to_owned(),
        config,
        rows,
    })
}
