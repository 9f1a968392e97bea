//! Synthetic morphology with controllable homography and context cues.
//!
//! Every lemma belongs to one inflection class and realizes each slot as
//! `stem + suffix(class, slot)`; the slot-0 form is the lemma. Homographs are
//! made by giving some stems a second lemma in another class whose forms in
//! half of the non-citation slots use the first class's suffixes, so those
//! forms belong to two lemmas. In the corpus each inflected word may be
//! preceded by a one-letter cue naming its class.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::treebank::{AnnotatedSentence, Token};
use crate::unimorph::{InflectionEntry, Lexicon};

const CONSONANTS: &[char] = &[
    'b', 'd', 'g', 'k', 'l', 'm', 'n', 'p', 'r', 's', 't', 'v', 'z',
];
const VOWELS: &[char] = &['a', 'e', 'i', 'o', 'u'];
/// Cue tokens, one per class; disjoint from the lowercase stem alphabet.
const CUES: &[&str] = &["Q", "W", "X", "Y", "Z", "H", "J", "F"];
pub const SENTENCE_END: &str = ".";
pub const MIN_SENTENCE_LEN: usize = 5;
pub const MAX_SENTENCE_LEN: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_stems: usize,
    pub n_slots: usize,
    pub n_classes: usize,
    /// Target share of distinct forms that belong to two lemmas.
    pub homography_rate: f64,
    /// Probability that an inflected word is preceded by its class cue.
    pub cue_strength: f64,
    /// Sentences produced by [`gen_corpus`].
    pub corpus_size: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_stems: 200,
            n_slots: 8,
            n_classes: 4,
            homography_rate: 0.2,
            cue_strength: 1.0,
            corpus_size: 2000,
            seed: 1,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_stems == 0 || self.n_slots < 2 || self.n_classes == 0 {
            return Err(Error::Config(
                "need at least 1 stem, 2 slots and 1 class".into(),
            ));
        }
        if self.n_classes > CUES.len() {
            return Err(Error::Config(format!("at most {} classes", CUES.len())));
        }
        if !(0.0..=1.0).contains(&self.homography_rate) || !(0.0..=1.0).contains(&self.cue_strength)
        {
            return Err(Error::Config(
                "homography_rate and cue_strength must lie in [0, 1]".into(),
            ));
        }
        if self.n_classes * self.n_slots > suffix_inventory().len() {
            return Err(Error::Config(
                "not enough distinct suffixes for classes × slots".into(),
            ));
        }
        let stems = CONSONANTS.len().pow(3) * VOWELS.len().pow(2);
        if self.n_stems > stems {
            return Err(Error::Config(format!("at most {stems} stems")));
        }
        self.homograph_pairs()?;
        Ok(())
    }

    /// Slots per homograph pair whose forms coincide.
    fn shared_slots(&self) -> usize {
        self.n_slots.div_ceil(2).min(self.n_slots - 1)
    }

    /// Stems carrying two lemmas. With S stems, n slots, k shared slots and
    /// P pairs there are S·n + P·(n−k) forms of which P·k are ambiguous.
    pub fn homograph_pairs(&self) -> Result<usize> {
        let r = self.homography_rate;
        if r == 0.0 {
            return Ok(0);
        }
        if self.n_classes < 2 {
            return Err(Error::Config("homography needs at least 2 classes".into()));
        }
        let (s, n, k) = (
            self.n_stems as f64,
            self.n_slots as f64,
            self.shared_slots() as f64,
        );
        let denom = k - r * (n - k);
        if denom <= 0.0 {
            return Err(Error::Config(format!(
                "homography_rate {r} is unreachable with {} slots",
                self.n_slots
            )));
        }
        let pairs = (r * s * n / denom).round() as usize;
        if pairs > self.n_stems {
            return Err(Error::Config(format!(
                "homography_rate {r} needs {pairs} homograph stems but only {} exist",
                self.n_stems
            )));
        }
        Ok(pairs)
    }

    pub const KEYS: &'static [&'static str] = &[
        "n_stems",
        "n_slots",
        "n_classes",
        "homography_rate",
        "cue_strength",
        "corpus_size",
        "seed",
    ];

    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let d = SynthConfig::default();
        let c = SynthConfig {
            n_stems: kv.get_or("n_stems", d.n_stems)?,
            n_slots: kv.get_or("n_slots", d.n_slots)?,
            n_classes: kv.get_or("n_classes", d.n_classes)?,
            homography_rate: kv.get_or("homography_rate", d.homography_rate)?,
            cue_strength: kv.get_or("cue_strength", d.cue_strength)?,
            corpus_size: kv.get_or("corpus_size", d.corpus_size)?,
            seed: kv.get_or("seed", d.seed)?,
        };
        c.validate()?;
        Ok(c)
    }
}

/// Vowel-initial suffixes: V, then VC.
fn suffix_inventory() -> Vec<String> {
    let mut out: Vec<String> = VOWELS.iter().map(|v| v.to_string()).collect();
    for v in VOWELS {
        for c in CONSONANTS {
            out.push(format!("{v}{c}"));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthLemma {
    pub lemma: String,
    pub stem: String,
    pub class: usize,
    /// One form per slot; slot 0 is the lemma itself.
    pub forms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthLanguage {
    pub config: SynthConfig,
    /// `suffixes[class][slot]`
    pub suffixes: Vec<Vec<String>>,
    pub lemmas: Vec<SynthLemma>,
    pub lexicon: Lexicon,
}

impl SynthLanguage {
    pub fn cue(class: usize) -> &'static str {
        CUES[class]
    }

    pub fn is_cue(token: &str) -> bool {
        CUES.contains(&token)
    }

    /// Forms listed in the lexicon.
    pub fn forms(&self) -> BTreeSet<String> {
        self.lexicon.form_index().keys().cloned().collect()
    }

    /// Forms that belong to more than one lemma.
    pub fn ambiguous_forms(&self) -> BTreeSet<String> {
        self.lexicon
            .form_index()
            .iter()
            .filter(|(_, l)| l.len() > 1)
            .map(|(f, _)| f.clone())
            .collect()
    }
}

/// Builds the lexicon. Deterministic in the configuration.
pub fn gen_paradigms(config: &SynthConfig) -> Result<SynthLanguage> {
    config.validate()?;
    let mut rng = SeededRng::new(config.seed);
    let (n, c) = (config.n_slots, config.n_classes);

    let mut inventory = suffix_inventory();
    rng.shuffle(&mut inventory);
    let suffixes: Vec<Vec<String>> = (0..c)
        .map(|k| inventory[k * n..(k + 1) * n].to_vec())
        .collect();

    let mut stems = BTreeSet::new();
    let mut stem_order = Vec::with_capacity(config.n_stems);
    while stem_order.len() < config.n_stems {
        let s: String = [
            *rng.choose(CONSONANTS),
            *rng.choose(VOWELS),
            *rng.choose(CONSONANTS),
            *rng.choose(VOWELS),
            *rng.choose(CONSONANTS),
        ]
        .iter()
        .collect();
        if stems.insert(s.clone()) {
            stem_order.push(s);
        }
    }

    let pairs = config.homograph_pairs()?;
    let paired: BTreeSet<usize> = rng
        .sample_indices(config.n_stems, pairs)
        .into_iter()
        .collect();
    let k = config.shared_slots();

    let mut lemmas = Vec::new();
    for (i, stem) in stem_order.iter().enumerate() {
        let class = rng.below(c);
        let make = |cls: usize| -> Vec<String> {
            suffixes[cls].iter().map(|s| format!("{stem}{s}")).collect()
        };
        let forms = make(class);
        lemmas.push(SynthLemma {
            lemma: forms[0].clone(),
            stem: stem.clone(),
            class,
            forms: forms.clone(),
        });
        if paired.contains(&i) {
            let other = (class + 1 + rng.below(c - 1)) % c;
            let mut shadow = make(other);
            for slot in rng.sample_indices(n - 1, k) {
                shadow[slot + 1] = forms[slot + 1].clone();
            }
            lemmas.push(SynthLemma {
                lemma: shadow[0].clone(),
                stem: stem.clone(),
                class: other,
                forms: shadow,
            });
        }
    }

    let entries = lemmas.iter().flat_map(|l| {
        l.forms
            .iter()
            .enumerate()
            .map(move |(slot, f)| InflectionEntry {
                lemma: l.lemma.clone(),
                form: f.clone(),
                features: vec![
                    "N".to_owned(),
                    format!("SLOT{slot}"),
                    format!("CLASS{}", l.class),
                ],
            })
    });
    Ok(SynthLanguage {
        config: config.clone(),
        suffixes,
        lexicon: Lexicon::from_entries(entries),
        lemmas,
    })
}

/// Generates `config.corpus_size` sentences of
/// [`MIN_SENTENCE_LEN`]..=[`MAX_SENTENCE_LEN`] tokens. Lemmas are drawn
/// uniformly, so the two readings of a homograph are equally frequent; the
/// slot is drawn uniformly as well. A cue that would overflow the sentence
/// is replaced by a final [`SENTENCE_END`].
pub fn gen_corpus(language: &SynthLanguage, config: &SynthConfig) -> Vec<AnnotatedSentence> {
    let mut rng = SeededRng::new(config.seed ^ 0x636f_7270_7573);
    let mut out = Vec::with_capacity(config.corpus_size);
    for _ in 0..config.corpus_size {
        let len = MIN_SENTENCE_LEN + rng.below(MAX_SENTENCE_LEN - MIN_SENTENCE_LEN + 1);
        let mut tokens = Vec::with_capacity(len);
        while tokens.len() < len {
            let lemma = rng.choose(&language.lemmas);
            let slot = rng.below(lemma.forms.len());
            let cued = rng.coin(config.cue_strength);
            if cued && tokens.len() + 2 > len {
                tokens.push(Token {
                    form: SENTENCE_END.to_owned(),
                    lemma: SENTENCE_END.to_owned(),
                });
                break;
            }
            if cued {
                let cue = SynthLanguage::cue(lemma.class);
                tokens.push(Token {
                    form: cue.to_owned(),
                    lemma: cue.to_owned(),
                });
            }
            tokens.push(Token {
                form: lemma.forms[slot].clone(),
                lemma: lemma.lemma.clone(),
            });
        }
        out.push(AnnotatedSentence { tokens });
    }
    out
}
