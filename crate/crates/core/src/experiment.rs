//! End-to-end comparisons on synthetic data.
//!
//! A synthetic corpus is cut into a treebank training split, a development
//! split (early stopping), a test split (evaluation) and a raw remainder
//! whose lemmas are discarded and which serves as the harvesting corpus.
//! Only tokens whose form is in the lexicon become training or evaluation
//! examples; cue tokens stay in the sentences as context.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::baselines::{build_ae_augmentation, mix_training_sets, predict_mfl, train_mfl};
use crate::config::KeyValues;
use crate::corpus::RawCorpus;
use crate::encoding::{encode_example, EncodedExample};
use crate::error::{Error, Result};
use crate::eval::{partition_types, type_macro_accuracy, EvalPartition, Partitions, TypeGrouping};
use crate::example::ContextualExample;
use crate::harvest::harvest_first_n;
use crate::model::{train, ModelConfig, OptimizerConfig, TrainingSchedule};
use crate::rng::SeededRng;
use crate::synth::{gen_corpus, gen_paradigms, SynthConfig, SynthLanguage};
use crate::treebank::{all_tokens, AnnotatedSentence, LemmaCounts};
use crate::unimorph::unambiguous_pairs;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub synth: SynthConfig,
    /// Dimensions and decoding settings; the context width is set per arm.
    pub model: ModelConfig,
    pub schedule: TrainingSchedule,
    pub train_sentences: usize,
    pub dev_sentences: usize,
    pub test_sentences: usize,
    /// Distinct training forms taken from the treebank split.
    pub base_types: usize,
    /// Distinct forms harvested from the raw split.
    pub harvest_types: usize,
    /// Validation examples used for early stopping.
    pub dev_examples: usize,
    pub seeds: Vec<u64>,
}

impl ExperimentConfig {
    /// Keys other than the model, schedule and `synth.`-prefixed ones.
    pub const KEYS: &'static [&'static str] = &[
        "train_sentences",
        "dev_sentences",
        "test_sentences",
        "base_types",
        "harvest_types",
        "dev_examples",
        "seeds",
    ];

    /// Shared desk-scale setting: 16/32 dimensions, learning rate 0.003 and a
    /// short validation schedule. The labeled split is much larger than the
    /// 1000 base types drawn from its start so that the lemma counts used for
    /// ambiguity see most homographs with both lemmas.
    fn desk_scale(synth: SynthConfig, max_epochs: usize) -> Self {
        let mut schedule = TrainingSchedule::for_train_size(1000);
        schedule.burn_in = 10;
        schedule.validation_interval = 2;
        schedule.patience = 5;
        schedule.max_epochs = max_epochs;
        schedule.optimizer.learning_rate = 0.003;
        ExperimentConfig {
            synth: SynthConfig {
                corpus_size: 30_000,
                ..synth
            },
            model: ModelConfig {
                embed_dim: 16,
                hidden_dim: 32,
                max_target_len: 12,
                ..ModelConfig::default()
            },
            schedule,
            train_sentences: 12_000,
            dev_sentences: 300,
            test_sentences: 1000,
            base_types: 1000,
            harvest_types: 0,
            dev_examples: 500,
            seeds: vec![1, 2, 3],
        }
    }

    /// 200 stems, 8 slots, homography 0.2, full cue strength, 1000 training
    /// types, three seeds.
    pub fn context_preset() -> Self {
        Self::desk_scale(SynthConfig::default(), 60)
    }

    /// 1000 stems in 8 classes, 1000 base types plus 5000 harvested types,
    /// three seeds. Cues appear half the time: at full strength the cue alone
    /// names the class, and context models solve unseen forms without any
    /// extra data.
    pub fn augmentation_preset() -> Self {
        let synth = SynthConfig {
            n_stems: 1000,
            n_classes: 8,
            cue_strength: 0.5,
            ..SynthConfig::default()
        };
        ExperimentConfig {
            harvest_types: 5000,
            ..Self::desk_scale(synth, 80)
        }
    }

    /// Overrides `base` with the given keys: `synth.`-prefixed synthetic
    /// language keys, model and schedule keys, [`Self::KEYS`] and
    /// `seeds` as a comma-separated list. Unknown keys are rejected.
    pub fn from_key_values(kv: &KeyValues, base: ExperimentConfig) -> Result<Self> {
        let synth_kv = kv.strip_prefix("synth.");
        synth_kv.reject_unknown(SynthConfig::KEYS)?;
        let allowed: Vec<&str> = Self::KEYS
            .iter()
            .chain(ModelConfig::KEYS)
            .chain(TrainingSchedule::KEYS)
            .copied()
            .collect();
        for k in kv.keys().filter(|k| !k.starts_with("synth.")) {
            if !allowed.contains(&k) {
                return Err(Error::Config(format!("unknown key {k:?}")));
            }
        }

        let mut synth_all = KeyValues::default();
        for (k, v) in [
            ("n_stems", base.synth.n_stems.to_string()),
            ("n_slots", base.synth.n_slots.to_string()),
            ("n_classes", base.synth.n_classes.to_string()),
            ("homography_rate", base.synth.homography_rate.to_string()),
            ("cue_strength", base.synth.cue_strength.to_string()),
            ("corpus_size", base.synth.corpus_size.to_string()),
            ("seed", base.synth.seed.to_string()),
        ] {
            synth_all.set(k, synth_kv.get(k).map(str::to_owned).unwrap_or(v));
        }
        let synth = SynthConfig::from_key_values(&synth_all)?;

        let m = &base.model;
        let model = ModelConfig {
            embed_dim: kv.get_or("embed_dim", m.embed_dim)?,
            hidden_dim: kv.get_or("hidden_dim", m.hidden_dim)?,
            context_width: kv.get_or("context_width", m.context_width)?,
            beam_width: kv.get_or("beam_width", m.beam_width)?,
            max_target_len: kv.get_or("max_target_len", m.max_target_len)?,
            seed: kv.get_or("seed", m.seed)?,
        };
        let s = &base.schedule;
        let schedule = TrainingSchedule {
            patience: kv.get_or("patience", s.patience)?,
            burn_in: kv.get_or("burn_in", s.burn_in)?,
            validation_interval: kv.get_or("validation_interval", s.validation_interval)?,
            dev_validation_cap: kv.get_or("dev_validation_cap", s.dev_validation_cap)?,
            optimizer: OptimizerConfig {
                learning_rate: kv.get_or("learning_rate", s.optimizer.learning_rate)?,
                clip_norm: kv.get_or("clip_norm", s.optimizer.clip_norm)?,
                batch_size: kv.get_or("batch_size", s.optimizer.batch_size)?,
                ..s.optimizer.clone()
            },
            max_epochs: kv.get_or("max_epochs", s.max_epochs)?,
            threads: kv.get_or("threads", s.threads)?,
        };
        let seeds = match kv.get("seeds") {
            None => base.seeds.clone(),
            Some(list) => list
                .split(',')
                .map(|x| {
                    x.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("bad seed {x:?}")))
                })
                .collect::<Result<_>>()?,
        };
        let cfg = ExperimentConfig {
            synth,
            model,
            schedule,
            train_sentences: kv.get_or("train_sentences", base.train_sentences)?,
            dev_sentences: kv.get_or("dev_sentences", base.dev_sentences)?,
            test_sentences: kv.get_or("test_sentences", base.test_sentences)?,
            base_types: kv.get_or("base_types", base.base_types)?,
            harvest_types: kv.get_or("harvest_types", base.harvest_types)?,
            dev_examples: kv.get_or("dev_examples", base.dev_examples)?,
            seeds,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let needed = self.train_sentences + self.dev_sentences + self.test_sentences;
        if needed > self.synth.corpus_size {
            return Err(Error::Config(format!(
                "splits need {needed} sentences but the corpus has {}",
                self.synth.corpus_size
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        self.schedule.validate()?;
        self.model.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Augmentation {
    None,
    /// Harvested contexts with lemma supervision.
    Harvest,
    /// The harvested forms as autoencoding examples.
    Autoencode,
}

/// Everything derived from the synthetic language for one seed.
pub struct SeedData {
    pub language: SynthLanguage,
    pub base: Vec<ContextualExample>,
    pub harvest: Vec<ContextualExample>,
    pub dev: Vec<ContextualExample>,
    pub test: Vec<ContextualExample>,
    pub reference: LemmaCounts,
    pub partitions: Partitions,
}

fn lexicon_tokens(
    sentences: &[AnnotatedSentence],
    forms: &BTreeSet<String>,
) -> Vec<ContextualExample> {
    all_tokens(sentences)
        .into_iter()
        .filter(|e| forms.contains(&e.form))
        .collect()
}

fn first_types(examples: Vec<ContextualExample>, n: usize) -> Vec<ContextualExample> {
    let mut seen = HashSet::new();
    examples
        .into_iter()
        .filter(|e| seen.insert(e.form.clone()))
        .take(n)
        .collect()
}

impl SeedData {
    pub fn build(config: &ExperimentConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let synth = SynthConfig {
            seed,
            ..config.synth.clone()
        };
        let language = gen_paradigms(&synth)?;
        let corpus = gen_corpus(&language, &synth);
        let forms = language.forms();

        let (train_split, rest) = corpus.split_at(config.train_sentences);
        let (dev_split, rest) = rest.split_at(config.dev_sentences);
        let (test_split, raw_split) = rest.split_at(config.test_sentences);

        let base = first_types(lexicon_tokens(train_split, &forms), config.base_types);
        let dev: Vec<_> = lexicon_tokens(dev_split, &forms)
            .into_iter()
            .take(config.dev_examples)
            .collect();
        let test = lexicon_tokens(test_split, &forms);
        let raw = RawCorpus {
            sentences: raw_split.iter().map(AnnotatedSentence::forms).collect(),
            provenance: vec![format!("synthetic seed {seed}")],
        };
        let harvest = if config.harvest_types > 0 {
            harvest_first_n(
                &raw,
                &unambiguous_pairs(&language.lexicon),
                config.harvest_types,
            )
            .examples
        } else {
            Vec::new()
        };

        let reference = LemmaCounts::from_sentences(train_split);
        let trained: Vec<BTreeSet<String>> = vec![
            base.iter().map(|e| e.form.clone()).collect(),
            harvest.iter().map(|e| e.form.clone()).collect(),
        ];
        let test_forms: Vec<&str> = test.iter().map(|e| e.form.as_str()).collect();
        let partitions = partition_types(&test_forms, &trained, &reference);
        Ok(SeedData {
            language,
            base,
            harvest,
            dev,
            test,
            reference,
            partitions,
        })
    }

    pub fn training_set(
        &self,
        width: usize,
        augmentation: Augmentation,
        seed: u64,
    ) -> Vec<EncodedExample> {
        let base: Vec<_> = self.base.iter().map(|e| encode_example(e, width)).collect();
        let extra: Vec<_> = match augmentation {
            Augmentation::None => return base,
            Augmentation::Harvest => self
                .harvest
                .iter()
                .map(|e| encode_example(e, width))
                .collect(),
            Augmentation::Autoencode => build_ae_augmentation(&self.harvest),
        };
        mix_training_sets(&[&base, &extra], seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmResult {
    pub seed: u64,
    pub context_width: usize,
    pub augmentation: Augmentation,
    pub train_examples: usize,
    pub epochs: usize,
    pub ambiguous: Option<f64>,
    pub unseen: Option<f64>,
    pub all: Option<f64>,
}

fn score(
    test: &[ContextualExample],
    predicted: &[String],
    partition: &EvalPartition,
) -> Result<Option<f64>> {
    let forms: Vec<&str> = test.iter().map(|e| e.form.as_str()).collect();
    let gold: Vec<&str> = test.iter().map(|e| e.lemma.as_str()).collect();
    type_macro_accuracy(&forms, predicted, &gold, partition, TypeGrouping::AllTokens)
}

/// Trains one model and scores it on the test split.
pub fn run_arm(
    data: &SeedData,
    config: &ExperimentConfig,
    seed: u64,
    width: usize,
    augmentation: Augmentation,
) -> Result<ArmResult> {
    let model = ModelConfig {
        context_width: width,
        seed,
        ..config.model.clone()
    };
    let train_set = data.training_set(width, augmentation, seed);
    let dev: Vec<_> = data.dev.iter().map(|e| encode_example(e, width)).collect();
    let (lemmatizer, log) = train(&model, &train_set, &dev, &config.schedule, seed)?;
    let predicted = lemmatizer.lemmatize_all(&data.test, config.schedule.threads)?;
    Ok(ArmResult {
        seed,
        context_width: width,
        augmentation,
        train_examples: train_set.len(),
        epochs: log.records.len(),
        ambiguous: score(&data.test, &predicted, &data.partitions.ambiguous)?,
        unseen: score(&data.test, &predicted, &data.partitions.unseen)?,
        all: score(&data.test, &predicted, &data.partitions.all)?,
    })
}

/// Most-frequent-lemma baseline trained on the base types, for reference.
pub fn mfl_baseline(data: &SeedData, seed: u64) -> Result<BTreeMap<String, Option<f64>>> {
    let table = train_mfl(data.base.iter().map(|e| (&e.form, &e.lemma)));
    let mut rng = SeededRng::new(seed);
    let predicted: Vec<String> = data
        .test
        .iter()
        .map(|e| predict_mfl(&e.form, &table, &mut rng))
        .collect();
    let mut out = BTreeMap::new();
    for p in data.partitions.iter() {
        out.insert(
            p.label.as_str().to_owned(),
            score(&data.test, &predicted, p)?,
        );
    }
    Ok(out)
}

fn mean(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.into_iter().collect::<Option<_>>()?;
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextEffect {
    pub arms: Vec<ArmResult>,
    /// Mean ambiguous-type accuracy without context.
    pub no_context: Option<f64>,
    /// Mean ambiguous-type accuracy with context.
    pub with_context: Option<f64>,
}

impl ContextEffect {
    pub fn gain(&self) -> Option<f64> {
        Some(self.with_context? - self.no_context?)
    }
}

/// Ambiguous-type accuracy with and without `width` symbols of context,
/// averaged over the configured seeds.
pub fn context_effect(config: &ExperimentConfig, width: usize) -> Result<ContextEffect> {
    let mut arms = Vec::new();
    for &seed in &config.seeds {
        let data = SeedData::build(config, seed)?;
        for w in [0, width] {
            arms.push(run_arm(&data, config, seed, w, Augmentation::None)?);
        }
    }
    let pick = |w: usize| {
        mean(
            arms.iter()
                .filter(|a| a.context_width == w)
                .map(|a| a.ambiguous),
        )
    };
    Ok(ContextEffect {
        no_context: pick(0),
        with_context: pick(width),
        arms,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationRow {
    pub context_width: usize,
    pub base: Option<f64>,
    pub harvest: Option<f64>,
    /// Only run without context, where the autoencoding examples live.
    pub autoencode: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationEffect {
    pub arms: Vec<ArmResult>,
    /// Mean unseen-type accuracy per context width.
    pub rows: Vec<AugmentationRow>,
}

/// Unseen-type accuracy of base and base + harvested training sets at each
/// width, plus base + autoencoded at width 0, averaged over the configured
/// seeds.
pub fn augmentation_effect(
    config: &ExperimentConfig,
    widths: &[usize],
) -> Result<AugmentationEffect> {
    let mut arms = Vec::new();
    for &seed in &config.seeds {
        let data = SeedData::build(config, seed)?;
        for &w in widths {
            for aug in [
                Augmentation::None,
                Augmentation::Harvest,
                Augmentation::Autoencode,
            ] {
                if aug == Augmentation::Autoencode && w != 0 {
                    continue;
                }
                arms.push(run_arm(&data, config, seed, w, aug)?);
            }
        }
    }
    let rows = widths
        .iter()
        .map(|&w| {
            let pick = |aug: Augmentation| {
                mean(
                    arms.iter()
                        .filter(|a| a.context_width == w && a.augmentation == aug)
                        .map(|a| a.unseen),
                )
            };
            AugmentationRow {
                context_width: w,
                base: pick(Augmentation::None),
                harvest: pick(Augmentation::Harvest),
                autoencode: pick(Augmentation::Autoencode),
            }
        })
        .collect();
    Ok(AugmentationEffect { arms, rows })
}
