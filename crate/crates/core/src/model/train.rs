use serde::{Deserialize, Serialize};

use super::network::Batch;
use super::{clip_grad_norm, Adam, ModelConfig, OptimizerConfig, Parameters};
use crate::config::KeyValues;
use crate::encoding::{build_vocab, decode_output, encode_input, EncodedExample, SymbolVocab};
use crate::error::{Error, Result};
use crate::example::ContextualExample;
use crate::rng::SeededRng;

/// Largest training set that still gets the long burn-in schedule.
pub const SMALL_TRAIN_SET: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSchedule {
    pub patience: usize,
    pub burn_in: usize,
    pub validation_interval: usize,
    pub dev_validation_cap: usize,
    pub optimizer: OptimizerConfig,
    /// Hard limit on epochs in case early stopping never triggers.
    pub max_epochs: usize,
    /// Worker threads for gradient and decoding work. Results are
    /// reproducible for a fixed count.
    pub threads: usize,
}

impl TrainingSchedule {
    pub const KEYS: &'static [&'static str] = &[
        "patience",
        "burn_in",
        "validation_interval",
        "dev_validation_cap",
        "learning_rate",
        "clip_norm",
        "batch_size",
        "max_epochs",
        "threads",
    ];

    /// Burn-in 20 / interval 5 up to [`SMALL_TRAIN_SET`] examples, 10 / 2
    /// above.
    pub fn for_train_size(n: usize) -> Self {
        let (burn_in, validation_interval) = if n <= SMALL_TRAIN_SET {
            (20, 5)
        } else {
            (10, 2)
        };
        TrainingSchedule {
            patience: 20,
            burn_in,
            validation_interval,
            dev_validation_cap: 3000,
            optimizer: OptimizerConfig::default(),
            max_epochs: 500,
            threads: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.patience == 0 || self.validation_interval == 0 {
            return Err(Error::Config(
                "patience and validation_interval must be at least 1".into(),
            ));
        }
        if self.optimizer.batch_size == 0 || self.threads == 0 {
            return Err(Error::Config(
                "batch_size and threads must be at least 1".into(),
            ));
        }
        if self.optimizer.learning_rate.is_nan() || self.optimizer.learning_rate <= 0.0 {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }

    /// Starts from [`TrainingSchedule::for_train_size`] and applies any of
    /// `patience`, `burn_in`, `validation_interval`, `dev_validation_cap`,
    /// `learning_rate`, `clip_norm`, `batch_size`, `max_epochs`, `threads`.
    pub fn from_key_values(kv: &KeyValues, train_size: usize) -> Result<Self> {
        let d = Self::for_train_size(train_size);
        let s = TrainingSchedule {
            patience: kv.get_or("patience", d.patience)?,
            burn_in: kv.get_or("burn_in", d.burn_in)?,
            validation_interval: kv.get_or("validation_interval", d.validation_interval)?,
            dev_validation_cap: kv.get_or("dev_validation_cap", d.dev_validation_cap)?,
            optimizer: OptimizerConfig {
                learning_rate: kv.get_or("learning_rate", d.optimizer.learning_rate)?,
                clip_norm: kv.get_or("clip_norm", d.optimizer.clip_norm)?,
                batch_size: kv.get_or("batch_size", d.optimizer.batch_size)?,
                ..d.optimizer
            },
            max_epochs: kv.get_or("max_epochs", d.max_epochs)?,
            threads: kv.get_or("threads", d.threads)?,
        };
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationDecision {
    Improved,
    NoImprovement,
    Stop,
}

/// Best-score tracking with burn-in and patience.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    burn_in: usize,
    interval: usize,
    patience: usize,
    best: Option<f64>,
    best_epoch: Option<usize>,
    bad: usize,
}

impl EarlyStopping {
    pub fn new(burn_in: usize, interval: usize, patience: usize) -> Self {
        EarlyStopping {
            burn_in,
            interval: interval.max(1),
            patience: patience.max(1),
            best: None,
            best_epoch: None,
            bad: 0,
        }
    }

    pub fn from_schedule(s: &TrainingSchedule) -> Self {
        Self::new(s.burn_in, s.validation_interval, s.patience)
    }

    /// Whether to validate after (1-based) `epoch`.
    pub fn should_validate(&self, epoch: usize) -> bool {
        epoch > self.burn_in && (epoch - self.burn_in).is_multiple_of(self.interval)
    }

    pub fn record(&mut self, epoch: usize, score: f64) -> ValidationDecision {
        if self.best.is_none_or(|b| score > b) {
            self.best = Some(score);
            self.best_epoch = Some(epoch);
            self.bad = 0;
            ValidationDecision::Improved
        } else {
            self.bad += 1;
            if self.bad >= self.patience {
                ValidationDecision::Stop
            } else {
                ValidationDecision::NoImprovement
            }
        }
    }

    pub fn best_score(&self) -> Option<f64> {
        self.best
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best_epoch
    }

    pub fn validations_without_improvement(&self) -> usize {
        self.bad
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub dev_accuracy: Option<f64>,
    pub checkpoint: bool,
    pub threads: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub records: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

impl TrainingLog {
    /// One JSON object per epoch.
    pub fn to_json_lines(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("plain record") + "\n")
            .collect()
    }
}

/// A trained model together with its vocabulary and configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Lemmatizer {
    pub config: ModelConfig,
    pub vocab: SymbolVocab,
    pub params: Parameters<f32>,
}

const DECODE_CHUNK: usize = 64;

impl Lemmatizer {
    pub fn new(config: ModelConfig, vocab: SymbolVocab) -> Result<Self> {
        config.validate()?;
        let params = Parameters::init(&config, vocab.len());
        Ok(Lemmatizer {
            config,
            vocab,
            params,
        })
    }

    /// Output symbols for encoded sources. Uses batched greedy decoding when
    /// the beam width is 1.
    pub fn predict_symbols(
        &self,
        sources: &[Vec<String>],
        threads: usize,
    ) -> Result<Vec<Vec<String>>> {
        let ids: Vec<Vec<usize>> = sources
            .iter()
            .map(|s| {
                if s.is_empty() {
                    Err(Error::Input("empty source sequence".into()))
                } else {
                    Ok(self.vocab.source_ids(s))
                }
            })
            .collect::<Result<_>>()?;
        let chunks: Vec<&[Vec<usize>]> = ids.chunks(DECODE_CHUNK).collect();
        let decode_chunk = |chunk: &[Vec<usize>]| -> Result<Vec<Vec<String>>> {
            let hyps = if self.config.beam_width <= 1 {
                self.params
                    .greedy_decode_batch(chunk, self.config.max_target_len)?
            } else {
                chunk
                    .iter()
                    .map(|s| {
                        self.params.beam_decode(
                            s,
                            self.config.beam_width,
                            self.config.max_target_len,
                        )
                    })
                    .collect::<Result<_>>()?
            };
            Ok(hyps
                .into_iter()
                .map(|h| {
                    self.vocab
                        .decode(&h.ids)
                        .into_iter()
                        .map(str::to_owned)
                        .collect()
                })
                .collect())
        };
        let per_chunk = parallel_map(&chunks, threads, |c| decode_chunk(c));
        let mut out = Vec::with_capacity(sources.len());
        for r in per_chunk {
            out.extend(r?);
        }
        Ok(out)
    }

    pub fn lemmatize_all(
        &self,
        examples: &[ContextualExample],
        threads: usize,
    ) -> Result<Vec<String>> {
        let sources: Vec<Vec<String>> = examples
            .iter()
            .map(|e| encode_input(e, self.config.context_width))
            .collect();
        Ok(self
            .predict_symbols(&sources, threads)?
            .iter()
            .map(|s| decode_output(s))
            .collect())
    }

    pub fn lemmatize(&self, example: &ContextualExample) -> Result<String> {
        Ok(self
            .lemmatize_all(std::slice::from_ref(example), 1)?
            .remove(0))
    }
}

/// Applies `f` to each item, spreading contiguous blocks over `threads`
/// scoped threads. Output order matches input order.
fn parallel_map<T: Sync, R: Send>(
    items: &[T],
    threads: usize,
    f: impl Fn(&T) -> R + Sync,
) -> Vec<R> {
    if threads <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    let per = items.len().div_ceil(threads);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(per)
            .map(|block| {
                let f = &f;
                scope.spawn(move || block.iter().map(f).collect::<Vec<R>>())
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

/// Exact-match accuracy of the lemmatizer's output symbols.
pub fn accuracy_on(
    lemmatizer: &Lemmatizer,
    data: &[EncodedExample],
    threads: usize,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Input("accuracy of an empty set".into()));
    }
    let sources: Vec<Vec<String>> = data.iter().map(|e| e.source.clone()).collect();
    let predicted = lemmatizer.predict_symbols(&sources, threads)?;
    let correct = predicted
        .iter()
        .zip(data)
        .filter(|(p, e)| **p == e.target)
        .count();
    Ok(correct as f64 / data.len() as f64)
}

/// Mini-batch trainer over a fixed training set.
pub struct Trainer {
    lemmatizer: Lemmatizer,
    optimizer: Adam<f32>,
    optimizer_config: OptimizerConfig,
    data: Vec<(Vec<usize>, Vec<usize>)>,
    rng: SeededRng,
    threads: usize,
    epoch: usize,
}

impl Trainer {
    /// Builds the vocabulary from `train` and initializes the parameters
    /// from `config.seed`. `seed` drives batch order.
    pub fn new(
        config: ModelConfig,
        train: &[EncodedExample],
        optimizer: OptimizerConfig,
        threads: usize,
        seed: u64,
    ) -> Result<Self> {
        let vocab = build_vocab(train)?;
        for e in train {
            if e.source.is_empty() || e.target.is_empty() {
                return Err(Error::Input("training example with an empty side".into()));
            }
        }
        let data = train
            .iter()
            .map(|e| (vocab.source_ids(&e.source), vocab.target_ids(&e.target)))
            .collect();
        let lemmatizer = Lemmatizer::new(config, vocab)?;
        Ok(Trainer {
            optimizer: Adam::new(&lemmatizer.params, optimizer.clone()),
            optimizer_config: optimizer,
            lemmatizer,
            data,
            rng: SeededRng::new(seed),
            threads: threads.max(1),
            epoch: 0,
        })
    }

    pub fn lemmatizer(&self) -> &Lemmatizer {
        &self.lemmatizer
    }

    pub fn into_lemmatizer(self) -> Lemmatizer {
        self.lemmatizer
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// One pass over the shuffled training set. Returns the mean
    /// per-symbol loss.
    pub fn run_epoch(&mut self) -> Result<f64> {
        self.epoch += 1;
        let mut order: Vec<usize> = (0..self.data.len()).collect();
        self.rng.shuffle(&mut order);
        let mut total_nll = 0.0;
        let mut total_symbols = 0.0;
        for batch_idx in order.chunks(self.optimizer_config.batch_size) {
            let (nll, symbols, mut grads) = self.batch_gradient(batch_idx)?;
            total_nll += nll;
            total_symbols += symbols;
            clip_grad_norm(&mut grads, self.optimizer_config.clip_norm);
            self.optimizer.step(&mut self.lemmatizer.params, &grads);
        }
        Ok(total_nll / total_symbols)
    }

    /// Summed loss, symbol count and mean-loss gradient over a batch, split
    /// into one shard per thread.
    fn batch_gradient(&self, idx: &[usize]) -> Result<(f64, f64, Parameters<f32>)> {
        let per = idx.len().div_ceil(self.threads);
        let shards: Vec<&[usize]> = idx.chunks(per).collect();
        let params = &self.lemmatizer.params;
        let results = parallel_map(&shards, self.threads, |shard| -> Result<_> {
            let src: Vec<&[usize]> = shard.iter().map(|&i| self.data[i].0.as_slice()).collect();
            let trg: Vec<&[usize]> = shard.iter().map(|&i| self.data[i].1.as_slice()).collect();
            let batch = Batch::<f32>::new(&src, &trg)?;
            let symbols = batch.target_symbols() as f64;
            let (loss, grads) = params.loss_and_gradient(&batch);
            Ok((loss as f64 * symbols, symbols, grads))
        });
        let mut nll = 0.0;
        let mut symbols = 0.0;
        let mut parts = Vec::with_capacity(results.len());
        for r in results {
            let (n, s, g) = r?;
            nll += n;
            symbols += s;
            parts.push((s, g));
        }
        if !nll.is_finite() {
            return Err(Error::Invariant(format!(
                "non-finite loss at epoch {}",
                self.epoch
            )));
        }
        let mut iter = parts.into_iter();
        let (s0, mut grads) = iter.next().expect("at least one shard");
        if shards.len() > 1 {
            let w0 = (s0 / symbols) as f32;
            grads.for_each_mut(|_, _, t| t.iter_mut().for_each(|v| *v *= w0));
            for (s, g) in iter {
                let w = (s / symbols) as f32;
                let mut flat = Vec::new();
                g.for_each(|_, _, t| flat.push(t.to_vec()));
                let mut i = 0;
                grads.for_each_mut(|_, _, t| {
                    for (a, &b) in t.iter_mut().zip(&flat[i]) {
                        *a += w * b;
                    }
                    i += 1;
                });
            }
        }
        Ok((nll, symbols, grads))
    }
}

/// Trains with early stopping on greedy exact-match dev accuracy and
/// returns the best validated parameters. With an empty dev set the final
/// parameters are returned.
pub fn train(
    config: &ModelConfig,
    train_set: &[EncodedExample],
    dev_set: &[EncodedExample],
    schedule: &TrainingSchedule,
    seed: u64,
) -> Result<(Lemmatizer, TrainingLog)> {
    if train_set.is_empty() {
        return Err(Error::Input("empty training set".into()));
    }
    schedule.validate()?;
    let mut trainer = Trainer::new(
        config.clone(),
        train_set,
        schedule.optimizer.clone(),
        schedule.threads,
        seed,
    )?;
    let dev = &dev_set[..dev_set.len().min(schedule.dev_validation_cap)];
    let mut stopper = EarlyStopping::from_schedule(schedule);
    let mut log = TrainingLog::default();
    let mut best: Option<Parameters<f32>> = None;

    for epoch in 1..=schedule.max_epochs {
        let loss = trainer.run_epoch()?;
        let mut record = EpochRecord {
            epoch,
            loss,
            dev_accuracy: None,
            checkpoint: false,
            threads: schedule.threads,
        };
        let mut stop = false;
        if !dev.is_empty() && stopper.should_validate(epoch) {
            let greedy = Lemmatizer {
                config: ModelConfig {
                    beam_width: 1,
                    ..trainer.lemmatizer.config.clone()
                },
                vocab: trainer.lemmatizer.vocab.clone(),
                params: trainer.lemmatizer.params.clone(),
            };
            let acc = accuracy_on(&greedy, dev, schedule.threads)?;
            record.dev_accuracy = Some(acc);
            match stopper.record(epoch, acc) {
                ValidationDecision::Improved => {
                    best = Some(greedy.params);
                    record.checkpoint = true;
                }
                ValidationDecision::NoImprovement => {}
                ValidationDecision::Stop => stop = true,
            }
        }
        log.records.push(record);
        if stop {
            log.stopped_early = true;
            break;
        }
    }
    log.best_epoch = stopper.best_epoch();
    let mut lemmatizer = trainer.into_lemmatizer();
    if let Some(p) = best {
        lemmatizer.params = p;
    }
    Ok((lemmatizer, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_switches_above_small_sets() {
        let s = TrainingSchedule::for_train_size(2000);
        assert_eq!((s.burn_in, s.validation_interval), (20, 5));
        let s = TrainingSchedule::for_train_size(2001);
        assert_eq!((s.burn_in, s.validation_interval), (10, 2));
        assert_eq!(s.patience, 20);
        assert_eq!(s.dev_validation_cap, 3000);
    }

    #[test]
    fn schedule_overrides() {
        let kv = KeyValues::parse("patience=3\nbatch_size=8\n").unwrap();
        let s = TrainingSchedule::from_key_values(&kv, 10).unwrap();
        assert_eq!(s.patience, 3);
        assert_eq!(s.optimizer.batch_size, 8);
        assert_eq!(s.burn_in, 20);
        let kv = KeyValues::parse("validation_interval=0\n").unwrap();
        assert!(TrainingSchedule::from_key_values(&kv, 10).is_err());
    }

    #[test]
    fn early_stopping_follows_script() {
        let mut es = EarlyStopping::new(2, 2, 3);
        let validated: Vec<usize> = (1..=10).filter(|&e| es.should_validate(e)).collect();
        assert_eq!(validated, vec![4, 6, 8, 10]);
        use ValidationDecision::*;
        let script = [
            (0.5, Improved),
            (0.4, NoImprovement),
            (0.6, Improved),
            (0.6, NoImprovement),
            (0.1, NoImprovement),
            (0.59, Stop),
        ];
        for (i, (score, want)) in script.iter().enumerate() {
            assert_eq!(es.record(i, *score), *want);
            assert!(es.validations_without_improvement() <= 3);
        }
        assert_eq!(es.best_score(), Some(0.6));
        assert_eq!(es.best_epoch(), Some(2));
    }

    #[test]
    fn parallel_map_keeps_order() {
        let items: Vec<usize> = (0..17).collect();
        for threads in 1..5 {
            assert_eq!(
                parallel_map(&items, threads, |x| x * 2),
                items.iter().map(|x| x * 2).collect::<Vec<_>>()
            );
        }
    }
}
