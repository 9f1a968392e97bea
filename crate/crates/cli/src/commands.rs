use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use lemaug::baselines::{build_ae_augmentation_with_width, predict_mfl, train_mfl};
use lemaug::config::KeyValues;
use lemaug::corpus::{RawCorpus, SentenceSplitter};
use lemaug::encoding::{encode_example, parse_symbols, read_dataset, write_dataset};
use lemaug::eval::{
    evaluate, exact_significance, mc_significance, parse_scores, partition_types, TypeGrouping,
};
use lemaug::example::{read_examples, write_examples};
use lemaug::experiment::{augmentation_effect, context_effect, ExperimentConfig};
use lemaug::harvest::{harvest_first_n, harvest_j_per_type};
use lemaug::model::{load_checkpoint, save_checkpoint, train, ModelConfig, TrainingSchedule};
use lemaug::synth::{gen_corpus, gen_paradigms, SynthConfig};
use lemaug::treebank::{first_n_tokens, first_n_types, parse_conllu, write_conllu, LemmaCounts};
use lemaug::unimorph::{
    ambiguity_report, ambiguity_report_with_treebank, pairs_to_tsv, parse_pairs,
    parse_unimorph_bytes, unambiguous_pairs,
};
use lemaug::{Error, Result, SeededRng};

use crate::{Command, ExperimentKind, Grouping, PredictFormat, Unit};

fn read(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    Ok(String::from_utf8(bytes)?)
}

fn write(path: &Path, content: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, content).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

fn write_or_print(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => write(p, content),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn read_config(path: Option<&Path>) -> Result<KeyValues> {
    match path {
        Some(p) => KeyValues::parse(&read(p)?),
        None => Ok(KeyValues::default()),
    }
}

fn lines(predictions: &[String]) -> String {
    predictions.iter().map(|p| format!("{p}\n")).collect()
}

fn json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("plain data") + "\n"
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn run(command: Command, threads: usize) -> Result<()> {
    match command {
        Command::Extract {
            um,
            out,
            report,
            treebank,
        } => {
            let lexicon = parse_unimorph_bytes(&fs::read(&um)?)?;
            write(&out, &pairs_to_tsv(&unambiguous_pairs(&lexicon)))?;
            if let Some(r) = report {
                let rep = match treebank {
                    Some(tb) => {
                        let counts = LemmaCounts::from_sentences(&parse_conllu(&read(&tb)?)?);
                        ambiguity_report_with_treebank(&lexicon, &counts)
                    }
                    None => ambiguity_report(&lexicon),
                };
                write(&r, &json(&rep))?;
            }
            Ok(())
        }

        Command::Prepare {
            input,
            out,
            seed,
            abbreviations,
            no_shuffle,
        } => {
            let splitter = match abbreviations {
                Some(p) => SentenceSplitter::from_list(&read(&p)?),
                None => SentenceSplitter::default(),
            };
            let mut corpus = RawCorpus::default();
            for path in &input {
                corpus.extend(RawCorpus::from_plain_text(
                    &read(path)?,
                    &file_name(path),
                    &splitter,
                ));
            }
            if !no_shuffle {
                corpus = corpus.shuffled(seed);
            }
            write(&out, &corpus.to_tokenized_text())
        }

        Command::Sample {
            conllu,
            n,
            unit,
            out,
        } => {
            let sentences = parse_conllu(&read(&conllu)?)?;
            let examples = match unit {
                Unit::Tokens => first_n_tokens(&sentences, n),
                Unit::Types => first_n_types(&sentences, n),
            };
            if examples.len() < n {
                eprintln!(
                    "warning: only {} of {n} requested examples available",
                    examples.len()
                );
            }
            write(&out, &write_examples(&examples))
        }

        Command::Harvest {
            corpus,
            pairs,
            n,
            j,
            seed,
            out,
            summary,
        } => {
            let raw = RawCorpus::from_tokenized(&read(&corpus)?, &file_name(&corpus));
            let pairs = parse_pairs(&read(&pairs)?)?;
            let harvest = if j == 1 {
                harvest_first_n(&raw, &pairs, n)
            } else {
                harvest_j_per_type(&raw, &pairs, n, j, seed)?
            };
            if harvest.summary.under_collected() {
                eprintln!(
                    "warning: collected {} of {} requested types",
                    harvest.summary.types_found, harvest.summary.types_requested
                );
            }
            write(&out, &write_examples(&harvest.examples))?;
            let text = json(&harvest.summary);
            match summary {
                Some(p) => write(&p, &text),
                None => {
                    eprint!("{text}");
                    Ok(())
                }
            }
        }

        Command::Encode {
            examples,
            n,
            out_prefix,
            ae,
            ae_keep_context,
        } => {
            let examples = read_examples(&read(&examples)?)?;
            let encoded: Vec<_> = if ae {
                build_ae_augmentation_with_width(&examples, if ae_keep_context { n } else { 0 })
            } else {
                examples.iter().map(|e| encode_example(e, n)).collect()
            };
            let (src, trg) = write_dataset(&encoded);
            let prefix = out_prefix.to_string_lossy();
            write(Path::new(&format!("{prefix}.src")), &src)?;
            write(Path::new(&format!("{prefix}.trg")), &trg)
        }

        Command::Train {
            src,
            trg,
            dev_src,
            dev_trg,
            config,
            seed,
            out,
            log,
        } => {
            let train_set = read_dataset(&read(&src)?, &read(&trg)?)?;
            let dev_set = match (dev_src, dev_trg) {
                (Some(s), Some(t)) => read_dataset(&read(&s)?, &read(&t)?)?,
                _ => Vec::new(),
            };
            let kv = read_config(config.as_deref())?;
            let allowed: Vec<&str> = ModelConfig::KEYS
                .iter()
                .chain(TrainingSchedule::KEYS)
                .copied()
                .collect();
            kv.reject_unknown(&allowed)?;
            let mut model = ModelConfig::from_key_values(&kv)?;
            if kv.get("seed").is_none() {
                model.seed = seed;
            }
            let mut schedule = TrainingSchedule::from_key_values(&kv, train_set.len())?;
            if kv.get("threads").is_none() {
                schedule.threads = threads;
            }
            let (lemmatizer, training_log) = train(&model, &train_set, &dev_set, &schedule, seed)?;
            save_checkpoint(&lemmatizer, &out)?;
            if let Some(p) = log {
                write(&p, &training_log.to_json_lines())?;
            }
            Ok(())
        }

        Command::Predict {
            model,
            input,
            format,
            beam,
            out,
        } => {
            let mut lemmatizer = load_checkpoint(&model)?;
            if let Some(b) = beam {
                if b == 0 {
                    return Err(Error::Config("beam width must be at least 1".into()));
                }
                lemmatizer.config.beam_width = b;
            }
            let text = read(&input)?;
            let predictions = match format {
                PredictFormat::Src => {
                    let sources: Vec<Vec<String>> = text
                        .lines()
                        .filter(|l| !l.trim().is_empty())
                        .map(parse_symbols)
                        .collect();
                    lemmatizer
                        .predict_symbols(&sources, threads)?
                        .iter()
                        .map(|s| s.concat())
                        .collect()
                }
                PredictFormat::Examples => {
                    lemmatizer.lemmatize_all(&read_examples(&text)?, threads)?
                }
            };
            write_or_print(out.as_deref(), &lines(&predictions))
        }

        Command::Baseline {
            train,
            input,
            seed,
            out,
            table,
        } => {
            let mut pairs = Vec::new();
            for path in &train {
                pairs.extend(
                    read_examples(&read(path)?)?
                        .into_iter()
                        .map(|e| (e.form, e.lemma)),
                );
            }
            let mfl = train_mfl(pairs);
            let mut rng = SeededRng::new(seed);
            let predictions: Vec<String> = read_examples(&read(&input)?)?
                .iter()
                .map(|e| predict_mfl(&e.form, &mfl, &mut rng))
                .collect();
            write(&out, &lines(&predictions))?;
            if let Some(t) = table {
                write(&t, &mfl.to_tsv())?;
            }
            Ok(())
        }

        Command::Eval {
            pred,
            gold,
            train_sets,
            reference_corpus,
            grouping,
            out,
        } => {
            let predicted: Vec<String> = read(&pred)?
                .lines()
                .map(|l| lemaug::nfc(l.trim_end_matches('\r')))
                .collect();
            let gold_examples = read_examples(&read(&gold)?)?;
            if predicted.len() != gold_examples.len() {
                return Err(Error::Input(format!(
                    "{} predictions for {} gold examples",
                    predicted.len(),
                    gold_examples.len()
                )));
            }
            let mut seen: Vec<BTreeSet<String>> = Vec::new();
            for path in &train_sets {
                seen.push(
                    read_examples(&read(path)?)?
                        .into_iter()
                        .map(|e| e.form)
                        .collect(),
                );
            }
            let reference = LemmaCounts::from_sentences(&parse_conllu(&read(&reference_corpus)?)?);
            let forms: Vec<&str> = gold_examples.iter().map(|e| e.form.as_str()).collect();
            let gold_lemmas: Vec<&str> = gold_examples.iter().map(|e| e.lemma.as_str()).collect();
            let partitions = partition_types(&forms, &seen, &reference);
            let grouping = match grouping {
                Grouping::AllTokens => TypeGrouping::AllTokens,
                Grouping::FirstToken => TypeGrouping::FirstToken,
            };
            let mut config = BTreeMap::new();
            config.insert("grouping".to_owned(), format!("{grouping:?}"));
            config.insert("pred".to_owned(), file_name(&pred));
            config.insert("gold".to_owned(), file_name(&gold));
            config.insert("reference_corpus".to_owned(), file_name(&reference_corpus));
            config.insert(
                "train_sets".to_owned(),
                train_sets
                    .iter()
                    .map(|p| file_name(p))
                    .collect::<Vec<_>>()
                    .join(","),
            );
            let report = evaluate(
                &forms,
                &predicted,
                &gold_lemmas,
                &partitions,
                grouping,
                config,
            )?;
            write_or_print(out.as_deref(), &report.to_json())
        }

        Command::Significance {
            a,
            b,
            iters,
            seed,
            exact,
        } => {
            let a = parse_scores(&read(&a)?)?;
            let b = parse_scores(&read(&b)?)?;
            let result = if exact {
                exact_significance(&a, &b)?
            } else {
                mc_significance(&a, &b, iters, seed)?
            };
            print!("{}", json(&result));
            Ok(())
        }

        Command::Synth {
            config,
            seed,
            out_dir,
        } => {
            let kv = read_config(config.as_deref())?;
            let splits = ["train_sentences", "dev_sentences", "test_sentences"];
            let allowed: Vec<&str> = SynthConfig::KEYS.iter().chain(&splits).copied().collect();
            kv.reject_unknown(&allowed)?;
            let mut cfg = SynthConfig::from_key_values(&kv)?;
            cfg.seed = seed;
            let n = cfg.corpus_size;
            let n_train = kv.get_or("train_sentences", n / 2)?;
            let n_dev = kv.get_or("dev_sentences", n / 10)?;
            let n_test = kv.get_or("test_sentences", n / 10)?;
            if n_train + n_dev + n_test > n {
                return Err(Error::Config(format!(
                    "splits need {} sentences but corpus_size is {n}",
                    n_train + n_dev + n_test
                )));
            }
            let language = gen_paradigms(&cfg)?;
            let corpus = gen_corpus(&language, &cfg);
            let (train_split, rest) = corpus.split_at(n_train);
            let (dev_split, rest) = rest.split_at(n_dev);
            let (test_split, raw_split) = rest.split_at(n_test);
            let raw: String = raw_split
                .iter()
                .map(|s| s.forms().join(" ") + "\n")
                .collect();
            write(&out_dir.join("lexicon.tsv"), &language.lexicon.to_tsv())?;
            write(&out_dir.join("train.conllu"), &write_conllu(train_split))?;
            write(&out_dir.join("dev.conllu"), &write_conllu(dev_split))?;
            write(&out_dir.join("test.conllu"), &write_conllu(test_split))?;
            write(&out_dir.join("raw.txt"), &raw)
        }

        Command::Experiment {
            kind,
            config,
            seeds,
            out,
        } => {
            let kv = read_config(config.as_deref())?;
            let preset = match kind {
                ExperimentKind::Context => ExperimentConfig::context_preset(),
                ExperimentKind::Augmentation => ExperimentConfig::augmentation_preset(),
            };
            let width: usize = kv.get_or("context_width", 20)?;
            if kv.get("seeds").is_some() {
                return Err(Error::Config("seeds are given with --seeds".into()));
            }
            let mut cfg =
                ExperimentConfig::from_key_values(&kv, ExperimentConfig { seeds, ..preset })?;
            if kv.get("threads").is_none() {
                cfg.schedule.threads = threads;
            }
            let text = match kind {
                ExperimentKind::Context => {
                    let effect = context_effect(&cfg, width)?;
                    eprintln!("ambiguous-type gain with context: {:?}", effect.gain());
                    json(&serde_json::json!({ "config": cfg, "result": effect }))
                }
                ExperimentKind::Augmentation => {
                    let effect = augmentation_effect(&cfg, &[0, width])?;
                    json(&serde_json::json!({ "config": cfg, "result": effect }))
                }
            };
            write(&out, &text)
        }
    }
}
