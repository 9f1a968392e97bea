//! `lemaug`: command-line pipeline for context-sensitive lemmatization with
//! data augmentation.
//!
//! Exit codes: 0 success, 2 input or usage error, 3 internal invariant
//! violation.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "lemaug", version = lemaug::BUILD_ID, about = "Context-sensitive lemmatization with data augmentation")]
pub struct Cli {
    /// Worker threads for training and decoding. Results are reproducible
    /// for a fixed count.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Unit {
    Tokens,
    Types,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum PredictFormat {
    /// Encoded source lines, symbols separated by spaces.
    Src,
    /// Example lines `lemma<TAB>index<TAB>tokens`; the lemma column is ignored.
    Examples,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Grouping {
    AllTokens,
    FirstToken,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ExperimentKind {
    Context,
    Augmentation,
}

#[derive(Subcommand)]
pub enum Command {
    /// Extract unambiguous (form, lemma) pairs from inflection tables.
    ///
    /// Input: UniMorph TSV, `lemma<TAB>form<TAB>features` per line, blank lines
    /// allowed. Output: `form<TAB>lemma` per line, sorted.
    Extract {
        #[arg(long)]
        um: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write a JSON ambiguity report.
        #[arg(long)]
        report: Option<PathBuf>,
        /// CoNLL-U treebank to compare lemma assignments against (for the report).
        #[arg(long)]
        treebank: Option<PathBuf>,
    },
    /// Split, tokenize and shuffle raw text into one sentence per line.
    ///
    /// Input: UTF-8 text, one paragraph per line. Output: tokens separated by
    /// single spaces, one sentence per line.
    Prepare {
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Abbreviation list, one per line, replacing the built-in list.
        #[arg(long)]
        abbreviations: Option<PathBuf>,
        /// Keep the original sentence order.
        #[arg(long)]
        no_shuffle: bool,
    },
    /// Take the first N tokens or distinct types of a CoNLL-U treebank.
    ///
    /// Output: example lines `lemma<TAB>target_index<TAB>space-separated tokens`.
    Sample {
        #[arg(long)]
        conllu: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value = "types")]
        unit: Unit,
        #[arg(long)]
        out: PathBuf,
    },
    /// Collect sentence contexts for unambiguous forms.
    ///
    /// Input corpus: one tokenized sentence per line. Pairs: `form<TAB>lemma`.
    /// Output: example lines `lemma<TAB>target_index<TAB>tokens`. With `--j 1`
    /// the first N forms in corpus order are kept; otherwise N forms with at
    /// least J contexts are sampled with the seed.
    Harvest {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        j: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// JSON summary; printed to stderr when absent.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Encode examples as parallel `.src` / `.trg` symbol files.
    ///
    /// Source: up to N context symbols, `<lc>`, the form's characters, `<rc>`,
    /// up to N context symbols; words in the context are separated by `<s>`.
    /// Target: the lemma's characters.
    Encode {
        #[arg(long)]
        examples: PathBuf,
        /// Context symbols on each side of the form.
        #[arg(long = "N", alias = "context-width")]
        n: usize,
        /// Writes `<prefix>.src` and `<prefix>.trg`.
        #[arg(long)]
        out_prefix: PathBuf,
        /// Autoencoding examples: the target is the form itself, with no context.
        #[arg(long)]
        ae: bool,
        /// With `--ae`, keep N context symbols instead of none.
        #[arg(long, requires = "ae")]
        ae_keep_context: bool,
    },
    /// Train a lemmatizer and write a checkpoint.
    ///
    /// Config: `key=value` lines. Model keys: embed_dim, hidden_dim,
    /// context_width, beam_width, max_target_len. Schedule keys: patience,
    /// burn_in, validation_interval, dev_validation_cap, learning_rate,
    /// clip_norm, batch_size, max_epochs. Burn-in and interval default by
    /// training-set size. The log has one JSON record per epoch.
    Train {
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        trg: PathBuf,
        #[arg(long, requires = "dev_trg")]
        dev_src: Option<PathBuf>,
        #[arg(long, requires = "dev_src")]
        dev_trg: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        /// Checkpoint path (JSON).
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Lemmatize with a trained checkpoint; one lemma per output line.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "src")]
        format: PredictFormat,
        /// Override the checkpoint's beam width.
        #[arg(long)]
        beam: Option<usize>,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Most-frequent-lemma baseline; one lemma per output line.
    ///
    /// Training and gold inputs are example files. Unknown forms are returned
    /// unchanged; ties are broken with the seed.
    Baseline {
        #[arg(long, required = true, num_args = 1..)]
        train: Vec<PathBuf>,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the `form<TAB>lemma<TAB>count` table.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Score predictions on the ambiguous, unseen and all-type partitions.
    ///
    /// Predictions: one lemma per line, aligned with the gold example file.
    /// Training sets: example files whose forms count as seen. Reference
    /// corpus: CoNLL-U used for lemma entropy. Output: JSON report.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, num_args = 0..)]
        train_sets: Vec<PathBuf>,
        #[arg(long)]
        reference_corpus: PathBuf,
        #[arg(long, value_enum, default_value = "all-tokens")]
        grouping: Grouping,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Paired randomization test over per-language scores.
    ///
    /// Inputs: one score per line, optionally `name<TAB>score`. Output: JSON
    /// with observed, p_value, iters and seed.
    Significance {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        iters: u64,
        #[arg(long)]
        seed: u64,
        /// Enumerate every swap pattern instead of sampling.
        #[arg(long)]
        exact: bool,
    },
    /// Generate a synthetic language and corpus.
    ///
    /// Config keys: n_stems, n_slots, n_classes, homography_rate, cue_strength,
    /// corpus_size, train_sentences, dev_sentences, test_sentences. Writes
    /// lexicon.tsv, train.conllu, dev.conllu, test.conllu and raw.txt (the
    /// remaining sentences, tokenized, lemmas dropped).
    Synth {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run a synthetic comparison and write a JSON summary.
    ///
    /// Config keys: synthetic language keys prefixed `synth.`, model and
    /// schedule keys as for `train`, plus train_sentences, dev_sentences,
    /// test_sentences, base_types, harvest_types, dev_examples and
    /// context_width. Each seed builds its own language and corpus.
    Experiment {
        #[arg(value_enum)]
        kind: ExperimentKind,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated seeds, one run per seed.
        #[arg(long, required = true, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command, cli.threads.max(1)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                lemaug::Error::Invariant(_) => 3,
                _ => 2,
            })
        }
    }
}
