//! Context-sensitive lemmatization with training-data augmentation.
//!
//! The crate covers the whole pipeline:
//!
//! * [`unimorph`]: inflection tables and the unambiguous form→lemma mapping.
//! * [`treebank`]: CoNLL-U reading and token/type training-set construction.
//! * [`corpus`]: sentence splitting, tokenization and seeded shuffling of raw text.
//! * [`harvest`]: sentence contexts for unambiguous table forms.
//! * [`encoding`]: the character-level source/target encoding with `<lc>`, `<rc>`, `<s>`.
//! * [`model`]: the attentional GRU encoder-decoder, its training loop and decoders.
//! * [`baselines`]: most-frequent-lemma lookup and autoencoding augmentation.
//! * [`eval`]: type/token accuracy, adjusted ambiguity partitions and significance testing.
//! * [`synth`]: a synthetic morphology generator for desk-scale experiments.
//! * [`experiment`]: end-to-end directional experiments on synthetic data.

pub mod baselines;
pub mod config;
pub mod corpus;
pub mod encoding;
mod error;
pub mod eval;
pub mod example;
pub mod experiment;
pub mod harvest;
pub mod model;
pub mod rng;
pub mod synth;
pub mod treebank;
pub mod unimorph;

pub use error::{Error, Result};
pub use example::ContextualExample;
pub use rng::SeededRng;

use unicode_normalization::UnicodeNormalization;

/// Build identifier embedded in checkpoints and reports.
pub const BUILD_ID: &str = concat!("lemaug ", env!("CARGO_PKG_VERSION"));

/// NFC-normalizes `s`. All strings entering the pipeline go through here.
pub fn nfc(s: &str) -> String {
    s.nfc().collect()
}
