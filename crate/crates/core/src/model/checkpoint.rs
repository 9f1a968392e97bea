use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Lemmatizer, ModelConfig, Parameters};
use crate::encoding::SymbolVocab;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

/// Serialized model: configuration, ordered vocabulary and named tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: u32,
    pub build: String,
    pub config: ModelConfig,
    pub vocab: Vec<String>,
    pub tensors: Vec<TensorRecord>,
}

impl Checkpoint {
    pub fn from_lemmatizer(lemmatizer: &Lemmatizer) -> Self {
        let mut tensors = Vec::new();
        lemmatizer.params.for_each(|name, shape, data| {
            tensors.push(TensorRecord {
                name: name.to_owned(),
                shape: shape.to_vec(),
                data: data.to_vec(),
            })
        });
        Checkpoint {
            format: CHECKPOINT_FORMAT,
            build: crate::BUILD_ID.to_owned(),
            config: lemmatizer.config.clone(),
            vocab: lemmatizer.vocab.symbols().to_vec(),
            tensors,
        }
    }

    pub fn into_lemmatizer(self) -> Result<Lemmatizer> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Input(format!(
                "unsupported checkpoint format {}",
                self.format
            )));
        }
        self.config.validate()?;
        let vocab = SymbolVocab::from_ordered(self.vocab)?;
        let mut params = Parameters::<f32>::init(&self.config, vocab.len());
        let mut records = self.tensors.into_iter();
        let mut failure = None;
        params.for_each_mut(|name, shape, slot| {
            if failure.is_some() {
                return;
            }
            match records.next() {
                Some(r) if r.name == name && r.shape == shape && r.data.len() == slot.len() => {
                    slot.copy_from_slice(&r.data)
                }
                Some(r) => {
                    failure = Some(format!(
                        "tensor {} {:?} does not match expected {name} {shape:?}",
                        r.name, r.shape
                    ))
                }
                None => failure = Some(format!("missing tensor {name}")),
            }
        });
        if let Some(msg) = failure {
            return Err(Error::Input(msg));
        }
        if records.next().is_some() {
            return Err(Error::Input("unexpected extra tensors".into()));
        }
        if !params.all_finite() {
            return Err(Error::Invariant(
                "checkpoint contains non-finite weights".into(),
            ));
        }
        Ok(Lemmatizer {
            config: self.config,
            vocab,
            params,
        })
    }
}

pub fn save_checkpoint(lemmatizer: &Lemmatizer, path: &Path) -> Result<()> {
    let text = serde_json::to_string(&Checkpoint::from_lemmatizer(lemmatizer))?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Lemmatizer> {
    let text = std::fs::read_to_string(path)?;
    let cp: Checkpoint = serde_json::from_str(&text)?;
    cp.into_lemmatizer()
}
