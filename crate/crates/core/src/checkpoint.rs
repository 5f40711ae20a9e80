//! Checkpoints: a JSON document holding the model configuration, vocabulary,
//! invariant examples, and every parameter tensor. Values round-trip
//! bit-exactly at double precision.

use crate::data::jsonl::RawExample;
use crate::data::{DatasetKind, Vocabulary};
use crate::error::{Error, Result};
use crate::models::ModelConfig;
use crate::params::ParamSet;
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize, Clone)]
pub struct SavedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl SavedTensor {
    pub fn of(name: &str, t: &Tensor) -> Self {
        SavedTensor { name: name.to_string(), shape: t.shape().to_vec(), values: t.data().to_vec() }
    }

    pub fn to_tensor(&self) -> Result<Tensor> {
        Tensor::new(self.shape.clone(), self.values.clone())
    }
}

#[derive(Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub model: ModelConfig,
    pub dataset_kind: DatasetKind,
    /// Flat key=value header of the training configuration that produced it.
    pub train_config: BTreeMap<String, String>,
    pub vocab: Vec<String>,
    /// Invariant examples grouped per task (single group for ungrouped
    /// architectures).
    pub invariants: Vec<Vec<RawExample>>,
    pub params: Vec<SavedTensor>,
    /// Non-trainable tensors (fixed word embeddings).
    pub constants: Vec<SavedTensor>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(f, self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let ckpt: Checkpoint = serde_json::from_reader(f)?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::config(format!(
                "checkpoint version {} unsupported (expected {CHECKPOINT_VERSION})",
                ckpt.version
            )));
        }
        Ok(ckpt)
    }

    pub fn vocabulary(&self) -> Result<Vocabulary> {
        Vocabulary::from_tokens(&self.vocab)
    }

    /// Write every stored parameter into a freshly constructed set.
    pub fn restore_params(&self, ps: &mut ParamSet) -> Result<()> {
        if self.params.len() != ps.len() {
            return Err(Error::config(format!(
                "checkpoint has {} parameters, model has {}",
                self.params.len(),
                ps.len()
            )));
        }
        for saved in &self.params {
            ps.set(&saved.name, saved.to_tensor()?)?;
        }
        Ok(())
    }
}

pub fn params_to_saved(ps: &ParamSet) -> Vec<SavedTensor> {
    ps.iter().map(|(_, p)| SavedTensor::of(&p.name, &p.tensor)).collect()
}
