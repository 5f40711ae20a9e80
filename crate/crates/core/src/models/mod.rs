//! The four instantiations of an upstream predictor composed with soft
//! unification: a task-conditioned MLP over fixed-length sequences, a CNN
//! over symbol grids, an LSTM over word sequences, and a memory network that
//! unifies attended sentences at every iteration.

pub mod ucnn;
pub mod umlp;
pub mod umn;
pub mod urnn;

pub use ucnn::UcnnModel;
pub use umlp::UmlpModel;
pub use umn::UmnModel;
pub use urnn::UrnnModel;

use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::rng::Stream;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Umlp,
    Ucnn,
    Urnn,
    Umn,
}

impl Arch {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "umlp" => Some(Arch::Umlp),
            "ucnn" => Some(Arch::Ucnn),
            "urnn" => Some(Arch::Urnn),
            "umn" => Some(Arch::Umn),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Arch::Umlp => "umlp",
            Arch::Ucnn => "ucnn",
            Arch::Urnn => "urnn",
            Arch::Umn => "umn",
        }
    }

    pub fn default_dim(&self) -> usize {
        match self {
            Arch::Umlp | Arch::Urnn => 16,
            Arch::Ucnn | Arch::Umn => 32,
        }
    }

    pub fn default_dropout(&self) -> f64 {
        match self {
            // Recurrent nets all carry 0.1; the grid model has none.
            Arch::Umlp | Arch::Umn => 0.1,
            Arch::Ucnn => 0.0,
            Arch::Urnn => 0.5,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelConfig {
    pub arch: Arch,
    /// Embedding size.
    pub d: usize,
    /// Memory iterations J (memory network only).
    pub iterations: usize,
    pub dropout: f64,
    pub vocab_size: usize,
    /// Task names in id order; the one-hot width for task-conditioned models.
    pub tasks: Vec<String>,
    /// Invariants per task.
    pub invariant_count: usize,
}

impl ModelConfig {
    pub fn new(arch: Arch, vocab_size: usize, tasks: Vec<String>) -> Self {
        ModelConfig {
            arch,
            d: arch.default_dim(),
            iterations: 3,
            dropout: arch.default_dropout(),
            vocab_size,
            tasks,
            invariant_count: 1,
        }
    }

    pub fn task_count(&self) -> usize {
        self.tasks.len()
    }

    pub fn task_index(&self, task: &str) -> Result<usize> {
        self.tasks
            .iter()
            .position(|t| t == task)
            .ok_or_else(|| Error::argument(format!("unknown task {task:?}")))
    }
}

/// Training/eval mode for a forward pass; training carries the dropout
/// stream for this batch.
pub enum Phase<'a> {
    Train { dropout: f64, rng: &'a mut Stream },
    Eval,
}

impl Phase<'_> {
    pub fn dropout(&mut self, g: &mut Graph, x: Var) -> Result<Var> {
        match self {
            Phase::Train { dropout, rng } if *dropout > 0.0 => g.dropout(x, *dropout, true, rng),
            _ => Ok(x),
        }
    }
}

/// -mean(log p[target]) with probabilities clamped to [1e-9, 1].
pub fn nll_loss(g: &mut Graph, probs: Var, targets: &[usize]) -> Result<Var> {
    let picked = g.select_columns(probs, targets)?;
    let picked = g.clamp(picked, 1e-9, 1.0);
    let l = g.log(picked);
    let m = g.mean_all(l);
    Ok(g.neg(m))
}

/// Binary cross-entropy over sigmoid outputs p in [B] and 0/1 targets.
pub fn bce_loss(g: &mut Graph, probs: Var, targets: &[f64]) -> Result<Var> {
    let shape = g.shape(probs).to_vec();
    if shape.len() != 1 || shape[0] != targets.len() {
        return Err(Error::shape(format!(
            "bce expects probs [B] matching {} targets, got {:?}",
            targets.len(),
            shape
        )));
    }
    let y = g.constant(crate::tensor::Tensor::from_vec(targets.to_vec()));
    let p = g.clamp(probs, 1e-9, 1.0 - 1e-9);
    let lp = g.log(p);
    let term1 = g.mul(y, lp)?;
    let not_p = g.neg(p);
    let not_p = g.add_scalar(not_p, 1.0);
    let lnp = g.log(not_p);
    let not_y = g.neg(y);
    let not_y = g.add_scalar(not_y, 1.0);
    let term2 = g.mul(not_y, lnp)?;
    let s = g.add(term1, term2)?;
    let m = g.mean_all(s);
    Ok(g.neg(m))
}

/// argmax over a probability row; non-finite entries never win.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] || (!row[best].is_finite() && v.is_finite()) {
            best = i;
        }
    }
    best
}

use crate::checkpoint::{params_to_saved, Checkpoint, SavedTensor, CHECKPOINT_VERSION};
use crate::data::jsonl::{from_raw, to_raw};
use crate::data::{DatasetKind, Example, Vocabulary};
use crate::params::ParamSet;
use crate::rng::StreamRng;
use crate::unify::UnificationTrace;
use std::collections::BTreeMap;

pub enum AnyModel {
    Umlp(UmlpModel),
    Ucnn(UcnnModel),
    Urnn(UrnnModel),
    Umn(UmnModel),
}

impl AnyModel {
    pub fn arch(&self) -> Arch {
        match self {
            AnyModel::Umlp(_) => Arch::Umlp,
            AnyModel::Ucnn(_) => Arch::Ucnn,
            AnyModel::Urnn(_) => Arch::Urnn,
            AnyModel::Umn(_) => Arch::Umn,
        }
    }

    pub fn cfg(&self) -> &ModelConfig {
        match self {
            AnyModel::Umlp(m) => &m.cfg,
            AnyModel::Ucnn(m) => &m.cfg,
            AnyModel::Urnn(m) => &m.cfg,
            AnyModel::Umn(m) => &m.cfg,
        }
    }

    /// Invariant examples grouped per task (one group when ungrouped).
    pub fn invariant_examples(&self) -> Vec<Vec<&Example>> {
        match self {
            AnyModel::Umlp(m) => {
                m.invariants.iter().map(|g| g.iter().map(|i| &i.example).collect()).collect()
            }
            AnyModel::Ucnn(m) => {
                m.invariants.iter().map(|g| g.iter().map(|i| &i.example).collect()).collect()
            }
            AnyModel::Urnn(m) => vec![m.invariants.iter().map(|i| &i.example).collect()],
            AnyModel::Umn(m) => vec![m.invariants.iter().map(|i| &i.example).collect()],
        }
    }

    /// Unification trace of one example against one invariant of its task.
    pub fn trace(&self, ps: &ParamSet, example: &Example, inv_index: usize) -> crate::error::Result<UnificationTrace> {
        match self {
            AnyModel::Umlp(m) => m.trace(ps, example, inv_index),
            AnyModel::Ucnn(m) => m.trace(ps, example, inv_index),
            AnyModel::Urnn(m) => m.trace(ps, example, inv_index),
            AnyModel::Umn(m) => {
                // Trace the pair of sentences each side most attends to at
                // the first unifying iteration.
                let mut g = Graph::new();
                let fwd = m.forward(&mut g, ps, &[example], true, &mut Phase::Eval)?;
                let beta_k = g.value(fwd.beta_k[0]).data().to_vec();
                let beta_i = g.value(fwd.beta_i[inv_index][0]).data().to_vec();
                let k_at = argmax(&beta_k);
                let i_at = argmax(&beta_i);
                m.unify_pair(ps, inv_index, i_at, example, k_at)
            }
        }
    }

    pub fn to_checkpoint(
        &self,
        ps: &ParamSet,
        vocab: &Vocabulary,
        dataset_kind: DatasetKind,
        train_config: BTreeMap<String, String>,
    ) -> crate::error::Result<Checkpoint> {
        let invariants: Vec<Vec<crate::data::jsonl::RawExample>> = self
            .invariant_examples()
            .iter()
            .map(|group| group.iter().map(|e| to_raw(e, vocab)).collect::<crate::error::Result<_>>())
            .collect::<crate::error::Result<_>>()?;
        let constants = match self {
            AnyModel::Urnn(m) => vec![SavedTensor::of("urnn.word_embeddings", &m.embed_table)],
            _ => vec![],
        };
        Ok(Checkpoint {
            version: CHECKPOINT_VERSION,
            model: self.cfg().clone(),
            dataset_kind,
            train_config,
            vocab: vocab.tokens().to_vec(),
            invariants,
            params: params_to_saved(ps),
            constants,
        })
    }

    /// Rebuild a model (and its parameters) from a checkpoint.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> crate::error::Result<(AnyModel, ParamSet, Vocabulary)> {
        let mut vocab = ckpt.vocabulary()?;
        let rng = StreamRng::new(0);
        let mut ps = ParamSet::new();
        let cfg = ckpt.model.clone();
        let groups: Vec<Vec<Example>> = ckpt
            .invariants
            .iter()
            .map(|g| {
                g.iter()
                    .map(|raw| from_raw(raw, ckpt.dataset_kind, &mut vocab))
                    .collect::<crate::error::Result<_>>()
            })
            .collect::<crate::error::Result<_>>()?;
        let model = match cfg.arch {
            Arch::Umlp => {
                let mut m = UmlpModel::new(cfg, &mut ps, &rng)?;
                m.set_invariants(groups, &mut ps, &rng)?;
                AnyModel::Umlp(m)
            }
            Arch::Ucnn => {
                let mut m = UcnnModel::new(cfg, &mut ps, &rng)?;
                m.set_invariants(groups, &mut ps, &rng)?;
                AnyModel::Ucnn(m)
            }
            Arch::Urnn => {
                let table = ckpt
                    .constants
                    .iter()
                    .find(|c| c.name == "urnn.word_embeddings")
                    .ok_or_else(|| Error::config("checkpoint missing word embeddings".to_string()))?
                    .to_tensor()?;
                let mut m = UrnnModel::new(cfg, table, &mut ps, &rng)?;
                m.set_invariants(groups.into_iter().flatten().collect());
                AnyModel::Urnn(m)
            }
            Arch::Umn => {
                let mut m = UmnModel::new(cfg, &mut ps, &rng)?;
                m.set_invariants(groups.into_iter().flatten().collect(), &mut ps, &rng)?;
                AnyModel::Umn(m)
            }
        };
        ckpt.restore_params(&mut ps)?;
        Ok((model, ps, vocab))
    }
}
