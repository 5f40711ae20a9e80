//! End-to-end run orchestration: dataset preparation, fold splitting with
//! per-task caps, invariant selection, model construction, and run
//! directories on disk.

use super::{metrics_csv, train, Splits, TrainConfig, TrainOutcome};
use crate::data::grid::{gen_grid, GridTask, GRID_TASKS};
use crate::data::logic::{gen_logic, program_to_example, LogicClass, LOGIC_CLASSES};
use crate::data::sequences::{gen_sequences, SeqTask, SEQ_TASKS};
use crate::data::{kfold_split, pick_invariants, DatasetKind, Example, Vocabulary};
use crate::error::{Error, Result};
use crate::models::{AnyModel, Arch, ModelConfig, UcnnModel, UmlpModel, UmnModel, UrnnModel};
use crate::rng::StreamRng;
use std::collections::HashMap;
use std::path::Path;

/// Generate a full dataset (all tasks unless one is named).
pub fn generate_dataset(
    kind: DatasetKind,
    task: Option<&str>,
    n: usize,
    arity: usize,
    seed: u64,
) -> Result<(Vec<Example>, Vocabulary)> {
    let rng = StreamRng::new(seed);
    let mut vocab = Vocabulary::new();
    let mut out = Vec::new();
    match kind {
        DatasetKind::Seq => {
            let tasks: Vec<SeqTask> = match task {
                None => SEQ_TASKS.to_vec(),
                Some(t) => vec![SeqTask::parse(t)
                    .ok_or_else(|| Error::argument(format!("unknown sequence task {t:?}")))?],
            };
            for t in tasks {
                let mut stream = rng.stream(&format!("gen/seq/{}", t.name()));
                out.extend(gen_sequences(t, n, &mut vocab, &mut stream)?);
            }
        }
        DatasetKind::Grid => {
            let tasks: Vec<GridTask> = match task {
                None => GRID_TASKS.to_vec(),
                Some(t) => vec![GridTask::parse(t)
                    .ok_or_else(|| Error::argument(format!("unknown grid task {t:?}")))?],
            };
            for t in tasks {
                let mut stream = rng.stream(&format!("gen/grid/{}", t.name()));
                out.extend(gen_grid(t, n, &mut vocab, &mut stream)?);
            }
        }
        DatasetKind::Logic => {
            let classes: Vec<LogicClass> = match task {
                None => LOGIC_CLASSES
                    .iter()
                    .copied()
                    .filter(|c| arity == 2 || *c != LogicClass::Transitivity)
                    .collect(),
                Some(t) => vec![LogicClass::parse(t)
                    .ok_or_else(|| Error::argument(format!("unknown logic class {t:?}")))?],
            };
            for c in classes {
                let mut stream = rng.stream(&format!("gen/logic/{}/{arity}", c.name()));
                for p in gen_logic(c, n, arity, &mut stream)? {
                    let mut ex = program_to_example(&p, &mut vocab);
                    ex.task = c.name().to_string();
                    out.push(ex);
                }
            }
        }
        DatasetKind::Sentiment => {
            let mut stream = rng.stream("gen/sentiment");
            out.extend(super::make_toy_sentiment(n, &mut vocab, &mut stream)?);
        }
        DatasetKind::Babi => {
            return Err(Error::argument(
                "stories are loaded from files, not generated".to_string(),
            ))
        }
    }
    Ok((out, vocab))
}

/// Sorted distinct task names of a dataset.
pub fn task_names(examples: &[Example]) -> Vec<String> {
    let mut ts: Vec<String> = examples.iter().map(|e| e.task.clone()).collect();
    ts.sort();
    ts.dedup();
    ts
}

/// Split one fold out of a k-fold partition (per task), cap the training
/// side per task, and optionally carve a validation fraction from it.
pub fn fold_splits(
    examples: &[Example],
    folds: usize,
    fold: usize,
    train_cap: Option<usize>,
    val_fraction: f64,
    seed: u64,
) -> Result<Splits> {
    if fold >= folds {
        return Err(Error::argument(format!("fold {fold} out of range for {folds} folds")));
    }
    let rng = StreamRng::new(seed);
    let tasks = task_names(examples);
    let mut splits = Splits::default();
    for task in &tasks {
        let idx: Vec<usize> =
            (0..examples.len()).filter(|&i| examples[i].task == *task).collect();
        let mut stream = rng.stream(&format!("kfold/{task}"));
        let parts = kfold_split(idx.len(), folds, &mut stream)?;
        let mut train_pool: Vec<usize> = Vec::new();
        for (f, part) in parts.iter().enumerate() {
            if f == fold {
                splits.test.extend(part.iter().map(|&i| idx[i]).map(|i| examples[i].clone()));
            } else {
                train_pool.extend(part.iter().map(|&i| idx[i]));
            }
        }
        let mut order = train_pool;
        let mut s = rng.stream(&format!("traincap/{task}"));
        s.shuffle(&mut order);
        if let Some(cap) = train_cap {
            order.truncate(cap);
        }
        let val_n = (order.len() as f64 * val_fraction).floor() as usize;
        for (pos, &i) in order.iter().enumerate() {
            if pos < val_n {
                splits.val.push(examples[i].clone());
            } else {
                splits.train.push(examples[i].clone());
            }
        }
    }
    Ok(splits)
}

/// Splits from explicit train/test files (validation carved from train).
pub fn file_splits(
    train: Vec<Example>,
    test: Vec<Example>,
    train_cap: Option<usize>,
    val_fraction: f64,
    seed: u64,
) -> Splits {
    let rng = StreamRng::new(seed);
    let tasks = task_names(&train);
    let mut splits = Splits { test, ..Default::default() };
    for task in &tasks {
        let mut idx: Vec<usize> = (0..train.len()).filter(|&i| train[i].task == *task).collect();
        let mut s = rng.stream(&format!("traincap/{task}"));
        s.shuffle(&mut idx);
        if let Some(cap) = train_cap {
            idx.truncate(cap);
        }
        let val_n = (idx.len() as f64 * val_fraction).floor() as usize;
        for (pos, &i) in idx.iter().enumerate() {
            if pos < val_n {
                splits.val.push(train[i].clone());
            } else {
                splits.train.push(train[i].clone());
            }
        }
    }
    splits
}

/// Build the model for a config, picking invariants from the training split.
pub fn build_model(
    cfg: &TrainConfig,
    vocab: &Vocabulary,
    splits: &Splits,
    pretrained: Option<&HashMap<String, Vec<f64>>>,
) -> Result<(AnyModel, crate::params::ParamSet)> {
    let rng = StreamRng::new(cfg.seed);
    let mut ps = crate::params::ParamSet::new();
    let tasks = task_names(&splits.train);
    let mut mc = ModelConfig::new(cfg.arch, vocab.len(), tasks.clone());
    if cfg.d > 0 {
        mc.d = cfg.d;
    }
    mc.iterations = cfg.j_iterations;
    mc.dropout = cfg.dropout;
    mc.invariant_count = cfg.invariants;

    let picks_for = |task: Option<&str>| -> Result<Vec<Example>> {
        let pool: Vec<&Example> = splits
            .train
            .iter()
            .filter(|e| task.map(|t| e.task == t).unwrap_or(true))
            .collect();
        let owned: Vec<Example> = pool.iter().map(|e| (*e).clone()).collect();
        let mut stream =
            StreamRng::new(cfg.seed).stream(&format!("invariants/{}", task.unwrap_or("all")));
        let picks = pick_invariants(&owned, cfg.invariants, cfg.pick_mode, &mut stream)?;
        Ok(picks.into_iter().map(|i| owned[i].clone()).collect())
    };

    let model = match cfg.arch {
        Arch::Umlp => {
            let mut m = UmlpModel::new(mc, &mut ps, &rng)?;
            let groups: Vec<Vec<Example>> =
                tasks.iter().map(|t| picks_for(Some(t))).collect::<Result<_>>()?;
            m.set_invariants(groups, &mut ps, &rng)?;
            AnyModel::Umlp(m)
        }
        Arch::Ucnn => {
            let mut m = UcnnModel::new(mc, &mut ps, &rng)?;
            let groups: Vec<Vec<Example>> =
                tasks.iter().map(|t| picks_for(Some(t))).collect::<Result<_>>()?;
            m.set_invariants(groups, &mut ps, &rng)?;
            AnyModel::Ucnn(m)
        }
        Arch::Urnn => {
            let table = UrnnModel::build_embed_table(vocab, pretrained, &rng);
            let mut m = UrnnModel::new(mc, table, &mut ps, &rng)?;
            m.set_invariants(picks_for(None)?);
            AnyModel::Urnn(m)
        }
        Arch::Umn => {
            let mut m = UmnModel::new(mc, &mut ps, &rng)?;
            m.set_invariants(picks_for(None)?, &mut ps, &rng)?;
            AnyModel::Umn(m)
        }
    };
    Ok((model, ps))
}

pub struct RunArtifacts {
    pub outcome: TrainOutcome,
    pub model: AnyModel,
    pub ps: crate::params::ParamSet,
}

/// Train and, when an output directory is given, write the standard run
/// layout: config.txt, metrics.csv, checkpoint.json (+ checkpoint_best.json).
pub fn train_run(
    cfg: &TrainConfig,
    vocab: &Vocabulary,
    splits: &Splits,
    dataset_kind: DatasetKind,
    pretrained: Option<&HashMap<String, Vec<f64>>>,
    out_dir: Option<&Path>,
) -> Result<RunArtifacts> {
    let (model, mut ps) = build_model(cfg, vocab, splits, pretrained)?;
    let outcome = train(&model, &mut ps, vocab, cfg, splits, dataset_kind)?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("config.txt"), cfg.render())?;
        std::fs::write(dir.join("metrics.csv"), metrics_csv(&outcome.metrics))?;
        outcome.final_checkpoint.save(&dir.join("checkpoint.json"))?;
        if let Some(best) = &outcome.best_checkpoint {
            best.save(&dir.join("checkpoint_best.json"))?;
        }
    }
    Ok(RunArtifacts { outcome, model, ps })
}
