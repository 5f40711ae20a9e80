//! Training harness: objective assembly, schedules, the training loop with
//! metrics logging and best-epoch selection, and evaluation.

pub mod config;
pub mod selfcheck;
pub mod runner;

pub use config::TrainConfig;

use crate::checkpoint::Checkpoint;
use crate::data::{DatasetKind, Example, SymbolId, Vocabulary};
use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::models::{argmax, bce_loss, nll_loss, AnyModel, Arch, Phase};
use crate::optim::AdamState;
use crate::params::ParamSet;
use crate::rng::{Stream, StreamRng};
use crate::unify;
use std::collections::BTreeMap;

/// Scaled loss components; they sum to the scalar training loss.
#[derive(Clone, Copy, Debug, Default)]
pub struct LossParts {
    pub total: f64,
    pub nll_k: f64,
    pub nll_i: f64,
    pub sparsity: f64,
    pub mse_aux: f64,
    pub att_nll: f64,
}

#[derive(Clone, Debug)]
pub struct MetricsRow {
    pub iteration: usize,
    pub epoch: usize,
    pub split: String,
    pub task: String,
    pub accuracy: f64,
    pub loss: LossParts,
}

pub const METRICS_HEADER: &str =
    "iteration,epoch,split,task,accuracy,loss,nll_k,nll_i,sparsity,mse_aux,att_nll";

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.iteration,
            r.epoch,
            r.split,
            r.task,
            r.accuracy,
            r.loss.total,
            r.loss.nll_k,
            r.loss.nll_i,
            r.loss.sparsity,
            r.loss.mse_aux,
            r.loss.att_nll
        ));
    }
    out
}

pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricsRow>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line.trim() != METRICS_HEADER {
                return Err(Error::Parse { line: 1, msg: "unexpected metrics header".to_string() });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 11 {
            return Err(Error::Parse { line: i + 1, msg: format!("expected 11 columns, got {}", cols.len()) });
        }
        let f = |j: usize| -> Result<f64> {
            cols[j].parse().map_err(|_| Error::Parse { line: i + 1, msg: format!("bad number {:?}", cols[j]) })
        };
        let u = |j: usize| -> Result<usize> {
            cols[j].parse().map_err(|_| Error::Parse { line: i + 1, msg: format!("bad integer {:?}", cols[j]) })
        };
        rows.push(MetricsRow {
            iteration: u(0)?,
            epoch: u(1)?,
            split: cols[2].to_string(),
            task: cols[3].to_string(),
            accuracy: f(4)?,
            loss: LossParts {
                total: f(5)?,
                nll_k: f(6)?,
                nll_i: f(7)?,
                sparsity: f(8)?,
                mse_aux: f(9)?,
                att_nll: f(10)?,
            },
        });
    }
    Ok(rows)
}

/// Train/validation/test example sets for one run.
#[derive(Clone, Default)]
pub struct Splits {
    pub train: Vec<Example>,
    pub val: Vec<Example>,
    pub test: Vec<Example>,
}

// ── Objective ──────────────────────────────────────────────────────────

struct ComponentSum {
    total: Option<Var>,
}

impl ComponentSum {
    fn new() -> Self {
        ComponentSum { total: None }
    }

    fn add(&mut self, g: &mut Graph, term: Var, weight: f64) -> Result<f64> {
        if weight == 0.0 {
            return Ok(0.0);
        }
        let scaled = if (weight - 1.0).abs() < f64::EPSILON { term } else { g.scale(term, weight) };
        let value = g.value(scaled).item();
        self.total = Some(match self.total {
            None => scaled,
            Some(t) => g.add(t, scaled)?,
        });
        Ok(value)
    }

    fn finish(self, g: &mut Graph) -> (Var, f64) {
        let total = self.total.unwrap_or_else(|| g.scalar(0.0));
        let v = g.value(total).item();
        (total, v)
    }
}

/// Per-iteration attention targets from ordered supporting facts: target j
/// is supporting fact j, repeating the last fact when iterations exceed the
/// chain.
fn attention_target(supports: &[usize], iteration_1based: usize) -> usize {
    let idx = (iteration_1based - 1).min(supports.len() - 1);
    supports[idx]
}

/// Assemble the training objective for one batch and backpropagate it.
/// Returns parameter gradients and the scaled loss components.
pub fn objective(
    model: &AnyModel,
    ps: &ParamSet,
    batch: &[&Example],
    cfg: &TrainConfig,
    lambda_i: f64,
    dropout_rng: &mut Stream,
    positive_id: SymbolId,
) -> Result<(Vec<(crate::params::ParamId, crate::tensor::Tensor)>, LossParts)> {
    if batch.is_empty() {
        return Err(Error::argument("empty batch".to_string()));
    }
    let mut g = Graph::new();
    let mut parts = LossParts::default();
    let mut sum = ComponentSum::new();
    let mut phase = Phase::Train { dropout: cfg.dropout, rng: dropout_rng };
    let targets: Vec<usize> = batch.iter().map(|e| e.answer).collect();

    match model {
        AnyModel::Umlp(m) => {
            if cfg.lambda_k > 0.0 {
                let probs = m.forward_plain(&mut g, ps, batch)?;
                let nll = nll_loss(&mut g, probs, &targets)?;
                parts.nll_k = sum.add(&mut g, nll, cfg.lambda_k)?;
            }
            if lambda_i > 0.0 {
                let (probs, _) = m.forward_unified(&mut g, ps, batch, &mut phase)?;
                let nll = nll_loss(&mut g, probs, &targets)?;
                parts.nll_i = sum.add(&mut g, nll, lambda_i)?;
                let task = m.cfg.task_index(&batch[0].task)?;
                let invs: Vec<&unify::Invariant> = m.invariants[task].iter().collect();
                let sp = unify::sparsity_penalty(&mut g, ps, &invs, cfg.tau)?;
                parts.sparsity = sum.add(&mut g, sp, lambda_i)?;
            }
        }
        AnyModel::Ucnn(m) => {
            if cfg.lambda_k > 0.0 {
                let probs = m.forward_plain(&mut g, ps, batch)?;
                let nll = nll_loss(&mut g, probs, &targets)?;
                parts.nll_k = sum.add(&mut g, nll, cfg.lambda_k)?;
            }
            if lambda_i > 0.0 {
                let (probs, _) = m.forward_unified(&mut g, ps, batch, &mut phase)?;
                let nll = nll_loss(&mut g, probs, &targets)?;
                parts.nll_i = sum.add(&mut g, nll, lambda_i)?;
                let task = m.cfg.task_index(&batch[0].task)?;
                let invs: Vec<&unify::Invariant> = m.invariants[task].iter().collect();
                let sp = unify::sparsity_penalty(&mut g, ps, &invs, cfg.tau)?;
                parts.sparsity = sum.add(&mut g, sp, lambda_i)?;
            }
        }
        AnyModel::Urnn(m) => {
            let labels: Vec<f64> =
                batch.iter().map(|e| if e.answer == positive_id { 1.0 } else { 0.0 }).collect();
            // Per-example losses are summed here: the variableness MLP
            // shares one bias across every invariant word, so a batch-mean
            // data term loses the race against the absolute sparsity term
            // and psi collapses to zero before unification can form.
            let b_scale = batch.len() as f64;
            if cfg.lambda_k > 0.0 {
                let probs = m.forward_plain(&mut g, ps, batch, &mut phase)?;
                let bce = bce_loss(&mut g, probs, &labels)?;
                let bce = g.scale(bce, b_scale);
                parts.nll_k = sum.add(&mut g, bce, cfg.lambda_k)?;
            }
            if lambda_i > 0.0 {
                let (probs, _) = m.forward_unified(&mut g, ps, batch, &mut phase)?;
                let bce = bce_loss(&mut g, probs, &labels)?;
                let bce = g.scale(bce, b_scale);
                parts.nll_i = sum.add(&mut g, bce, lambda_i)?;
                // Variableness over the symbols occurring in each invariant.
                let mut psis = Vec::new();
                for inv in &m.invariants {
                    let words = inv.example.context.sentences().unwrap()[0].clone();
                    psis.push(m.psi_of(&mut g, ps, &words)?);
                }
                let sp = unify::sparsity_penalty_from_psi(&mut g, &psis, cfg.tau)?;
                parts.sparsity = sum.add(&mut g, sp, lambda_i)?;
            }
        }
        AnyModel::Umn(m) => {
            let unified = lambda_i > 0.0;
            let fwd = m.forward(&mut g, ps, batch, unified, &mut phase)?;
            let j_iters = m.cfg.iterations.max(1);

            let nll = nll_loss(&mut g, fwd.probs_k, &targets)?;
            parts.nll_k = sum.add(&mut g, nll, cfg.lambda_k)?;

            let mut att_terms: Vec<(Var, f64)> = Vec::new();
            if cfg.strong {
                let supports: Vec<Vec<usize>> = batch
                    .iter()
                    .map(|e| {
                        crate::models::umn::UmnModel::windowed_supports(e)
                            .filter(|s| !s.is_empty())
                            .ok_or_else(|| {
                                Error::config("strong supervision requires supporting facts".to_string())
                            })
                    })
                    .collect::<Result<_>>()?;
                for (j, beta) in fwd.beta_k.iter().enumerate() {
                    let tg: Vec<usize> =
                        supports.iter().map(|s| attention_target(s, j + 1)).collect();
                    let term = nll_loss(&mut g, *beta, &tg)?;
                    att_terms.push((term, cfg.lambda_k));
                }
            }

            if unified {
                let probs_i = fwd.probs_i.expect("unified forward");
                let nll = nll_loss(&mut g, probs_i, &targets)?;
                parts.nll_i = sum.add(&mut g, nll, lambda_i)?;

                if cfg.aux_mse {
                    let mut mse_total: Option<Var> = None;
                    for (hi, hk) in fwd.h_i.iter().zip(&fwd.h_k) {
                        let d = g.sub(*hi, *hk)?;
                        let sq = g.square(d);
                        let m_ = g.mean_all(sq);
                        mse_total = Some(match mse_total {
                            None => m_,
                            Some(t) => g.add(t, m_)?,
                        });
                    }
                    let mse = g.scale(mse_total.expect("at least one state"), 1.0 / j_iters as f64);
                    parts.mse_aux = sum.add(&mut g, mse, lambda_i)?;
                }

                let invs: Vec<&unify::Invariant> = m.invariants.iter().collect();
                let sp = unify::sparsity_penalty(&mut g, ps, &invs, cfg.tau)?;
                parts.sparsity = sum.add(&mut g, sp, lambda_i)?;

                if cfg.strong {
                    for (ci, inv) in m.invariants.iter().enumerate() {
                        let supports = crate::models::umn::UmnModel::windowed_supports(&inv.example)
                            .filter(|s| !s.is_empty())
                            .ok_or_else(|| {
                                Error::config(
                                    "strong supervision requires supporting facts on invariants".to_string(),
                                )
                            })?;
                        for (j, beta) in fwd.beta_i[ci].iter().enumerate() {
                            let t = attention_target(&supports, j + 1);
                            let tg = vec![t; batch.len()];
                            let term = nll_loss(&mut g, *beta, &tg)?;
                            att_terms.push((term, lambda_i));
                        }
                    }
                }
            }
            for (term, weight) in att_terms {
                parts.att_nll += sum.add(&mut g, term, weight)?;
            }
        }
    }

    let (total, total_value) = sum.finish(&mut g);
    parts.total = total_value;
    if !total_value.is_finite() {
        return Err(Error::Diverged(format!("loss became {total_value}")));
    }
    g.backward(total)?;
    Ok((g.param_grads(), parts))
}

// ── Evaluation ─────────────────────────────────────────────────────────

const EVAL_CHUNK: usize = 128;

/// Accuracy of a predicted-answer function over examples.
pub fn evaluate_with<F: FnMut(&Example) -> SymbolId>(examples: &[Example], mut predict: F) -> f64 {
    if examples.is_empty() {
        return 0.0;
    }
    let correct = examples.iter().filter(|e| predict(e) == e.answer).count();
    correct as f64 / examples.len() as f64
}

/// Batched eval-mode accuracy; the binary model thresholds at 0.5, the
/// others take the argmax over the answer vocabulary.
pub fn evaluate(
    model: &AnyModel,
    ps: &ParamSet,
    examples: &[Example],
    unified: bool,
    positive_id: SymbolId,
) -> Result<f64> {
    if examples.is_empty() {
        return Ok(0.0);
    }
    // Group per task so task-conditioned batches stay homogeneous.
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.sort_by(|&a, &b| examples[a].task.cmp(&examples[b].task).then(a.cmp(&b)));
    let mut correct = 0usize;
    let mut i = 0;
    while i < order.len() {
        let task = &examples[order[i]].task;
        let mut j = i;
        while j < order.len() && &examples[order[j]].task == task {
            j += 1;
        }
        for chunk in order[i..j].chunks(EVAL_CHUNK) {
            let batch: Vec<&Example> = chunk.iter().map(|&x| &examples[x]).collect();
            match model {
                AnyModel::Umlp(m) => {
                    for (rows, &x) in m.predict(ps, &batch, unified)?.iter().zip(chunk) {
                        if argmax(rows) == examples[x].answer {
                            correct += 1;
                        }
                    }
                }
                AnyModel::Ucnn(m) => {
                    for (rows, &x) in m.predict(ps, &batch, unified)?.iter().zip(chunk) {
                        if argmax(rows) == examples[x].answer {
                            correct += 1;
                        }
                    }
                }
                AnyModel::Umn(m) => {
                    for (rows, &x) in m.predict(ps, &batch, unified)?.iter().zip(chunk) {
                        if argmax(rows) == examples[x].answer {
                            correct += 1;
                        }
                    }
                }
                AnyModel::Urnn(m) => {
                    for (&p, &x) in m.predict(ps, &batch, unified)?.iter().zip(chunk) {
                        let predicted_positive = p >= 0.5;
                        let is_positive = examples[x].answer == positive_id;
                        if predicted_positive == is_positive {
                            correct += 1;
                        }
                    }
                }
            }
        }
        i = j;
    }
    Ok(correct as f64 / examples.len() as f64)
}

// ── Training loop ──────────────────────────────────────────────────────

pub struct TrainOutcome {
    pub metrics: Vec<MetricsRow>,
    pub final_checkpoint: Checkpoint,
    pub best_checkpoint: Option<Checkpoint>,
    pub best_val_epoch: Option<usize>,
    pub best_val_accuracy: Option<f64>,
    /// Test accuracy at the best-validation epoch (when a val split exists).
    pub test_at_best: Option<f64>,
}

struct TaskPool {
    task: String,
    indices: Vec<usize>,
    cursor: usize,
    cycle: usize,
}

impl TaskPool {
    fn refill(&mut self, rng: &StreamRng, seed_tag: &str) {
        let mut s = rng.stream(&format!("shuffle/{seed_tag}/{}/{}", self.task, self.cycle));
        s.shuffle(&mut self.indices);
        self.cursor = 0;
        self.cycle += 1;
    }

    fn next_batch(&mut self, size: usize, rng: &StreamRng, seed_tag: &str) -> Vec<usize> {
        let mut out = Vec::with_capacity(size.min(self.indices.len()));
        while out.len() < size.min(self.indices.len()) {
            if self.cursor >= self.indices.len() {
                self.refill(rng, seed_tag);
            }
            out.push(self.indices[self.cursor]);
            self.cursor += 1;
        }
        out
    }
}

/// Training accuracy is sampled over a capped prefix to keep logging cheap.
const TRAIN_EVAL_CAP: usize = 512;

fn eval_rows(
    model: &AnyModel,
    ps: &ParamSet,
    splits: &Splits,
    tasks: &[String],
    unified: bool,
    positive_id: SymbolId,
    iteration: usize,
    epoch: usize,
    last_parts: &BTreeMap<String, LossParts>,
) -> Result<Vec<MetricsRow>> {
    let mut rows = Vec::new();
    for task in tasks {
        let of_task = |xs: &[Example]| -> Vec<Example> {
            xs.iter().filter(|e| &e.task == task).cloned().collect()
        };
        let train: Vec<Example> = of_task(&splits.train).into_iter().take(TRAIN_EVAL_CAP).collect();
        let parts = last_parts.get(task).copied().unwrap_or_default();
        rows.push(MetricsRow {
            iteration,
            epoch,
            split: "train".to_string(),
            task: task.clone(),
            accuracy: evaluate(model, ps, &train, unified, positive_id)?,
            loss: parts,
        });
        let val = of_task(&splits.val);
        if !val.is_empty() {
            rows.push(MetricsRow {
                iteration,
                epoch,
                split: "val".to_string(),
                task: task.clone(),
                accuracy: evaluate(model, ps, &val, unified, positive_id)?,
                loss: LossParts::default(),
            });
        }
        let test = of_task(&splits.test);
        if !test.is_empty() {
            rows.push(MetricsRow {
                iteration,
                epoch,
                split: "test".to_string(),
                task: task.clone(),
                accuracy: evaluate(model, ps, &test, unified, positive_id)?,
                loss: LossParts::default(),
            });
        }
    }
    Ok(rows)
}

fn val_accuracy_of(rows: &[MetricsRow], iteration: usize) -> Option<f64> {
    let vals: Vec<f64> = rows
        .iter()
        .filter(|r| r.iteration == iteration && r.split == "val")
        .map(|r| r.accuracy)
        .collect();
    if vals.is_empty() {
        None
    } else {
        Some(vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

fn test_accuracy_of(rows: &[MetricsRow], iteration: usize) -> Option<f64> {
    let vals: Vec<f64> = rows
        .iter()
        .filter(|r| r.iteration == iteration && r.split == "test")
        .map(|r| r.accuracy)
        .collect();
    if vals.is_empty() {
        None
    } else {
        Some(vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

/// Train a model in place. Feed-forward and recurrent models run
/// `cfg.iters` batch updates per task (round-robin over tasks); the memory
/// network runs epochs with its pretraining schedule. Deterministic given
/// the seed.
pub fn train(
    model: &AnyModel,
    ps: &mut ParamSet,
    vocab: &Vocabulary,
    cfg: &TrainConfig,
    splits: &Splits,
    dataset_kind: DatasetKind,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if splits.train.is_empty() {
        return Err(Error::argument("empty training split".to_string()));
    }
    let rng = StreamRng::new(cfg.seed);
    let positive_id = vocab.id(crate::data::sentiment::POSITIVE).unwrap_or(usize::MAX);
    let mut adam = AdamState::new(cfg.lr).with_weight_decay(cfg.weight_decay);
    let mut metrics: Vec<MetricsRow> = Vec::new();
    let mut last_parts: BTreeMap<String, LossParts> = BTreeMap::new();

    let tasks: Vec<String> = match model {
        AnyModel::Umlp(m) => m.cfg.tasks.clone(),
        AnyModel::Ucnn(m) => m.cfg.tasks.clone(),
        _ => {
            let mut ts: Vec<String> = splits.train.iter().map(|e| e.task.clone()).collect();
            ts.sort();
            ts.dedup();
            ts
        }
    };

    let mut best: Option<(usize, f64, Checkpoint, Option<f64>)> = None;
    let track_best = |model: &AnyModel,
                          ps: &ParamSet,
                          rows: &[MetricsRow],
                          iteration: usize,
                          epoch: usize,
                          best: &mut Option<(usize, f64, Checkpoint, Option<f64>)>|
     -> Result<()> {
        if let Some(val) = val_accuracy_of(rows, iteration) {
            let better = best.as_ref().map(|(_, b, _, _)| val > *b).unwrap_or(true);
            if better {
                let ckpt = model.to_checkpoint(ps, vocab, dataset_kind, cfg.to_map())?;
                *best = Some((epoch, val, ckpt, test_accuracy_of(rows, iteration)));
            }
        }
        Ok(())
    };

    match model.arch() {
        Arch::Umlp | Arch::Ucnn | Arch::Urnn => {
            // Per-task pools, round-robin batches, iterations counted per task.
            let mut pools: Vec<TaskPool> = tasks
                .iter()
                .map(|t| TaskPool {
                    task: t.clone(),
                    indices: (0..splits.train.len())
                        .filter(|&i| &splits.train[i].task == t)
                        .collect(),
                    cursor: usize::MAX >> 1,
                    cycle: 0,
                })
                .collect();
            for p in &pools {
                if p.indices.is_empty() {
                    return Err(Error::argument(format!("no training examples for task {}", p.task)));
                }
            }
            let initial =
                eval_rows(model, ps, splits, &tasks, cfg.unified(), positive_id, 0, 0, &last_parts)?;
            metrics.extend(initial);

            for step in 0..cfg.iters * tasks.len() {
                let t = step % tasks.len();
                let iteration = step / tasks.len() + 1;
                let idx = pools[t].next_batch(cfg.batch, &rng, "train");
                let batch: Vec<&Example> = idx.iter().map(|&i| &splits.train[i]).collect();
                let mut dropout_rng = rng.stream(&format!("dropout/{step}"));
                let (grads, parts) =
                    objective(model, ps, &batch, cfg, cfg.lambda_i, &mut dropout_rng, positive_id)?;
                adam.step(ps, &grads);
                last_parts.insert(tasks[t].clone(), parts);

                let end_of_round = t == tasks.len() - 1;
                if end_of_round && iteration % cfg.log_every == 0 {
                    let rows = eval_rows(
                        model,
                        ps,
                        splits,
                        &tasks,
                        cfg.unified(),
                        positive_id,
                        iteration,
                        0,
                        &last_parts,
                    )?;
                    track_best(model, ps, &rows, iteration, iteration, &mut best)?;
                    metrics.extend(rows);
                }
            }
        }
        Arch::Umn => {
            let mut indices: Vec<usize> = (0..splits.train.len()).collect();
            let initial =
                eval_rows(model, ps, splits, &tasks, false, positive_id, 0, 0, &last_parts)?;
            metrics.extend(initial);
            let mut global_step = 0usize;
            for epoch in 1..=cfg.epochs {
                let lambda_i = if epoch <= cfg.pretrain_epochs { 0.0 } else { cfg.lambda_i };
                let mut s = rng.stream(&format!("shuffle/epoch/{epoch}"));
                s.shuffle(&mut indices);
                for chunk in indices.chunks(cfg.batch) {
                    let batch: Vec<&Example> = chunk.iter().map(|&i| &splits.train[i]).collect();
                    let mut dropout_rng = rng.stream(&format!("dropout/{global_step}"));
                    let (grads, parts) =
                        objective(model, ps, &batch, cfg, lambda_i, &mut dropout_rng, positive_id)?;
                    adam.step(ps, &grads);
                    global_step += 1;
                    for t in &tasks {
                        last_parts.insert(t.clone(), parts);
                    }
                }
                let unified_now = lambda_i > 0.0;
                let rows = eval_rows(
                    model,
                    ps,
                    splits,
                    &tasks,
                    unified_now,
                    positive_id,
                    global_step,
                    epoch,
                    &last_parts,
                )?;
                // Best-epoch selection runs in the phase of the final output.
                if unified_now || cfg.lambda_i == 0.0 {
                    track_best(model, ps, &rows, global_step, epoch, &mut best)?;
                }
                metrics.extend(rows);
            }
        }
    }

    let final_checkpoint = model.to_checkpoint(ps, vocab, dataset_kind, cfg.to_map())?;
    let (best_val_epoch, best_val_accuracy, best_checkpoint, test_at_best) = match best {
        Some((e, v, c, t)) => (Some(e), Some(v), Some(c), t),
        None => (None, None, None, None),
    };
    Ok(TrainOutcome {
        metrics,
        final_checkpoint,
        best_checkpoint,
        best_val_epoch,
        best_val_accuracy,
        test_at_best,
    })
}

// ── Built-in toy sentiment corpus ──────────────────────────────────────

pub const TOY_POSITIVE_WORDS: [&str; 5] = ["great", "wonderful", "excellent", "superb", "delightful"];
pub const TOY_NEGATIVE_WORDS: [&str; 5] = ["awful", "terrible", "boring", "silly", "dreadful"];

const TOY_FILLERS: [&str; 28] = [
    "the", "a", "this", "that", "film", "movie", "plot", "story", "acting", "cast", "scene",
    "script", "pace", "tone", "music", "style", "it", "was", "felt", "seemed", "looked", "rather",
    "quite", "very", "truly", "overall", "really", "ending",
];

/// Synthetic review sentences with one planted polarity keyword determining
/// the label; vocabulary stays under 50 words.
pub fn make_toy_sentiment(n: usize, vocab: &mut Vocabulary, stream: &mut Stream) -> Result<Vec<Example>> {
    if n == 0 {
        return Err(Error::argument("n must be >= 1".to_string()));
    }
    let positive = vocab.intern(crate::data::sentiment::POSITIVE);
    let negative = vocab.intern(crate::data::sentiment::NEGATIVE);
    let query = vocab.intern(crate::data::sentiment::QUERY_TOKEN);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let is_positive = stream.below(2) == 0;
        let keyword = if is_positive {
            *stream.choice(&TOY_POSITIVE_WORDS)
        } else {
            *stream.choice(&TOY_NEGATIVE_WORDS)
        };
        let len = 4 + stream.below(7);
        let mut words: Vec<&str> = (0..len - 1).map(|_| *stream.choice(&TOY_FILLERS)).collect();
        let at = stream.below(words.len() + 1);
        words.insert(at, keyword);
        let ids: Vec<SymbolId> = words.iter().map(|w| vocab.intern(w)).collect();
        out.push(Example {
            context: crate::data::Context::Sentences(vec![ids]),
            query: vec![query],
            answer: if is_positive { positive } else { negative },
            supports: None,
            task: "sentiment".to_string(),
        });
    }
    Ok(out)
}
