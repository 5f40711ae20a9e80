//! Sequence model: a task-conditioned MLP over flattened symbol embeddings,
//! with unifying features from a bi-directional GRU whose initial state is
//! the embedded task id.

use super::{ModelConfig, Phase};
use crate::data::{Example, SymbolId};
use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::layers::{BiGru, Linear};
use crate::params::{InitSpec, ParamId, ParamSet};
use crate::rng::StreamRng;
use crate::tensor::Tensor;
use crate::unify::{self, Invariant, PsiSource, UnificationTrace, UnifyVars, PSI_INIT_WEIGHT};

pub const SEQ_LEN: usize = 4;

pub struct UmlpModel {
    pub cfg: ModelConfig,
    pub embeddings: ParamId,
    task_emb: ParamId,
    ugru: BiGru,
    w_u: ParamId,
    l1: Linear,
    l2: Linear,
    l3: Linear,
    /// invariants[task_index] -> that task's invariants.
    pub invariants: Vec<Vec<Invariant>>,
}

impl UmlpModel {
    pub fn new(cfg: ModelConfig, ps: &mut ParamSet, rng: &StreamRng) -> Result<Self> {
        let d = cfg.d;
        let t = cfg.task_count();
        let flat = SEQ_LEN * d + t;
        Ok(UmlpModel {
            embeddings: ps.register("umlp.embeddings", &[cfg.vocab_size, d], InitSpec::StandardNormal, rng)?,
            task_emb: ps.register("umlp.task_emb", &[t, d], InitSpec::ScaledNormal(0.3), rng)?,
            ugru: BiGru::new(ps, rng, "umlp.ugru", d, d)?,
            w_u: ps.register("umlp.w_u", &[d, d], InitSpec::UniformFanIn, rng)?,
            l1: Linear::new(ps, rng, "umlp.l1", flat, 2 * d, true)?,
            l2: Linear::new(ps, rng, "umlp.l2", 2 * d, d, true)?,
            l3: Linear::new(ps, rng, "umlp.l3", d, d, true)?,
            invariants: (0..cfg.tasks.len()).map(|_| Vec::new()).collect(),
            cfg,
        })
    }

    /// Register per-invariant variableness tables, one per picked example.
    pub fn set_invariants(
        &mut self,
        per_task: Vec<Vec<Example>>,
        ps: &mut ParamSet,
        rng: &StreamRng,
    ) -> Result<()> {
        if per_task.len() != self.cfg.tasks.len() {
            return Err(Error::argument("one invariant list per task required".to_string()));
        }
        self.invariants = Vec::with_capacity(per_task.len());
        for (t, examples) in per_task.into_iter().enumerate() {
            let mut invs = Vec::with_capacity(examples.len());
            for (i, example) in examples.into_iter().enumerate() {
                let table = ps.register(
                    &format!("umlp.inv.{}.{i}.psi", self.cfg.tasks[t]),
                    &[self.cfg.vocab_size, 1],
                    InitSpec::Constant(PSI_INIT_WEIGHT),
                    rng,
                )?;
                invs.push(Invariant { example, psi: PsiSource::Table(table), id: i });
            }
            self.invariants.push(invs);
        }
        Ok(())
    }

    fn sequence_of(example: &Example) -> Result<&[SymbolId]> {
        let sentences = example
            .context
            .sentences()
            .ok_or_else(|| Error::shape("sequence model needs sentence context".to_string()))?;
        let seq = &sentences[0];
        if sentences.len() != 1 || seq.len() != SEQ_LEN {
            return Err(Error::shape(format!(
                "input must be a single length-{SEQ_LEN} sequence"
            )));
        }
        Ok(seq)
    }

    fn batch_ids(&self, batch: &[&Example]) -> Result<(Vec<usize>, usize)> {
        let mut ids = Vec::with_capacity(batch.len() * SEQ_LEN);
        let task = self.cfg.task_index(&batch[0].task)?;
        for ex in batch {
            if self.cfg.task_index(&ex.task)? != task {
                return Err(Error::argument("mixed tasks in one sequence batch".to_string()));
            }
            ids.extend_from_slice(Self::sequence_of(ex)?);
        }
        Ok((ids, task))
    }

    fn task_one_hot(&self, g: &mut Graph, batch: usize, task: usize) -> Var {
        let t = self.cfg.task_count();
        let mut oh = Tensor::zeros(&[batch, t]);
        for b in 0..batch {
            oh.data_mut()[b * t + task] = 1.0;
        }
        g.constant(oh)
    }

    fn mlp_predict(&self, g: &mut Graph, ps: &ParamSet, flat_with_task: Var) -> Result<Var> {
        let h = self.l1.forward(g, ps, flat_with_task)?;
        let h = g.tanh(h);
        let h = self.l2.forward(g, ps, h)?;
        let h = g.tanh(h);
        let h = self.l3.forward(g, ps, h)?;
        let e = g.param(ps, self.embeddings);
        let et = g.transpose_last(e)?;
        let logits = g.matmul(h, et)?;
        g.softmax(logits, 1)
    }

    /// Unifying features of a [B, L] symbol batch: per-step bi-GRU hidden
    /// states (initial state: embedded task id) through a linear map.
    fn unifying_features(
        &self,
        g: &mut Graph,
        ps: &ParamSet,
        ids: &[usize],
        batch: usize,
        task: usize,
        phase: &mut Phase,
    ) -> Result<Var> {
        let d = self.cfg.d;
        let e = g.param(ps, self.embeddings);
        let te = g.param(ps, self.task_emb);
        let init1 = g.embedding(te, &[task], &[1])?;
        let init = g.broadcast_to(init1, &[batch, d])?;
        let mut steps = Vec::with_capacity(SEQ_LEN);
        for t in 0..SEQ_LEN {
            let col: Vec<usize> = (0..batch).map(|b| ids[b * SEQ_LEN + t]).collect();
            steps.push(g.embedding(e, &col, &[batch])?);
        }
        let (outs, _) = self.ugru.forward(g, ps, &steps, Some(init), None)?;
        let stacked = g.stack(&outs, 1)?; // [B, L, d]
        let balanced = crate::unify::normalize_direction_halves(g, stacked)?;
        let dropped = phase.dropout(g, balanced)?;
        let wu = g.param(ps, self.w_u);
        g.matmul(dropped, wu)
    }

    /// Plain prediction f(phi(K)): probabilities [B, |S|].
    pub fn forward_plain(&self, g: &mut Graph, ps: &ParamSet, batch: &[&Example]) -> Result<Var> {
        if batch.is_empty() {
            return Err(Error::argument("empty batch".to_string()));
        }
        let (ids, task) = self.batch_ids(batch)?;
        let b = batch.len();
        let e = g.param(ps, self.embeddings);
        let phi = g.embedding(e, &ids, &[b, SEQ_LEN])?;
        let flat = g.reshape(phi, &[b, SEQ_LEN * self.cfg.d])?;
        let oh = self.task_one_hot(g, b, task);
        let x = g.concat(&[flat, oh], 1)?;
        self.mlp_predict(g, ps, x)
    }

    /// Unified prediction f(flatten(unify(I, K))), aggregated over the
    /// task's invariants. Also returns the per-invariant unify nodes.
    pub fn forward_unified(
        &self,
        g: &mut Graph,
        ps: &ParamSet,
        batch: &[&Example],
        phase: &mut Phase,
    ) -> Result<(Var, Vec<UnifyVars>)> {
        if batch.is_empty() {
            return Err(Error::argument("empty batch".to_string()));
        }
        let (ids, task) = self.batch_ids(batch)?;
        let b = batch.len();
        let d = self.cfg.d;
        let invariants = &self.invariants[task];
        if invariants.is_empty() {
            return Err(Error::config(format!("no invariants for task {}", batch[0].task)));
        }

        let e = g.param(ps, self.embeddings);
        let c = g.embedding(e, &ids, &[b, SEQ_LEN])?; // [B, L, d]
        let dfeat = self.unifying_features(g, ps, &ids, b, task, phase)?;
        let oh = self.task_one_hot(g, b, task);

        let mut preds = Vec::with_capacity(invariants.len());
        let mut unifies = Vec::with_capacity(invariants.len());
        for inv in invariants {
            let g_ids = Self::sequence_of(&inv.example)?.to_vec();
            let a = g.embedding(e, &g_ids, &[SEQ_LEN])?;
            let bu3 = self.unifying_features(g, ps, &g_ids, 1, task, phase)?;
            let bu = g.reshape(bu3, &[SEQ_LEN, d])?;
            let psi = unify::table_psi(g, ps, inv, &g_ids)?;
            let uv = unify::unify(g, a, bu, c, dfeat, psi, None)?;
            let flat = g.reshape(uv.u, &[b, SEQ_LEN * d])?;
            let x = g.concat(&[flat, oh], 1)?;
            preds.push(self.mlp_predict(g, ps, x)?);
            unifies.push(uv);
        }
        let agg = unify::aggregate_probs(g, &preds)?;
        Ok((agg, unifies))
    }

    /// Eval-mode probabilities for a slice of examples (all one task).
    pub fn predict(&self, ps: &ParamSet, batch: &[&Example], unified: bool) -> Result<Vec<Vec<f64>>> {
        let mut g = Graph::new();
        let probs = if unified {
            self.forward_unified(&mut g, ps, batch, &mut Phase::Eval)?.0
        } else {
            self.forward_plain(&mut g, ps, batch)?
        };
        let v = g.value(probs);
        let vocab = self.cfg.vocab_size;
        Ok((0..batch.len()).map(|b| v.data()[b * vocab..(b + 1) * vocab].to_vec()).collect())
    }

    /// Prediction from an externally built unified representation [B, L, d];
    /// the path the plain forward takes over phi(K).
    pub fn predict_from_unified(
        &self,
        g: &mut Graph,
        ps: &ParamSet,
        u: Var,
        task: usize,
    ) -> Result<Var> {
        let b = g.shape(u)[0];
        let flat = g.reshape(u, &[b, SEQ_LEN * self.cfg.d])?;
        let oh = self.task_one_hot(g, b, task);
        let x = g.concat(&[flat, oh], 1)?;
        self.mlp_predict(g, ps, x)
    }

    /// Single-example unification trace against one invariant, in eval mode.
    pub fn trace(&self, ps: &ParamSet, example: &Example, inv_index: usize) -> Result<UnificationTrace> {
        let task = self.cfg.task_index(&example.task)?;
        let inv = self.invariants[task]
            .get(inv_index)
            .ok_or_else(|| Error::argument(format!("invariant {inv_index} not present")))?;
        let mut g = Graph::new();
        let mut phase = Phase::Eval;
        let ids = Self::sequence_of(example)?.to_vec();
        let g_ids = Self::sequence_of(&inv.example)?.to_vec();
        let d = self.cfg.d;
        let e = g.param(ps, self.embeddings);
        let c3 = g.embedding(e, &ids, &[1, SEQ_LEN])?;
        let c = g.reshape(c3, &[SEQ_LEN, d])?;
        let df3 = self.unifying_features(&mut g, ps, &ids, 1, task, &mut phase)?;
        let df = g.reshape(df3, &[SEQ_LEN, d])?;
        let a = g.embedding(e, &g_ids, &[SEQ_LEN])?;
        let bu3 = self.unifying_features(&mut g, ps, &g_ids, 1, task, &mut phase)?;
        let bu = g.reshape(bu3, &[SEQ_LEN, d])?;
        let psi = unify::table_psi(&mut g, ps, inv, &g_ids)?;
        let uv = unify::unify(&mut g, a, bu, c, df, psi, None)?;
        Ok(unify::trace_of(&g, &uv))
    }
}
