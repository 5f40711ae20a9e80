//! Grid model: two same-padding convolutions for the predictor and a
//! separate identical stack for unifying features; background cells are
//! masked out of unification.

use super::{ModelConfig, Phase};
use crate::data::{Example, SymbolId};
use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::layers::{ConvStack, Linear};
use crate::params::{InitSpec, ParamId, ParamSet};
use crate::rng::StreamRng;
use crate::tensor::Tensor;
use crate::unify::{self, Invariant, PsiSource, UnificationTrace, UnifyVars, PSI_INIT_WEIGHT};

pub const GRID_CELLS: usize = 9;

pub struct UcnnModel {
    pub cfg: ModelConfig,
    pub embeddings: ParamId,
    f_stack: ConvStack,
    u_stack: ConvStack,
    out: Linear,
    pub invariants: Vec<Vec<Invariant>>,
}

impl UcnnModel {
    pub fn new(cfg: ModelConfig, ps: &mut ParamSet, rng: &StreamRng) -> Result<Self> {
        let d = cfg.d;
        let c_in = d + cfg.task_count();
        Ok(UcnnModel {
            embeddings: ps.register("ucnn.embeddings", &[cfg.vocab_size, d], InitSpec::StandardNormal, rng)?,
            f_stack: ConvStack::new(ps, rng, "ucnn.f", c_in, d)?,
            u_stack: ConvStack::new(ps, rng, "ucnn.u", c_in, d)?,
            out: Linear::new(ps, rng, "ucnn.out", d, d, true)?,
            invariants: (0..cfg.tasks.len()).map(|_| Vec::new()).collect(),
            cfg,
        })
    }

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
                    &format!("ucnn.inv.{}.{i}.psi", self.cfg.tasks[t]),
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

    fn grid_of(example: &Example) -> Result<[SymbolId; 9]> {
        example
            .context
            .grid_flat()
            .ok_or_else(|| Error::shape("grid model needs a 3x3 grid context".to_string()))
    }

    fn batch_ids(&self, batch: &[&Example]) -> Result<(Vec<usize>, usize)> {
        let task = self.cfg.task_index(&batch[0].task)?;
        let mut ids = Vec::with_capacity(batch.len() * GRID_CELLS);
        for ex in batch {
            if self.cfg.task_index(&ex.task)? != task {
                return Err(Error::argument("mixed tasks in one grid batch".to_string()));
            }
            ids.extend_from_slice(&Self::grid_of(ex)?);
        }
        Ok((ids, task))
    }

    /// Per-cell task one-hot planes, [B, 3, 3, T].
    fn task_planes(&self, g: &mut Graph, batch: usize, task: usize) -> Var {
        let t = self.cfg.task_count();
        let mut planes = Tensor::zeros(&[batch, 3, 3, t]);
        for i in 0..batch * GRID_CELLS {
            planes.data_mut()[i * t + task] = 1.0;
        }
        g.constant(planes)
    }

    /// Embed ids and append task planes: [B, 3, 3, d + T].
    fn grid_input(&self, g: &mut Graph, ps: &ParamSet, ids: &[usize], batch: usize, task: usize) -> Result<Var> {
        let e = g.param(ps, self.embeddings);
        let phi = g.embedding(e, ids, &[batch, 3, 3])?;
        let planes = self.task_planes(g, batch, task);
        g.concat(&[phi, planes], 3)
    }

    fn predict_from_grid(&self, g: &mut Graph, ps: &ParamSet, x: Var) -> Result<Var> {
        let h = self.f_stack.forward(g, ps, x)?;
        let pooled = g.global_max_pool(h)?;
        let h = self.out.forward(g, ps, pooled)?;
        let e = g.param(ps, self.embeddings);
        let et = g.transpose_last(e)?;
        let logits = g.matmul(h, et)?;
        g.softmax(logits, 1)
    }

    pub fn forward_plain(&self, g: &mut Graph, ps: &ParamSet, batch: &[&Example]) -> Result<Var> {
        if batch.is_empty() {
            return Err(Error::argument("empty batch".to_string()));
        }
        let (ids, task) = self.batch_ids(batch)?;
        let x = self.grid_input(g, ps, &ids, batch.len(), task)?;
        self.predict_from_grid(g, ps, x)
    }

    pub fn forward_unified(
        &self,
        g: &mut Graph,
        ps: &ParamSet,
        batch: &[&Example],
        _phase: &mut Phase,
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

        // Background cells cannot receive variable bindings.
        let mut mask = Tensor::zeros(&[b, GRID_CELLS]);
        for (i, &id) in ids.iter().enumerate() {
            if id != 0 {
                mask.data_mut()[i] = 1.0;
            }
        }
        for row in 0..b {
            if mask.data()[row * GRID_CELLS..(row + 1) * GRID_CELLS].iter().all(|&v| v == 0.0) {
                return Err(Error::argument("all-background grid cannot be unified".to_string()));
            }
        }

        let e = g.param(ps, self.embeddings);
        let c = g.embedding(e, &ids, &[b, GRID_CELLS])?;
        let k_in = self.grid_input(g, ps, &ids, b, task)?;
        let dmap = self.u_stack.forward(g, ps, k_in)?; // [B,3,3,d]
        let dfeat = g.reshape(dmap, &[b, GRID_CELLS, d])?;

        let oh = self.task_planes(g, b, task);
        let mut preds = Vec::with_capacity(invariants.len());
        let mut unifies = Vec::with_capacity(invariants.len());
        for inv in invariants {
            let g_ids = Self::grid_of(&inv.example)?.to_vec();
            let a = g.embedding(e, &g_ids, &[GRID_CELLS])?;
            let g_in = self.grid_input(g, ps, &g_ids, 1, task)?;
            let bmap = self.u_stack.forward(g, ps, g_in)?;
            let bu = g.reshape(bmap, &[GRID_CELLS, d])?;
            let psi = unify::table_psi(g, ps, inv, &g_ids)?;
            let uv = unify::unify(g, a, bu, c, dfeat, psi, Some(&mask))?;
            let u_grid = g.reshape(uv.u, &[b, 3, 3, d])?;
            let x = g.concat(&[u_grid, oh], 3)?;
            preds.push(self.predict_from_grid(g, ps, x)?);
            unifies.push(uv);
        }
        let agg = unify::aggregate_probs(g, &preds)?;
        Ok((agg, unifies))
    }

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

    /// Prediction from an externally built unified representation
    /// [B, 9, d]; the path the plain forward takes over phi(K).
    pub fn predict_from_unified(
        &self,
        g: &mut Graph,
        ps: &ParamSet,
        u: Var,
        task: usize,
    ) -> Result<Var> {
        let b = g.shape(u)[0];
        let u_grid = g.reshape(u, &[b, 3, 3, self.cfg.d])?;
        let oh = self.task_planes(g, b, task);
        let x = g.concat(&[u_grid, oh], 3)?;
        self.predict_from_grid(g, ps, x)
    }

    pub fn trace(&self, ps: &ParamSet, example: &Example, inv_index: usize) -> Result<UnificationTrace> {
        let task = self.cfg.task_index(&example.task)?;
        let inv = self.invariants[task]
            .get(inv_index)
            .ok_or_else(|| Error::argument(format!("invariant {inv_index} not present")))?;
        let mut g = Graph::new();
        let ids = Self::grid_of(example)?.to_vec();
        let g_ids = Self::grid_of(&inv.example)?.to_vec();
        let d = self.cfg.d;
        let mut mask = Tensor::zeros(&[1, GRID_CELLS]);
        for (i, &id) in ids.iter().enumerate() {
            if id != 0 {
                mask.data_mut()[i] = 1.0;
            }
        }
        let e = g.param(ps, self.embeddings);
        let c3 = g.embedding(e, &ids, &[1, GRID_CELLS])?;
        let c = g.reshape(c3, &[GRID_CELLS, d])?;
        let k_in = self.grid_input(&mut g, ps, &ids, 1, task)?;
        let dmap = self.u_stack.forward(&mut g, ps, k_in)?;
        let dfeat = g.reshape(dmap, &[GRID_CELLS, d])?;
        let a = g.embedding(e, &g_ids, &[GRID_CELLS])?;
        let g_in = self.grid_input(&mut g, ps, &g_ids, 1, task)?;
        let bmap = self.u_stack.forward(&mut g, ps, g_in)?;
        let bu = g.reshape(bmap, &[GRID_CELLS, d])?;
        let psi = unify::table_psi(&mut g, ps, inv, &g_ids)?;
        let mask1 = mask.reshape(&[GRID_CELLS]).expect("mask reshape");
        let uv = unify::unify(&mut g, a, bu, c, dfeat, psi, Some(&mask1))?;
        Ok(unify::trace_of(&g, &uv))
    }
}
