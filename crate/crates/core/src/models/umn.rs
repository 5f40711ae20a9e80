//! Memory network with per-iteration soft unification. Sentences are encoded
//! by a bi-directional GRU; each iteration attends over memory slots with a
//! learned interaction, unifies the words of the attended invariant and
//! example sentences through a pairwise unification tensor, re-encodes the
//! unified words, and substitutes them into the invariant's attended slot
//! before updating the invariant-side state.

use super::{ModelConfig, Phase};
use crate::data::{Example, SymbolId};
use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::layers::{BiGru, Linear};
use crate::params::{InitSpec, ParamId, ParamSet};
use crate::rng::StreamRng;
use crate::tensor::Tensor;
use crate::unify::{self, Invariant, PsiSource, UnificationTrace, PSI_INIT_WEIGHT};

/// Stories longer than this keep only their most recent sentences.
pub const MAX_SLOTS: usize = 50;

pub struct UmnModel {
    pub cfg: ModelConfig,
    pub embeddings: ParamId,
    phi_m: BiGru,
    phi_a: BiGru,
    phi_u: BiGru,
    w_u: ParamId,
    w_rho: Linear,
    att_out: Linear,
    out: Linear,
    w_eta: ParamId,
    pub invariants: Vec<Invariant>,
    /// Test fixture: bypass the slot-order GRU so attention depends only on
    /// each slot's own interaction vector.
    pub phi_a_identity: bool,
}

/// State of the memory network after one iteration, over plain tensors.
pub struct MemoryState {
    pub h: Tensor,
    pub beta: Tensor,
    pub j: usize,
}

/// Everything a training step needs from one forward pass.
pub struct UmnForward {
    pub probs_k: Var,
    pub probs_i: Option<Var>,
    /// K-side hidden states, iterations 0..=J.
    pub h_k: Vec<Var>,
    /// Invariant-side combined hidden states, iterations 0..=J (unified runs).
    pub h_i: Vec<Var>,
    /// K-side context attention per iteration 1..=J, each [B, N].
    pub beta_k: Vec<Var>,
    /// Per invariant: context attention per iteration 1..=J, each [B, M].
    pub beta_i: Vec<Vec<Var>>,
}

struct StoryBatch {
    b: usize,
    n: usize,
    l: usize,
    /// [B * N * L] word ids, padded with 0.
    words: Vec<usize>,
    /// Per-(sentence-batch) step masks: word_masks[t] is [B*N, 1].
    word_masks: Vec<Tensor>,
    /// [B, N] slot keep-mask.
    slot_mask: Tensor,
    /// [B, 1, N, 1, L] word keep-mask for unification scores.
    kw_mask: Tensor,
    /// [B * Lq] query ids and per-step masks.
    query: Vec<usize>,
    query_masks: Vec<Tensor>,
    lq: usize,
}

impl UmnModel {
    pub fn new(cfg: ModelConfig, ps: &mut ParamSet, rng: &StreamRng) -> Result<Self> {
        let d = cfg.d;
        Ok(UmnModel {
            embeddings: ps.register("umn.embeddings", &[cfg.vocab_size, d], InitSpec::StandardNormal, rng)?,
            phi_m: BiGru::new(ps, rng, "umn.phi_m", d, d)?,
            phi_a: BiGru::new(ps, rng, "umn.phi_a", d, d)?,
            phi_u: BiGru::new(ps, rng, "umn.phi_u", d, d)?,
            w_u: ps.register("umn.w_u", &[d, d], InitSpec::UniformFanIn, rng)?,
            w_rho: Linear::with_gain(ps, rng, "umn.w_rho", 4 * d, d, true, 0.25)?,
            att_out: Linear::new(ps, rng, "umn.att_out", d, 1, true)?,
            out: Linear::new(ps, rng, "umn.out", d, cfg.vocab_size, true)?,
            w_eta: ps.register("umn.w_eta", &[d, d], InitSpec::UniformFanIn, rng)?,
            invariants: Vec::new(),
            phi_a_identity: false,
            cfg,
        })
    }

    pub fn set_invariants(&mut self, examples: Vec<Example>, ps: &mut ParamSet, rng: &StreamRng) -> Result<()> {
        self.invariants = Vec::with_capacity(examples.len());
        for (i, example) in examples.into_iter().enumerate() {
            let table = ps.register(
                &format!("umn.inv.{i}.psi"),
                &[self.cfg.vocab_size, 1],
                InitSpec::Constant(PSI_INIT_WEIGHT),
                rng,
            )?;
            self.invariants.push(Invariant { example, psi: PsiSource::Table(table), id: i });
        }
        Ok(())
    }

    fn story_of(example: &Example) -> Result<Vec<Vec<SymbolId>>> {
        let sentences = example
            .context
            .sentences()
            .ok_or_else(|| Error::shape("memory network needs sentence context".to_string()))?;
        if sentences.is_empty() {
            return Err(Error::argument("empty story".to_string()));
        }
        let start = sentences.len().saturating_sub(MAX_SLOTS);
        Ok(sentences[start..].to_vec())
    }

    /// Supporting-fact indices shifted into the truncation window.
    pub fn windowed_supports(example: &Example) -> Option<Vec<usize>> {
        let sentences = example.context.sentences()?;
        let start = sentences.len().saturating_sub(MAX_SLOTS);
        example
            .supports
            .as_ref()
            .map(|s| s.iter().map(|&i| i.saturating_sub(start).min(MAX_SLOTS - 1)).collect())
    }

    fn prepare_batch(batch: &[&Example]) -> Result<StoryBatch> {
        let b = batch.len();
        let stories: Vec<Vec<Vec<SymbolId>>> =
            batch.iter().map(|e| Self::story_of(e)).collect::<Result<_>>()?;
        let n = stories.iter().map(|s| s.len()).max().unwrap();
        let l = stories
            .iter()
            .flat_map(|s| s.iter().map(|sent| sent.len()))
            .max()
            .unwrap_or(1)
            .max(1);
        let lq = batch.iter().map(|e| e.query.len()).max().unwrap_or(1).max(1);

        let mut words = vec![0usize; b * n * l];
        let mut word_masks = vec![Tensor::zeros(&[b * n, 1]); l];
        let mut slot_mask = Tensor::zeros(&[b, n]);
        let mut kw_mask = Tensor::zeros(&[b, 1, n, 1, l]);
        for (bi, story) in stories.iter().enumerate() {
            for (si, sent) in story.iter().enumerate() {
                slot_mask.data_mut()[bi * n + si] = 1.0;
                for (ti, &w) in sent.iter().enumerate() {
                    words[(bi * n + si) * l + ti] = w;
                    word_masks[ti].data_mut()[bi * n + si] = 1.0;
                    kw_mask.data_mut()[(bi * n + si) * l + ti] = 1.0;
                }
            }
        }
        let mut query = vec![0usize; b * lq];
        let mut query_masks = vec![Tensor::zeros(&[b, 1]); lq];
        for (bi, ex) in batch.iter().enumerate() {
            for (ti, &w) in ex.query.iter().take(lq).enumerate() {
                query[bi * lq + ti] = w;
                query_masks[ti].data_mut()[bi] = 1.0;
            }
        }
        Ok(StoryBatch { b, n, l, words, word_masks, slot_mask, kw_mask, query, query_masks, lq })
    }

    /// Run the memory encoder over a [rows, len] id matrix; returns final
    /// states [rows, d] and per-step outputs (for unifying features).
    fn encode_rows(
        &self,
        g: &mut Graph,
        ps: &ParamSet,
        ids: &[usize],
        rows: usize,
        len: usize,
        masks: Option<&[Tensor]>,
        gru: &BiGru,
        phase: &mut Phase,
    ) -> Result<(Vec<Var>, Var)> {
        let e = g.param(ps, self.embeddings);
        let mut steps = Vec::with_capacity(len);
        for t in 0..len {
            let col: Vec<usize> = (0..rows).map(|r| ids[r * len + t]).collect();
            steps.push(g.embedding(e, &col, &[rows])?);
        }
        let mask_vars: Option<Vec<Var>> =
            masks.map(|ms| ms.iter().map(|m| g.constant(m.clone())).collect());
        let (outs, fin) = gru.forward(g, ps, &steps, None, mask_vars.as_deref())?;
        let fin = phase.dropout(g, fin)?;
        Ok((outs, fin))
    }

    /// Interaction vectors A_i = tanh(W rho(M_i, h) + b), [B, N, d].
    fn interact(&self, g: &mut Graph, ps: &ParamSet, m: Var, h: Var) -> Result<Var> {
        let (b, n, d) = {
            let hs = g.shape(h);
            let ms = g.shape(m);
            (hs[0], ms[ms.len() - 2], hs[1])
        };
        let h3 = g.reshape(h, &[b, 1, d])?;
        let hb = g.broadcast_to(h3, &[b, n, d])?;
        let mb = if g.shape(m)[0] == b { m } else { g.broadcast_to(m, &[b, n, d])? };
        let prod = g.mul(mb, hb)?;
        let diff = g.sub(mb, hb)?;
        let sq = g.square(diff);
        let rho = g.concat(&[mb, hb, prod, sq], 2)?;
        let a = self.w_rho.forward(g, ps, rho)?;
        Ok(g.tanh(a))
    }

    /// Context attention over slots: beta [B, N] plus the interactions.
    fn attend(
        &self,
        g: &mut Graph,
        ps: &ParamSet,
        m: Var,
        h: Var,
        slot_mask: &Tensor,
        phase: &mut Phase,
    ) -> Result<(Var, Var)> {
        let a = self.interact(g, ps, m, h)?;
        let (b, n, d) = {
            let s = g.shape(a);
            (s[0], s[1], s[2])
        };
        let feats = if self.phi_a_identity {
            a
        } else {
            let mut steps = Vec::with_capacity(n);
            for i in 0..n {
                steps.push(g.select_axis(a, 1, i)?);
            }
            let (outs, _) = self.phi_a.forward(g, ps, &steps, None, None)?;
            let stacked = g.stack(&outs, 1)?;
            phase.dropout(g, stacked)?
        };
        let logits3 = self.att_out.forward(g, ps, feats)?;
        let logits = g.reshape(logits3, &[b, n])?;
        let beta = g.softmax_masked(logits, slot_mask, 1)?;
        let _ = d;
        Ok((beta, a))
    }

    fn state_update(&self, g: &mut Graph, beta: Var, a: Var) -> Result<Var> {
        let (b, n, d) = {
            let s = g.shape(a);
            (s[0], s[1], s[2])
        };
        let beta3 = g.reshape(beta, &[b, 1, n])?;
        let h3 = g.matmul(beta3, a)?;
        g.reshape(h3, &[b, d])
    }

    fn predict_from(&self, g: &mut Graph, ps: &ParamSet, h: Var) -> Result<Var> {
        let logits = self.out.forward(g, ps, h)?;
        g.softmax(logits, 1)
    }

    /// Unifying word features for a [rows, len] id matrix: per-step GRU
    /// hidden states through the linear map, [rows, len, d].
    fn unifying_words(
        &self,
        g: &mut Graph,
        ps: &ParamSet,
        ids: &[usize],
        rows: usize,
        len: usize,
        masks: Option<&[Tensor]>,
        phase: &mut Phase,
    ) -> Result<Var> {
        let (outs, _) = self.encode_rows(g, ps, ids, rows, len, masks, &self.phi_u, phase)?;
        let stacked = g.stack(&outs, 1)?;
        let balanced = crate::unify::normalize_direction_halves(g, stacked)?;
        let dropped = phase.dropout(g, balanced)?;
        let wu = g.param(ps, self.w_u);
        g.matmul(dropped, wu)
    }

    pub fn forward(
        &self,
        g: &mut Graph,
        ps: &ParamSet,
        batch: &[&Example],
        unified: bool,
        phase: &mut Phase,
    ) -> Result<UmnForward> {
        if batch.is_empty() {
            return Err(Error::argument("empty batch".to_string()));
        }
        let sb = Self::prepare_batch(batch)?;
        let (b, n, l, d) = (sb.b, sb.n, sb.l, self.cfg.d);
        let j_iters = self.cfg.iterations.max(1);

        // Encode memory and query.
        let (_, m_flat) =
            self.encode_rows(g, ps, &sb.words, b * n, l, Some(&sb.word_masks), &self.phi_m, phase)?;
        let m_k = g.reshape(m_flat, &[b, n, d])?;
        let (_, h0_k) =
            self.encode_rows(g, ps, &sb.query, b, sb.lq, Some(&sb.query_masks), &self.phi_m, phase)?;

        let mut h_k = vec![h0_k];
        let mut beta_k_all = Vec::with_capacity(j_iters);

        if !unified {
            let mut h = h0_k;
            for _ in 1..=j_iters {
                let (beta, a) = self.attend(g, ps, m_k, h, &sb.slot_mask, phase)?;
                h = self.state_update(g, beta, a)?;
                h_k.push(h);
                beta_k_all.push(beta);
            }
            let probs_k = self.predict_from(g, ps, h)?;
            return Ok(UmnForward {
                probs_k,
                probs_i: None,
                h_k,
                h_i: vec![],
                beta_k: beta_k_all,
                beta_i: vec![],
            });
        }

        if self.invariants.is_empty() {
            return Err(Error::config("no invariants set".to_string()));
        }

        // Example-side word features for unification.
        let e = g.param(ps, self.embeddings);
        let c_words_flat = g.embedding(e, &sb.words, &[b * n, l])?;
        let c_words = g.reshape(c_words_flat, &[b, 1, n, l, d])?;
        let d_words_flat =
            self.unifying_words(g, ps, &sb.words, b * n, l, Some(&sb.word_masks), phase)?;
        let d_words = g.reshape(d_words_flat, &[b, 1, n, l, d])?;

        // Per-invariant fixed context.
        struct InvCtx {
            m_i: Var,          // [1, M, d]
            h0_bcast: Var,     // [B, d]
            h0_raw: Var,       // [1, d]
            u_tensor: Var,     // [B, M, N, m, d]
            word_mask: Tensor, // [M, m]
            m: usize,
            m_words: usize,
        }
        let mut ctxs: Vec<InvCtx> = Vec::with_capacity(self.invariants.len());
        for inv in &self.invariants {
            let story = Self::story_of(&inv.example)?;
            let m_count = story.len();
            let m_words = story.iter().map(|s| s.len()).max().unwrap_or(1).max(1);
            let mut ids = vec![0usize; m_count * m_words];
            let mut wmask = Tensor::zeros(&[m_count, m_words]);
            let mut word_masks = vec![Tensor::zeros(&[m_count, 1]); m_words];
            for (si, sent) in story.iter().enumerate() {
                for (ti, &w) in sent.iter().enumerate() {
                    ids[si * m_words + ti] = w;
                    wmask.data_mut()[si * m_words + ti] = 1.0;
                    word_masks[ti].data_mut()[si] = 1.0;
                }
            }
            let (_, mi_flat) =
                self.encode_rows(g, ps, &ids, m_count, m_words, Some(&word_masks), &self.phi_m, phase)?;
            let m_i = g.reshape(mi_flat, &[1, m_count, d])?;
            let mut q_ids = inv.example.query.clone();
            if q_ids.is_empty() {
                q_ids.push(0);
            }
            let (_, h0_raw) = self.encode_rows(g, ps, &q_ids, 1, q_ids.len(), None, &self.phi_m, phase)?;
            let h0_bcast = g.broadcast_to(h0_raw, &[b, d])?;

            // Pairwise unification tensor, beta-independent.
            let a_flat = g.embedding(e, &ids, &[m_count, m_words])?;
            let a_w = g.reshape(a_flat, &[1, m_count, 1, m_words, d])?;
            let bu_flat = self.unifying_words(g, ps, &ids, m_count, m_words, Some(&word_masks), phase)?;
            let b_w = g.reshape(bu_flat, &[1, m_count, 1, m_words, d])?;
            let psi = unify::table_psi(g, ps, inv, &ids)?; // [M*m, 1]
            let psi = g.reshape(psi, &[1, m_count, 1, m_words, 1])?;
            let b_n = unify::l2_normalize_rows(g, b_w)?;
            let d_n = unify::l2_normalize_rows(g, d_words)?;
            let d_t = g.transpose_last(d_n)?; // [B,1,N,d,L]
            let raw = g.matmul(b_n, d_t)?; // [B,M,N,m,L]
            let scores = g.scale(raw, (d as f64).sqrt());
            let gw_mask = wmask.reshape(&[1, m_count, 1, m_words, 1]).expect("gw mask");
            let p = unify::attention_map(g, scores, Some(&sb.kw_mask), Some(&gw_mask))?;
            let e_att = g.matmul(p, c_words)?; // [B,M,N,m,d]
            let pe = g.mul(psi, e_att)?;
            let np = g.neg(psi);
            let np1 = g.add_scalar(np, 1.0);
            let pa = g.mul(np1, a_w)?;
            let u_tensor = g.add(pe, pa)?;
            ctxs.push(InvCtx { m_i, h0_bcast, h0_raw, u_tensor, word_mask: wmask, m: m_count, m_words });
        }

        // Bilinear invariant weights from iteration-0 states.
        let eta = if ctxs.len() == 1 {
            None
        } else {
            let weta = g.param(ps, self.w_eta);
            let h0_k_t = g.transpose_last(h0_k)?; // [d, B]
            let mut cols = Vec::with_capacity(ctxs.len());
            for ctx in &ctxs {
                let hw = g.matmul(ctx.h0_raw, weta)?; // [1, d]
                let s = g.matmul(hw, h0_k_t)?; // [1, B]
                let st = g.transpose_last(s)?; // [B, 1]
                cols.push(st);
            }
            let scores = g.concat(&cols, 1)?; // [B, n_inv]
            Some(g.softmax(scores, 1)?)
        };

        let combine = |g: &mut Graph, hs: &[Var], eta: &Option<Var>| -> Result<Var> {
            match eta {
                None => Ok(hs[0]),
                Some(eta) => {
                    let stacked = g.stack(hs, 1)?; // [B, n_inv, d]
                    let (bb, ni) = {
                        let s = g.shape(stacked);
                        (s[0], s[1])
                    };
                    let eta3 = g.reshape(*eta, &[bb, ni, 1])?;
                    let weighted = g.mul(stacked, eta3)?;
                    g.sum_axis(weighted, 1)
                }
            }
        };

        let mut h_i_per_inv: Vec<Var> = ctxs.iter().map(|c| c.h0_bcast).collect();
        let mut h_i_combined = vec![combine(g, &h_i_per_inv, &eta)?];
        let mut beta_i_all: Vec<Vec<Var>> = vec![Vec::new(); ctxs.len()];
        let ones_slot = |m: usize| Tensor::full(&[1, m], 1.0);

        let mut h = h0_k;
        for _ in 1..=j_iters {
            let (beta_k, a_k) = self.attend(g, ps, m_k, h, &sb.slot_mask, phase)?;
            for (ci, ctx) in ctxs.iter().enumerate() {
                let (beta_i, _) =
                    self.attend(g, ps, ctx.m_i, h_i_per_inv[ci], &ones_slot(ctx.m), phase)?;
                // Reduce the unification tensor with both context attentions.
                let bi5 = g.reshape(beta_i, &[b, ctx.m, 1, 1, 1])?;
                let t1 = g.mul(ctx.u_tensor, bi5)?;
                let t1 = g.sum_axis(t1, 1)?; // [B, N, m, d]
                let bk4 = g.reshape(beta_k, &[b, n, 1, 1])?;
                let t2 = g.mul(t1, bk4)?;
                let unified = g.sum_axis(t2, 1)?; // [B, m, d]
                // Soft word mask of the attended invariant sentence.
                let bi2 = g.reshape(beta_i, &[b, 1, ctx.m])?;
                let wm_const = g.constant(ctx.word_mask.clone());
                let wm = g.matmul(bi2, wm_const)?; // [B, 1, m]
                let wm = g.reshape(wm, &[b, ctx.m_words])?;
                // Re-encode the unified words with the memory encoder.
                let mut steps = Vec::with_capacity(ctx.m_words);
                let mut mask_vars = Vec::with_capacity(ctx.m_words);
                for t in 0..ctx.m_words {
                    steps.push(g.select_axis(unified, 1, t)?);
                    let mv = g.select_axis(wm, 1, t)?;
                    mask_vars.push(g.reshape(mv, &[b, 1])?);
                }
                let (_, u_enc) = self.phi_m.forward(g, ps, &steps, None, Some(&mask_vars))?;
                let u_enc = phase.dropout(g, u_enc)?;
                // Substitute into the attended slot (soft, per-iteration).
                let bi3 = g.reshape(beta_i, &[b, ctx.m, 1])?;
                let keep = g.neg(bi3);
                let keep = g.add_scalar(keep, 1.0);
                let m_b = g.broadcast_to(ctx.m_i, &[b, ctx.m, d])?;
                let kept = g.mul(keep, m_b)?;
                let u3 = g.reshape(u_enc, &[b, 1, d])?;
                let subbed = g.mul(bi3, u3)?;
                let m_sub = g.add(kept, subbed)?;
                let a_sub = self.interact(g, ps, m_sub, h_i_per_inv[ci])?;
                h_i_per_inv[ci] = self.state_update(g, beta_i, a_sub)?;
                beta_i_all[ci].push(beta_i);
            }
            h = self.state_update(g, beta_k, a_k)?;
            h_k.push(h);
            beta_k_all.push(beta_k);
            h_i_combined.push(combine(g, &h_i_per_inv, &eta)?);
        }

        let probs_k = self.predict_from(g, ps, h)?;
        let probs_i = self.predict_from(g, ps, *h_i_combined.last().unwrap())?;
        Ok(UmnForward {
            probs_k,
            probs_i: Some(probs_i),
            h_k,
            h_i: h_i_combined,
            beta_k: beta_k_all,
            beta_i: beta_i_all,
        })
    }

    /// Eval-mode probabilities; `unified` picks the invariant-side output.
    pub fn predict(&self, ps: &ParamSet, batch: &[&Example], unified: bool) -> Result<Vec<Vec<f64>>> {
        let mut g = Graph::new();
        let fwd = self.forward(&mut g, ps, batch, unified, &mut Phase::Eval)?;
        let probs = if unified { fwd.probs_i.unwrap() } else { fwd.probs_k };
        let v = g.value(probs);
        let vocab = self.cfg.vocab_size;
        Ok((0..batch.len()).map(|b| v.data()[b * vocab..(b + 1) * vocab].to_vec()).collect())
    }

    /// One plain memory-network iteration over explicit slot representations.
    pub fn memnn_iterate(&self, ps: &ParamSet, memory: &Tensor, state: &MemoryState) -> Result<MemoryState> {
        let shape = memory.shape().to_vec();
        if shape.len() != 2 || shape[0] == 0 {
            return Err(Error::argument("memory must be a nonempty [N, d] matrix".to_string()));
        }
        let (n, d) = (shape[0], shape[1]);
        let mut g = Graph::new();
        let m = g.constant(memory.reshape(&[1, n, d])?);
        let h = g.constant(state.h.reshape(&[1, d])?);
        let ones = Tensor::full(&[1, n], 1.0);
        let (beta, a) = self.attend(&mut g, ps, m, h, &ones, &mut Phase::Eval)?;
        let h_next = self.state_update(&mut g, beta, a)?;
        Ok(MemoryState {
            h: g.value(h_next).reshape(&[d])?,
            beta: g.value(beta).reshape(&[n])?,
            j: state.j + 1,
        })
    }

    /// Word-level unification of one invariant sentence against one example
    /// sentence, traced.
    pub fn unify_pair(
        &self,
        ps: &ParamSet,
        inv_index: usize,
        sent_i: usize,
        example: &Example,
        sent_k: usize,
    ) -> Result<UnificationTrace> {
        let inv = self
            .invariants
            .get(inv_index)
            .ok_or_else(|| Error::argument(format!("invariant {inv_index} not present")))?;
        let story_i = Self::story_of(&inv.example)?;
        let story_k = Self::story_of(example)?;
        let gi = story_i
            .get(sent_i)
            .ok_or_else(|| Error::argument(format!("invariant sentence {sent_i} out of range")))?;
        let kk = story_k
            .get(sent_k)
            .ok_or_else(|| Error::argument(format!("example sentence {sent_k} out of range")))?;
        let mut g = Graph::new();
        let mut phase = Phase::Eval;
        let d = self.cfg.d;
        let e = g.param(ps, self.embeddings);
        let a = g.embedding(e, gi, &[gi.len()])?;
        let bu3 = self.unifying_words(&mut g, ps, gi, 1, gi.len(), None, &mut phase)?;
        let bu = g.reshape(bu3, &[gi.len(), d])?;
        let c = g.embedding(e, kk, &[kk.len()])?;
        let du3 = self.unifying_words(&mut g, ps, kk, 1, kk.len(), None, &mut phase)?;
        let du = g.reshape(du3, &[kk.len(), d])?;
        let psi = unify::table_psi(&mut g, ps, inv, gi)?;
        let uv = unify::unify(&mut g, a, bu, c, du, psi, None)?;
        Ok(unify::trace_of(&g, &uv))
    }

    /// The full pairwise unification tensor of one invariant against one
    /// example, `[M, m, N, d]` over (invariant sentence, invariant word,
    /// example sentence, embedding).
    pub fn unification_tensor(&self, ps: &ParamSet, inv_index: usize, example: &Example) -> Result<Tensor> {
        let inv = self
            .invariants
            .get(inv_index)
            .ok_or_else(|| Error::argument(format!("invariant {inv_index} not present")))?;
        let story_i = Self::story_of(&inv.example)?;
        let story_k = Self::story_of(example)?;
        let m_count = story_i.len();
        let n_count = story_k.len();
        let m_words = story_i.iter().map(|s| s.len()).max().unwrap().max(1);
        let d = self.cfg.d;
        let mut out = Tensor::zeros(&[m_count, m_words, n_count, d]);
        for i in 0..m_count {
            for k in 0..n_count {
                let trace = self.unify_pair(ps, inv_index, i, example, k)?;
                let rows = story_i[i].len();
                for w in 0..rows {
                    for x in 0..d {
                        out.data_mut()[((i * m_words + w) * n_count + k) * d + x] =
                            trace.u.data()[w * d + x];
                    }
                }
            }
        }
        Ok(out)
    }
}
