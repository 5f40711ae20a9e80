//! Sentiment model: fixed word embeddings projected down, an LSTM predictor
//! over (unified) word sequences, and feature-computed variableness
//! psi(s) = sigmoid(MLP(phi(s))).

use super::{ModelConfig, Phase};
use crate::data::{Example, SymbolId};
use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::layers::{Linear, LstmCell};
use crate::params::ParamSet;
use crate::rng::StreamRng;
use crate::tensor::Tensor;
use crate::unify::{self, Invariant, PsiSource, UnificationTrace, UnifyVars};

pub const EMBED_DIM: usize = 300;
pub const MAX_LEN: usize = 20;

pub struct UrnnModel {
    pub cfg: ModelConfig,
    /// Fixed per-symbol word vectors, [|S|, 300]; row 0 (padding) is zero.
    pub embed_table: Tensor,
    proj: Linear,
    u_map: Linear,
    psi_map: Linear,
    lstm: LstmCell,
    out: Linear,
    pub invariants: Vec<Invariant>,
}

impl UrnnModel {
    /// `embed_table` rows are pretrained word vectors per symbol id; absent
    /// words fall back to fixed random draws (built by the caller).
    pub fn new(cfg: ModelConfig, embed_table: Tensor, ps: &mut ParamSet, rng: &StreamRng) -> Result<Self> {
        if embed_table.shape() != [cfg.vocab_size, EMBED_DIM] {
            return Err(Error::shape(format!(
                "embedding table must be [{}, {EMBED_DIM}], got {:?}",
                cfg.vocab_size,
                embed_table.shape()
            )));
        }
        let d = cfg.d;
        let psi_map = Linear::new(ps, rng, "urnn.psi_map", d, 1, true)?;
        // Permissive variableness at the start, as with the table mode.
        if let Some(b) = psi_map.b {
            ps.tensor_mut(b).data_mut()[0] = crate::unify::PSI_INIT_WEIGHT;
        }
        Ok(UrnnModel {
            embed_table,
            proj: Linear::new(ps, rng, "urnn.proj", EMBED_DIM, d, true)?,
            u_map: Linear::new(ps, rng, "urnn.u_map", d, d, true)?,
            psi_map,
            lstm: LstmCell::new(ps, rng, "urnn.lstm", d, d)?,
            out: Linear::new(ps, rng, "urnn.out", d, 1, true)?,
            invariants: Vec::new(),
            cfg,
        })
    }

    /// Build a fallback embedding table: N(0, 1) per symbol, zero padding
    /// row, with any supplied pretrained vectors overriding the draws.
    pub fn build_embed_table(
        vocab: &crate::data::Vocabulary,
        pretrained: Option<&std::collections::HashMap<String, Vec<f64>>>,
        rng: &StreamRng,
    ) -> Tensor {
        let mut t = Tensor::zeros(&[vocab.len(), EMBED_DIM]);
        let mut stream = rng.stream("init/urnn.word_embeddings");
        for id in 1..vocab.len() {
            let token = vocab.token(id).expect("id in range");
            let row = &mut t.data_mut()[id * EMBED_DIM..(id + 1) * EMBED_DIM];
            match pretrained.and_then(|p| p.get(token)) {
                Some(vec) if vec.len() == EMBED_DIM => {
                    row.copy_from_slice(vec);
                }
                _ => {
                    for v in row.iter_mut() {
                        *v = stream.normal();
                    }
                }
            }
        }
        t
    }

    pub fn set_invariants(&mut self, examples: Vec<Example>) {
        self.invariants = examples
            .into_iter()
            .enumerate()
            .map(|(i, example)| Invariant { example, psi: PsiSource::Computed, id: i })
            .collect();
    }

    fn words_of(example: &Example) -> Result<&[SymbolId]> {
        let sentences = example
            .context
            .sentences()
            .ok_or_else(|| Error::shape("sentiment model needs sentence context".to_string()))?;
        if sentences.len() != 1 {
            return Err(Error::shape("sentiment input is a single sentence".to_string()));
        }
        let words = &sentences[0];
        if words.is_empty() {
            return Err(Error::argument("empty sequence".to_string()));
        }
        if words.len() > MAX_LEN {
            return Err(Error::argument(format!("sequence longer than {MAX_LEN} words")));
        }
        Ok(words)
    }

    /// Raw fixed embeddings for a [rows, len] id matrix (no gradient).
    fn raw_embed(&self, g: &mut Graph, ids: &[usize], rows: usize, len: usize) -> Var {
        let mut t = Tensor::zeros(&[rows, len, EMBED_DIM]);
        for (i, &id) in ids.iter().enumerate() {
            let src = &self.embed_table.data()[id * EMBED_DIM..(id + 1) * EMBED_DIM];
            t.data_mut()[i * EMBED_DIM..(i + 1) * EMBED_DIM].copy_from_slice(src);
        }
        g.constant(t)
    }

    /// phi over a padded id matrix: projected embeddings [rows, len, d].
    fn phi(&self, g: &mut Graph, ps: &ParamSet, ids: &[usize], rows: usize, len: usize) -> Result<Var> {
        let raw = self.raw_embed(g, ids, rows, len);
        self.proj.forward(g, ps, raw)
    }

    fn pad_batch(batch: &[&Example]) -> Result<(Vec<usize>, Vec<Vec<f64>>, usize)> {
        let mut len = 0;
        for ex in batch {
            len = len.max(Self::words_of(ex)?.len());
        }
        let mut ids = Vec::with_capacity(batch.len() * len);
        let mut masks = vec![vec![0.0; batch.len()]; len];
        for (b, ex) in batch.iter().enumerate() {
            let words = Self::words_of(ex)?;
            for t in 0..len {
                if t < words.len() {
                    ids.push(words[t]);
                    masks[t][b] = 1.0;
                } else {
                    ids.push(0);
                }
            }
        }
        Ok((ids, masks, len))
    }

    fn lstm_readout(
        &self,
        g: &mut Graph,
        ps: &ParamSet,
        steps: &[Var],
        masks: Option<&[Var]>,
        phase: &mut Phase,
    ) -> Result<Var> {
        let h = self.lstm.encode(g, ps, steps, masks)?;
        let h = phase.dropout(g, h)?;
        let o = self.out.forward(g, ps, h)?;
        let s = g.sigmoid(o);
        let b = g.shape(s)[0];
        g.reshape(s, &[b])
    }

    /// Plain prediction: probability of the positive label, [B].
    pub fn forward_plain(
        &self,
        g: &mut Graph,
        ps: &ParamSet,
        batch: &[&Example],
        phase: &mut Phase,
    ) -> Result<Var> {
        if batch.is_empty() {
            return Err(Error::argument("empty batch".to_string()));
        }
        let b = batch.len();
        let (ids, masks, len) = Self::pad_batch(batch)?;
        let phi = self.phi(g, ps, &ids, b, len)?;
        let mut steps = Vec::with_capacity(len);
        let mut mask_vars = Vec::with_capacity(len);
        for t in 0..len {
            steps.push(g.select_axis(phi, 1, t)?);
            mask_vars.push(g.constant(Tensor::new(vec![b, 1], masks[t].clone()).expect("mask")));
        }
        self.lstm_readout(g, ps, &steps, Some(&mask_vars), phase)
    }

    /// Per-word variableness column [len, 1] for a word sequence.
    pub fn psi_of(&self, g: &mut Graph, ps: &ParamSet, words: &[SymbolId]) -> Result<Var> {
        let phi3 = self.phi(g, ps, words, 1, words.len())?;
        let phi = g.reshape(phi3, &[words.len(), self.cfg.d])?;
        let z = self.psi_map.forward(g, ps, phi)?;
        Ok(g.sigmoid(z))
    }

    /// Unified prediction with per-invariant unify traces.
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
        if self.invariants.is_empty() {
            return Err(Error::config("no invariants set".to_string()));
        }
        let b = batch.len();
        let d = self.cfg.d;
        let (ids, masks, len) = Self::pad_batch(batch)?;
        let c = self.phi(g, ps, &ids, b, len)?;
        let dfeat = self.u_map.forward(g, ps, c)?;
        let mut kmask = Tensor::zeros(&[b, len]);
        for t in 0..len {
            for row in 0..b {
                kmask.data_mut()[row * len + t] = masks[t][row];
            }
        }

        let mut preds = Vec::with_capacity(self.invariants.len());
        let mut unifies = Vec::with_capacity(self.invariants.len());
        for inv in &self.invariants {
            let g_words = Self::words_of(&inv.example)?.to_vec();
            let gl = g_words.len();
            let a3 = self.phi(g, ps, &g_words, 1, gl)?;
            let a = g.reshape(a3, &[gl, d])?;
            let bu = self.u_map.forward(g, ps, a)?;
            let psi = self.psi_of(g, ps, &g_words)?;
            let uv = unify::unify(g, a, bu, c, dfeat, psi, Some(&kmask))?;
            let mut steps = Vec::with_capacity(gl);
            for t in 0..gl {
                steps.push(g.select_axis(uv.u, 1, t)?);
            }
            preds.push(self.lstm_readout(g, ps, &steps, None, phase)?);
            unifies.push(uv);
        }
        // Aggregate scalar outputs through their [p, 1-p] distributions.
        if preds.len() == 1 {
            return Ok((preds[0], unifies));
        }
        let mut twos = Vec::with_capacity(preds.len());
        for &p in &preds {
            let np = g.neg(p);
            let np = g.add_scalar(np, 1.0);
            twos.push(g.stack(&[p, np], 1)?);
        }
        let agg = unify::aggregate_probs(g, &twos)?;
        let pos = g.select_axis(agg, 1, 0)?;
        Ok((pos, unifies))
    }

    /// Eval-mode positive-label probabilities.
    pub fn predict(&self, ps: &ParamSet, batch: &[&Example], unified: bool) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let probs = if unified {
            self.forward_unified(&mut g, ps, batch, &mut Phase::Eval)?.0
        } else {
            self.forward_plain(&mut g, ps, batch, &mut Phase::Eval)?
        };
        Ok(g.value(probs).data().to_vec())
    }

    pub fn trace(&self, ps: &ParamSet, example: &Example, inv_index: usize) -> Result<UnificationTrace> {
        let inv = self
            .invariants
            .get(inv_index)
            .ok_or_else(|| Error::argument(format!("invariant {inv_index} not present")))?;
        let mut g = Graph::new();
        let words = Self::words_of(example)?.to_vec();
        let g_words = Self::words_of(&inv.example)?.to_vec();
        let d = self.cfg.d;
        let c3 = self.phi(&mut g, ps, &words, 1, words.len())?;
        let c = g.reshape(c3, &[words.len(), d])?;
        let dfeat = self.u_map.forward(&mut g, ps, c)?;
        let a3 = self.phi(&mut g, ps, &g_words, 1, g_words.len())?;
        let a = g.reshape(a3, &[g_words.len(), d])?;
        let bu = self.u_map.forward(&mut g, ps, a)?;
        let psi = self.psi_of(&mut g, ps, &g_words)?;
        let uv = unify::unify(&mut g, a, bu, c, dfeat, psi, None)?;
        Ok(unify::trace_of(&g, &uv))
    }

    /// Variableness of one symbol under the feature-computed psi.
    pub fn variableness(&self, ps: &ParamSet, symbol: SymbolId) -> Result<f64> {
        if symbol >= self.cfg.vocab_size {
            return Err(Error::vocab(format!("symbol id {symbol} out of range")));
        }
        let mut g = Graph::new();
        let psi = self.psi_of(&mut g, ps, &[symbol])?;
        Ok(g.value(psi).item())
    }
}
