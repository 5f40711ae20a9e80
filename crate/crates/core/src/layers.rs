//! Composite layers built from graph ops: linear maps, GRU/LSTM cells,
//! bi-directional GRU encoders and a small conv stack.

use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::params::{InitSpec, ParamId, ParamSet};
use crate::rng::StreamRng;

pub struct Linear {
    pub w: ParamId,
    pub b: Option<ParamId>,
}

impl Linear {
    pub fn new(
        ps: &mut ParamSet,
        rng: &StreamRng,
        name: &str,
        d_in: usize,
        d_out: usize,
        bias: bool,
    ) -> Result<Self> {
        Self::with_gain(ps, rng, name, d_in, d_out, bias, 1.0)
    }

    /// Fan-in init scaled by `gain`; small gains keep saturating
    /// nonlinearities in their linear range at the start of training.
    pub fn with_gain(
        ps: &mut ParamSet,
        rng: &StreamRng,
        name: &str,
        d_in: usize,
        d_out: usize,
        bias: bool,
        gain: f64,
    ) -> Result<Self> {
        let std = gain / (d_in as f64).sqrt();
        let w = ps.register(&format!("{name}.w"), &[d_in, d_out], InitSpec::ScaledNormal(std), rng)?;
        let b = if bias {
            Some(ps.register(&format!("{name}.b"), &[d_out], InitSpec::Zeros, rng)?)
        } else {
            None
        };
        Ok(Linear { w, b })
    }

    /// x [.., d_in] -> [.., d_out]
    pub fn forward(&self, g: &mut Graph, ps: &ParamSet, x: Var) -> Result<Var> {
        let w = g.param(ps, self.w);
        let mut y = g.matmul(x, w)?;
        if let Some(b) = self.b {
            let b = g.param(ps, b);
            y = g.add(y, b)?;
        }
        Ok(y)
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = vec![self.w];
        if let Some(b) = self.b {
            ids.push(b);
        }
        ids
    }
}

/// GRU cell: r and z gates, candidate tanh(W x + U (r .. h) + b),
/// next state (1-z) .. h + z .. n.
pub struct GruCell {
    reset: (ParamId, ParamId, ParamId),
    update: (ParamId, ParamId, ParamId),
    cand: (ParamId, ParamId, ParamId),
    pub hidden: usize,
}

impl GruCell {
    pub fn new(ps: &mut ParamSet, rng: &StreamRng, name: &str, d_in: usize, hidden: usize) -> Result<Self> {
        let gate = |ps: &mut ParamSet, tag: &str| -> Result<(ParamId, ParamId, ParamId)> {
            Ok((
                ps.register(&format!("{name}.{tag}.wx"), &[d_in, hidden], InitSpec::UniformFanIn, rng)?,
                ps.register(&format!("{name}.{tag}.wh"), &[hidden, hidden], InitSpec::UniformFanIn, rng)?,
                ps.register(&format!("{name}.{tag}.b"), &[hidden], InitSpec::Zeros, rng)?,
            ))
        };
        Ok(GruCell {
            reset: gate(ps, "r")?,
            update: gate(ps, "z")?,
            cand: gate(ps, "n")?,
            hidden,
        })
    }

    fn gate(
        &self,
        g: &mut Graph,
        ps: &ParamSet,
        ids: (ParamId, ParamId, ParamId),
        x: Var,
        h: Var,
    ) -> Result<Var> {
        let wx = g.param(ps, ids.0);
        let wh = g.param(ps, ids.1);
        let b = g.param(ps, ids.2);
        let a = g.matmul(x, wx)?;
        let c = g.matmul(h, wh)?;
        let s = g.add(a, c)?;
        g.add(s, b)
    }

    /// One step: x [B, d_in], h [B, hidden] -> [B, hidden].
    pub fn step(&self, g: &mut Graph, ps: &ParamSet, x: Var, h: Var) -> Result<Var> {
        let r = self.gate(g, ps, self.reset, x, h)?;
        let r = g.sigmoid(r);
        let z = self.gate(g, ps, self.update, x, h)?;
        let z = g.sigmoid(z);
        let rh = g.mul(r, h)?;
        let n = self.gate(g, ps, self.cand, x, rh)?;
        let n = g.tanh(n);
        let one_minus_z = {
            let neg = g.neg(z);
            g.add_scalar(neg, 1.0)
        };
        let keep = g.mul(one_minus_z, h)?;
        let upd = g.mul(z, n)?;
        g.add(keep, upd)
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        vec![
            self.reset.0, self.reset.1, self.reset.2,
            self.update.0, self.update.1, self.update.2,
            self.cand.0, self.cand.1, self.cand.2,
        ]
    }
}

/// Per-step mask applied to a recurrence: masked steps copy the previous
/// state. Masks may be soft (values in [0,1]) and differentiable.
fn apply_step_mask(g: &mut Graph, new_h: Var, prev_h: Var, mask: Option<Var>) -> Result<Var> {
    match mask {
        None => Ok(new_h),
        Some(m) => {
            let kept = g.mul(m, new_h)?;
            let inv = g.neg(m);
            let inv = g.add_scalar(inv, 1.0);
            let old = g.mul(inv, prev_h)?;
            g.add(kept, old)
        }
    }
}

/// Bi-directional GRU with half-width directions: each direction runs a
/// GRU of size hidden/2 and per-step outputs concatenate the two halves,
/// keeping prefix and suffix signatures in separate coordinates. The final
/// state concatenates both directions' last states and projects to the
/// hidden size.
pub struct BiGru {
    pub fwd: GruCell,
    pub bwd: GruCell,
    proj: ParamId,
    pub hidden: usize,
    half: usize,
}

impl BiGru {
    pub fn new(ps: &mut ParamSet, rng: &StreamRng, name: &str, d_in: usize, hidden: usize) -> Result<Self> {
        if hidden % 2 != 0 {
            return Err(Error::argument(format!("bi-GRU hidden size {hidden} must be even")));
        }
        let half = hidden / 2;
        Ok(BiGru {
            fwd: GruCell::new(ps, rng, &format!("{name}.fwd"), d_in, half)?,
            bwd: GruCell::new(ps, rng, &format!("{name}.bwd"), d_in, half)?,
            proj: ps.register(&format!("{name}.proj"), &[hidden, hidden], InitSpec::UniformFanIn, rng)?,
            hidden,
            half,
        })
    }

    /// steps: per-step inputs [B, d_in]; init: optional initial state for
    /// both directions [B, hidden] (each direction takes its half); masks:
    /// optional per-step keep masks [B, 1]. Returns (per-step outputs
    /// [B, hidden], final state [B, hidden]).
    pub fn forward(
        &self,
        g: &mut Graph,
        ps: &ParamSet,
        steps: &[Var],
        init: Option<Var>,
        masks: Option<&[Var]>,
    ) -> Result<(Vec<Var>, Var)> {
        if steps.is_empty() {
            return Err(Error::argument("empty sequence"));
        }
        if let Some(ms) = masks {
            if ms.len() != steps.len() {
                return Err(Error::argument("mask count differs from step count"));
            }
        }
        let batch = g.shape(steps[0])[0];
        let (h0_fwd, h0_bwd) = match init {
            Some(v) => {
                let shape = g.shape(v).to_vec();
                if shape != [batch, self.hidden] {
                    return Err(Error::shape(format!(
                        "initial state must be [{batch}, {}], got {shape:?}",
                        self.hidden
                    )));
                }
                let f = g.select_range(v, 1, 0, self.half)?;
                let b = g.select_range(v, 1, self.half, self.half)?;
                (f, b)
            }
            None => {
                let z = g.constant(crate::tensor::Tensor::zeros(&[batch, self.half]));
                (z, z)
            }
        };

        let run = |g: &mut Graph, cell: &GruCell, h0: Var, order: &[usize]| -> Result<Vec<Var>> {
            let mut h = h0;
            let mut hs = vec![h0; steps.len()];
            for &t in order {
                let next = cell.step(g, ps, steps[t], h)?;
                h = apply_step_mask(g, next, h, masks.map(|m| m[t]))?;
                hs[t] = h;
            }
            Ok(hs)
        };

        let fwd_order: Vec<usize> = (0..steps.len()).collect();
        let bwd_order: Vec<usize> = (0..steps.len()).rev().collect();
        let fwd_hs = run(g, &self.fwd, h0_fwd, &fwd_order)?;
        let bwd_hs = run(g, &self.bwd, h0_bwd, &bwd_order)?;

        let mut outs = Vec::with_capacity(steps.len());
        for t in 0..steps.len() {
            outs.push(g.concat(&[fwd_hs[t], bwd_hs[t]], 1)?);
        }
        // Final: [fwd at last step ; bwd at first step] projected to hidden.
        let cat = g.concat(&[fwd_hs[steps.len() - 1], bwd_hs[0]], 1)?;
        let proj = g.param(ps, self.proj);
        let fin = g.matmul(cat, proj)?;
        Ok((outs, fin))
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = self.fwd.param_ids();
        ids.extend(self.bwd.param_ids());
        ids.push(self.proj);
        ids
    }
}

/// Standard LSTM cell with input/forget/output gates.
pub struct LstmCell {
    input: (ParamId, ParamId, ParamId),
    forget: (ParamId, ParamId, ParamId),
    output: (ParamId, ParamId, ParamId),
    cand: (ParamId, ParamId, ParamId),
    pub hidden: usize,
}

impl LstmCell {
    pub fn new(ps: &mut ParamSet, rng: &StreamRng, name: &str, d_in: usize, hidden: usize) -> Result<Self> {
        let gate = |ps: &mut ParamSet, tag: &str| -> Result<(ParamId, ParamId, ParamId)> {
            Ok((
                ps.register(&format!("{name}.{tag}.wx"), &[d_in, hidden], InitSpec::UniformFanIn, rng)?,
                ps.register(&format!("{name}.{tag}.wh"), &[hidden, hidden], InitSpec::UniformFanIn, rng)?,
                ps.register(&format!("{name}.{tag}.b"), &[hidden], InitSpec::Zeros, rng)?,
            ))
        };
        Ok(LstmCell {
            input: gate(ps, "i")?,
            forget: gate(ps, "f")?,
            output: gate(ps, "o")?,
            cand: gate(ps, "g")?,
            hidden,
        })
    }

    fn gate(
        &self,
        g: &mut Graph,
        ps: &ParamSet,
        ids: (ParamId, ParamId, ParamId),
        x: Var,
        h: Var,
    ) -> Result<Var> {
        let wx = g.param(ps, ids.0);
        let wh = g.param(ps, ids.1);
        let b = g.param(ps, ids.2);
        let a = g.matmul(x, wx)?;
        let c = g.matmul(h, wh)?;
        let s = g.add(a, c)?;
        g.add(s, b)
    }

    /// One step: returns (h, c).
    pub fn step(&self, g: &mut Graph, ps: &ParamSet, x: Var, h: Var, c: Var) -> Result<(Var, Var)> {
        let i = self.gate(g, ps, self.input, x, h)?;
        let i = g.sigmoid(i);
        let f = self.gate(g, ps, self.forget, x, h)?;
        let f = g.sigmoid(f);
        let o = self.gate(g, ps, self.output, x, h)?;
        let o = g.sigmoid(o);
        let cand = self.gate(g, ps, self.cand, x, h)?;
        let cand = g.tanh(cand);
        let keep = g.mul(f, c)?;
        let add = g.mul(i, cand)?;
        let c_next = g.add(keep, add)?;
        let ct = g.tanh(c_next);
        let h_next = g.mul(o, ct)?;
        Ok((h_next, c_next))
    }

    /// Run over a padded sequence and return the final hidden state. Masked
    /// (padding) steps copy both h and c unchanged; at least one step of each
    /// batch row must be unmasked.
    pub fn encode(
        &self,
        g: &mut Graph,
        ps: &ParamSet,
        steps: &[Var],
        masks: Option<&[Var]>,
    ) -> Result<Var> {
        if steps.is_empty() {
            return Err(Error::argument("empty sequence"));
        }
        if let Some(ms) = masks {
            if ms.len() != steps.len() {
                return Err(Error::argument("mask count differs from step count"));
            }
            let batch = g.shape(steps[0])[0];
            for b in 0..batch {
                let any = ms.iter().any(|&m| g.value(m).data()[b] > 0.0);
                if !any {
                    return Err(Error::argument(format!("sequence {b} is fully masked")));
                }
            }
        }
        let batch = g.shape(steps[0])[0];
        let mut h = g.constant(crate::tensor::Tensor::zeros(&[batch, self.hidden]));
        let mut c = h;
        for (t, &x) in steps.iter().enumerate() {
            let (h2, c2) = self.step(g, ps, x, h, c)?;
            h = apply_step_mask(g, h2, h, masks.map(|m| m[t]))?;
            c = apply_step_mask(g, c2, c, masks.map(|m| m[t]))?;
        }
        Ok(h)
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        vec![
            self.input.0, self.input.1, self.input.2,
            self.forget.0, self.forget.1, self.forget.2,
            self.output.0, self.output.1, self.output.2,
            self.cand.0, self.cand.1, self.cand.2,
        ]
    }
}

/// Two 3x3 same-padding convolutions with a relu in between, as used for both
/// the predictor and the unifying-feature stacks of the grid model.
pub struct ConvStack {
    pub k1: ParamId,
    pub b1: ParamId,
    pub k2: ParamId,
    pub b2: ParamId,
}

impl ConvStack {
    pub fn new(ps: &mut ParamSet, rng: &StreamRng, name: &str, c_in: usize, filters: usize) -> Result<Self> {
        Ok(ConvStack {
            k1: ps.register(&format!("{name}.k1"), &[3, 3, c_in, filters], InitSpec::UniformFanIn, rng)?,
            b1: ps.register(&format!("{name}.b1"), &[filters], InitSpec::Zeros, rng)?,
            k2: ps.register(&format!("{name}.k2"), &[3, 3, filters, filters], InitSpec::UniformFanIn, rng)?,
            b2: ps.register(&format!("{name}.b2"), &[filters], InitSpec::Zeros, rng)?,
        })
    }

    /// x [B, h, w, c_in] -> [B, h, w, filters]
    pub fn forward(&self, g: &mut Graph, ps: &ParamSet, x: Var) -> Result<Var> {
        let k1 = g.param(ps, self.k1);
        let b1 = g.param(ps, self.b1);
        let h = g.conv2d(x, k1, 1)?;
        let h = g.add(h, b1)?;
        let h = g.relu(h);
        let k2 = g.param(ps, self.k2);
        let b2 = g.param(ps, self.b2);
        let h = g.conv2d(h, k2, 1)?;
        g.add(h, b2)
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        vec![self.k1, self.b1, self.k2, self.b2]
    }
}
