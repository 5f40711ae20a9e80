//! Gradient-check suite: every operator plus miniature end-to-end instances
//! of all four architectures against central differences.

use crate::data::{Context, Example};
use crate::error::Result;
use crate::gradcheck::{grad_check, DEFAULT_FD_STEP};
use crate::graph::{Graph, Var};
use crate::layers::{BiGru, GruCell, LstmCell};
use crate::models::{Arch, ModelConfig, Phase, UcnnModel, UmlpModel, UmnModel, UrnnModel};
use crate::params::{InitSpec, ParamSet};
use crate::rng::StreamRng;
use crate::tensor::Tensor;
use crate::unify;

pub struct SelfcheckReport {
    /// Informational lines (config echo).
    pub lines: Vec<String>,
    /// (check name, max relative error, tolerance)
    pub checks: Vec<(String, f64, f64)>,
}

impl SelfcheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|(_, err, tol)| err < tol)
    }
}

const TOL: f64 = 1e-4;

fn rand_tensor(shape: &[usize], s: &mut crate::rng::Stream) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| s.uniform(-1.5, 1.5)).collect()).unwrap()
}

fn seq_example(seq: &[usize], task: &str) -> Example {
    Example {
        context: Context::Sentences(vec![seq.to_vec()]),
        query: vec![],
        answer: seq[0],
        supports: None,
        task: task.to_string(),
    }
}

/// Run every check; errors are collected, not asserted.
pub fn run_selfcheck(seed: u64) -> Result<SelfcheckReport> {
    let mut checks: Vec<(String, f64, f64)> = Vec::new();
    let rng = StreamRng::new(seed);

    // ── operator catalogue ────────────────────────────────────────────
    type Build = Box<dyn Fn(&mut Graph, &ParamSet) -> Result<Var>>;
    let mut op = |name: &str, shape: &[usize], build: Build| -> Result<()> {
        let mut ps = ParamSet::new();
        let id = ps.register("w", shape, InitSpec::StandardNormal, &rng)?;
        let report = grad_check(&mut ps, &[id], build, TOL, DEFAULT_FD_STEP)?;
        checks.push((format!("op::{name}"), report.max_rel_err(), TOL));
        Ok(())
    };

    op("add_mul_sub", &[2, 3], Box::new(|g, ps| {
        let w = g.param(ps, ps.id("w").unwrap());
        let c = g.constant(Tensor::full(&[3], 0.4));
        let a = g.add(w, c)?;
        let m = g.mul(a, w)?;
        let s = g.sub(m, w)?;
        Ok(g.sum_all(s))
    }))?;
    op("div_square", &[3], Box::new(|g, ps| {
        let w = g.param(ps, ps.id("w").unwrap());
        let c = g.constant(Tensor::from_vec(vec![1.5, -2.0, 3.0]));
        let d = g.div(w, c)?;
        let sq = g.square(d);
        Ok(g.sum_all(sq))
    }))?;
    op("matmul", &[3, 4], Box::new(|g, ps| {
        let w = g.param(ps, ps.id("w").unwrap());
        let x = g.constant(Tensor::new(vec![2, 3], vec![0.1, -0.5, 0.8, 1.2, 0.3, -0.9]).unwrap());
        let y = g.matmul(x, w)?;
        let y = g.tanh(y);
        Ok(g.sum_all(y))
    }))?;
    op("matmul_batched", &[2, 3, 4], Box::new(|g, ps| {
        let w = g.param(ps, ps.id("w").unwrap());
        let x = g.constant(Tensor::full(&[4, 2], 0.3));
        let y = g.matmul(w, x)?;
        Ok(g.sum_all(y))
    }))?;
    op("softmax", &[2, 4], Box::new(|g, ps| {
        let w = g.param(ps, ps.id("w").unwrap());
        let y = g.softmax(w, 1)?;
        let z = g.square(y);
        Ok(g.sum_all(z))
    }))?;
    op("activations", &[4], Box::new(|g, ps| {
        let w = g.param(ps, ps.id("w").unwrap());
        let s = g.sigmoid(w);
        let t = g.tanh(w);
        let off = g.add_scalar(w, 3.0);
        let r = g.relu(off);
        let e = g.exp(w);
        let l = g.log(e);
        let m1 = g.mul(s, t)?;
        let m2 = g.mul(r, l)?;
        let y = g.add(m1, m2)?;
        Ok(g.sum_all(y))
    }))?;
    op("sqrt_clamp", &[4], Box::new(|g, ps| {
        let w = g.param(ps, ps.id("w").unwrap());
        let sq = g.square(w);
        let sq = g.add_scalar(sq, 0.5);
        let root = g.sqrt(sq);
        let cl = g.clamp(root, 0.0, 100.0);
        Ok(g.sum_all(cl))
    }))?;
    op("shape_ops", &[3, 4], Box::new(|g, ps| {
        let w = g.param(ps, ps.id("w").unwrap());
        let t = g.transpose_last(w)?;
        let r = g.reshape(t, &[2, 6])?;
        let s = g.select_axis(r, 0, 1)?;
        let sr = g.select_range(r, 1, 1, 3)?;
        let st = g.stack(&[s, s], 0)?;
        let c = g.concat(&[st, sr], 1)?;
        let sq = g.square(c);
        Ok(g.sum_all(sq))
    }))?;
    op("reduce_broadcast", &[2, 3], Box::new(|g, ps| {
        let w = g.param(ps, ps.id("w").unwrap());
        let s = g.sum_axis(w, 0)?;
        let b = g.reshape(s, &[1, 3])?;
        let bb = g.broadcast_to(b, &[4, 3])?;
        let m = g.mean_all(bb);
        let tot = g.sum_all(w);
        g.add(m, tot)
    }))?;
    op("embedding_select", &[5, 3], Box::new(|g, ps| {
        let w = g.param(ps, ps.id("w").unwrap());
        let e = g.embedding(w, &[1, 4, 1], &[3])?;
        let p = g.softmax(e, 1)?;
        let picked = g.select_columns(p, &[0, 2, 1])?;
        let picked = g.clamp(picked, 1e-9, 1.0);
        let l = g.log(picked);
        let m = g.mean_all(l);
        Ok(g.neg(m))
    }))?;
    op("conv2d_pool", &[3, 3, 2, 2], Box::new(move |g, ps| {
        let k = g.param(ps, ps.id("w").unwrap());
        let mut s = StreamRng::new(1234).stream("convx");
        let x = g.constant(rand_tensor(&[2, 3, 3, 2], &mut s));
        let y = g.conv2d(x, k, 1)?;
        let y = g.tanh(y);
        let p = g.global_max_pool(y)?;
        Ok(g.sum_all(p))
    }))?;

    // ── recurrent cells ───────────────────────────────────────────────
    {
        let mut ps = ParamSet::new();
        let cell = GruCell::new(&mut ps, &rng, "gru", 3, 3)?;
        let ids = cell.param_ids();
        let report = grad_check(
            &mut ps,
            &ids,
            |g, ps| {
                let mut s = StreamRng::new(seed).stream("gru-x");
                let mut h = g.constant(Tensor::zeros(&[2, 3]));
                for _ in 0..3 {
                    let x = g.constant(rand_tensor(&[2, 3], &mut s));
                    h = cell.step(g, ps, x, h)?;
                }
                Ok(g.sum_all(h))
            },
            TOL,
            DEFAULT_FD_STEP,
        )?;
        checks.push(("op::gru_three_steps".to_string(), report.max_rel_err(), TOL));
    }
    {
        let mut ps = ParamSet::new();
        let gru = BiGru::new(&mut ps, &rng, "bigru", 2, 4)?;
        let ids = gru.param_ids();
        let report = grad_check(
            &mut ps,
            &ids,
            |g, ps| {
                let mut s = StreamRng::new(seed).stream("bigru-x");
                let steps: Vec<_> = (0..3).map(|_| g.constant(rand_tensor(&[2, 2], &mut s))).collect();
                let masks: Vec<_> = [1.0, 0.6, 0.0]
                    .iter()
                    .map(|&m| g.constant(Tensor::new(vec![2, 1], vec![m, 1.0]).unwrap()))
                    .collect();
                let (outs, fin) = gru.forward(g, ps, &steps, None, Some(&masks))?;
                let mut acc = g.sum_all(fin);
                for o in outs {
                    let so = g.sum_all(o);
                    acc = g.add(acc, so)?;
                }
                Ok(acc)
            },
            TOL,
            DEFAULT_FD_STEP,
        )?;
        checks.push(("op::bigru_masked".to_string(), report.max_rel_err(), TOL));
    }
    {
        let mut ps = ParamSet::new();
        let lstm = LstmCell::new(&mut ps, &rng, "lstm", 2, 3)?;
        let ids = lstm.param_ids();
        let report = grad_check(
            &mut ps,
            &ids,
            |g, ps| {
                let mut s = StreamRng::new(seed).stream("lstm-x");
                let steps: Vec<_> = (0..3).map(|_| g.constant(rand_tensor(&[2, 2], &mut s))).collect();
                let h = lstm.encode(g, ps, &steps, None)?;
                Ok(g.sum_all(h))
            },
            TOL,
            DEFAULT_FD_STEP,
        )?;
        checks.push(("op::lstm".to_string(), report.max_rel_err(), TOL));
    }

    // ── unify ─────────────────────────────────────────────────────────
    {
        let mut ps = ParamSet::new();
        let phi = ps.register("phi", &[6, 4], InitSpec::StandardNormal, &rng)?;
        let phiu = ps.register("phiu", &[6, 4], InitSpec::StandardNormal, &rng)?;
        let w = ps.register("psi_w", &[6, 1], InitSpec::Constant(0.3), &rng)?;
        let report = grad_check(
            &mut ps,
            &[phi, phiu, w],
            |g, ps| {
                let phi = g.param(ps, ps.id("phi").unwrap());
                let phiu = g.param(ps, ps.id("phiu").unwrap());
                let wv = g.param(ps, ps.id("psi_w").unwrap());
                let a = g.embedding(phi, &[1, 2], &[2])?;
                let b = g.embedding(phiu, &[1, 2], &[2])?;
                let c = g.embedding(phi, &[3, 4, 5], &[3])?;
                let d = g.embedding(phiu, &[3, 4, 5], &[3])?;
                let looked = g.embedding(wv, &[1, 2], &[2])?;
                let psi = g.sigmoid(looked);
                let mask = Tensor::new(vec![3], vec![1.0, 1.0, 0.0]).unwrap();
                let uv = unify::unify(g, a, b, c, d, psi, Some(&mask))?;
                let sq = g.square(uv.u);
                Ok(g.sum_all(sq))
            },
            TOL,
            DEFAULT_FD_STEP,
        )?;
        checks.push(("unify::masked".to_string(), report.max_rel_err(), TOL));
    }

    // ── miniature end-to-end architectures ────────────────────────────
    {
        let rng = StreamRng::new(seed);
        let mut ps = ParamSet::new();
        let mut cfg = ModelConfig::new(Arch::Umlp, 9, vec!["head".into(), "dup".into()]);
        cfg.d = 4;
        let mut model = UmlpModel::new(cfg, &mut ps, &rng)?;
        model.set_invariants(
            vec![vec![seq_example(&[8, 3, 3, 1], "head")], vec![seq_example(&[1, 4, 3, 1], "dup")]],
            &mut ps,
            &rng,
        )?;
        let ex = seq_example(&[2, 5, 7, 1], "head");
        let ids: Vec<_> = ps.ids().collect();
        let report = grad_check(
            &mut ps,
            &ids,
            |g, ps| {
                let refs = [&ex];
                let (probs, _) = model.forward_unified(g, ps, &refs, &mut Phase::Eval)?;
                let nll = crate::models::nll_loss(g, probs, &[2])?;
                let invs: Vec<&unify::Invariant> = model.invariants.iter().flatten().collect();
                let sp = unify::sparsity_penalty(g, ps, &invs, 0.1)?;
                g.add(nll, sp)
            },
            TOL,
            DEFAULT_FD_STEP,
        )?;
        checks.push(("model::umlp_unified".to_string(), report.max_rel_err(), TOL));
    }
    {
        let rng = StreamRng::new(seed);
        let mut ps = ParamSet::new();
        let mut cfg = ModelConfig::new(Arch::Ucnn, 9, vec!["box".into()]);
        cfg.d = 4;
        let mut model = UcnnModel::new(cfg, &mut ps, &rng)?;
        model.set_invariants(
            vec![vec![Example {
                context: Context::Grid([[0, 0, 0], [0, 2, 2], [8, 2, 2]]),
                query: vec![],
                answer: 2,
                supports: None,
                task: "box".to_string(),
            }]],
            &mut ps,
            &rng,
        )?;
        let ex = Example {
            context: Context::Grid([[4, 0, 0], [0, 7, 0], [8, 0, 1]]),
            query: vec![],
            answer: 4,
            supports: None,
            task: "box".to_string(),
        };
        let ids: Vec<_> = ps.ids().collect();
        let report = grad_check(
            &mut ps,
            &ids,
            |g, ps| {
                let refs = [&ex];
                let (probs, _) = model.forward_unified(g, ps, &refs, &mut Phase::Eval)?;
                crate::models::nll_loss(g, probs, &[4])
            },
            TOL,
            DEFAULT_FD_STEP,
        )?;
        checks.push(("model::ucnn_unified".to_string(), report.max_rel_err(), TOL));
    }
    {
        let rng = StreamRng::new(seed);
        let mut ps = ParamSet::new();
        let mut cfg = ModelConfig::new(Arch::Urnn, 8, vec!["sentiment".into()]);
        cfg.d = 4;
        let mut vocab = crate::data::Vocabulary::new();
        for w in ["the", "film", "was", "great", "awful", "plot", "acting"] {
            vocab.intern(w);
        }
        let table = UrnnModel::build_embed_table(&vocab, None, &rng);
        let mut model = UrnnModel::new(cfg, table, &mut ps, &rng)?;
        model.set_invariants(vec![Example {
            context: Context::Sentences(vec![vec![1, 2, 3, 4]]),
            query: vec![],
            answer: 1,
            supports: None,
            task: "sentiment".to_string(),
        }]);
        let a = Example {
            context: Context::Sentences(vec![vec![5, 6, 7]]),
            query: vec![],
            answer: 1,
            supports: None,
            task: "sentiment".to_string(),
        };
        let ids: Vec<_> = ps.ids().collect();
        let report = grad_check(
            &mut ps,
            &ids,
            |g, ps| {
                let refs = [&a];
                let mut phase = Phase::Eval;
                let (up, _) = model.forward_unified(g, ps, &refs, &mut phase)?;
                let unified = crate::models::bce_loss(g, up, &[1.0])?;
                let pp = model.forward_plain(g, ps, &refs, &mut phase)?;
                let plain = crate::models::bce_loss(g, pp, &[1.0])?;
                g.add(unified, plain)
            },
            TOL,
            DEFAULT_FD_STEP,
        )?;
        checks.push(("model::urnn_unified".to_string(), report.max_rel_err(), TOL));
    }
    {
        let rng = StreamRng::new(seed);
        let mut ps = ParamSet::new();
        let mut cfg = ModelConfig::new(Arch::Umn, 12, vec!["story".into()]);
        cfg.d = 4;
        cfg.iterations = 2;
        let mut model = UmnModel::new(cfg, &mut ps, &rng)?;
        let story = |a: usize| Example {
            context: Context::Sentences(vec![vec![1 + a, 2, 3], vec![4, 5]]),
            query: vec![6, 7],
            answer: 8,
            supports: Some(vec![0, 1]),
            task: "story".to_string(),
        };
        model.set_invariants(vec![story(0)], &mut ps, &rng)?;
        let ex = story(2);
        let ids: Vec<_> = ps.ids().collect();
        let report = grad_check(
            &mut ps,
            &ids,
            |g, ps| {
                let refs = [&ex];
                let fwd = model.forward(g, ps, &refs, true, &mut Phase::Eval)?;
                let nll_i = crate::models::nll_loss(g, fwd.probs_i.unwrap(), &[8])?;
                let nll_k = crate::models::nll_loss(g, fwd.probs_k, &[8])?;
                let mut loss = g.add(nll_i, nll_k)?;
                for (hi, hk) in fwd.h_i.iter().zip(&fwd.h_k) {
                    let d = g.sub(*hi, *hk)?;
                    let sq = g.square(d);
                    let m = g.mean_all(sq);
                    loss = g.add(loss, m)?;
                }
                for beta in fwd.beta_k.iter().chain(fwd.beta_i[0].iter()) {
                    let t = crate::models::nll_loss(g, *beta, &[0])?;
                    loss = g.add(loss, t)?;
                }
                let invs: Vec<&unify::Invariant> = model.invariants.iter().collect();
                let sp = unify::sparsity_penalty(g, ps, &invs, 0.1)?;
                g.add(loss, sp)
            },
            TOL,
            DEFAULT_FD_STEP,
        )?;
        checks.push(("model::umn_unified".to_string(), report.max_rel_err(), TOL));
    }

    Ok(SelfcheckReport {
        lines: vec![format!(
            "gradient checks: central differences at {DEFAULT_FD_STEP:.0e}, tolerance {TOL:.0e}, seed {seed}"
        )],
        checks,
    })
}
