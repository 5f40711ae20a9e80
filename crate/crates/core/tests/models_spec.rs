//! Behavioural contracts of the four architectures: probability outputs,
//! error paths, forced-identity unification consistency, memory-network
//! recurrence against a hand-evaluated oracle, tensor-reduction consistency,
//! and end-to-end gradient checks on miniature instances.

mod common;

use common::{assert_close, sigmoid, BiGruOracle};
use softuni_core::data::{Context, Example};
use softuni_core::gradcheck::{grad_check, DEFAULT_FD_STEP};
use softuni_core::graph::Graph;
use softuni_core::models::{Arch, ModelConfig, Phase, UcnnModel, UmlpModel, UmnModel, UrnnModel};
use softuni_core::models::umn::MemoryState;
use softuni_core::params::ParamSet;
use softuni_core::rng::StreamRng;
use softuni_core::tensor::Tensor;
use softuni_core::unify;

fn seq_example(seq: &[usize], task: &str) -> Example {
    Example {
        context: Context::Sentences(vec![seq.to_vec()]),
        query: vec![],
        answer: seq[0],
        supports: None,
        task: task.to_string(),
    }
}

fn grid_example(cells: [[usize; 3]; 3], task: &str, answer: usize) -> Example {
    Example {
        context: Context::Grid(cells),
        query: vec![],
        answer,
        supports: None,
        task: task.to_string(),
    }
}

fn story_example(sentences: &[&[usize]], query: &[usize], answer: usize, supports: &[usize]) -> Example {
    Example {
        context: Context::Sentences(sentences.iter().map(|s| s.to_vec()).collect()),
        query: query.to_vec(),
        answer,
        supports: if supports.is_empty() { None } else { Some(supports.to_vec()) },
        task: "story".to_string(),
    }
}

fn mini_umlp(seed: u64) -> (UmlpModel, ParamSet) {
    let rng = StreamRng::new(seed);
    let mut ps = ParamSet::new();
    let mut cfg = ModelConfig::new(Arch::Umlp, 9, vec!["head".into(), "dup".into()]);
    cfg.d = 4;
    let mut model = UmlpModel::new(cfg, &mut ps, &rng).unwrap();
    model
        .set_invariants(
            vec![vec![seq_example(&[8, 3, 3, 1], "head")], vec![seq_example(&[1, 4, 3, 1], "dup")]],
            &mut ps,
            &rng,
        )
        .unwrap();
    (model, ps)
}

#[test]
fn umlp_untrained_outputs_are_distributions() {
    let (model, ps) = mini_umlp(1);
    let exs = [seq_example(&[1, 2, 3, 4], "head"), seq_example(&[5, 6, 7, 8], "head")];
    let refs: Vec<&Example> = exs.iter().collect();
    for unified in [false, true] {
        let probs = model.predict(&ps, &refs, unified).unwrap();
        for row in &probs {
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6, "sum {sum}");
            assert!(row.iter().all(|&p| p >= 0.0));
        }
    }
}

#[test]
fn umlp_wrong_length_is_shape_error() {
    let (model, ps) = mini_umlp(2);
    let bad = seq_example(&[1, 2, 3], "head");
    assert!(matches!(
        model.predict(&ps, &[&bad], false),
        Err(softuni_core::Error::Shape(_))
    ));
}

#[test]
fn umlp_forced_identity_unification_matches_plain_exactly() {
    // With psi = 1 and the attention forced to the identity (each invariant
    // position unified against exactly its own example position), the
    // unified representation is exactly phi(K), so the composed prediction
    // equals the plain prediction bit for bit.
    let (model, ps) = mini_umlp(3);
    let ex = seq_example(&[2, 5, 7, 1], "head");
    let refs = [&ex];
    let mut g = Graph::new();
    let plain = model.forward_plain(&mut g, &ps, &refs).unwrap();

    let e = ps.id("umlp.embeddings").unwrap();
    let et = g.param(&ps, e);
    let g_ids = [8usize, 3, 3, 1];
    let k_ids = [2usize, 5, 7, 1];
    let feat = g.constant(Tensor::full(&[1, 4], 1.0));
    let ones = g.constant(Tensor::full(&[1, 1], 1.0));
    let mut rows = Vec::new();
    for t in 0..4 {
        let a = g.embedding(et, &g_ids[t..t + 1], &[1]).unwrap();
        let c = g.embedding(et, &k_ids[t..t + 1], &[1]).unwrap();
        let uv = unify::unify(&mut g, a, feat, c, feat, ones, None).unwrap();
        assert_eq!(g.value(uv.p).data(), &[1.0]);
        rows.push(uv.u);
    }
    let u = g.concat(&rows, 0).unwrap();
    let u = g.reshape(u, &[1, 4, 4]).unwrap();
    let unified_pred = model.predict_from_unified(&mut g, &ps, u, 0).unwrap();
    assert_eq!(g.value(unified_pred).data(), g.value(plain).data());
}

#[test]
fn umlp_end_to_end_grad_check() {
    let (model, mut ps) = mini_umlp(4);
    let ids: Vec<_> = ps.ids().collect();
    let ex = seq_example(&[2, 5, 7, 1], "head");
    let report = grad_check(
        &mut ps,
        &ids,
        |g, ps| {
            let refs = [&ex];
            let (probs, _) = model.forward_unified(g, ps, &refs, &mut Phase::Eval)?;
            let nll = softuni_core::models::nll_loss(g, probs, &[2])?;
            let invs: Vec<&unify::Invariant> = model.invariants.iter().flatten().collect();
            let sp = unify::sparsity_penalty(g, ps, &invs, 0.1)?;
            g.add(nll, sp)
        },
        1e-4,
        DEFAULT_FD_STEP,
    )
    .unwrap();
    assert!(report.passed(), "max err {} in {:?}", report.max_rel_err(), report.per_param);
}

fn mini_ucnn(seed: u64) -> (UcnnModel, ParamSet) {
    let rng = StreamRng::new(seed);
    let mut ps = ParamSet::new();
    let mut cfg = ModelConfig::new(Arch::Ucnn, 9, vec!["box".into(), "corner".into()]);
    cfg.d = 4;
    let mut model = UcnnModel::new(cfg, &mut ps, &rng).unwrap();
    model
        .set_invariants(
            vec![
                vec![grid_example([[0, 0, 0], [0, 2, 2], [8, 2, 2]], "box", 2)],
                vec![grid_example([[0, 0, 3], [0, 1, 6], [8, 5, 7]], "corner", 7)],
            ],
            &mut ps,
            &rng,
        )
        .unwrap();
    (model, ps)
}

#[test]
fn ucnn_untrained_outputs_are_distributions() {
    let (model, ps) = mini_ucnn(5);
    let ex = grid_example([[4, 0, 0], [0, 7, 0], [8, 0, 1]], "box", 4);
    for unified in [false, true] {
        let probs = model.predict(&ps, &[&ex], unified).unwrap();
        let sum: f64 = probs[0].iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
    }
}

#[test]
fn ucnn_all_background_grid_is_argument_error() {
    let (model, ps) = mini_ucnn(6);
    let ex = grid_example([[0, 0, 0], [0, 0, 0], [0, 0, 0]], "box", 0);
    assert!(matches!(
        model.predict(&ps, &[&ex], true),
        Err(softuni_core::Error::Argument(_))
    ));
    // The plain path has no unification and accepts it.
    assert!(model.predict(&ps, &[&ex], false).is_ok());
}

#[test]
fn ucnn_non_grid_context_is_shape_error() {
    let (model, ps) = mini_ucnn(7);
    let ex = seq_example(&[1, 2, 3, 4], "box");
    assert!(matches!(
        model.predict(&ps, &[&ex], false),
        Err(softuni_core::Error::Shape(_))
    ));
}

#[test]
fn ucnn_forced_identity_unification_matches_plain_exactly() {
    let (model, ps) = mini_ucnn(8);
    let ex = grid_example([[4, 0, 0], [0, 7, 0], [8, 0, 1]], "box", 4);
    let refs = [&ex];
    let mut g = Graph::new();
    let plain = model.forward_plain(&mut g, &ps, &refs).unwrap();

    let e = ps.id("ucnn.embeddings").unwrap();
    let et = g.param(&ps, e);
    let g_ids = [0usize, 0, 0, 0, 2, 2, 8, 2, 2];
    let k_ids = [4usize, 0, 0, 0, 7, 0, 8, 0, 1];
    let feat = g.constant(Tensor::full(&[1, 4], 1.0));
    let ones = g.constant(Tensor::full(&[1, 1], 1.0));
    let mut rows = Vec::new();
    for t in 0..9 {
        let a = g.embedding(et, &g_ids[t..t + 1], &[1]).unwrap();
        let c = g.embedding(et, &k_ids[t..t + 1], &[1]).unwrap();
        let uv = unify::unify(&mut g, a, feat, c, feat, ones, None).unwrap();
        rows.push(uv.u);
    }
    let u = g.concat(&rows, 0).unwrap();
    let u = g.reshape(u, &[1, 9, 4]).unwrap();
    let unified_pred = model.predict_from_unified(&mut g, &ps, u, 0).unwrap();
    assert_eq!(g.value(unified_pred).data(), g.value(plain).data());
}

#[test]
fn ucnn_end_to_end_grad_check() {
    let (model, mut ps) = mini_ucnn(9);
    let ids: Vec<_> = ps.ids().collect();
    let ex = grid_example([[4, 0, 0], [0, 7, 0], [8, 0, 1]], "box", 4);
    let report = grad_check(
        &mut ps,
        &ids,
        |g, ps| {
            let refs = [&ex];
            let (probs, _) = model.forward_unified(g, ps, &refs, &mut Phase::Eval)?;
            softuni_core::models::nll_loss(g, probs, &[4])
        },
        1e-4,
        DEFAULT_FD_STEP,
    )
    .unwrap();
    assert!(report.passed(), "max err {} in {:?}", report.max_rel_err(), report.per_param);
}

fn mini_urnn(seed: u64) -> (UrnnModel, ParamSet) {
    let rng = StreamRng::new(seed);
    let mut ps = ParamSet::new();
    let mut cfg = ModelConfig::new(Arch::Urnn, 8, vec!["sentiment".into()]);
    cfg.d = 4;
    let mut vocab = softuni_core::data::Vocabulary::new();
    for w in ["the", "film", "was", "great", "awful", "plot", "acting"] {
        vocab.intern(w);
    }
    let table = UrnnModel::build_embed_table(&vocab, None, &rng);
    let mut model = UrnnModel::new(cfg, table, &mut ps, &rng).unwrap();
    model.set_invariants(vec![Example {
        context: Context::Sentences(vec![vec![1, 2, 3, 4]]),
        query: vec![],
        answer: 1,
        supports: None,
        task: "sentiment".to_string(),
    }]);
    (model, ps)
}

#[test]
fn urnn_untrained_output_lies_in_unit_interval() {
    let (model, ps) = mini_urnn(10);
    let ex = Example {
        context: Context::Sentences(vec![vec![5, 6, 7]]),
        query: vec![],
        answer: 1,
        supports: None,
        task: "sentiment".to_string(),
    };
    for unified in [false, true] {
        let p = model.predict(&ps, &[&ex], unified).unwrap();
        assert!(p[0] > 0.0 && p[0] < 1.0, "p {}", p[0]);
    }
}

#[test]
fn urnn_empty_sequence_is_argument_error() {
    let (model, ps) = mini_urnn(11);
    let ex = Example {
        context: Context::Sentences(vec![vec![]]),
        query: vec![],
        answer: 1,
        supports: None,
        task: "sentiment".to_string(),
    };
    assert!(matches!(
        model.predict(&ps, &[&ex], false),
        Err(softuni_core::Error::Argument(_))
    ));
}

#[test]
fn urnn_end_to_end_grad_check() {
    let (model, mut ps) = mini_urnn(12);
    let ids: Vec<_> = ps.ids().collect();
    let a = Example {
        context: Context::Sentences(vec![vec![5, 6, 7]]),
        query: vec![],
        answer: 1,
        supports: None,
        task: "sentiment".to_string(),
    };
    let b = Example {
        context: Context::Sentences(vec![vec![4, 2]]),
        query: vec![],
        answer: 1,
        supports: None,
        task: "sentiment".to_string(),
    };
    let report = grad_check(
        &mut ps,
        &ids,
        |g, ps| {
            let refs = [&a, &b];
            let mut phase = Phase::Eval;
            let (up, _) = model.forward_unified(g, ps, &refs, &mut phase)?;
            let unified = softuni_core::models::bce_loss(g, up, &[1.0, 0.0])?;
            let pp = model.forward_plain(g, ps, &refs, &mut phase)?;
            let plain = softuni_core::models::bce_loss(g, pp, &[1.0, 0.0])?;
            let both = g.add(unified, plain)?;
            // psi-based sparsity over the invariant's words.
            let inv_words: Vec<usize> = vec![1, 2, 3, 4];
            let psi = model.psi_of(g, ps, &inv_words)?;
            let sp = unify::sparsity_penalty_from_psi(g, &[psi], 0.1)?;
            g.add(both, sp)
        },
        1e-4,
        DEFAULT_FD_STEP,
    )
    .unwrap();
    assert!(report.passed(), "max err {} in {:?}", report.max_rel_err(), report.per_param);
}

fn mini_umn(seed: u64, invariants: usize) -> (UmnModel, ParamSet) {
    let rng = StreamRng::new(seed);
    let mut ps = ParamSet::new();
    let mut cfg = ModelConfig::new(Arch::Umn, 12, vec!["story".into()]);
    cfg.d = 4;
    cfg.iterations = 2;
    let mut model = UmnModel::new(cfg, &mut ps, &rng).unwrap();
    let invs: Vec<Example> = (0..invariants)
        .map(|i| {
            story_example(
                &[&[1 + i, 2, 3], &[4, 5 + i]],
                &[6, 7],
                8,
                &[0, 1],
            )
        })
        .collect();
    model.set_invariants(invs, &mut ps, &rng).unwrap();
    (model, ps)
}

#[test]
fn umn_empty_story_is_argument_error() {
    let (model, ps) = mini_umn(13, 1);
    let ex = story_example(&[], &[1], 2, &[]);
    assert!(matches!(
        model.predict(&ps, &[&ex], false),
        Err(softuni_core::Error::Argument(_))
    ));
}

#[test]
fn umn_outputs_are_distributions() {
    let (model, ps) = mini_umn(14, 1);
    let ex = story_example(&[&[1, 2, 3], &[4, 5], &[9, 10]], &[6, 7], 8, &[0]);
    for unified in [false, true] {
        let probs = model.predict(&ps, &[&ex], unified).unwrap();
        let sum: f64 = probs[0].iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
    }
}

#[test]
fn memnn_single_slot_attention_is_one() {
    let (model, ps) = mini_umn(15, 1);
    let memory = Tensor::new(vec![1, 4], vec![0.3, -0.2, 0.5, 0.1]).unwrap();
    let state = MemoryState { h: Tensor::from_vec(vec![0.1, 0.2, -0.3, 0.4]), beta: Tensor::from_vec(vec![]), j: 0 };
    let next = model.memnn_iterate(&ps, &memory, &state).unwrap();
    assert_eq!(next.beta.data(), &[1.0]);
    assert_eq!(next.j, 1);
}

#[test]
fn memnn_identical_slots_split_attention() {
    // Symmetry between identical slots holds exactly once the order-aware
    // slot GRU is replaced by the identity, as in the permutation fixture.
    let (mut model, ps) = mini_umn(16, 1);
    model.phi_a_identity = true;
    let row = [0.3, -0.2, 0.5, 0.1];
    let memory = Tensor::new(vec![2, 4], row.iter().chain(row.iter()).copied().collect()).unwrap();
    let state = MemoryState { h: Tensor::from_vec(vec![0.1, 0.2, -0.3, 0.4]), beta: Tensor::from_vec(vec![]), j: 0 };
    let next = model.memnn_iterate(&ps, &memory, &state).unwrap();
    assert_close(next.beta.data(), &[0.5, 0.5], 1e-12, "identical slots");
}

#[test]
fn memnn_zero_slots_is_argument_error() {
    let (model, ps) = mini_umn(17, 1);
    let state = MemoryState { h: Tensor::from_vec(vec![0.0; 4]), beta: Tensor::from_vec(vec![]), j: 0 };
    let empty = Tensor::zeros(&[4]);
    assert!(model.memnn_iterate(&ps, &empty, &state).is_err());
}

#[test]
fn memnn_iteration_matches_hand_evaluated_recurrence() {
    let (model, ps) = mini_umn(18, 1);
    let d = 4;
    let memory = Tensor::new(
        vec![2, 4],
        vec![0.3, -0.2, 0.5, 0.1, -0.4, 0.6, 0.05, -0.15],
    )
    .unwrap();
    let h0 = vec![0.1, 0.2, -0.3, 0.4];
    let state =
        MemoryState { h: Tensor::from_vec(h0.clone()), beta: Tensor::from_vec(vec![]), j: 0 };
    let next = model.memnn_iterate(&ps, &memory, &state).unwrap();

    // Oracle: A_i = tanh(W rho(M_i, h) + b), slot features from the
    // attention GRU, logits w . feat + b, beta = softmax, h' = sum beta A.
    let w_rho = ps.tensor(ps.id("umn.w_rho.w").unwrap()).data().to_vec();
    let b_rho = ps.tensor(ps.id("umn.w_rho.b").unwrap()).data().to_vec();
    let mut a = vec![vec![0.0; d]; 2];
    for i in 0..2 {
        let m = &memory.data()[i * d..(i + 1) * d];
        let mut rho = Vec::with_capacity(4 * d);
        rho.extend_from_slice(m);
        rho.extend_from_slice(&h0);
        rho.extend((0..d).map(|x| m[x] * h0[x]));
        rho.extend((0..d).map(|x| (m[x] - h0[x]) * (m[x] - h0[x])));
        for j in 0..d {
            let mut acc = b_rho[j];
            for x in 0..4 * d {
                acc += rho[x] * w_rho[x * d + j];
            }
            a[i][j] = acc.tanh();
        }
    }
    let phi_a = BiGruOracle::from_params(&ps, "umn.phi_a", d, d);
    let (feats, _) = phi_a.run(&a);
    let w_att = ps.tensor(ps.id("umn.att_out.w").unwrap()).data().to_vec();
    let b_att = ps.tensor(ps.id("umn.att_out.b").unwrap()).data()[0];
    let logits: Vec<f64> = feats
        .iter()
        .map(|f| f.iter().zip(&w_att).map(|(x, w)| x * w).sum::<f64>() + b_att)
        .collect();
    let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - mx).exp()).collect();
    let z: f64 = exps.iter().sum();
    let beta: Vec<f64> = exps.iter().map(|e| e / z).collect();
    let mut h_want = vec![0.0; d];
    for i in 0..2 {
        for j in 0..d {
            h_want[j] += beta[i] * a[i][j];
        }
    }
    assert_close(next.beta.data(), &beta, 1e-8, "beta oracle");
    assert_close(next.h.data(), &h_want, 1e-8, "state oracle");
}

#[test]
fn memnn_permutation_consistency_with_identity_attention_features() {
    // With the slot-order GRU replaced by the identity, permuting memory
    // slots permutes beta identically and leaves the next state unchanged.
    let (mut model, ps) = mini_umn(19, 1);
    model.phi_a_identity = true;
    let rows = [
        vec![0.3, -0.2, 0.5, 0.1],
        vec![-0.4, 0.6, 0.05, -0.15],
        vec![0.2, 0.2, -0.6, 0.33],
    ];
    let h = Tensor::from_vec(vec![0.1, 0.2, -0.3, 0.4]);
    let forward = {
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        let memory = Tensor::new(vec![3, 4], data).unwrap();
        model
            .memnn_iterate(&ps, &memory, &MemoryState { h: h.clone(), beta: Tensor::from_vec(vec![]), j: 0 })
            .unwrap()
    };
    let perm = [2usize, 0, 1];
    let permuted = {
        let data: Vec<f64> = perm.iter().flat_map(|&i| rows[i].clone()).collect();
        let memory = Tensor::new(vec![3, 4], data).unwrap();
        model
            .memnn_iterate(&ps, &memory, &MemoryState { h, beta: Tensor::from_vec(vec![]), j: 0 })
            .unwrap()
    };
    for (new_pos, &old_pos) in perm.iter().enumerate() {
        assert!((permuted.beta.data()[new_pos] - forward.beta.data()[old_pos]).abs() < 1e-12);
    }
    assert_close(permuted.h.data(), forward.h.data(), 1e-8, "state under permutation");
}

#[test]
fn unification_tensor_one_hot_reduction_matches_pairwise_unify() {
    let (model, ps) = mini_umn(20, 1);
    let ex = story_example(&[&[9, 10, 11], &[2, 3]], &[6, 7], 8, &[]);
    let tensor = model.unification_tensor(&ps, 0, &ex).unwrap();
    // Invariant story: 2 sentences, max 3 words; example: 2 sentences.
    assert_eq!(tensor.shape(), &[2, 3, 2, 4]);
    for i in 0..2 {
        for k in 0..2 {
            let trace = model.unify_pair(&ps, 0, i, &ex, k).unwrap();
            let words = trace.u.shape()[0];
            for w in 0..words {
                for x in 0..4 {
                    let got = tensor.data()[((i * 3 + w) * 2 + k) * 4 + x];
                    let want = trace.u.data()[w * 4 + x];
                    assert!((got - want).abs() < 1e-12, "tensor[{i},{w},{k},{x}]");
                }
            }
        }
    }
}

#[test]
fn umn_multi_invariant_weights_are_distributions() {
    let (model, ps) = mini_umn(21, 2);
    let ex = story_example(&[&[1, 2, 3], &[4, 5]], &[6, 7], 8, &[0]);
    // Two invariants: the combined output must still be a distribution.
    let probs = model.predict(&ps, &[&ex], true).unwrap();
    let sum: f64 = probs[0].iter().sum();
    assert!((sum - 1.0).abs() < 1e-6);
}

#[test]
fn umn_end_to_end_grad_check() {
    let (model, mut ps) = mini_umn(22, 1);
    let ids: Vec<_> = ps.ids().collect();
    let ex = story_example(&[&[1, 2, 3], &[4, 5]], &[6, 7], 8, &[0, 1]);
    let report = grad_check(
        &mut ps,
        &ids,
        |g, ps| {
            let refs = [&ex];
            let fwd = model.forward(g, ps, &refs, true, &mut Phase::Eval)?;
            let nll_i = softuni_core::models::nll_loss(g, fwd.probs_i.unwrap(), &[8])?;
            let nll_k = softuni_core::models::nll_loss(g, fwd.probs_k, &[8])?;
            let mut loss = g.add(nll_i, nll_k)?;
            // Auxiliary state alignment.
            for (hi, hk) in fwd.h_i.iter().zip(&fwd.h_k) {
                let d = g.sub(*hi, *hk)?;
                let sq = g.square(d);
                let m = g.mean_all(sq);
                loss = g.add(loss, m)?;
            }
            // Attention supervision on both streams.
            for beta in fwd.beta_k.iter().chain(fwd.beta_i[0].iter()) {
                let picked = g.select_columns(*beta, &[0])?;
                let picked = g.clamp(picked, 1e-9, 1.0);
                let lg = g.log(picked);
                let m = g.mean_all(lg);
                let n = g.neg(m);
                loss = g.add(loss, n)?;
            }
            let invs: Vec<&unify::Invariant> = model.invariants.iter().collect();
            let sp = unify::sparsity_penalty(g, ps, &invs, 0.1)?;
            g.add(loss, sp)
        },
        1e-4,
        DEFAULT_FD_STEP,
    )
    .unwrap();
    assert!(report.passed(), "max err {} in {:?}", report.max_rel_err(), report.per_param);
}
