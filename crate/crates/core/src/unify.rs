//! Soft unification: lift an example into an invariant with per-symbol
//! variableness, attend from the invariant's unifying features to a new
//! example's, and interpolate each invariant symbol between its own features
//! and its attended value.
//!
//! For invariant features A, unifying features B, example features C and
//! unifying features D, the attention is P = softmax(B D^T) over the
//! example's symbols, the attended representation is E = P C, and the
//! unified representation interpolates row-wise:
//! U_s = psi(s) E_s + (1 - psi(s)) A_s.

use crate::data::{Example, SymbolId};
use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::params::{ParamId, ParamSet};
use crate::tensor::Tensor;

/// How an invariant's variableness is realized.
pub enum PsiSource {
    /// Learnable weight per vocabulary symbol, stored as a [|S|, 1] table;
    /// psi(s) = sigmoid(w_s).
    Table(ParamId),
    /// Computed from symbol features by the owning model.
    Computed,
}

/// An example lifted into an invariant: the ground example plus the
/// variableness of each symbol.
pub struct Invariant {
    pub example: Example,
    pub psi: PsiSource,
    pub id: usize,
}

impl Invariant {
    /// Table-mode variableness of one symbol.
    pub fn variableness(&self, ps: &ParamSet, symbol: SymbolId) -> Result<f64> {
        match self.psi {
            PsiSource::Table(table) => {
                let t = ps.tensor(table);
                if symbol >= t.shape()[0] {
                    return Err(Error::vocab(format!(
                        "symbol id {symbol} outside vocabulary of {}",
                        t.shape()[0]
                    )));
                }
                Ok(sigmoid(t.data()[symbol]))
            }
            PsiSource::Computed => Err(Error::config(
                "variableness of a computed invariant lives in its model".to_string(),
            )),
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Fresh invariants start conservative (psi of sigmoid(-2) ~ 0.12): a
/// symbol earns variableness only when substituting its value is the
/// cheapest way to explain the data, which keeps the leak of attended
/// content through near-uniform psi from becoming a competing solution.
pub const PSI_INIT_WEIGHT: f64 = -2.0;

/// The attention map of a unification: example symbols are shared
/// resources, so raw scores are first discounted by each column's
/// log-sum-exp over the invariant's symbols (one competition step), then
/// row-softmaxed over the example's symbols. Rows stay stochastic and
/// masked columns stay exactly zero; the competition makes a single example
/// symbol unable to win every invariant row at once.
///
/// k_mask masks example symbols (columns); g_mask masks padded invariant
/// rows out of the competition. Both hold 1 for kept entries.
pub fn attention_map(
    g: &mut Graph,
    scores: Var,
    k_mask: Option<&Tensor>,
    g_mask: Option<&Tensor>,
) -> Result<Var> {
    let nd = g.shape(scores).len();
    let (g_axis, k_axis) = (nd - 2, nd - 1);
    let masked = match k_mask {
        Some(m) => {
            let penalty = m.map(|v| (v - 1.0) * 1e9);
            let p = g.constant(penalty);
            g.add(scores, p)?
        }
        None => scores,
    };
    // Padded invariant rows may not contest any column.
    let competing = match g_mask {
        Some(m) => {
            let penalty = m.map(|v| (v - 1.0) * 1e9);
            let p = g.constant(penalty);
            g.add(masked, p)?
        }
        None => masked,
    };
    // Stable log-sum-exp over the invariant axis; the max shift is a
    // constant, which leaves the gradient exact.
    let col_max = {
        let v = g.value(competing);
        let shape = v.shape().to_vec();
        let outer: usize = shape[..g_axis].iter().product();
        let rows = shape[g_axis];
        let cols = shape[k_axis];
        let mut m = Tensor::full(&[outer, 1, cols], f64::NEG_INFINITY);
        for o in 0..outer {
            for r in 0..rows {
                for c in 0..cols {
                    let x = v.data()[(o * rows + r) * cols + c];
                    let slot = &mut m.data_mut()[o * cols + c];
                    if x > *slot {
                        *slot = x;
                    }
                }
            }
        }
        let mut keep_shape = shape.clone();
        keep_shape[g_axis] = 1;
        g.constant(m.reshape(&keep_shape).expect("col max reshape"))
    };
    let shifted = g.sub(competing, col_max)?;
    let e = g.exp(shifted);
    let summed = g.sum_axis(e, g_axis)?;
    let logged = g.log(summed);
    let mut keep_shape = g.shape(competing).to_vec();
    keep_shape[g_axis] = 1;
    let logged = g.reshape(logged, &keep_shape)?;
    let lse = g.add(logged, col_max)?;
    let discounted = g.sub(masked, lse)?;
    // Re-assert the column mask: the discount lifts masked columns back to
    // finite values, so they must be pushed out again before the softmax.
    let final_scores = match k_mask {
        Some(m) => {
            let penalty = m.map(|v| (v - 1.0) * 1e9);
            let p = g.constant(penalty);
            g.add(discounted, p)?
        }
        None => discounted,
    };
    g.softmax(final_scores, k_axis)
}

/// Both direction halves of concatenated bi-GRU features scaled to unit
/// norm separately, so neither direction's magnitude drowns the other in a
/// downstream projection.
pub fn normalize_direction_halves(g: &mut Graph, x: Var) -> Result<Var> {
    let nd = g.shape(x).len();
    let width = g.shape(x)[nd - 1];
    if width % 2 != 0 {
        return Err(Error::shape(format!("feature width {width} has no direction halves")));
    }
    let half = width / 2;
    let f = g.select_range(x, nd - 1, 0, half)?;
    let b = g.select_range(x, nd - 1, half, half)?;
    let fector = l2_normalize_rows(g, f)?;
    let bector = l2_normalize_rows(g, b)?;
    g.concat(&[fector, bector], nd - 1)
}

/// Rows scaled to unit L2 norm along the last axis.
pub fn l2_normalize_rows(g: &mut Graph, x: Var) -> Result<Var> {
    let sq = g.square(x);
    let last = g.shape(x).len() - 1;
    let total = g.sum_axis(sq, last)?;
    let mut keep = g.shape(total).to_vec();
    keep.push(1);
    let total = g.reshape(total, &keep)?;
    let total = g.add_scalar(total, 1e-12);
    let norm = g.sqrt(total);
    g.div(x, norm)
}

/// Callable pair (phi, phi_U) producing per-symbol feature matrices for a
/// symbol sequence with its surrounding context.
pub trait FeatureProvider {
    /// Returns (features, unifying features), each [|seq|, d].
    fn features(&self, g: &mut Graph, ps: &ParamSet, seq: &[SymbolId]) -> Result<(Var, Var)>;
    fn dim(&self) -> usize;
}

/// Feature provider over a fixed constant table; unifying features equal the
/// plain features, so attention is position-independent. Used by property
/// tests and fixtures.
pub struct TableFeatures {
    pub table: Tensor,
}

impl TableFeatures {
    pub fn identity(vocab_size: usize) -> Self {
        let mut t = Tensor::zeros(&[vocab_size, vocab_size]);
        for i in 0..vocab_size {
            t.data_mut()[i * vocab_size + i] = 1.0;
        }
        TableFeatures { table: t }
    }
}

impl FeatureProvider for TableFeatures {
    fn features(&self, g: &mut Graph, _ps: &ParamSet, seq: &[SymbolId]) -> Result<(Var, Var)> {
        let t = g.constant(self.table.clone());
        let phi = g.embedding(t, seq, &[seq.len()])?;
        Ok((phi, phi))
    }

    fn dim(&self) -> usize {
        self.table.shape()[1]
    }
}

/// All intermediate matrices of one unify call, as graph nodes.
pub struct UnifyVars {
    pub a: Var,
    pub b: Var,
    pub c: Var,
    pub d: Var,
    pub p: Var,
    pub e: Var,
    pub u: Var,
    pub psi: Var,
}

/// Plain-tensor snapshot of a unify call, for analysis and export.
pub struct UnificationTrace {
    pub a: Tensor,
    pub b: Tensor,
    pub c: Tensor,
    pub d: Tensor,
    pub p: Tensor,
    pub e: Tensor,
    pub u: Tensor,
    pub psi: Vec<f64>,
}

pub fn trace_of(g: &Graph, uv: &UnifyVars) -> UnificationTrace {
    UnificationTrace {
        a: g.value(uv.a).clone(),
        b: g.value(uv.b).clone(),
        c: g.value(uv.c).clone(),
        d: g.value(uv.d).clone(),
        p: g.value(uv.p).clone(),
        e: g.value(uv.e).clone(),
        u: g.value(uv.u).clone(),
        psi: g.value(uv.psi).data().to_vec(),
    }
}

/// Soft unification over prepared features.
///
/// a, b: invariant features/unifying features, [|G|, d].
/// c, d: example features/unifying features, [|K|, d] or batched [B, |K|, d].
/// psi: variableness column [|G|, 1].
/// mask: optional keep-mask over K's symbols, [|K|] or [B, |K|]; every row
/// must keep at least one symbol.
pub fn unify(
    g: &mut Graph,
    a: Var,
    b: Var,
    c: Var,
    d: Var,
    psi: Var,
    mask: Option<&Tensor>,
) -> Result<UnifyVars> {
    let g_len = {
        let sa = g.shape(a);
        if sa.len() != 2 {
            return Err(Error::shape(format!("invariant features must be [|G|, d], got {sa:?}")));
        }
        sa[0]
    };
    if g_len == 0 {
        return Err(Error::argument("invariant has no symbols".to_string()));
    }
    let k_len = {
        let sc = g.shape(c);
        sc[sc.len() - 2]
    };
    let mask_norm = match mask {
        None => None,
        Some(m) => {
            let (rows, cols) = match m.shape() {
                [k] => (1, *k),
                [b, k] => (*b, *k),
                other => {
                    return Err(Error::shape(format!("mask must be [|K|] or [B, |K|], got {other:?}")))
                }
            };
            if cols != k_len {
                return Err(Error::shape(format!("mask covers {cols} symbols, K has {k_len}")));
            }
            for r in 0..rows {
                if !m.data()[r * cols..(r + 1) * cols].iter().any(|&v| v > 0.0) {
                    return Err(Error::argument(format!("all symbols of K (row {r}) are masked")));
                }
            }
            // Shaped to broadcast over the |G| axis of the scores.
            Some(m.reshape(&[rows, 1, cols]).expect("mask reshape"))
        }
    };

    let bn = l2_normalize_rows(g, b)?;
    let dn = l2_normalize_rows(g, d)?;
    let dt = g.transpose_last(dn)?;
    let raw = g.matmul(bn, dt)?;
    // Cosine scores scaled by sqrt(d): row norms carry no attention signal,
    // which keeps any one example symbol from swallowing every row.
    let width = g.shape(b)[1] as f64;
    let scores = g.scale(raw, width.sqrt());
    let nd = g.shape(scores).len();
    let mask2 = mask_norm.as_ref().map(|m| {
        if nd == 2 {
            m.reshape(&[1, k_len]).expect("mask reshape")
        } else {
            m.clone()
        }
    });
    let p = attention_map(g, scores, mask2.as_ref(), None)?;
    let e = g.matmul(p, c)?;
    let u = {
        let pe = g.mul(psi, e)?;
        let np = g.neg(psi);
        let np1 = g.add_scalar(np, 1.0);
        let pa = g.mul(np1, a)?;
        g.add(pe, pa)?
    };
    Ok(UnifyVars { a, b, c, d, p, e, u, psi })
}

/// Unify an invariant sequence with an example sequence through a feature
/// provider, reading table-mode variableness from the parameter set.
pub fn unify_sequences(
    g: &mut Graph,
    ps: &ParamSet,
    inv: &Invariant,
    inv_seq: &[SymbolId],
    k_seq: &[SymbolId],
    provider: &dyn FeatureProvider,
    mask: Option<&Tensor>,
) -> Result<UnifyVars> {
    if inv_seq.is_empty() {
        return Err(Error::argument("invariant sequence is empty".to_string()));
    }
    if k_seq.is_empty() {
        return Err(Error::argument("example sequence is empty".to_string()));
    }
    let (a, b) = provider.features(g, ps, inv_seq)?;
    let (c, d) = provider.features(g, ps, k_seq)?;
    let psi = table_psi(g, ps, inv, inv_seq)?;
    unify(g, a, b, c, d, psi, mask)
}

/// Column [|seq|, 1] of sigmoid(w_s) for a table-mode invariant.
pub fn table_psi(g: &mut Graph, ps: &ParamSet, inv: &Invariant, seq: &[SymbolId]) -> Result<Var> {
    match inv.psi {
        PsiSource::Table(table) => {
            let t = g.param(ps, table);
            let looked = g.embedding(t, seq, &[seq.len()])?;
            Ok(g.sigmoid(looked))
        }
        PsiSource::Computed => {
            Err(Error::config("computed variableness requires the owning model".to_string()))
        }
    }
}

/// tau * sum over invariants and vocabulary symbols of psi(s), table mode.
pub fn sparsity_penalty(
    g: &mut Graph,
    ps: &ParamSet,
    invariants: &[&Invariant],
    tau: f64,
) -> Result<Var> {
    let mut acc = g.scalar(0.0);
    if tau == 0.0 {
        return Ok(acc);
    }
    for inv in invariants {
        let PsiSource::Table(table) = inv.psi else {
            return Err(Error::config(
                "sparsity over a computed invariant needs its psi values".to_string(),
            ));
        };
        let w = g.param(ps, table);
        let psi = g.sigmoid(w);
        let s = g.sum_all(psi);
        acc = g.add(acc, s)?;
    }
    Ok(g.scale(acc, tau))
}

/// tau * sum of already-computed psi values (one Var per invariant), for
/// models whose variableness is a function of features.
pub fn sparsity_penalty_from_psi(g: &mut Graph, psis: &[Var], tau: f64) -> Result<Var> {
    let mut acc = g.scalar(0.0);
    if tau == 0.0 {
        return Ok(acc);
    }
    for &psi in psis {
        let s = g.sum_all(psi);
        acc = g.add(acc, s)?;
    }
    Ok(g.scale(acc, tau))
}

/// Sum per-invariant probability vectors and renormalize to sum 1.
pub fn aggregate_predictions<I, F>(invariants: &[I], k: &Example, predict: F) -> Result<Vec<f64>>
where
    F: Fn(&I, &Example) -> Result<Vec<f64>>,
{
    if invariants.is_empty() {
        return Err(Error::argument("no invariants to aggregate".to_string()));
    }
    let mut acc: Option<Vec<f64>> = None;
    for inv in invariants {
        let p = predict(inv, k)?;
        match &mut acc {
            None => acc = Some(p),
            Some(a) => {
                if a.len() != p.len() {
                    return Err(Error::shape(format!(
                        "prediction lengths differ: {} vs {}",
                        a.len(),
                        p.len()
                    )));
                }
                for (x, y) in a.iter_mut().zip(&p) {
                    *x += y;
                }
            }
        }
    }
    let mut a = acc.unwrap();
    let total: f64 = a.iter().sum();
    if total > 0.0 {
        for x in &mut a {
            *x /= total;
        }
    }
    Ok(a)
}

/// Graph-level aggregation: elementwise sum renormalized along the last axis.
pub fn aggregate_probs(g: &mut Graph, preds: &[Var]) -> Result<Var> {
    if preds.is_empty() {
        return Err(Error::argument("no predictions to aggregate".to_string()));
    }
    if preds.len() == 1 {
        return Ok(preds[0]);
    }
    let mut acc = preds[0];
    for &p in &preds[1..] {
        acc = g.add(acc, p)?;
    }
    let last = g.shape(acc).len() - 1;
    let total = g.sum_axis(acc, last)?;
    let mut with_one = g.shape(total).to_vec();
    with_one.push(1);
    let total = g.reshape(total, &with_one)?;
    g.div(acc, total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Context;
    use crate::params::InitSpec;
    use crate::rng::StreamRng;

    fn table_invariant(ps: &mut ParamSet, vocab: usize, rng: &StreamRng) -> Invariant {
        let table = ps.register("inv0.psi", &[vocab, 1], InitSpec::Zeros, rng).unwrap();
        Invariant {
            example: Example {
                context: Context::Sentences(vec![vec![1, 2]]),
                query: vec![],
                answer: 1,
                supports: None,
                task: "t".to_string(),
            },
            psi: PsiSource::Table(table),
            id: 0,
        }
    }

    #[test]
    fn variableness_is_sigmoid_of_weight() {
        let rng = StreamRng::new(1);
        let mut ps = ParamSet::new();
        let inv = table_invariant(&mut ps, 5, &rng);
        // w = 0 -> 0.5
        assert!((inv.variableness(&ps, 3).unwrap() - 0.5).abs() < 1e-12);
        let PsiSource::Table(t) = inv.psi else { unreachable!() };
        ps.tensor_mut(t).data_mut()[2] = 2.0;
        assert!((inv.variableness(&ps, 2).unwrap() - 0.8807970779778823).abs() < 1e-12);
        ps.tensor_mut(t).data_mut()[1] = -30.0;
        assert!(inv.variableness(&ps, 1).unwrap() < 1e-12);
        assert!(matches!(inv.variableness(&ps, 7), Err(Error::Vocab(_))));
    }

    #[test]
    fn psi_zero_recovers_invariant_features() {
        let rng = StreamRng::new(2);
        let mut ps = ParamSet::new();
        let inv = table_invariant(&mut ps, 5, &rng);
        let PsiSource::Table(t) = inv.psi else { unreachable!() };
        for v in ps.tensor_mut(t).data_mut() {
            *v = -30.0;
        }
        let provider = TableFeatures::identity(5);
        let mut g = Graph::new();
        let uv = unify_sequences(&mut g, &ps, &inv, &[1, 2], &[3, 4], &provider, None).unwrap();
        let a = g.value(uv.a).data().to_vec();
        let u = g.value(uv.u).data().to_vec();
        for (x, y) in a.iter().zip(&u) {
            assert!((x - y).abs() < 1e-8, "{x} vs {y}");
        }
    }

    #[test]
    fn single_symbol_full_variableness_copies_example() {
        let rng = StreamRng::new(3);
        let mut ps = ParamSet::new();
        let inv = table_invariant(&mut ps, 5, &rng);
        let PsiSource::Table(t) = inv.psi else { unreachable!() };
        for v in ps.tensor_mut(t).data_mut() {
            *v = 30.0; // psi ~= 1
        }
        let provider = TableFeatures::identity(5);
        let mut g = Graph::new();
        let uv = unify_sequences(&mut g, &ps, &inv, &[1], &[3], &provider, None).unwrap();
        assert_eq!(g.value(uv.p).data(), &[1.0]);
        // U row equals phi(3): one-hot at column 3.
        let u = g.value(uv.u).data();
        for (i, &v) in u.iter().enumerate() {
            let want = if i == 3 { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-8);
        }
    }

    #[test]
    fn hand_set_features_align_head_position() {
        // Invariant "7 4" with psi(7)=1, psi(4)=0 unified with "3 9" under
        // features where heads share a direction: U = [phi(3); phi(4)],
        // the unified sequence "3 4".
        let rng = StreamRng::new(4);
        let mut ps = ParamSet::new();
        let mut inv = table_invariant(&mut ps, 10, &rng);
        inv.example.context = Context::Sentences(vec![vec![7, 4]]);
        let PsiSource::Table(t) = inv.psi else { unreachable!() };
        ps.tensor_mut(t).data_mut()[7] = 30.0;
        ps.tensor_mut(t).data_mut()[4] = -30.0;

        // Unifying features: heads of sequences share one direction, tails
        // the opposite one, so head positions align across the examples.
        let mut phi_table = Tensor::zeros(&[10, 10]);
        for i in 0..10 {
            phi_table.data_mut()[i * 10 + i] = 1.0;
        }
        let mut ufeat = Tensor::zeros(&[10, 10]);
        for &head in &[7usize, 3] {
            ufeat.data_mut()[head * 10] = 1.0;
        }
        for &tail in &[4usize, 9] {
            ufeat.data_mut()[tail * 10] = -1.0;
        }

        let mut g = Graph::new();
        let tphi = g.constant(phi_table);
        let tu = g.constant(ufeat);
        let a = g.embedding(tphi, &[7, 4], &[2]).unwrap();
        let b = g.embedding(tu, &[7, 4], &[2]).unwrap();
        let c = g.embedding(tphi, &[3, 9], &[2]).unwrap();
        let d = g.embedding(tu, &[3, 9], &[2]).unwrap();
        let psi = table_psi(&mut g, &ps, &inv, &[7, 4]).unwrap();
        let uv = unify(&mut g, a, b, c, d, psi, None).unwrap();
        // The invariant's head binds the example's head, its tail stays put:
        // the unified sequence reads "3 4".
        let p = g.value(uv.p);
        assert!(p.data()[0] > 0.99, "head-head attention {}", p.data()[0]);
        assert!(p.data()[3] > 0.99, "tail-tail attention {}", p.data()[3]);
        let u = g.value(uv.u);
        for col in 0..10 {
            let want0 = if col == 3 { 1.0 } else { 0.0 };
            let want1 = if col == 4 { 1.0 } else { 0.0 };
            assert!((u.data()[col] - want0).abs() < 0.01, "row0 col{col}: {}", u.data()[col]);
            assert!((u.data()[10 + col] - want1).abs() < 1e-6, "row1 col{col}");
        }
    }

    #[test]
    fn all_masked_is_argument_error() {
        let rng = StreamRng::new(5);
        let mut ps = ParamSet::new();
        let inv = table_invariant(&mut ps, 5, &rng);
        let provider = TableFeatures::identity(5);
        let mut g = Graph::new();
        let mask = Tensor::new(vec![2], vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            unify_sequences(&mut g, &ps, &inv, &[1, 2], &[3, 4], &provider, Some(&mask)),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn masked_columns_are_exactly_zero() {
        let rng = StreamRng::new(6);
        let mut ps = ParamSet::new();
        let inv = table_invariant(&mut ps, 5, &rng);
        let provider = TableFeatures::identity(5);
        let mut g = Graph::new();
        let mask = Tensor::new(vec![3], vec![1.0, 0.0, 1.0]).unwrap();
        let uv =
            unify_sequences(&mut g, &ps, &inv, &[1, 2], &[3, 4, 2], &provider, Some(&mask)).unwrap();
        let p = g.value(uv.p);
        for row in 0..2 {
            assert_eq!(p.data()[row * 3 + 1], 0.0);
            let sum: f64 = p.data()[row * 3..(row + 1) * 3].iter().sum();
            assert!((sum - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn sparsity_penalty_closed_forms() {
        let rng = StreamRng::new(7);
        let mut ps = ParamSet::new();
        let inv = table_invariant(&mut ps, 10, &rng);
        let mut g = Graph::new();
        let zero = sparsity_penalty(&mut g, &ps, &[&inv], 0.0).unwrap();
        assert_eq!(g.value(zero).item(), 0.0);
        // all w = 0, |S| = 10, tau = 0.1 -> 0.1 * 10 * 0.5 = 0.5
        let s = sparsity_penalty(&mut g, &ps, &[&inv], 0.1).unwrap();
        assert!((g.value(s).item() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn aggregation_rules() {
        let one =
            aggregate_predictions(&[0usize], &dummy_example(), |_, _| Ok(vec![0.3, 0.7])).unwrap();
        assert_eq!(one, vec![0.3, 0.7]);
        let same =
            aggregate_predictions(&[0usize, 1], &dummy_example(), |_, _| Ok(vec![0.3, 0.7])).unwrap();
        assert!((same[0] - 0.3).abs() < 1e-12 && (same[1] - 0.7).abs() < 1e-12);
        let mixed = aggregate_predictions(&[0usize, 1], &dummy_example(), |i, _| {
            Ok(if *i == 0 { vec![0.8, 0.2] } else { vec![0.2, 0.8] })
        })
        .unwrap();
        assert!((mixed[0] - 0.5).abs() < 1e-12 && (mixed[1] - 0.5).abs() < 1e-12);
        assert!(
            aggregate_predictions(&[] as &[usize], &dummy_example(), |_, _| Ok(vec![1.0])).is_err()
        );
    }

    fn dummy_example() -> Example {
        Example {
            context: Context::Sentences(vec![vec![1]]),
            query: vec![],
            answer: 1,
            supports: None,
            task: "t".to_string(),
        }
    }
}
