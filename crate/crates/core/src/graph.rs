//! Reverse-mode automatic differentiation over dense f64 tensors.
//!
//! A `Graph` is a single-use tape: each forward pass appends nodes, `backward`
//! walks them in reverse. Parameters enter through [`Graph::param`] and their
//! gradients are collected with [`Graph::param_grads`] after a backward pass.
//! Elementwise binary ops broadcast with trailing-dimension alignment;
//! `matmul` broadcasts leading batch dimensions.

use crate::error::{Error, Result};
use crate::params::{ParamId, ParamSet};
use crate::tensor::{broadcast_shape, for_each_broadcast2, strides_of, Tensor};
use std::collections::HashMap;

/// Handle to a node in the graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

pub struct GradArgs<'a> {
    pub out_grad: &'a Tensor,
    pub out: &'a Tensor,
    pub inputs: Vec<&'a Tensor>,
}

pub(crate) type GradFn = Box<dyn Fn(&GradArgs) -> Vec<Option<Tensor>>>;

struct Node {
    value: Tensor,
    parents: Vec<Var>,
    grad_fn: Option<GradFn>,
    param: Option<ParamId>,
    needs_grad: bool,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
    param_cache: HashMap<ParamId, Var>,
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Gradient of the last `backward` target with respect to `v`, if any.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub(crate) fn push_custom(&mut self, value: Tensor, parents: Vec<Var>, grad_fn: GradFn) -> Var {
        self.push(value, parents, Some(grad_fn))
    }

    fn push(&mut self, value: Tensor, parents: Vec<Var>, grad_fn: Option<GradFn>) -> Var {
        let needs_grad = parents.iter().any(|p| self.nodes[p.0].needs_grad);
        self.nodes.push(Node {
            value,
            parents,
            grad_fn: if needs_grad { grad_fn } else { None },
            param: None,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node { value, parents: vec![], grad_fn: None, param: None, needs_grad: false });
        Var(self.nodes.len() - 1)
    }

    pub fn scalar(&mut self, x: f64) -> Var {
        self.constant(Tensor::scalar(x))
    }

    /// Leaf node bound to a parameter; repeated fetches return the same node
    /// so gradients accumulate in one place.
    pub fn param(&mut self, ps: &ParamSet, id: ParamId) -> Var {
        if let Some(&v) = self.param_cache.get(&id) {
            return v;
        }
        self.nodes.push(Node {
            value: ps.tensor(id).clone(),
            parents: vec![],
            grad_fn: None,
            param: Some(id),
            needs_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_cache.insert(id, v);
        v
    }

    // ── Unary elementwise ─────────────────────────────────────────────

    fn unary(
        &mut self,
        x: Var,
        f: impl Fn(f64) -> f64,
        // df(input value, output value) -> local derivative
        df: impl Fn(f64, f64) -> f64 + 'static,
    ) -> Var {
        let value = self.nodes[x.0].value.map(&f);
        self.push(
            value,
            vec![x],
            Some(Box::new(move |a: &GradArgs| {
                let x = a.inputs[0];
                let mut g = Tensor::zeros(x.shape());
                for i in 0..x.numel() {
                    g.data_mut()[i] = a.out_grad.data()[i] * df(x.data()[i], a.out.data()[i]);
                }
                vec![Some(g)]
            })),
        )
    }

    pub fn neg(&mut self, x: Var) -> Var {
        self.unary(x, |v| -v, |_, _| -1.0)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary(x, f64::exp, |_, y| y)
    }

    /// Natural log. Callers clamp first when inputs may touch zero.
    pub fn log(&mut self, x: Var) -> Var {
        self.unary(x, f64::ln, |v, _| 1.0 / v)
    }

    pub fn square(&mut self, x: Var) -> Var {
        self.unary(x, |v| v * v, |v, _| 2.0 * v)
    }

    pub fn sqrt(&mut self, x: Var) -> Var {
        self.unary(x, f64::sqrt, |_, y| 0.5 / y)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(
            x,
            |v| 1.0 / (1.0 + (-v).exp()),
            |_, y| y * (1.0 - y),
        )
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, f64::tanh, |_, y| 1.0 - y * y)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, |v| v.max(0.0), |v, _| if v > 0.0 { 1.0 } else { 0.0 })
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        self.unary(x, move |v| v * c, move |_, _| c)
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Var {
        self.unary(x, move |v| v + c, |_, _| 1.0)
    }

    /// Clamp into [lo, hi]; gradient is zero outside the open interval.
    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        self.unary(
            x,
            move |v| v.clamp(lo, hi),
            move |v, _| if v > lo && v < hi { 1.0 } else { 0.0 },
        )
    }

    // ── Binary elementwise with broadcasting ──────────────────────────

    fn binary(
        &mut self,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        // d/da and d/db as functions of the operand values
        dfa: impl Fn(f64, f64) -> f64 + 'static,
        dfb: impl Fn(f64, f64) -> f64 + 'static,
    ) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let out_shape = broadcast_shape(&sa, &sb)?;
        let mut out = Tensor::zeros(&out_shape);
        {
            let av = self.value(a);
            let bv = self.value(b);
            let od = out.data_mut();
            for_each_broadcast2(&out_shape, &sa, &sb, |o, ia, ib| {
                od[o] = f(av.data()[ia], bv.data()[ib]);
            });
        }
        let (osa, osb) = (out_shape.clone(), out_shape);
        Ok(self.push(
            out,
            vec![a, b],
            Some(Box::new(move |args: &GradArgs| {
                let (av, bv) = (args.inputs[0], args.inputs[1]);
                let mut ga = Tensor::zeros(av.shape());
                let mut gb = Tensor::zeros(bv.shape());
                for_each_broadcast2(&osa, av.shape(), bv.shape(), |o, ia, ib| {
                    let g = args.out_grad.data()[o];
                    ga.data_mut()[ia] += g * dfa(av.data()[ia], bv.data()[ib]);
                    gb.data_mut()[ib] += g * dfb(av.data()[ia], bv.data()[ib]);
                });
                let _ = &osb;
                vec![Some(ga), Some(gb)]
            })),
        ))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x + y, |_, _| 1.0, |_, _| 1.0)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x - y, |_, _| 1.0, |_, _| -1.0)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x * y, |_, y| y, |x, _| x)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x / y, |_, y| 1.0 / y, |x, y| -x / (y * y))
    }

    // ── Shape ops ─────────────────────────────────────────────────────

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).reshape(shape)?;
        let in_shape = self.shape(x).to_vec();
        Ok(self.push(
            value,
            vec![x],
            Some(Box::new(move |a: &GradArgs| {
                vec![Some(a.out_grad.reshape(&in_shape).expect("reshape grad"))]
            })),
        ))
    }

    /// Swap the last two axes.
    pub fn transpose_last(&mut self, x: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if shape.len() < 2 {
            return Err(Error::shape(format!("transpose_last needs >=2 dims, got {:?}", shape)));
        }
        let value = transpose_last_tensor(self.value(x));
        Ok(self.push(
            value,
            vec![x],
            Some(Box::new(move |a: &GradArgs| vec![Some(transpose_last_tensor(a.out_grad))])),
        ))
    }

    /// Explicit broadcast of `x` up to `shape`.
    pub fn broadcast_to(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        let joint = broadcast_shape(&sx, shape)?;
        if joint != shape {
            return Err(Error::shape(format!("cannot broadcast {:?} to {:?}", sx, shape)));
        }
        let mut out = Tensor::zeros(shape);
        {
            let xv = self.value(x);
            let od = out.data_mut();
            for_each_broadcast2(shape, &sx, &sx, |o, ix, _| od[o] = xv.data()[ix]);
        }
        let out_shape = shape.to_vec();
        Ok(self.push(
            out,
            vec![x],
            Some(Box::new(move |a: &GradArgs| {
                vec![Some(crate::tensor::reduce_to_shape(
                    a.out_grad.data(),
                    &out_shape,
                    a.inputs[0].shape(),
                ))]
            })),
        ))
    }

    /// Concatenate along an existing axis.
    pub fn concat(&mut self, xs: &[Var], axis: usize) -> Result<Var> {
        if xs.is_empty() {
            return Err(Error::argument("concat of zero tensors"));
        }
        let first = self.shape(xs[0]).to_vec();
        if axis >= first.len() {
            return Err(Error::shape(format!("concat axis {} out of range for {:?}", axis, first)));
        }
        let mut axis_total = 0;
        for &x in xs {
            let s = self.shape(x);
            if s.len() != first.len()
                || s.iter().zip(&first).enumerate().any(|(i, (a, b))| i != axis && a != b)
            {
                return Err(Error::shape(format!(
                    "concat shape mismatch: {:?} vs {:?} on axis {}",
                    s, first, axis
                )));
            }
            axis_total += s[axis];
        }
        let mut out_shape = first.clone();
        out_shape[axis] = axis_total;
        let outer: usize = first[..axis].iter().product();
        let inner: usize = first[axis + 1..].iter().product();
        let mut out = Tensor::zeros(&out_shape);
        {
            let od = out.data_mut();
            let row = axis_total * inner;
            let mut offset = 0;
            for &x in xs {
                let xv = self.value(x);
                let block = xv.shape()[axis] * inner;
                for o in 0..outer {
                    od[o * row + offset..o * row + offset + block]
                        .copy_from_slice(&xv.data()[o * block..(o + 1) * block]);
                }
                offset += block;
            }
        }
        let parents = xs.to_vec();
        Ok(self.push(
            out,
            parents,
            Some(Box::new(move |a: &GradArgs| {
                let row = axis_total * inner;
                let mut grads = Vec::with_capacity(a.inputs.len());
                let mut offset = 0;
                for x in &a.inputs {
                    let block = x.shape()[axis] * inner;
                    let mut g = Tensor::zeros(x.shape());
                    for o in 0..outer {
                        g.data_mut()[o * block..(o + 1) * block]
                            .copy_from_slice(&a.out_grad.data()[o * row + offset..o * row + offset + block]);
                    }
                    offset += block;
                    grads.push(Some(g));
                }
                grads
            })),
        ))
    }

    /// Stack equally-shaped tensors along a new axis.
    pub fn stack(&mut self, xs: &[Var], axis: usize) -> Result<Var> {
        if xs.is_empty() {
            return Err(Error::argument("stack of zero tensors"));
        }
        let base = self.shape(xs[0]).to_vec();
        if axis > base.len() {
            return Err(Error::shape(format!("stack axis {} out of range for {:?}", axis, base)));
        }
        let mut with_one = base.clone();
        with_one.insert(axis, 1);
        let reshaped: Vec<Var> =
            xs.iter().map(|&x| self.reshape(x, &with_one)).collect::<Result<_>>()?;
        self.concat(&reshaped, axis)
    }

    /// Contiguous slice `start..start+len` along an axis, keeping the axis.
    pub fn select_range(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(Error::shape(format!("slice axis {} out of range for {:?}", axis, shape)));
        }
        if start + len > shape[axis] || len == 0 {
            return Err(Error::shape(format!(
                "slice {}..{} out of range for axis {} of {:?}",
                start,
                start + len,
                axis,
                shape
            )));
        }
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let n = shape[axis];
        let mut out_shape = shape.clone();
        out_shape[axis] = len;
        let mut out = Tensor::zeros(&out_shape);
        {
            let xv = self.value(x);
            for o in 0..outer {
                let src = (o * n + start) * inner;
                out.data_mut()[o * len * inner..(o + 1) * len * inner]
                    .copy_from_slice(&xv.data()[src..src + len * inner]);
            }
        }
        Ok(self.push(
            out,
            vec![x],
            Some(Box::new(move |a: &GradArgs| {
                let mut g = Tensor::zeros(a.inputs[0].shape());
                for o in 0..outer {
                    let dst = (o * n + start) * inner;
                    g.data_mut()[dst..dst + len * inner]
                        .copy_from_slice(&a.out_grad.data()[o * len * inner..(o + 1) * len * inner]);
                }
                vec![Some(g)]
            })),
        ))
    }

    /// Select one index along an axis, removing that axis.
    pub fn select_axis(&mut self, x: Var, axis: usize, index: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(Error::shape(format!("select axis {} out of range for {:?}", axis, shape)));
        }
        if index >= shape[axis] {
            return Err(Error::shape(format!(
                "index {} out of range for axis {} of {:?}",
                index, axis, shape
            )));
        }
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let n = shape[axis];
        let mut out_shape = shape.clone();
        out_shape.remove(axis);
        let mut out = Tensor::zeros(&out_shape);
        {
            let xv = self.value(x);
            for o in 0..outer {
                out.data_mut()[o * inner..(o + 1) * inner].copy_from_slice(
                    &xv.data()[(o * n + index) * inner..(o * n + index) * inner + inner],
                );
            }
        }
        Ok(self.push(
            out,
            vec![x],
            Some(Box::new(move |a: &GradArgs| {
                let mut g = Tensor::zeros(a.inputs[0].shape());
                for o in 0..outer {
                    g.data_mut()[(o * n + index) * inner..(o * n + index) * inner + inner]
                        .copy_from_slice(&a.out_grad.data()[o * inner..(o + 1) * inner]);
                }
                vec![Some(g)]
            })),
        ))
    }

    // ── Reductions ────────────────────────────────────────────────────

    pub fn sum_all(&mut self, x: Var) -> Var {
        let s: f64 = self.value(x).data().iter().sum();
        self.push(
            Tensor::scalar(s),
            vec![x],
            Some(Box::new(|a: &GradArgs| {
                let g = a.out_grad.item();
                vec![Some(Tensor::full(a.inputs[0].shape(), g))]
            })),
        )
    }

    pub fn mean_all(&mut self, x: Var) -> Var {
        let n = self.value(x).numel() as f64;
        let s: f64 = self.value(x).data().iter().sum();
        self.push(
            Tensor::scalar(s / n),
            vec![x],
            Some(Box::new(move |a: &GradArgs| {
                let g = a.out_grad.item() / n;
                vec![Some(Tensor::full(a.inputs[0].shape(), g))]
            })),
        )
    }

    /// Sum over one axis, removing it.
    pub fn sum_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(Error::shape(format!("sum axis {} out of range for {:?}", axis, shape)));
        }
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let n = shape[axis];
        let mut out_shape = shape.clone();
        out_shape.remove(axis);
        let mut out = Tensor::zeros(&out_shape);
        {
            let xv = self.value(x);
            for o in 0..outer {
                for a in 0..n {
                    let base = (o * n + a) * inner;
                    for i in 0..inner {
                        out.data_mut()[o * inner + i] += xv.data()[base + i];
                    }
                }
            }
        }
        Ok(self.push(
            out,
            vec![x],
            Some(Box::new(move |args: &GradArgs| {
                let mut g = Tensor::zeros(args.inputs[0].shape());
                for o in 0..outer {
                    for a in 0..n {
                        let base = (o * n + a) * inner;
                        for i in 0..inner {
                            g.data_mut()[base + i] = args.out_grad.data()[o * inner + i];
                        }
                    }
                }
                vec![Some(g)]
            })),
        ))
    }

    // ── Softmax ───────────────────────────────────────────────────────

    /// Numerically stable softmax along `axis`; slices sum to 1.
    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(Error::shape(format!("softmax axis {} out of range for {:?}", axis, shape)));
        }
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let n = shape[axis];
        let mut out = Tensor::zeros(&shape);
        {
            let xv = self.value(x);
            let od = out.data_mut();
            for o in 0..outer {
                for i in 0..inner {
                    let idx = |a: usize| (o * n + a) * inner + i;
                    let mut m = f64::NEG_INFINITY;
                    for a in 0..n {
                        m = m.max(xv.data()[idx(a)]);
                    }
                    let mut z = 0.0;
                    for a in 0..n {
                        let e = (xv.data()[idx(a)] - m).exp();
                        od[idx(a)] = e;
                        z += e;
                    }
                    for a in 0..n {
                        od[idx(a)] /= z;
                    }
                }
            }
        }
        Ok(self.push(
            out,
            vec![x],
            Some(Box::new(move |args: &GradArgs| {
                let y = args.out;
                let mut g = Tensor::zeros(y.shape());
                for o in 0..outer {
                    for i in 0..inner {
                        let idx = |a: usize| (o * n + a) * inner + i;
                        let mut dot = 0.0;
                        for a in 0..n {
                            dot += args.out_grad.data()[idx(a)] * y.data()[idx(a)];
                        }
                        for a in 0..n {
                            g.data_mut()[idx(a)] =
                                y.data()[idx(a)] * (args.out_grad.data()[idx(a)] - dot);
                        }
                    }
                }
                vec![Some(g)]
            })),
        ))
    }

    // ── Matmul with broadcast batch dimensions ────────────────────────

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        if sa.len() < 2 || sb.len() < 2 {
            return Err(Error::shape(format!("matmul needs >=2 dims, got {:?} x {:?}", sa, sb)));
        }
        let (m, k) = (sa[sa.len() - 2], sa[sa.len() - 1]);
        let (k2, n) = (sb[sb.len() - 2], sb[sb.len() - 1]);
        if k != k2 {
            return Err(Error::shape(format!("matmul inner dims differ: {:?} x {:?}", sa, sb)));
        }
        let batch_a = &sa[..sa.len() - 2];
        let batch_b = &sb[..sb.len() - 2];
        let batch = broadcast_shape(batch_a, batch_b)?;
        let mut out_shape = batch.clone();
        out_shape.extend_from_slice(&[m, n]);
        let nbatch: usize = batch.iter().product();

        let offsets = batch_offsets(&batch, batch_a, batch_b);
        let mut out = Tensor::zeros(&out_shape);
        {
            let av = self.value(a);
            let bv = self.value(b);
            for (bi, &(oa, ob)) in offsets.iter().enumerate() {
                gemm_nn(
                    &mut out.data_mut()[bi * m * n..(bi + 1) * m * n],
                    &av.data()[oa * m * k..oa * m * k + m * k],
                    &bv.data()[ob * k * n..ob * k * n + k * n],
                    m,
                    k,
                    n,
                );
            }
        }
        let _ = nbatch;
        Ok(self.push(
            out,
            vec![a, b],
            Some(Box::new(move |args: &GradArgs| {
                let (av, bv) = (args.inputs[0], args.inputs[1]);
                let mut ga = Tensor::zeros(av.shape());
                let mut gb = Tensor::zeros(bv.shape());
                for (bi, &(oa, ob)) in offsets.iter().enumerate() {
                    let go = &args.out_grad.data()[bi * m * n..(bi + 1) * m * n];
                    // dA += dOut * B^T
                    gemm_nt(
                        &mut ga.data_mut()[oa * m * k..oa * m * k + m * k],
                        go,
                        &bv.data()[ob * k * n..ob * k * n + k * n],
                        m,
                        n,
                        k,
                    );
                    // dB += A^T * dOut
                    gemm_tn(
                        &mut gb.data_mut()[ob * k * n..ob * k * n + k * n],
                        &av.data()[oa * m * k..oa * m * k + m * k],
                        go,
                        k,
                        m,
                        n,
                    );
                }
                vec![Some(ga), Some(gb)]
            })),
        ))
    }

    // ── Backward pass ─────────────────────────────────────────────────

    /// Reverse sweep from a scalar loss. Gradients of parameter leaves are
    /// then available via [`Graph::param_grads`].
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).numel() != 1 {
            return Err(Error::argument(format!(
                "backward target must be scalar, got shape {:?}",
                self.shape(loss)
            )));
        }
        self.grads = (0..self.nodes.len()).map(|_| None).collect();
        self.grads[loss.0] = Some(Tensor::full(self.value(loss).shape(), 1.0));
        for i in (0..=loss.0).rev() {
            if self.grads[i].is_none() || !self.nodes[i].needs_grad {
                continue;
            }
            let Some(grad_fn) = self.nodes[i].grad_fn.as_ref() else { continue };
            let parent_grads = {
                let node = &self.nodes[i];
                let args = GradArgs {
                    out_grad: self.grads[i].as_ref().unwrap(),
                    out: &node.value,
                    inputs: node.parents.iter().map(|p| &self.nodes[p.0].value).collect(),
                };
                grad_fn(&args)
            };
            let parents = self.nodes[i].parents.clone();
            for (p, g) in parents.iter().zip(parent_grads) {
                let Some(g) = g else { continue };
                if !self.nodes[p.0].needs_grad {
                    continue;
                }
                match &mut self.grads[p.0] {
                    Some(acc) => {
                        for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                            *a += b;
                        }
                    }
                    slot => *slot = Some(g),
                }
            }
        }
        Ok(())
    }

    /// (parameter, gradient) pairs for every parameter leaf that received a
    /// gradient in the last backward pass.
    pub fn param_grads(&self) -> Vec<(ParamId, Tensor)> {
        let mut out = Vec::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if let (Some(pid), Some(g)) = (node.param, self.grads.get(i).and_then(|g| g.clone())) {
                out.push((pid, g));
            }
        }
        out
    }
}

fn transpose_last_tensor(x: &Tensor) -> Tensor {
    let shape = x.shape();
    let nd = shape.len();
    let (r, c) = (shape[nd - 2], shape[nd - 1]);
    let outer: usize = shape[..nd - 2].iter().product();
    let mut out_shape = shape.to_vec();
    out_shape.swap(nd - 2, nd - 1);
    let mut out = Tensor::zeros(&out_shape);
    for o in 0..outer {
        let src = &x.data()[o * r * c..(o + 1) * r * c];
        let dst = &mut out.data_mut()[o * r * c..(o + 1) * r * c];
        for i in 0..r {
            for j in 0..c {
                dst[j * r + i] = src[i * c + j];
            }
        }
    }
    out
}

/// Per-output-batch flat offsets into the (broadcast) operand batch blocks.
fn batch_offsets(batch: &[usize], batch_a: &[usize], batch_b: &[usize]) -> Vec<(usize, usize)> {
    let nbatch: usize = batch.iter().product();
    if batch.is_empty() {
        return vec![(0, 0)];
    }
    let sa = crate::tensor::broadcast_strides(batch_a, batch);
    let sb = crate::tensor::broadcast_strides(batch_b, batch);
    let st = strides_of(batch);
    let mut out = Vec::with_capacity(nbatch);
    for i in 0..nbatch {
        let mut oa = 0;
        let mut ob = 0;
        let mut rem = i;
        for d in 0..batch.len() {
            let c = rem / st[d];
            rem %= st[d];
            oa += c * sa[d];
            ob += c * sb[d];
        }
        out.push((oa, ob));
    }
    out
}

/// c[m,n] += a[m,k] * b[k,n]
pub(crate) fn gemm_nn(c: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            let crow = &mut c[i * n..(i + 1) * n];
            for j in 0..n {
                crow[j] += aip * brow[j];
            }
        }
    }
}

/// c[m,k] += a[m,n] * b[k,n]^T  (i.e. a * b transposed)
fn gemm_nt(c: &mut [f64], a: &[f64], b: &[f64], m: usize, n: usize, k: usize) {
    for i in 0..m {
        let arow = &a[i * n..(i + 1) * n];
        for j in 0..k {
            let brow = &b[j * n..(j + 1) * n];
            let mut s = 0.0;
            for p in 0..n {
                s += arow[p] * brow[p];
            }
            c[i * k + j] += s;
        }
    }
}

/// c[k,n] += a[m,k]^T * b[m,n]
fn gemm_tn(c: &mut [f64], a: &[f64], b: &[f64], k: usize, m: usize, n: usize) {
    for p in 0..m {
        let brow = &b[p * n..(p + 1) * n];
        for i in 0..k {
            let api = a[p * k + i];
            if api == 0.0 {
                continue;
            }
            let crow = &mut c[i * n..(i + 1) * n];
            for j in 0..n {
                crow[j] += api * brow[j];
            }
        }
    }
}
