//! Network-facing graph ops: embedding lookup, column gather, 2-D
//! convolution, global max pooling, dropout, and masked softmax.

use crate::error::{Error, Result};
use crate::graph::{GradArgs, Graph, Var};
use crate::rng::Stream;
use crate::tensor::Tensor;

impl Graph {
    /// Row lookup into `table` of shape [V, rest..]; output has shape
    /// ids_shape x rest. Gradient accumulates only into looked-up rows.
    pub fn embedding(&mut self, table: Var, ids: &[usize], ids_shape: &[usize]) -> Result<Var> {
        let tshape = self.shape(table).to_vec();
        if tshape.is_empty() {
            return Err(Error::shape("embedding table must have at least 1 dim".to_string()));
        }
        let expected: usize = ids_shape.iter().product();
        if expected != ids.len() {
            return Err(Error::shape(format!(
                "ids shape {:?} implies {} ids, got {}",
                ids_shape,
                expected,
                ids.len()
            )));
        }
        let vocab = tshape[0];
        let row: usize = tshape[1..].iter().product();
        for &id in ids {
            if id >= vocab {
                return Err(Error::vocab(format!("symbol id {} out of range (|S|={})", id, vocab)));
            }
        }
        let mut out_shape = ids_shape.to_vec();
        out_shape.extend_from_slice(&tshape[1..]);
        let mut out = Tensor::zeros(&out_shape);
        {
            let tv = self.value(table);
            for (i, &id) in ids.iter().enumerate() {
                out.data_mut()[i * row..(i + 1) * row]
                    .copy_from_slice(&tv.data()[id * row..(id + 1) * row]);
            }
        }
        let ids_owned = ids.to_vec();
        Ok(self.push_custom(
            out,
            vec![table],
            Box::new(move |a: &GradArgs| {
                let mut g = Tensor::zeros(a.inputs[0].shape());
                for (i, &id) in ids_owned.iter().enumerate() {
                    for j in 0..row {
                        g.data_mut()[id * row + j] += a.out_grad.data()[i * row + j];
                    }
                }
                vec![Some(g)]
            }),
        ))
    }

    /// Pick x[b, ids[b]] for each row of a [B, V] tensor.
    pub fn select_columns(&mut self, x: Var, ids: &[usize]) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if shape.len() != 2 {
            return Err(Error::shape(format!("select_columns needs [B, V], got {:?}", shape)));
        }
        let (b, v) = (shape[0], shape[1]);
        if ids.len() != b {
            return Err(Error::shape(format!("{} ids for batch of {}", ids.len(), b)));
        }
        for &id in ids {
            if id >= v {
                return Err(Error::vocab(format!("column {} out of range ({})", id, v)));
            }
        }
        let mut out = Tensor::zeros(&[b]);
        {
            let xv = self.value(x);
            for (i, &id) in ids.iter().enumerate() {
                out.data_mut()[i] = xv.data()[i * v + id];
            }
        }
        let ids_owned = ids.to_vec();
        Ok(self.push_custom(
            out,
            vec![x],
            Box::new(move |a: &GradArgs| {
                let mut g = Tensor::zeros(a.inputs[0].shape());
                for (i, &id) in ids_owned.iter().enumerate() {
                    g.data_mut()[i * v + id] = a.out_grad.data()[i];
                }
                vec![Some(g)]
            }),
        ))
    }

    /// 2-D convolution, stride 1, zero padding of `pad` cells on every side.
    /// input [B, h, w, c_in], kernels [kh, kw, c_in, c_out].
    pub fn conv2d(&mut self, input: Var, kernels: Var, pad: usize) -> Result<Var> {
        let is = self.shape(input).to_vec();
        let ks = self.shape(kernels).to_vec();
        if is.len() != 4 || ks.len() != 4 {
            return Err(Error::shape(format!("conv2d expects 4-D input/kernels, got {:?} / {:?}", is, ks)));
        }
        if is[3] != ks[2] {
            return Err(Error::shape(format!("conv2d channel mismatch: input {:?} kernels {:?}", is, ks)));
        }
        let (b, h, w, cin) = (is[0], is[1], is[2], is[3]);
        let (kh, kw, _, cout) = (ks[0], ks[1], ks[2], ks[3]);
        if kh > h + 2 * pad || kw > w + 2 * pad {
            return Err(Error::shape(format!(
                "kernel {}x{} larger than padded input {}x{}",
                kh,
                kw,
                h + 2 * pad,
                w + 2 * pad
            )));
        }
        let oh = h + 2 * pad - kh + 1;
        let ow = w + 2 * pad - kw + 1;
        let mut out = Tensor::zeros(&[b, oh, ow, cout]);
        {
            let iv = self.value(input);
            let kv = self.value(kernels);
            conv_forward(out.data_mut(), iv.data(), kv.data(), b, h, w, cin, kh, kw, cout, pad);
        }
        Ok(self.push_custom(
            out,
            vec![input, kernels],
            Box::new(move |a: &GradArgs| {
                let (iv, kv) = (a.inputs[0], a.inputs[1]);
                let mut gi = Tensor::zeros(iv.shape());
                let mut gk = Tensor::zeros(kv.shape());
                conv_backward(
                    a.out_grad.data(),
                    iv.data(),
                    kv.data(),
                    gi.data_mut(),
                    gk.data_mut(),
                    b,
                    h,
                    w,
                    cin,
                    kh,
                    kw,
                    cout,
                    pad,
                );
                vec![Some(gi), Some(gk)]
            }),
        ))
    }

    /// Max over the two spatial axes of [B, h, w, c] -> [B, c].
    pub fn global_max_pool(&mut self, x: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if shape.len() != 4 {
            return Err(Error::shape(format!("global_max_pool expects [B,h,w,c], got {:?}", shape)));
        }
        let (b, h, w, c) = (shape[0], shape[1], shape[2], shape[3]);
        let hw = h * w;
        let mut out = Tensor::zeros(&[b, c]);
        let mut argmax = vec![0usize; b * c];
        {
            let xv = self.value(x);
            for bi in 0..b {
                for ci in 0..c {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_at = 0;
                    for s in 0..hw {
                        let v = xv.data()[(bi * hw + s) * c + ci];
                        if v > best {
                            best = v;
                            best_at = s;
                        }
                    }
                    out.data_mut()[bi * c + ci] = best;
                    argmax[bi * c + ci] = best_at;
                }
            }
        }
        Ok(self.push_custom(
            out,
            vec![x],
            Box::new(move |a: &GradArgs| {
                let mut g = Tensor::zeros(a.inputs[0].shape());
                for bi in 0..b {
                    for ci in 0..c {
                        let s = argmax[bi * c + ci];
                        g.data_mut()[(bi * hw + s) * c + ci] += a.out_grad.data()[bi * c + ci];
                    }
                }
                vec![Some(g)]
            }),
        ))
    }

    /// Inverted dropout: keeps expectation during training, identity in eval.
    pub fn dropout(&mut self, x: Var, rate: f64, training: bool, stream: &mut Stream) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::argument(format!("dropout rate {} outside [0, 1)", rate)));
        }
        if !training || rate == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 - rate;
        let n = self.value(x).numel();
        let mask: Vec<f64> = (0..n)
            .map(|_| if stream.next_f64() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        let mut out = self.value(x).clone();
        for (v, m) in out.data_mut().iter_mut().zip(&mask) {
            *v *= m;
        }
        Ok(self.push_custom(
            out,
            vec![x],
            Box::new(move |a: &GradArgs| {
                let mut g = Tensor::zeros(a.inputs[0].shape());
                for i in 0..g.numel() {
                    g.data_mut()[i] = a.out_grad.data()[i] * mask[i];
                }
                vec![Some(g)]
            }),
        ))
    }

    /// Softmax along `axis` after forcing masked positions to -1e9. The mask
    /// is 1 for kept entries and 0 for masked ones; masked outputs are exactly
    /// zero whenever the slice has at least one kept entry.
    pub fn softmax_masked(&mut self, scores: Var, mask: &Tensor, axis: usize) -> Result<Var> {
        let penalty = mask.map(|m| (m - 1.0) * 1e9);
        let p = self.constant(penalty);
        let shifted = self.add(scores, p)?;
        self.softmax(shifted, axis)
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_forward(
    out: &mut [f64],
    input: &[f64],
    kernels: &[f64],
    b: usize,
    h: usize,
    w: usize,
    cin: usize,
    kh: usize,
    kw: usize,
    cout: usize,
    pad: usize,
) {
    let oh = h + 2 * pad - kh + 1;
    let ow = w + 2 * pad - kw + 1;
    for bi in 0..b {
        for oy in 0..oh {
            for ox in 0..ow {
                let orow = ((bi * oh + oy) * ow + ox) * cout;
                for ky in 0..kh {
                    let iy = (oy + ky) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..kw {
                        let ix = (ox + kx) as isize - pad as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let irow = ((bi * h + iy as usize) * w + ix as usize) * cin;
                        let krow = (ky * kw + kx) * cin * cout;
                        for ci in 0..cin {
                            let xv = input[irow + ci];
                            if xv == 0.0 {
                                continue;
                            }
                            let kbase = krow + ci * cout;
                            for co in 0..cout {
                                out[orow + co] += xv * kernels[kbase + co];
                            }
                        }
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    gout: &[f64],
    input: &[f64],
    kernels: &[f64],
    gin: &mut [f64],
    gk: &mut [f64],
    b: usize,
    h: usize,
    w: usize,
    cin: usize,
    kh: usize,
    kw: usize,
    cout: usize,
    pad: usize,
) {
    let oh = h + 2 * pad - kh + 1;
    let ow = w + 2 * pad - kw + 1;
    for bi in 0..b {
        for oy in 0..oh {
            for ox in 0..ow {
                let orow = ((bi * oh + oy) * ow + ox) * cout;
                for ky in 0..kh {
                    let iy = (oy + ky) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..kw {
                        let ix = (ox + kx) as isize - pad as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let irow = ((bi * h + iy as usize) * w + ix as usize) * cin;
                        let krow = (ky * kw + kx) * cin * cout;
                        for ci in 0..cin {
                            let kbase = krow + ci * cout;
                            let mut gx = 0.0;
                            for co in 0..cout {
                                let g = gout[orow + co];
                                gx += g * kernels[kbase + co];
                                gk[kbase + co] += g * input[irow + ci];
                            }
                            gin[irow + ci] += gx;
                        }
                    }
                }
            }
        }
    }
}
