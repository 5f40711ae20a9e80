//! Shared oracles and helpers for the integration test binaries.
#![allow(dead_code)]

use softuni_core::params::ParamSet;
use softuni_core::rng::Stream;
use softuni_core::tensor::Tensor;

pub fn rand_tensor(shape: &[usize], s: &mut Stream) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| s.uniform(-2.0, 2.0)).collect()).unwrap()
}

pub fn assert_close(a: &[f64], b: &[f64], tol: f64, what: &str) {
    assert_eq!(a.len(), b.len(), "{what}: length mismatch");
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        assert!((x - y).abs() <= tol, "{what}[{i}]: {x} vs {y}");
    }
}

pub fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Scalar-loop oracle for one GRU direction, reading parameters by name.
pub struct GruOracle {
    wx: [Vec<f64>; 3], // r, z, n
    wh: [Vec<f64>; 3],
    b: [Vec<f64>; 3],
    d_in: usize,
    hidden: usize,
}

impl GruOracle {
    pub fn from_params(ps: &ParamSet, name: &str, d_in: usize, hidden: usize) -> Self {
        let get = |tag: &str, part: &str| {
            ps.tensor(ps.id(&format!("{name}.{tag}.{part}")).unwrap()).data().to_vec()
        };
        GruOracle {
            wx: [get("r", "wx"), get("z", "wx"), get("n", "wx")],
            wh: [get("r", "wh"), get("z", "wh"), get("n", "wh")],
            b: [get("r", "b"), get("z", "b"), get("n", "b")],
            d_in,
            hidden,
        }
    }

    fn affine(&self, gate: usize, x: &[f64], h: &[f64]) -> Vec<f64> {
        let mut out = self.b[gate].clone();
        for j in 0..self.hidden {
            for i in 0..self.d_in {
                out[j] += x[i] * self.wx[gate][i * self.hidden + j];
            }
            for i in 0..self.hidden {
                out[j] += h[i] * self.wh[gate][i * self.hidden + j];
            }
        }
        out
    }

    pub fn step(&self, x: &[f64], h: &[f64]) -> Vec<f64> {
        let r: Vec<f64> = self.affine(0, x, h).into_iter().map(sigmoid).collect();
        let z: Vec<f64> = self.affine(1, x, h).into_iter().map(sigmoid).collect();
        let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
        let n: Vec<f64> = self.affine(2, x, &rh).into_iter().map(f64::tanh).collect();
        (0..self.hidden).map(|j| (1.0 - z[j]) * h[j] + z[j] * n[j]).collect()
    }
}

/// Scalar-loop oracle for a whole bi-directional GRU with half-width
/// directions: per-step outputs concatenate the direction states, the final
/// state is the projected concatenation of both last states.
pub struct BiGruOracle {
    pub fwd: GruOracle,
    pub bwd: GruOracle,
    pub proj: Vec<f64>,
    pub hidden: usize,
    pub half: usize,
}

impl BiGruOracle {
    pub fn from_params(ps: &ParamSet, name: &str, d_in: usize, hidden: usize) -> Self {
        let half = hidden / 2;
        BiGruOracle {
            fwd: GruOracle::from_params(ps, &format!("{name}.fwd"), d_in, half),
            bwd: GruOracle::from_params(ps, &format!("{name}.bwd"), d_in, half),
            proj: ps.tensor(ps.id(&format!("{name}.proj")).unwrap()).data().to_vec(),
            hidden,
            half,
        }
    }

    /// (per-step outputs, final state) over a list of input rows.
    pub fn run(&self, steps: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>) {
        let n = steps.len();
        let mut hf = vec![vec![0.0; self.half]; n];
        let mut h = vec![0.0; self.half];
        for t in 0..n {
            h = self.fwd.step(&steps[t], &h);
            hf[t] = h.clone();
        }
        let mut hb = vec![vec![0.0; self.half]; n];
        let mut h = vec![0.0; self.half];
        for t in (0..n).rev() {
            h = self.bwd.step(&steps[t], &h);
            hb[t] = h.clone();
        }
        let outs: Vec<Vec<f64>> = (0..n)
            .map(|t| hf[t].iter().chain(hb[t].iter()).copied().collect())
            .collect();
        let cat: Vec<f64> = hf[n - 1].iter().chain(hb[0].iter()).copied().collect();
        let mut fin = vec![0.0; self.hidden];
        for i in 0..self.hidden {
            for j in 0..self.hidden {
                fin[j] += cat[i] * self.proj[i * self.hidden + j];
            }
        }
        (outs, fin)
    }
}
