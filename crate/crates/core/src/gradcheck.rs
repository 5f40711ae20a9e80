//! Finite-difference validation of analytic gradients.

use crate::error::Result;
use crate::graph::{Graph, Var};
use crate::params::{ParamId, ParamSet};
use std::collections::HashMap;

pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Debug)]
pub struct GradCheckReport {
    /// (parameter name, max relative error over its elements)
    pub per_param: Vec<(String, f64)>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.per_param.iter().map(|(_, e)| *e).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.per_param.iter().all(|(_, e)| *e < self.tolerance)
    }
}

/// Compare analytic gradients of a scalar loss against central differences
/// for each listed parameter. The builder must be deterministic (dropout
/// disabled) since it is re-evaluated under perturbation.
pub fn grad_check(
    params: &mut ParamSet,
    check: &[ParamId],
    build: impl Fn(&mut Graph, &ParamSet) -> Result<Var>,
    tolerance: f64,
    fd_step: f64,
) -> Result<GradCheckReport> {
    // Analytic pass.
    let analytic: HashMap<ParamId, Vec<f64>> = {
        let mut g = Graph::new();
        let loss = build(&mut g, params)?;
        g.backward(loss)?;
        g.param_grads().into_iter().map(|(id, t)| (id, t.into_data())).collect()
    };

    let eval = |params: &ParamSet| -> Result<f64> {
        let mut g = Graph::new();
        let loss = build(&mut g, params)?;
        Ok(g.value(loss).item())
    };

    let mut per_param = Vec::with_capacity(check.len());
    for &id in check {
        let n = params.tensor(id).numel();
        let zero = vec![0.0; n];
        let a = analytic.get(&id).unwrap_or(&zero);
        let mut worst = 0.0f64;
        for i in 0..n {
            let orig = params.tensor(id).data()[i];
            params.tensor_mut(id).data_mut()[i] = orig + fd_step;
            let up = eval(params)?;
            params.tensor_mut(id).data_mut()[i] = orig - fd_step;
            let down = eval(params)?;
            params.tensor_mut(id).data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * fd_step);
            let denom = a[i].abs().max(numeric.abs()).max(1e-3);
            worst = worst.max((a[i] - numeric).abs() / denom);
        }
        per_param.push((params.name(id).to_string(), worst));
    }
    Ok(GradCheckReport { per_param, tolerance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::InitSpec;
    use crate::rng::StreamRng;
    use crate::tensor::Tensor;

    #[test]
    fn linear_map_is_near_machine_epsilon() {
        let rng = StreamRng::new(1);
        let mut ps = ParamSet::new();
        let w = ps.register("w", &[3, 2], InitSpec::StandardNormal, &rng).unwrap();
        let report = grad_check(
            &mut ps,
            &[w],
            |g, ps| {
                let w = g.param(ps, w);
                let x = g.constant(Tensor::new(vec![1, 3], vec![0.3, -1.2, 2.0]).unwrap());
                let y = g.matmul(x, w)?;
                Ok(g.sum_all(y))
            },
            1e-4,
            DEFAULT_FD_STEP,
        )
        .unwrap();
        assert!(report.passed());
        assert!(report.max_rel_err() < 1e-6, "err {}", report.max_rel_err());
    }

    #[test]
    fn two_layer_tanh_mlp_passes() {
        let rng = StreamRng::new(2);
        let mut ps = ParamSet::new();
        let w1 = ps.register("w1", &[4, 5], InitSpec::UniformFanIn, &rng).unwrap();
        let b1 = ps.register("b1", &[5], InitSpec::Zeros, &rng).unwrap();
        let w2 = ps.register("w2", &[5, 3], InitSpec::UniformFanIn, &rng).unwrap();
        let b2 = ps.register("b2", &[3], InitSpec::StandardNormal, &rng).unwrap();
        let report = grad_check(
            &mut ps,
            &[w1, b1, w2, b2],
            |g, ps| {
                let x = g.constant(Tensor::new(vec![2, 4], vec![0.1, -0.4, 0.7, 1.1, -0.9, 0.2, 0.5, -1.3]).unwrap());
                let w1 = g.param(ps, w1);
                let b1 = g.param(ps, b1);
                let w2 = g.param(ps, w2);
                let b2 = g.param(ps, b2);
                let h = g.matmul(x, w1)?;
                let h = g.add(h, b1)?;
                let h = g.tanh(h);
                let o = g.matmul(h, w2)?;
                let o = g.add(o, b2)?;
                let p = g.softmax(o, 1)?;
                let picked = g.select_columns(p, &[0, 2])?;
                let picked = g.clamp(picked, 1e-9, 1.0);
                let l = g.log(picked);
                let l = g.mean_all(l);
                Ok(g.neg(l))
            },
            1e-4,
            DEFAULT_FD_STEP,
        )
        .unwrap();
        assert!(report.passed(), "report {:?}", report);
    }
}
