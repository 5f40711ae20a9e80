//! Adam optimizer with bias correction and optional decoupled weight decay.

use crate::params::{ParamId, ParamSet};
use crate::tensor::Tensor;
use std::collections::HashMap;

pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: u64,
    // Per-parameter moments and update counts, created on first gradient.
    moments: HashMap<ParamId, Moments>,
}

struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(lr: f64) -> Self {
        AdamState { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.0, step: 0, moments: HashMap::new() }
    }

    pub fn with_weight_decay(mut self, wd: f64) -> Self {
        self.weight_decay = wd;
        self
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update over the parameters that received gradients. Parameters
    /// absent from `grads` are left untouched, so a schedule that withholds a
    /// loss term leaves its parameters bit-identical.
    pub fn step(&mut self, params: &mut ParamSet, grads: &[(ParamId, Tensor)]) {
        self.step += 1;
        for (id, grad) in grads {
            let p = params.tensor_mut(*id);
            debug_assert_eq!(p.shape(), grad.shape(), "gradient shape mismatch");
            let n = p.numel();
            let slot = self
                .moments
                .entry(*id)
                .or_insert_with(|| Moments { m: vec![0.0; n], v: vec![0.0; n], t: 0 });
            slot.t += 1;
            let bc1 = 1.0 - self.beta1.powi(slot.t as i32);
            let bc2 = 1.0 - self.beta2.powi(slot.t as i32);
            let pd = p.data_mut();
            for i in 0..n {
                let g = grad.data()[i];
                slot.m[i] = self.beta1 * slot.m[i] + (1.0 - self.beta1) * g;
                slot.v[i] = self.beta2 * slot.v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = slot.m[i] / bc1;
                let v_hat = slot.v[i] / bc2;
                pd[i] -= self.lr * (m_hat / (v_hat.sqrt() + self.eps) + self.weight_decay * pd[i]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::InitSpec;
    use crate::rng::StreamRng;

    fn one_param(value: f64) -> (ParamSet, ParamId) {
        let rng = StreamRng::new(0);
        let mut ps = ParamSet::new();
        let id = ps.register("w", &[1], InitSpec::Constant(value), &rng).unwrap();
        (ps, id)
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let (mut ps, id) = one_param(0.7);
        let mut adam = AdamState::new(0.001);
        adam.step(&mut ps, &[(id, Tensor::from_vec(vec![0.0]))]);
        assert_eq!(ps.tensor(id).data()[0], 0.7);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // Bias-corrected first step with g=1: m_hat = 1, v_hat = 1, so the
        // update is lr / (1 + eps) which is about lr.
        let (mut ps, id) = one_param(0.5);
        let mut adam = AdamState::new(0.001);
        adam.step(&mut ps, &[(id, Tensor::from_vec(vec![1.0]))]);
        let moved = 0.5 - ps.tensor(id).data()[0];
        assert!((moved - 0.001).abs() < 1e-9, "moved {moved}");
    }

    #[test]
    fn decay_shrinks_toward_zero_without_gradient() {
        let (mut ps, id) = one_param(1.0);
        let mut adam = AdamState::new(0.001).with_weight_decay(0.001);
        for _ in 0..10 {
            adam.step(&mut ps, &[(id, Tensor::from_vec(vec![0.0]))]);
        }
        let w = ps.tensor(id).data()[0];
        assert!(w < 1.0 && w > 0.99, "w {w}");
    }

    #[test]
    fn untouched_params_not_updated() {
        let rng = StreamRng::new(0);
        let mut ps = ParamSet::new();
        let a = ps.register("a", &[1], InitSpec::Constant(1.0), &rng).unwrap();
        let b = ps.register("b", &[1], InitSpec::Constant(1.0), &rng).unwrap();
        let mut adam = AdamState::new(0.1).with_weight_decay(0.01);
        adam.step(&mut ps, &[(a, Tensor::from_vec(vec![1.0]))]);
        assert_eq!(ps.tensor(b).data()[0], 1.0);
        assert_ne!(ps.tensor(a).data()[0], 1.0);
    }
}
