//! Shared fixtures for the benchmark targets.

use softuni_core::data::{Context, Example};
use softuni_core::harness::TrainConfig;
use softuni_core::models::Arch;
use softuni_core::params::ParamSet;
use softuni_core::rng::StreamRng;
use softuni_core::tensor::Tensor;

pub fn rand_tensor(shape: &[usize], seed: u64) -> Tensor {
    let mut s = StreamRng::new(seed).stream("bench");
    let n: usize = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| s.uniform(-1.0, 1.0)).collect()).unwrap()
}

pub fn seq_example(seq: &[usize], task: &str) -> Example {
    Example {
        context: Context::Sentences(vec![seq.to_vec()]),
        query: vec![],
        answer: seq[0],
        supports: None,
        task: task.to_string(),
    }
}

/// A small trained-shape sequence model plus one batch of examples.
pub fn umlp_fixture() -> (softuni_core::models::UmlpModel, ParamSet, Vec<Example>) {
    let rng = StreamRng::new(3);
    let mut ps = ParamSet::new();
    let cfg = softuni_core::models::ModelConfig::new(Arch::Umlp, 9, vec!["head".into()]);
    let mut model = softuni_core::models::UmlpModel::new(cfg, &mut ps, &rng).unwrap();
    model
        .set_invariants(vec![vec![seq_example(&[8, 3, 3, 1], "head")]], &mut ps, &rng)
        .unwrap();
    let mut s = StreamRng::new(4).stream("bench-batch");
    let batch: Vec<Example> = (0..64)
        .map(|_| {
            let seq: Vec<usize> = (0..4).map(|_| 1 + s.below(8)).collect();
            seq_example(&seq, "head")
        })
        .collect();
    (model, ps, batch)
}

pub fn umlp_config() -> TrainConfig {
    TrainConfig::new(Arch::Umlp)
}
