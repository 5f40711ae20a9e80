//! Hot-path benchmarks: batched matmul, the unified forward pass, one
//! training step, and a memory-network iteration.

use criterion::{criterion_group, criterion_main, Criterion};
use softuni_bench::{rand_tensor, seq_example, umlp_config, umlp_fixture};
use softuni_core::graph::Graph;
use softuni_core::harness::objective;
use softuni_core::models::{AnyModel, Arch, ModelConfig, Phase, UmnModel};
use softuni_core::models::umn::MemoryState;
use softuni_core::params::ParamSet;
use softuni_core::rng::StreamRng;
use softuni_core::tensor::Tensor;

fn bench_matmul(c: &mut Criterion) {
    let a = rand_tensor(&[64, 68], 1);
    let b = rand_tensor(&[68, 32], 2);
    c.bench_function("matmul 64x68x32", |bench| {
        bench.iter(|| {
            let mut g = Graph::new();
            let av = g.constant(a.clone());
            let bv = g.constant(b.clone());
            let y = g.matmul(av, bv).unwrap();
            std::hint::black_box(g.value(y).numel())
        })
    });
    let big = rand_tensor(&[64, 4, 16], 3);
    let w = rand_tensor(&[16, 16], 4);
    c.bench_function("batched matmul 64x4x16x16", |bench| {
        bench.iter(|| {
            let mut g = Graph::new();
            let av = g.constant(big.clone());
            let bv = g.constant(w.clone());
            let y = g.matmul(av, bv).unwrap();
            std::hint::black_box(g.value(y).numel())
        })
    });
}

fn bench_unified_forward(c: &mut Criterion) {
    let (model, ps, batch) = umlp_fixture();
    let refs: Vec<&_> = batch.iter().collect();
    c.bench_function("umlp unified forward, batch 64", |bench| {
        bench.iter(|| {
            let mut g = Graph::new();
            let (probs, _) = model.forward_unified(&mut g, &ps, &refs, &mut Phase::Eval).unwrap();
            std::hint::black_box(g.value(probs).numel())
        })
    });
}

fn bench_training_step(c: &mut Criterion) {
    let (model, ps, batch) = umlp_fixture();
    let refs: Vec<&_> = batch.iter().collect();
    let cfg = umlp_config();
    let any = AnyModel::Umlp(model);
    let rng = StreamRng::new(9);
    c.bench_function("umlp objective + backward, batch 64", |bench| {
        bench.iter(|| {
            let mut stream = rng.stream("bench-dropout");
            let (grads, parts) =
                objective(&any, &ps, &refs, &cfg, cfg.lambda_i, &mut stream, usize::MAX).unwrap();
            std::hint::black_box((grads.len(), parts.total))
        })
    });
}

fn bench_memnn_iterate(c: &mut Criterion) {
    let rng = StreamRng::new(5);
    let mut ps = ParamSet::new();
    let cfg = ModelConfig::new(Arch::Umn, 32, vec!["s".into()]);
    let mut model = UmnModel::new(cfg, &mut ps, &rng).unwrap();
    model
        .set_invariants(vec![seq_example(&[1, 2, 3, 4], "s")], &mut ps, &rng)
        .unwrap();
    let memory = rand_tensor(&[10, 32], 6);
    let state = MemoryState { h: rand_tensor(&[32], 7), beta: Tensor::from_vec(vec![]), j: 0 };
    c.bench_function("memory iteration, 10 slots, d=32", |bench| {
        bench.iter(|| {
            let next = model.memnn_iterate(&ps, &memory, &state).unwrap();
            std::hint::black_box(next.j)
        })
    });
}

criterion_group!(
    benches,
    bench_matmul,
    bench_unified_forward,
    bench_training_step,
    bench_memnn_iterate
);
criterion_main!(benches);
