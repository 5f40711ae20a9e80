use softuni_core::data::DatasetKind;
use softuni_core::harness::runner::{build_model, file_splits, generate_dataset};
use softuni_core::harness::{train, TrainConfig};
use softuni_core::models::Arch;

fn class_error(class: &str, seed: u64) -> (f64, f64, std::time::Duration) {
    let t0 = std::time::Instant::now();
    let (train_examples, mut vocab) =
        generate_dataset(DatasetKind::Logic, Some(class), 1000, 2, seed).unwrap();
    let (test_raw, test_vocab) =
        generate_dataset(DatasetKind::Logic, Some(class), 1000, 2, seed + 1000).unwrap();
    let test: Vec<_> = test_raw.iter().map(|e| {
        let raw = softuni_core::data::jsonl::to_raw(e, &test_vocab).unwrap();
        softuni_core::data::jsonl::from_raw(&raw, DatasetKind::Logic, &mut vocab).unwrap()
    }).collect();
    let splits = file_splits(train_examples, test, None, 0.1, seed);
    let mut cfg = TrainConfig::new(Arch::Umn);
    cfg.seed = seed;
    cfg.strong = true;
    cfg.j_iterations = 2;
    cfg.pretrain_epochs = 40;
    cfg.epochs = 100;
    let (model, mut ps) = build_model(&cfg, &vocab, &splits, None).unwrap();
    let out = train(&model, &mut ps, &vocab, &cfg, &splits, DatasetKind::Logic).unwrap();
    let _ = &model; let _ = &ps;
    ((1.0 - out.test_at_best.unwrap_or(0.0)) * 100.0, out.best_val_accuracy.unwrap_or(0.0), t0.elapsed())
}

#[test]
fn probe_c07() {
    let (fe, fv, ft) = class_error("facts", 13);
    eprintln!("facts: err {fe:.1}% best-val {fv:.3} elapsed {ft:?}");
    let (ue, uv, ut) = class_error("unification", 13);
    eprintln!("unification: err {ue:.1}% best-val {uv:.3} elapsed {ut:?}");
}
