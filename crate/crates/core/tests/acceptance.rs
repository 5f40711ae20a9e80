//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//! Expensive experiments are shared between criteria through lazy fixtures,
//! and folds run on parallel threads.

mod common;

use softuni_core::analysis::{
    extract_model_invariants, ExtractPolicy, InvariantRecord, MatchClass,
};
use softuni_core::data::grid::{gen_grid_with_patterns, check_grid, GridTask, GRID_TASKS};
use softuni_core::data::logic::{gen_logic, logic_entails, LogicClass, DEFAULT_DEPTH_LIMIT, LOGIC_CLASSES};
use softuni_core::data::sequences::{seq_answer, SeqTask, SEQ_TASKS};
use softuni_core::data::{DatasetKind, Example, Vocabulary};
use softuni_core::harness::runner::{build_model, fold_splits, generate_dataset, train_run};
use softuni_core::harness::{
    evaluate, make_toy_sentiment, metrics_csv, train, MetricsRow, Splits, TrainConfig,
};
use softuni_core::models::{AnyModel, Arch};
use softuni_core::rng::StreamRng;
use softuni_core::unify::{self, TableFeatures};
use std::sync::OnceLock;
use std::time::Instant;

/// Fixed protocol seed for the suite; every criterion below is one
/// deterministic instance of its protocol.
const SEED: u64 = 13;

fn pass_line(id: u32, pass: bool, detail: &str) {
    println!("ACCEPTANCE {id:02} {}: {detail}", if pass { "PASS" } else { "FAIL" });
}

// ── Shared experiment fixtures ─────────────────────────────────────────

struct FoldRun {
    metrics: Vec<MetricsRow>,
    invariants: Vec<InvariantRecord>,
    plain_metrics: Vec<MetricsRow>,
}

struct Experiment {
    folds: Vec<FoldRun>,
    tasks: Vec<String>,
}

fn acc_at(metrics: &[MetricsRow], iteration: usize, task: &str) -> f64 {
    metrics
        .iter()
        .find(|r| r.split == "test" && r.iteration == iteration && r.task == task)
        .map(|r| r.accuracy)
        .unwrap_or(0.0)
}

/// Five folds of the data-efficiency protocol: 2000 iterations, batch 64,
/// lr 0.001, tau 0.1, per-task training cap, unified and plain runs.
fn run_experiment(arch: Arch, kind: DatasetKind, cap: Option<usize>, seed: u64) -> Experiment {
    let (examples, vocab) = generate_dataset(kind, None, 1000, 1, seed).unwrap();
    let tasks = softuni_core::harness::runner::task_names(&examples);
    let folds: Vec<FoldRun> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..5)
            .map(|fold| {
                let examples = &examples;
                let vocab = &vocab;
                scope.spawn(move || {
                    let splits = fold_splits(examples, 5, fold, cap, 0.0, seed).unwrap();
                    let mut cfg = TrainConfig::new(arch);
                    cfg.seed = seed + fold as u64;
                    cfg.log_every = 250;
                    let (model, mut ps) = build_model(&cfg, vocab, &splits, None).unwrap();
                    let out = train(&model, &mut ps, vocab, &cfg, &splits, kind).unwrap();
                    let invariants = extract_model_invariants(
                        &model,
                        &ps,
                        vocab,
                        ExtractPolicy::MeanOfVariables,
                        fold,
                    )
                    .unwrap();
                    let plain_cfg = cfg.clone().plain();
                    let (pmodel, mut pps) = build_model(&plain_cfg, vocab, &splits, None).unwrap();
                    let pout =
                        train(&pmodel, &mut pps, vocab, &plain_cfg, &splits, kind).unwrap();
                    FoldRun { metrics: out.metrics, invariants, plain_metrics: pout.metrics }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    Experiment { folds, tasks }
}

static UMLP_50: OnceLock<Experiment> = OnceLock::new();
static UMLP_1K: OnceLock<Experiment> = OnceLock::new();
static UCNN_1K: OnceLock<Experiment> = OnceLock::new();

fn umlp_50() -> &'static Experiment {
    UMLP_50.get_or_init(|| run_experiment(Arch::Umlp, DatasetKind::Seq, Some(50), SEED))
}

fn umlp_1k() -> &'static Experiment {
    UMLP_1K.get_or_init(|| run_experiment(Arch::Umlp, DatasetKind::Seq, None, SEED))
}

fn ucnn_1k() -> &'static Experiment {
    UCNN_1K.get_or_init(|| run_experiment(Arch::Ucnn, DatasetKind::Grid, None, SEED))
}

// ── 1. Numerics ────────────────────────────────────────────────────────

#[test]
fn c01_numerics_grad_checks() {
    let t0 = Instant::now();
    let report = softuni_core::harness::selfcheck::run_selfcheck(SEED).unwrap();
    let elapsed = t0.elapsed();
    let worst = report
        .checks
        .iter()
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .cloned()
        .unwrap();
    let pass = report.passed() && elapsed.as_secs() < 120;
    pass_line(
        1,
        pass,
        &format!(
            "{} gradient checks, worst rel err {:.2e} ({}), runtime {elapsed:?} (< 2 min)",
            report.checks.len(),
            worst.1,
            worst.0
        ),
    );
    assert!(pass, "numerics: worst {worst:?}, elapsed {elapsed:?}");
}

// ── 2. Oracle soundness ────────────────────────────────────────────────

#[test]
fn c02_oracle_soundness() {
    let t0 = Instant::now();
    let rng = StreamRng::new(SEED);
    // Logic: >= 1000 programs per class x arity, labels certified.
    let mut programs_checked = 0usize;
    for class in LOGIC_CLASSES {
        for arity in 1..=2usize {
            if class == LogicClass::Transitivity && arity == 1 {
                continue;
            }
            let mut stream = rng.stream(&format!("acc/logic/{}/{arity}", class.name()));
            let programs = gen_logic(class, 500, arity, &mut stream).unwrap();
            assert_eq!(programs.len(), 1000);
            for p in &programs {
                let r = logic_entails(&p.rules, &p.query, DEFAULT_DEPTH_LIMIT).unwrap();
                assert_eq!(
                    r.entailed,
                    p.label,
                    "oracle disagrees on {} arity {arity}: {p:?}",
                    class.name()
                );
                if p.label {
                    assert_eq!(r.proof, p.proof, "proof mismatch");
                }
                programs_checked += 1;
            }
        }
    }
    // Sequences: every generated example against the counting oracle.
    let mut vocab = Vocabulary::new();
    let mut seq_checked = 0usize;
    for task in SEQ_TASKS {
        let mut stream = rng.stream(&format!("acc/seq/{}", task.name()));
        let examples =
            softuni_core::data::sequences::gen_sequences(task, 1000, &mut vocab, &mut stream)
                .unwrap();
        for ex in &examples {
            let digits: Vec<u8> = ex.context.sentences().unwrap()[0]
                .iter()
                .map(|&id| vocab.token(id).unwrap().parse().unwrap())
                .collect();
            let want = seq_answer(&digits, task).unwrap();
            assert_eq!(ex.answer, vocab.id(&want.to_string()).unwrap());
            seq_checked += 1;
        }
    }
    // Grid: geometry oracle over the full generated sets.
    let mut grid_checked = 0usize;
    for task in GRID_TASKS {
        let mut stream = rng.stream(&format!("acc/grid/{}", task.name()));
        let pairs = gen_grid_with_patterns(task, 1000, &mut vocab, &mut stream).unwrap();
        for (ex, pattern) in &pairs {
            let flat = ex.context.grid_flat().unwrap();
            let mut grid = [[0u8; 3]; 3];
            for r in 0..3 {
                for c in 0..3 {
                    grid[r][c] = vocab.token(flat[r * 3 + c]).unwrap().parse().unwrap();
                }
            }
            let want = check_grid(&grid, pattern).unwrap();
            assert_eq!(ex.answer, vocab.id(&want.to_string()).unwrap());
            grid_checked += 1;
        }
    }
    let elapsed = t0.elapsed();
    let pass = elapsed.as_secs() < 300;
    pass_line(
        2,
        pass,
        &format!(
            "oracle agreement 100% on {programs_checked} logic programs, {seq_checked} sequences, {grid_checked} grids; runtime {elapsed:?} (< 5 min)"
        ),
    );
    assert!(pass);
}

// ── 3. Dataset statistics ──────────────────────────────────────────────

#[test]
fn c03_dataset_statistics() {
    let rng = StreamRng::new(SEED);
    // Sequences task i: post-dedup 5-fold train size in 680..=730.
    let mut vocab = Vocabulary::new();
    let mut stream = rng.stream("acc/stats/seq/const");
    let examples =
        softuni_core::data::sequences::gen_sequences(SeqTask::Const, 1000, &mut vocab, &mut stream)
            .unwrap();
    let mut fold_stream = rng.stream("acc/stats/kfold");
    let folds = softuni_core::data::kfold_split(examples.len(), 5, &mut fold_stream).unwrap();
    let train_sizes: Vec<usize> = (0..5).map(|f| examples.len() - folds[f].len()).collect();
    let seq_ok = train_sizes.iter().all(|&n| (680..=730).contains(&n));

    // Grid box: unique pre-distractor patterns at most 32.
    let mut stream = rng.stream("acc/stats/grid/box");
    let boxes =
        softuni_core::data::grid::gen_grid(GridTask::Box_, 1000, &mut vocab, &mut stream).unwrap();
    let box_ok = boxes.len() <= 32;

    let pass = seq_ok && box_ok;
    pass_line(
        3,
        pass,
        &format!(
            "sequences-const 5-fold train sizes {train_sizes:?} (680..=730); box unique patterns {} (<= 32)",
            boxes.len()
        ),
    );
    assert!(pass);
}

// ── 4. UMLP data efficiency ────────────────────────────────────────────

#[test]
fn c04_umlp_data_efficiency() {
    let t0 = Instant::now();
    let exp = umlp_50();
    let mut final_sum = 0.0;
    let mut task_wins = Vec::new();
    for task in &exp.tasks {
        let mut unified_final = 0.0;
        let mut u250 = 0.0;
        let mut p250 = 0.0;
        for fold in &exp.folds {
            unified_final += acc_at(&fold.metrics, 2000, task) / 5.0;
            u250 += acc_at(&fold.metrics, 250, task) / 5.0;
            p250 += acc_at(&fold.plain_metrics, 250, task) / 5.0;
        }
        final_sum += unified_final / exp.tasks.len() as f64;
        task_wins.push((task.clone(), u250 > p250, u250, p250));
    }
    let wins = task_wins.iter().filter(|(_, w, _, _)| *w).count();
    let elapsed = t0.elapsed();
    let pass = final_sum >= 0.85 && wins >= 3 && elapsed.as_secs() < 900;
    pass_line(
        4,
        pass,
        &format!(
            "mean unified test accuracy {final_sum:.3} (>= 0.85); unified > plain at iteration 250 on {wins}/4 tasks {:?}; runtime {elapsed:?} (< 15 min)",
            task_wins
                .iter()
                .map(|(t, _, u, p)| format!("{t}: {u:.2} vs {p:.2}"))
                .collect::<Vec<_>>()
        ),
    );
    assert!(pass, "mean {final_sum}, wins {wins}, elapsed {elapsed:?}");
}

// ── 5. Invariant exact match ───────────────────────────────────────────

fn tally(records: impl Iterator<Item = &'static InvariantRecord>) -> (usize, usize) {
    let mut exact = 0;
    let mut total = 0;
    for r in records {
        if r.match_class.is_some() {
            total += 1;
            if r.match_class == Some(MatchClass::Exact) {
                exact += 1;
            }
        }
    }
    (exact, total)
}

#[test]
fn c05_invariant_exact_match() {
    // Table-4 protocol runs at <= 1k training examples per task.
    let seq = umlp_1k();
    let grid = ucnn_1k();
    let (seq_exact, seq_total) = tally(seq.folds.iter().flat_map(|f| f.invariants.iter()));
    let (grid_exact, grid_total) = tally(grid.folds.iter().flat_map(|f| f.invariants.iter()));
    let head_single = seq
        .folds
        .iter()
        .filter(|f| {
            f.invariants
                .iter()
                .filter(|r| r.task == "head")
                .any(|r| r.flags.iter().flatten().filter(|&&b| b).count() == 1)
        })
        .count();
    let pass = seq_exact >= 16 && grid_exact >= 10 && head_single >= 4;
    pass_line(
        5,
        pass,
        &format!(
            "sequences {seq_exact}/{seq_total} exact (>= 16/20); grid {grid_exact}/{grid_total} exact (>= 10/20); head-task single-variable invariants in {head_single}/5 folds (>= 4)"
        ),
    );
    assert!(pass, "seq {seq_exact}/20, grid {grid_exact}/20, head-single {head_single}/5");
}

// ── 6. UCNN grid accuracy ──────────────────────────────────────────────

#[test]
fn c06_ucnn_grid() {
    let exp = ucnn_1k();
    let mut unified_mean = 0.0;
    let mut plain_mean = 0.0;
    for task in &exp.tasks {
        for fold in &exp.folds {
            unified_mean += acc_at(&fold.metrics, 2000, task) / (5.0 * exp.tasks.len() as f64);
            plain_mean += acc_at(&fold.plain_metrics, 2000, task) / (5.0 * exp.tasks.len() as f64);
        }
    }
    let pass = unified_mean >= 0.80 && unified_mean >= plain_mean;
    pass_line(
        6,
        pass,
        &format!(
            "mean unified test accuracy {unified_mean:.3} (>= 0.80) vs plain {plain_mean:.3} at the final iteration"
        ),
    );
    assert!(pass, "unified {unified_mean}, plain {plain_mean}");
}

// ── 7. Memory network on logic; story files data-gated ─────────────────

fn umn_class_error(class: &str, seed: u64) -> (f64, f64) {
    // 1k programs -> 2k examples for training (10% val) and a fresh 1k
    // programs -> 2k examples for testing.
    let (train_examples, mut vocab) =
        generate_dataset(DatasetKind::Logic, Some(class), 1000, 2, seed).unwrap();
    let (test_raw, test_vocab) =
        generate_dataset(DatasetKind::Logic, Some(class), 1000, 2, seed + 1000).unwrap();
    // Re-intern the test set into the training vocabulary.
    let test: Vec<Example> = test_raw
        .iter()
        .map(|e| {
            let raw = softuni_core::data::jsonl::to_raw(e, &test_vocab).unwrap();
            softuni_core::data::jsonl::from_raw(&raw, DatasetKind::Logic, &mut vocab).unwrap()
        })
        .collect();
    let splits = {
        let mut s = softuni_core::harness::runner::file_splits(
            train_examples,
            test,
            None,
            0.1,
            seed,
        );
        s.test.truncate(2000);
        s
    };
    let mut cfg = TrainConfig::new(Arch::Umn);
    cfg.seed = seed;
    cfg.strong = true;
    cfg.j_iterations = 2;
    cfg.pretrain_epochs = 40;
    cfg.epochs = 80;
    let (model, mut ps) = build_model(&cfg, &vocab, &splits, None).unwrap();
    let out = train(&model, &mut ps, &vocab, &cfg, &splits, DatasetKind::Logic).unwrap();
    let test_acc = out.test_at_best.unwrap_or_else(|| {
        evaluate(&model, &ps, &splits.test, true, usize::MAX).unwrap()
    });
    let val = out.best_val_accuracy.unwrap_or(0.0);
    ((1.0 - test_acc) * 100.0, val)
}

#[test]
fn c07_umn_logic_and_gated_stories() {
    let t0 = Instant::now();
    let (facts_err, unification_err) = std::thread::scope(|scope| {
        let facts = scope.spawn(|| umn_class_error("facts", SEED).0);
        let unification = scope.spawn(|| umn_class_error("unification", SEED).0);
        (facts.join().unwrap(), unification.join().unwrap())
    });
    let elapsed = t0.elapsed();
    let mut pass = facts_err <= 5.0 && unification_err <= 8.0 && elapsed.as_secs() < 7200;
    let mut detail = format!(
        "logic strong supervision, 1 invariant: facts error {facts_err:.1}% (<= 5%), unification error {unification_err:.1}% (<= 8%); runtime {elapsed:?} (< 2 h)"
    );

    // Story-file part: data-gated on a standard story corpus being present.
    let babi_dir = std::env::var("SOFTUNI_BABI_DIR").ok().map(std::path::PathBuf::from);
    match babi_dir {
        Some(dir) if dir.join("qa1_single-supporting-fact_train.txt").exists() => {
            let mut vocab = Vocabulary::new();
            let train_ex = softuni_core::data::babi::load_babi(
                &dir.join("qa1_single-supporting-fact_train.txt"),
                &mut vocab,
            )
            .unwrap();
            let test_ex = softuni_core::data::babi::load_babi(
                &dir.join("qa1_single-supporting-fact_test.txt"),
                &mut vocab,
            )
            .unwrap();
            let splits =
                softuni_core::harness::runner::file_splits(train_ex, test_ex, None, 0.1, SEED);
            let mut cfg = TrainConfig::new(Arch::Umn);
            cfg.seed = SEED;
            cfg.strong = true;
            cfg.j_iterations = 3;
            cfg.pretrain_epochs = 40;
            cfg.epochs = 80;
            cfg.weight_decay = 0.001;
            let (model, mut ps) = build_model(&cfg, &vocab, &splits, None).unwrap();
            let out = train(&model, &mut ps, &vocab, &cfg, &splits, DatasetKind::Babi).unwrap();
            let acc = out.test_at_best.unwrap_or(0.0);
            let err = (1.0 - acc) * 100.0;
            detail.push_str(&format!("; story task 1 error {err:.1}% (<= 5%)"));
            pass = pass && err <= 5.0;
        }
        _ => {
            detail.push_str("; story-file part SKIPPED (set SOFTUNI_BABI_DIR to run)");
        }
    }
    pass_line(7, pass, &detail);
    assert!(pass, "{detail}");
}

// ── 8. Sentiment model on the toy corpus; real corpus data-gated ───────

#[test]
fn c08_urnn_toy_sentiment() {
    let mut vocab = Vocabulary::new();
    let rng = StreamRng::new(SEED);
    let mut stream = rng.stream("acc/toy-sentiment");
    let all = make_toy_sentiment(1250, &mut vocab, &mut stream).unwrap();
    let splits = Splits {
        train: all[..1000].to_vec(),
        val: vec![],
        test: all[1000..].to_vec(),
    };
    let mut cfg = TrainConfig::new(Arch::Urnn);
    cfg.seed = SEED;
    cfg.iters = 2000;
    cfg.log_every = 500;
    let (model, mut ps) = build_model(&cfg, &vocab, &splits, None).unwrap();
    let out = train(&model, &mut ps, &vocab, &cfg, &splits, DatasetKind::Sentiment).unwrap();
    let acc = out
        .metrics
        .iter()
        .filter(|r| r.split == "test")
        .max_by_key(|r| r.iteration)
        .map(|r| r.accuracy)
        .unwrap_or(0.0);

    // The planted keyword must sit in the top-3 variableness values of the
    // invariant's words.
    let AnyModel::Urnn(m) = &model else { panic!("urnn expected") };
    let inv_words = m.invariants[0].example.context.sentences().unwrap()[0].clone();
    let mut scored: Vec<(String, f64)> = inv_words
        .iter()
        .map(|&id| {
            (vocab.token(id).unwrap().to_string(), m.variableness(&ps, id).unwrap())
        })
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    let keywords: Vec<&str> = softuni_core::harness::TOY_POSITIVE_WORDS
        .iter()
        .chain(softuni_core::harness::TOY_NEGATIVE_WORDS.iter())
        .copied()
        .collect();
    let top3: Vec<&str> = scored.iter().take(3).map(|(w, _)| w.as_str()).collect();
    let keyword_in_top3 = top3.iter().any(|w| keywords.contains(w));

    let mut pass = acc >= 0.95 && keyword_in_top3;
    let mut detail = format!(
        "toy corpus unified accuracy {acc:.3} (>= 0.95); planted keyword in top-3 psi: {keyword_in_top3} (top: {top3:?})"
    );

    // Real-corpus part is gated on both the phrase file and embeddings.
    let sst = std::env::var("SOFTUNI_SST_FILE").ok();
    let emb = std::env::var("SOFTUNI_EMBEDDINGS").ok();
    match (sst, emb) {
        (Some(sst), Some(emb))
            if std::path::Path::new(&sst).exists() && std::path::Path::new(&emb).exists() =>
        {
            let mut vocab = Vocabulary::new();
            let examples = softuni_core::data::sentiment::load_sentiment(
                std::path::Path::new(&sst),
                &mut vocab,
            )
            .unwrap();
            let pretrained =
                softuni_core::data::sentiment::load_embeddings(std::path::Path::new(&emb)).unwrap();
            let splits = fold_splits(&examples, 5, 0, Some(1000), 0.0, SEED).unwrap();
            let mut cfg = TrainConfig::new(Arch::Urnn);
            cfg.seed = SEED;
            let (model, mut ps) = build_model(&cfg, &vocab, &splits, Some(&pretrained)).unwrap();
            let _ = train(&model, &mut ps, &vocab, &cfg, &splits, DatasetKind::Sentiment).unwrap();
            let positive = vocab.id("positive").unwrap();
            let unified = evaluate(&model, &ps, &splits.test, true, positive).unwrap();
            let plain_cfg = cfg.clone().plain();
            let (pmodel, mut pps) = build_model(&plain_cfg, &vocab, &splits, Some(&pretrained)).unwrap();
            let _ = train(&pmodel, &mut pps, &vocab, &plain_cfg, &splits, DatasetKind::Sentiment)
                .unwrap();
            let plain = evaluate(&pmodel, &pps, &splits.test, false, positive).unwrap();
            let ok = unified >= plain - 0.02;
            detail.push_str(&format!(
                "; real corpus unified {unified:.3} vs plain {plain:.3} (within 2 points): {ok}"
            ));
            pass = pass && ok;
        }
        _ => {
            detail.push_str(
                "; real-corpus part SKIPPED (set SOFTUNI_SST_FILE and SOFTUNI_EMBEDDINGS to run)",
            );
        }
    }
    pass_line(8, pass, &detail);
    assert!(pass, "{detail}");
}

// ── 9. Soft-unification property suite ─────────────────────────────────

#[test]
fn c09_soft_unification_properties() {
    let t0 = Instant::now();
    let rng = StreamRng::new(SEED);
    let mut stream = rng.stream("acc/props");
    let mut checks: Vec<(&str, bool)> = Vec::new();

    // Endpoint recovery and convex interpolation over random features.
    let mut endpoint_ok = true;
    let mut convex_ok = true;
    let mut rowsum_ok = true;
    let mut maskzero_ok = true;
    for _ in 0..50 {
        let g_len = 1 + stream.below(5);
        let k_len = 1 + stream.below(6);
        let d = 2 + stream.below(6);
        let mut g = softuni_core::graph::Graph::new();
        let rand = |g: &mut softuni_core::graph::Graph, shape: &[usize], s: &mut softuni_core::rng::Stream| {
            let n: usize = shape.iter().product();
            g.constant(
                softuni_core::tensor::Tensor::new(
                    shape.to_vec(),
                    (0..n).map(|_| s.uniform(-2.0, 2.0)).collect(),
                )
                .unwrap(),
            )
        };
        let a = rand(&mut g, &[g_len, d], &mut stream);
        let b = rand(&mut g, &[g_len, d], &mut stream);
        let c = rand(&mut g, &[k_len, d], &mut stream);
        let dv = rand(&mut g, &[k_len, d], &mut stream);
        // Random mask keeping at least one symbol.
        let mut mask = vec![0.0; k_len];
        mask[stream.below(k_len)] = 1.0;
        for m in mask.iter_mut() {
            if stream.next_f64() < 0.5 {
                *m = 1.0;
            }
        }
        let mask = softuni_core::tensor::Tensor::new(vec![k_len], mask).unwrap();

        for &(lo, hi) in &[(1e-6, 1e-6), (1.0 - 1e-6, 1.0 - 1e-6), (0.3, 0.7)] {
            let psi_vals: Vec<f64> = (0..g_len).map(|_| stream.uniform(lo, hi)).collect();
            let psi = g
                .constant(softuni_core::tensor::Tensor::new(vec![g_len, 1], psi_vals.clone()).unwrap());
            let uv = unify::unify(&mut g, a, b, c, dv, psi, Some(&mask)).unwrap();
            let (av, ev, uvv, pv) = (
                g.value(uv.a).clone(),
                g.value(uv.e).clone(),
                g.value(uv.u).clone(),
                g.value(uv.p).clone(),
            );
            for row in 0..g_len {
                let sum: f64 = pv.data()[row * k_len..(row + 1) * k_len].iter().sum();
                if (sum - 1.0).abs() > 1e-6 {
                    rowsum_ok = false;
                }
                for col in 0..k_len {
                    if mask.data()[col] == 0.0 && pv.data()[row * k_len + col] != 0.0 {
                        maskzero_ok = false;
                    }
                }
                for x in 0..d {
                    let (aa, ee, uu) = (
                        av.data()[row * d + x],
                        ev.data()[row * d + x],
                        uvv.data()[row * d + x],
                    );
                    let (lo_v, hi_v) = (aa.min(ee), aa.max(ee));
                    if uu < lo_v - 1e-9 || uu > hi_v + 1e-9 {
                        convex_ok = false;
                    }
                    if psi_vals[row] <= 1e-6 && (uu - aa).abs() > 1e-5 {
                        endpoint_ok = false;
                    }
                    if psi_vals[row] >= 1.0 - 1e-6 && (uu - ee).abs() > 1e-5 {
                        endpoint_ok = false;
                    }
                }
            }
        }
    }
    checks.push(("endpoint recovery", endpoint_ok));
    checks.push(("convex interpolation", convex_ok));
    checks.push(("attention rows sum to 1", rowsum_ok));
    checks.push(("masked columns exactly 0", maskzero_ok));

    // Permutation equivariance with a position-independent provider.
    {
        let provider = TableFeatures::identity(8);
        let rngp = StreamRng::new(SEED + 1);
        let mut ps = softuni_core::params::ParamSet::new();
        let table = ps
            .register("inv.psi", &[8, 1], softuni_core::params::InitSpec::Constant(0.4), &rngp)
            .unwrap();
        let inv = unify::Invariant {
            example: Example {
                context: softuni_core::data::Context::Sentences(vec![vec![1, 2]]),
                query: vec![],
                answer: 1,
                supports: None,
                task: "t".to_string(),
            },
            psi: unify::PsiSource::Table(table),
            id: 0,
        };
        let k = [3usize, 5, 2, 7];
        let perm = [2usize, 0, 3, 1];
        let k_perm: Vec<usize> = perm.iter().map(|&i| k[i]).collect();
        let mut g = softuni_core::graph::Graph::new();
        let uv1 = unify::unify_sequences(&mut g, &ps, &inv, &[1, 2], &k, &provider, None).unwrap();
        let uv2 =
            unify::unify_sequences(&mut g, &ps, &inv, &[1, 2], &k_perm, &provider, None).unwrap();
        let p1 = g.value(uv1.p).clone();
        let p2 = g.value(uv2.p).clone();
        let mut perm_ok = true;
        for row in 0..2 {
            for (new_col, &old_col) in perm.iter().enumerate() {
                if (p1.data()[row * 4 + old_col] - p2.data()[row * 4 + new_col]).abs() > 1e-9 {
                    perm_ok = false;
                }
            }
        }
        let u1 = g.value(uv1.u).clone();
        let u2 = g.value(uv2.u).clone();
        let u_same = u1.data().iter().zip(u2.data()).all(|(x, y)| (x - y).abs() < 1e-9);
        checks.push(("permutation equivariance", perm_ok && u_same));
    }

    // One-hot tensor reduction equals the pairwise unify output.
    {
        let rngm = StreamRng::new(SEED + 2);
        let mut ps = softuni_core::params::ParamSet::new();
        let mut cfg = softuni_core::models::ModelConfig::new(Arch::Umn, 12, vec!["s".into()]);
        cfg.d = 4;
        cfg.iterations = 2;
        let mut model = softuni_core::models::UmnModel::new(cfg, &mut ps, &rngm).unwrap();
        let story = |a: usize| Example {
            context: softuni_core::data::Context::Sentences(vec![
                vec![1 + a, 2, 3],
                vec![4, 5 + a],
            ]),
            query: vec![6, 7],
            answer: 8,
            supports: Some(vec![0]),
            task: "s".to_string(),
        };
        model.set_invariants(vec![story(0)], &mut ps, &rngm).unwrap();
        let ex = story(2);
        let tensor = model.unification_tensor(&ps, 0, &ex).unwrap();
        let mut reduction_ok = true;
        for i in 0..2 {
            for k in 0..2 {
                let trace = model.unify_pair(&ps, 0, i, &ex, k).unwrap();
                let words = trace.u.shape()[0];
                for w in 0..words {
                    for x in 0..4 {
                        let got = tensor.data()[((i * 3 + w) * 2 + k) * 4 + x];
                        if (got - trace.u.data()[w * 4 + x]).abs() > 1e-12 {
                            reduction_ok = false;
                        }
                    }
                }
            }
        }
        checks.push(("one-hot tensor reduction", reduction_ok));
    }

    let elapsed = t0.elapsed();
    let all_ok = checks.iter().all(|(_, ok)| *ok) && elapsed.as_secs() < 60;
    pass_line(
        9,
        all_ok,
        &format!(
            "{}; runtime {elapsed:?} (< 1 min)",
            checks
                .iter()
                .map(|(n, ok)| format!("{n}: {}", if *ok { "ok" } else { "violated" }))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    );
    assert!(all_ok, "{checks:?}");
}

// ── 10. Determinism ────────────────────────────────────────────────────

#[test]
fn c10_training_determinism() {
    let run = || {
        let (examples, vocab) =
            generate_dataset(DatasetKind::Seq, Some("tail"), 300, 1, SEED).unwrap();
        let splits = fold_splits(&examples, 5, 0, Some(32), 0.0, SEED).unwrap();
        let mut cfg = TrainConfig::new(Arch::Umlp);
        cfg.seed = SEED;
        cfg.iters = 60;
        cfg.batch = 16;
        cfg.d = 8;
        cfg.log_every = 20;
        let dir = std::env::temp_dir().join(format!(
            "softuni-acc10-{}-{}",
            std::process::id(),
            std::time::SystemTime::now().elapsed().is_ok()
        ));
        let artifacts = train_run(&cfg, &vocab, &splits, DatasetKind::Seq, None, Some(&dir)).unwrap();
        let bytes = std::fs::read(dir.join("metrics.csv")).unwrap();
        std::fs::remove_dir_all(&dir).ok();
        (metrics_csv(&artifacts.outcome.metrics), bytes)
    };
    let (a_rows, a_bytes) = run();
    let (b_rows, b_bytes) = run();
    let pass = a_rows == b_rows && a_bytes == b_bytes && !a_bytes.is_empty();
    pass_line(
        10,
        pass,
        &format!("repeated run produced byte-identical metrics.csv ({} bytes)", a_bytes.len()),
    );
    assert!(pass);
}
