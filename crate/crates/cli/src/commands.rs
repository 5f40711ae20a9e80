use clap::{Args, Parser, Subcommand};
use softuni_core::analysis::{
    self, attention_export, extract_model_invariants, ExtractPolicy, InvariantRecord,
};
use softuni_core::checkpoint::Checkpoint;
use softuni_core::data::jsonl::{read_jsonl, write_jsonl};
use softuni_core::data::sentiment::load_embeddings;
use softuni_core::data::{babi, DatasetKind, Example, Vocabulary};
use softuni_core::error::{Error, Result};
use softuni_core::harness::runner::{self, fold_splits, generate_dataset, train_run};
use softuni_core::harness::{evaluate, parse_metrics_csv, Splits, TrainConfig};
use softuni_core::models::{AnyModel, Arch};
use std::path::{Path, PathBuf};

/// Soft unification: learn which symbols act as variables, lift examples
/// into invariants, and solve tasks by unifying them with new examples.
#[derive(Parser)]
#[command(name = "softuni", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a dataset as JSONL (and, for logic, optionally a text file).
    Gen(GenArgs),
    /// Train a model and write a run directory.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset split.
    Eval(EvalArgs),
    /// Extract symbolic invariants from a checkpoint.
    Extract(ExtractArgs),
    /// Export the unification attention map for one example.
    Trace(TraceArgs),
    /// Run the gradient-check suite over all operators and models.
    Selfcheck(SelfcheckArgs),
    /// Summarize run directories into a report.
    Report(ReportArgs),
}

fn default_seed() -> u64 {
    std::env::var("SOFTUNI_SEED").ok().and_then(|v| v.parse().ok()).unwrap_or(42)
}

#[derive(Args)]
pub struct GenArgs {
    /// Dataset family: seq | grid | logic | sentiment
    #[arg(long)]
    dataset: String,
    /// Single task/class to generate (default: all tasks of the family).
    #[arg(long)]
    task: Option<String>,
    /// Examples (logic: programs, giving 2 examples each) per task.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Predicate arity for logic programs.
    #[arg(long, default_value_t = 2)]
    arity: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Output JSONL path.
    #[arg(long)]
    out: PathBuf,
    /// Also write the round-trippable logic text format here.
    #[arg(long)]
    text_out: Option<PathBuf>,
    /// Shard generation over this many threads (per-task substreams).
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Architecture: umlp | ucnn | urnn | umn
    #[arg(long)]
    model: String,
    /// Training data JSONL (bAbI: the raw story file).
    #[arg(long)]
    data: PathBuf,
    /// Dataset family of --data (inferred from --model when omitted).
    #[arg(long)]
    dataset: Option<String>,
    /// Held-out test file; without it one fold of --folds is held out.
    #[arg(long)]
    test_data: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    fold: usize,
    /// Fraction of the training pool carved off as validation.
    #[arg(long)]
    val_fraction: Option<f64>,
    /// Train only this task from the data file.
    #[arg(long)]
    task: Option<String>,
    /// Invariants per task.
    #[arg(long)]
    invariants: Option<usize>,
    /// Invariant selection: random | dissimilar
    #[arg(long)]
    pick_mode: Option<String>,
    /// Strong supervision on context attention (memory network).
    #[arg(long)]
    strong: bool,
    /// Cap on training examples per task.
    #[arg(long)]
    train_size: Option<usize>,
    /// Batch updates per task (feed-forward/recurrent models).
    #[arg(long)]
    iters: Option<usize>,
    /// Total epochs (memory network).
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    pretrain_epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    lambda_k: Option<f64>,
    #[arg(long)]
    lambda_i: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    /// Memory iterations J.
    #[arg(long)]
    j_iterations: Option<usize>,
    /// Embedding size override.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    log_every: Option<usize>,
    /// Auxiliary state-alignment loss (memory network).
    #[arg(long)]
    aux_mse: Option<bool>,
    #[arg(long)]
    seed: Option<u64>,
    /// Flat key=value config file applied before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Pretrained word-embedding text file (sentiment model).
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Output run directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Split to report: all | test-fold (hold out one fold of --folds)
    #[arg(long, default_value = "all")]
    split: String,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    fold: usize,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
pub struct ExtractArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Threshold policy: mean | fixed:<t>
    #[arg(long, default_value = "mean")]
    policy: String,
    /// Output invariants.json path.
    #[arg(long)]
    out: PathBuf,
    /// Fold tag recorded in the output.
    #[arg(long, default_value_t = 0)]
    fold: usize,
}

#[derive(Args)]
pub struct TraceArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    example_index: usize,
    /// Invariant to unify against.
    #[arg(long, default_value_t = 0)]
    invariant: usize,
    /// Output attention JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct SelfcheckArgs {
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Run directories (each holding metrics.csv and optional
    /// invariants.json).
    #[arg(long, num_args = 1..)]
    runs: Vec<PathBuf>,
    /// Output CSV path (a text table goes to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => gen(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Extract(a) => extract(a),
        Command::Trace(a) => trace(a),
        Command::Selfcheck(a) => selfcheck(a),
        Command::Report(a) => report(a),
    }
}

fn parse_kind(s: &str) -> Result<DatasetKind> {
    DatasetKind::parse(s).ok_or_else(|| Error::argument(format!("unknown dataset {s:?}")))
}

fn gen(a: GenArgs) -> Result<()> {
    let kind = parse_kind(&a.dataset)?;
    let seed = a.seed.unwrap_or_else(default_seed);
    if a.jobs > 1 && a.task.is_none() {
        // Shard per task over threads; substreams are disjoint by name, so
        // the result is identical to the sequential run.
        let tasks: Vec<String> = match kind {
            DatasetKind::Seq => ["const", "head", "tail", "dup"].iter().map(|s| s.to_string()).collect(),
            DatasetKind::Grid => ["box", "head", "centre", "corner"].iter().map(|s| s.to_string()).collect(),
            DatasetKind::Logic => softuni_core::data::logic::LOGIC_CLASSES
                .iter()
                .filter(|c| a.arity == 2 || **c != softuni_core::data::logic::LogicClass::Transitivity)
                .map(|c| c.name().to_string())
                .collect(),
            _ => vec![],
        };
        if !tasks.is_empty() {
            let chunks: Vec<Vec<String>> = tasks
                .chunks(tasks.len().div_ceil(a.jobs))
                .map(|c| c.to_vec())
                .collect();
            let results: Vec<Result<Vec<(String, Vec<Example>, Vocabulary)>>> =
                std::thread::scope(|scope| {
                    let handles: Vec<_> = chunks
                        .into_iter()
                        .map(|chunk| {
                            scope.spawn(move || {
                                chunk
                                    .into_iter()
                                    .map(|task| {
                                        generate_dataset(kind, Some(&task), a.n, a.arity, seed)
                                            .map(|(e, v)| (task, e, v))
                                    })
                                    .collect()
                            })
                        })
                        .collect();
                    handles.into_iter().map(|h| h.join().expect("generator thread")).collect()
                });
            // Re-intern into one vocabulary in task order.
            let mut vocab = Vocabulary::new();
            let mut all = Vec::new();
            let mut per_task: Vec<(String, Vec<Example>, Vocabulary)> = Vec::new();
            for r in results {
                per_task.extend(r?);
            }
            per_task.sort_by(|x, y| x.0.cmp(&y.0));
            for (_, examples, v) in per_task {
                for ex in examples {
                    let raw = softuni_core::data::jsonl::to_raw(&ex, &v)?;
                    all.push(softuni_core::data::jsonl::from_raw(&raw, kind, &mut vocab)?);
                }
            }
            write_jsonl(&a.out, &all, &vocab)?;
            println!("wrote {} examples to {}", all.len(), a.out.display());
            return Ok(());
        }
    }
    let (examples, vocab) = generate_dataset(kind, a.task.as_deref(), a.n, a.arity, seed)?;
    write_jsonl(&a.out, &examples, &vocab)?;
    if let Some(text_out) = &a.text_out {
        if kind != DatasetKind::Logic {
            return Err(Error::argument("--text-out applies to logic datasets".to_string()));
        }
        let mut programs = Vec::new();
        for class in softuni_core::data::logic::LOGIC_CLASSES {
            if a.arity != 2 && class == softuni_core::data::logic::LogicClass::Transitivity {
                continue;
            }
            if let Some(t) = &a.task {
                if class.name() != t {
                    continue;
                }
            }
            let mut stream = softuni_core::rng::StreamRng::new(seed)
                .stream(&format!("gen/logic/{}/{}", class.name(), a.arity));
            programs.extend(softuni_core::data::logic::gen_logic(class, a.n, a.arity, &mut stream)?);
        }
        std::fs::write(text_out, softuni_core::data::logic::format_programs(&programs))?;
    }
    println!("wrote {} examples to {}", examples.len(), a.out.display());
    Ok(())
}

fn kind_for_model(arch: Arch) -> DatasetKind {
    match arch {
        Arch::Umlp => DatasetKind::Seq,
        Arch::Ucnn => DatasetKind::Grid,
        Arch::Urnn => DatasetKind::Sentiment,
        Arch::Umn => DatasetKind::Logic,
    }
}

fn load_examples(path: &Path, kind: DatasetKind, vocab: &mut Vocabulary) -> Result<Vec<Example>> {
    match kind {
        DatasetKind::Babi => babi::load_babi(path, vocab),
        _ => read_jsonl(path, kind, vocab),
    }
}

fn train(a: TrainArgs) -> Result<()> {
    let arch = Arch::parse(&a.model)
        .ok_or_else(|| Error::argument(format!("unknown model {:?}", a.model)))?;
    let mut cfg = TrainConfig::new(arch);
    cfg.seed = default_seed();
    if let Some(path) = &a.config {
        let text = std::fs::read_to_string(path)?;
        cfg.apply_file(&text)?;
    }
    macro_rules! flag {
        ($field:ident) => {
            if let Some(v) = a.$field {
                cfg.$field = v;
            }
        };
    }
    flag!(invariants);
    if a.train_size.is_some() {
        cfg.train_size = a.train_size;
    }
    flag!(iters);
    flag!(epochs);
    flag!(pretrain_epochs);
    flag!(lr);
    flag!(tau);
    flag!(lambda_k);
    flag!(lambda_i);
    flag!(batch);
    flag!(weight_decay);
    flag!(dropout);
    flag!(j_iterations);
    flag!(d);
    flag!(log_every);
    flag!(aux_mse);
    flag!(seed);
    if a.strong {
        cfg.strong = true;
    }
    if let Some(pm) = &a.pick_mode {
        cfg.pick_mode = softuni_core::data::PickMode::parse(pm)
            .ok_or_else(|| Error::argument(format!("unknown pick mode {pm:?}")))?;
    }

    let kind = match &a.dataset {
        Some(d) => parse_kind(d)?,
        None => kind_for_model(arch),
    };
    let mut vocab = Vocabulary::new();
    let mut examples = load_examples(&a.data, kind, &mut vocab)?;
    if let Some(task) = &a.task {
        examples.retain(|e| &e.task == task);
        if examples.is_empty() {
            return Err(Error::argument(format!("no examples for task {task:?}")));
        }
    }
    let val_fraction = a
        .val_fraction
        .unwrap_or(if matches!(arch, Arch::Umn) { 0.1 } else { 0.0 });
    let splits: Splits = match &a.test_data {
        Some(test_path) => {
            let test = load_examples(test_path, kind, &mut vocab)?;
            runner::file_splits(examples, test, cfg.train_size, val_fraction, cfg.seed)
        }
        None => fold_splits(&examples, a.folds, a.fold, cfg.train_size, val_fraction, cfg.seed)?,
    };
    let pretrained = match &a.embeddings {
        Some(p) => Some(load_embeddings(p)?),
        None => None,
    };
    let artifacts = train_run(&cfg, &vocab, &splits, kind, pretrained.as_ref(), Some(&a.out))?;
    // Extraction artifacts round out the run directory.
    let records = extract_model_invariants(
        &artifacts.model,
        &artifacts.ps,
        &vocab,
        ExtractPolicy::MeanOfVariables,
        a.fold,
    )?;
    std::fs::write(a.out.join("invariants.json"), serde_json::to_string_pretty(&records)?)?;
    let positive = vocab.id(softuni_core::data::sentiment::POSITIVE).unwrap_or(usize::MAX);
    let test_acc = evaluate(&artifacts.model, &artifacts.ps, &splits.test, cfg.unified(), positive)?;
    println!("final test accuracy: {test_acc:.4}");
    if let (Some(e), Some(v)) = (artifacts.outcome.best_val_epoch, artifacts.outcome.best_val_accuracy) {
        println!("best validation {v:.4} at epoch {e}");
        if let Some(t) = artifacts.outcome.test_at_best {
            println!("test at best validation: {t:.4}");
        }
    }
    println!("run written to {}", a.out.display());
    Ok(())
}

fn load_model(path: &Path) -> Result<(AnyModel, softuni_core::params::ParamSet, Vocabulary, DatasetKind)> {
    let ckpt = Checkpoint::load(path)?;
    let kind = ckpt.dataset_kind;
    let (model, ps, vocab) = AnyModel::from_checkpoint(&ckpt)?;
    Ok((model, ps, vocab, kind))
}

fn eval(a: EvalArgs) -> Result<()> {
    let (model, ps, mut vocab, kind) = load_model(&a.checkpoint)?;
    let examples = load_examples(&a.data, kind, &mut vocab)?;
    let subset: Vec<Example> = match a.split.as_str() {
        "all" => examples,
        "test-fold" => {
            let seed = a.seed.unwrap_or_else(default_seed);
            let splits = fold_splits(&examples, a.folds, a.fold, None, 0.0, seed)?;
            splits.test
        }
        other => return Err(Error::argument(format!("unknown split {other:?}"))),
    };
    if subset.is_empty() {
        return Err(Error::argument("no examples in the requested split".to_string()));
    }
    let positive = vocab.id(softuni_core::data::sentiment::POSITIVE).unwrap_or(usize::MAX);
    let acc = evaluate(&model, &ps, &subset, true, positive)?;
    println!("examples: {}", subset.len());
    println!("accuracy: {acc:.4}");
    println!("error rate: {:.2}%", (1.0 - acc) * 100.0);
    Ok(())
}

fn extract(a: ExtractArgs) -> Result<()> {
    let policy = ExtractPolicy::parse(&a.policy)
        .ok_or_else(|| Error::argument(format!("unknown policy {:?} (mean | fixed:<t>)", a.policy)))?;
    let (model, ps, vocab, _) = load_model(&a.checkpoint)?;
    let records = extract_model_invariants(&model, &ps, &vocab, policy, a.fold)?;
    std::fs::write(&a.out, serde_json::to_string_pretty(&records)?)?;
    for r in &records {
        let inv = softuni_core::analysis::SymbolicInvariant {
            tokens: r.tokens.clone(),
            psi: r.psi.clone(),
            flags: r.flags.clone(),
            threshold: r.threshold,
        };
        let class = r
            .match_class
            .map(|c| format!(" [{}]", c.name()))
            .unwrap_or_default();
        println!("{}{}:\n{}", r.task, class, inv.render());
    }
    println!("wrote {}", a.out.display());
    Ok(())
}

fn trace(a: TraceArgs) -> Result<()> {
    let (model, ps, mut vocab, kind) = load_model(&a.checkpoint)?;
    let examples = load_examples(&a.data, kind, &mut vocab)?;
    let example = examples
        .get(a.example_index)
        .ok_or_else(|| Error::argument(format!("example index {} out of range", a.example_index)))?;
    let trace = model.trace(&ps, example, a.invariant)?;
    // Row tokens come from the invariant side, columns from the example.
    let groups = model.invariant_examples();
    let inv_example = groups
        .iter()
        .flat_map(|g| g.iter())
        .nth(a.invariant)
        .ok_or_else(|| Error::argument(format!("invariant {} not present", a.invariant)))?;
    let tokens_of = |e: &Example, rows: usize| -> Result<Vec<String>> {
        let flat: Vec<usize> = match &e.context {
            softuni_core::data::Context::Sentences(s) => s.iter().flatten().copied().collect(),
            softuni_core::data::Context::Grid(_) => e.context.grid_flat().unwrap().to_vec(),
        };
        flat.iter()
            .take(rows)
            .map(|&id| vocab.token(id).map(String::from))
            .collect()
    };
    let rows = trace.p.shape()[0];
    let cols = trace.p.shape()[1];
    let row_tokens = tokens_of(inv_example, rows)?;
    let col_tokens = tokens_of(example, cols)?;
    let doc = attention_export(&trace, &row_tokens, &col_tokens)?;
    if let Some(parent) = a.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(&a.out, serde_json::to_string_pretty(&doc)?)?;
    println!("binding classification: {:?}", doc.classification);
    println!("wrote {}", a.out.display());
    Ok(())
}

fn selfcheck(a: SelfcheckArgs) -> Result<()> {
    let seed = a.seed.unwrap_or_else(default_seed);
    let report = softuni_core::harness::selfcheck::run_selfcheck(seed)?;
    let mut failed = 0;
    for line in &report.lines {
        println!("{line}");
    }
    for (name, err, tol) in &report.checks {
        let ok = err < tol;
        if !ok {
            failed += 1;
        }
        println!("{} {name}: max rel err {err:.2e} (tolerance {tol:.0e})", if ok { "ok " } else { "FAIL" });
    }
    if failed > 0 {
        return Err(Error::argument(format!("{failed} gradient checks failed")));
    }
    println!("all gradient checks passed");
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    if a.runs.is_empty() {
        return Err(Error::argument("at least one --runs directory required".to_string()));
    }
    let mut metrics_runs = Vec::new();
    let mut invariants: Vec<InvariantRecord> = Vec::new();
    for dir in &a.runs {
        let m = dir.join("metrics.csv");
        if !m.exists() {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("{} has no metrics.csv", dir.display()),
            )));
        }
        metrics_runs.push(parse_metrics_csv(&std::fs::read_to_string(m)?)?);
        let inv = dir.join("invariants.json");
        if inv.exists() {
            let recs: Vec<InvariantRecord> = serde_json::from_str(&std::fs::read_to_string(inv)?)?;
            invariants.extend(recs);
        }
    }
    let summary = analysis::report(&metrics_runs, &invariants);
    print!("{}", analysis::render_report(&summary));
    if let Some(out) = &a.out {
        std::fs::write(out, analysis::report_csv(&summary))?;
        println!("wrote {}", out.display());
    }
    Ok(())
}
