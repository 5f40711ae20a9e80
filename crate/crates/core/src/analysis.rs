//! Invariant extraction by thresholding variableness, exact-match checking
//! against expected patterns, attention-map export, and report assembly.

use crate::data::grid::{LINES, TRIANGLES};
use crate::data::{Example, Vocabulary};
use crate::error::{Error, Result};
use crate::harness::MetricsRow;
use crate::unify::UnificationTrace;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Thresholded, human-readable invariant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolicInvariant {
    /// Tokens grouped per sentence, in example order.
    pub tokens: Vec<Vec<String>>,
    /// Per-position variableness, same grouping.
    pub psi: Vec<Vec<f64>>,
    /// Per-position variable flags: flag holds iff psi > threshold.
    pub flags: Vec<Vec<bool>>,
    pub threshold: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtractPolicy {
    /// Threshold at the mean variableness of the candidate variables
    /// (those above the global mean).
    MeanOfVariables,
    Fixed(f64),
}

impl ExtractPolicy {
    pub fn parse(s: &str) -> Option<Self> {
        if s == "mean" {
            return Some(ExtractPolicy::MeanOfVariables);
        }
        s.strip_prefix("fixed:").and_then(|t| t.parse().ok().map(ExtractPolicy::Fixed))
    }
}

/// Lift per-position variableness into variable flags.
pub fn extract_invariant(
    tokens: Vec<Vec<String>>,
    psi: Vec<Vec<f64>>,
    policy: ExtractPolicy,
) -> Result<SymbolicInvariant> {
    if tokens.len() != psi.len()
        || tokens.iter().zip(&psi).any(|(t, p)| t.len() != p.len())
    {
        return Err(Error::argument("token and psi shapes differ".to_string()));
    }
    let flat: Vec<f64> = psi.iter().flatten().copied().collect();
    if flat.is_empty() {
        return Err(Error::argument("empty invariant".to_string()));
    }
    let threshold = match policy {
        ExtractPolicy::Fixed(t) => t,
        ExtractPolicy::MeanOfVariables => {
            let mean = flat.iter().sum::<f64>() / flat.len() as f64;
            let candidates: Vec<f64> = flat.iter().copied().filter(|&v| v > mean + 0.01).collect();
            if candidates.is_empty() {
                // No candidate variables: a threshold no psi can exceed.
                1.0
            } else {
                // Nudge below the candidate mean so values at the mean flag.
                candidates.iter().sum::<f64>() / candidates.len() as f64 - 1e-9
            }
        }
    };
    let flags: Vec<Vec<bool>> =
        psi.iter().map(|row| row.iter().map(|&v| v > threshold).collect()).collect();
    Ok(SymbolicInvariant { tokens, psi, flags, threshold })
}

impl SymbolicInvariant {
    pub fn flat_tokens(&self) -> Vec<&str> {
        self.tokens.iter().flatten().map(|s| s.as_str()).collect()
    }

    pub fn flat_flags(&self) -> Vec<bool> {
        self.flags.iter().flatten().copied().collect()
    }

    pub fn variable_count(&self) -> usize {
        self.flat_flags().iter().filter(|&&f| f).count()
    }

    /// Text rendering: variables carry a "V-" prefix, every token its psi;
    /// sentences separated by " | ".
    pub fn render(&self) -> String {
        let mut out = format!("threshold={}\n", self.threshold);
        let body: Vec<String> = self
            .tokens
            .iter()
            .zip(&self.psi)
            .zip(&self.flags)
            .map(|((toks, psis), flags)| {
                toks.iter()
                    .zip(psis)
                    .zip(flags)
                    .map(|((t, p), f)| {
                        if *f {
                            format!("V-{t}({p})")
                        } else {
                            format!("{t}({p})")
                        }
                    })
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        out.push_str(&body.join(" | "));
        out.push('\n');
        out
    }

    pub fn parse(text: &str) -> Result<SymbolicInvariant> {
        let mut lines = text.lines();
        let head = lines.next().ok_or_else(|| Error::Parse { line: 1, msg: "empty invariant".into() })?;
        let threshold: f64 = head
            .strip_prefix("threshold=")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Parse { line: 1, msg: "expected threshold=<value>".into() })?;
        let body = lines.next().unwrap_or("");
        let mut tokens = Vec::new();
        let mut psi = Vec::new();
        let mut flags = Vec::new();
        for sent in body.split(" | ") {
            let mut ts = Vec::new();
            let mut ps = Vec::new();
            let mut fs = Vec::new();
            for item in sent.split_whitespace() {
                let (item, flagged) = match item.strip_prefix("V-") {
                    Some(rest) => (rest, true),
                    None => (item, false),
                };
                let open = item.rfind('(').ok_or_else(|| Error::Parse {
                    line: 2,
                    msg: format!("token {item:?} missing psi"),
                })?;
                let tok = &item[..open];
                let val: f64 = item[open + 1..]
                    .strip_suffix(')')
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::Parse { line: 2, msg: format!("bad psi in {item:?}") })?;
                ts.push(tok.to_string());
                ps.push(val);
                fs.push(flagged);
            }
            if !ts.is_empty() {
                tokens.push(ts);
                psi.push(ps);
                flags.push(fs);
            }
        }
        Ok(SymbolicInvariant { tokens, psi, flags, threshold })
    }
}

// ── Expected patterns and matching ─────────────────────────────────────

#[derive(Clone, Debug, PartialEq)]
pub enum Slot {
    Literal(String),
    Wildcard,
    Variable,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpectedPattern {
    pub slots: Vec<Slot>,
}

impl ExpectedPattern {
    /// Text form: "V _ _ 8" style, one token per slot.
    pub fn parse(text: &str) -> ExpectedPattern {
        let slots = text
            .split_whitespace()
            .map(|t| match t {
                "V" => Slot::Variable,
                "_" => Slot::Wildcard,
                lit => Slot::Literal(lit.to_string()),
            })
            .collect();
        ExpectedPattern { slots }
    }

    pub fn of_invariant(inv: &SymbolicInvariant) -> ExpectedPattern {
        let slots = inv
            .flat_tokens()
            .iter()
            .zip(inv.flat_flags())
            .map(|(t, f)| if f { Slot::Variable } else { Slot::Literal(t.to_string()) })
            .collect();
        ExpectedPattern { slots }
    }

    pub fn render(&self) -> String {
        self.slots
            .iter()
            .map(|s| match s {
                Slot::Variable => "V".to_string(),
                Slot::Wildcard => "_".to_string(),
                Slot::Literal(l) => l.clone(),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchClass {
    Exact,
    ExtraVars,
    MissingVars,
    Mismatch,
}

impl MatchClass {
    pub fn name(&self) -> &'static str {
        match self {
            MatchClass::Exact => "exact",
            MatchClass::ExtraVars => "extra-vars",
            MatchClass::MissingVars => "missing-vars",
            MatchClass::Mismatch => "mismatch",
        }
    }
}

/// Classify the learnt flags against an expected pattern.
pub fn match_invariant(got: &SymbolicInvariant, want: &ExpectedPattern) -> Result<MatchClass> {
    let tokens = got.flat_tokens();
    let flags = got.flat_flags();
    if tokens.len() != want.slots.len() {
        return Err(Error::argument(format!(
            "pattern arity {} does not match invariant arity {}",
            want.slots.len(),
            tokens.len()
        )));
    }
    let mut literal_ok = true;
    let mut missing = false;
    let mut extra = false;
    for ((tok, flag), slot) in tokens.iter().zip(&flags).zip(&want.slots) {
        match slot {
            Slot::Variable => {
                if !flag {
                    missing = true;
                }
            }
            Slot::Wildcard => {
                if *flag {
                    extra = true;
                }
            }
            Slot::Literal(lit) => {
                if tok != lit {
                    literal_ok = false;
                }
                if *flag {
                    extra = true;
                }
            }
        }
    }
    Ok(if !literal_ok {
        MatchClass::Mismatch
    } else if missing && extra {
        MatchClass::Mismatch
    } else if extra {
        MatchClass::ExtraVars
    } else if missing {
        MatchClass::MissingVars
    } else {
        MatchClass::Exact
    })
}

/// The task-defined expected pattern for a generated example, when the task
/// has one. Duplicate positions are per-example since a vocabulary-level
/// variableness cannot distinguish positions of one symbol.
pub fn expected_pattern(example: &Example, vocab: &Vocabulary) -> Option<ExpectedPattern> {
    match example.task.as_str() {
        "const" => Some(ExpectedPattern { slots: vec![Slot::Wildcard; 4] }),
        // Variableness is a property of the symbol, not the position, so the
        // expected pattern marks every position holding the answer symbol
        // (almost always just the head/tail position itself).
        "head" if example.context.sentences().is_some() => {
            let seq = &example.context.sentences()?[0];
            let slots = seq
                .iter()
                .map(|&s| if s == seq[0] { Slot::Variable } else { Slot::Wildcard })
                .collect();
            Some(ExpectedPattern { slots })
        }
        "tail" => {
            let seq = &example.context.sentences()?[0];
            let last = *seq.last()?;
            let slots = seq
                .iter()
                .map(|&s| if s == last { Slot::Variable } else { Slot::Wildcard })
                .collect();
            Some(ExpectedPattern { slots })
        }
        "dup" => {
            let seq = &example.context.sentences()?[0];
            let dup_positions: Vec<usize> =
                (0..seq.len()).filter(|&i| seq.iter().filter(|&&s| s == seq[i]).count() == 2).collect();
            let mut slots = vec![Slot::Wildcard; seq.len()];
            for p in dup_positions {
                slots[p] = Slot::Variable;
            }
            Some(ExpectedPattern { slots })
        }
        "box" => {
            let grid = example.context.grid_flat()?;
            let answer = example.answer;
            let slots = grid
                .iter()
                .map(|&c| if c == answer { Slot::Variable } else { Slot::Wildcard })
                .collect();
            Some(ExpectedPattern { slots })
        }
        "centre" => {
            let mut slots = vec![Slot::Wildcard; 9];
            slots[4] = Slot::Variable;
            Some(ExpectedPattern { slots })
        }
        "head" => None,
        "corner" => {
            let grid = example.context.grid_flat()?;
            let answer_tok = vocab.token(example.answer).ok()?;
            let tri = TRIANGLES.iter().find(|t| {
                t.iter().all(|&(r, c)| grid[r * 3 + c] != 0)
                    && vocab.token(grid[t[0].0 * 3 + t[0].1]).ok() == Some(answer_tok)
            })?;
            let mut slots = vec![Slot::Wildcard; 9];
            slots[tri[0].0 * 3 + tri[0].1] = Slot::Variable;
            Some(ExpectedPattern { slots })
        }
        _ => None,
    }
}

/// Grid-head needs the full grid to find its unique line; handled apart from
/// the sequence "head" task above.
pub fn expected_grid_head_pattern(example: &Example) -> Option<ExpectedPattern> {
    let grid = example.context.grid_flat()?;
    let full: Vec<&[(usize, usize); 3]> =
        LINES.iter().filter(|l| l.iter().all(|&(r, c)| grid[r * 3 + c] != 0)).collect();
    if full.len() != 1 {
        return None;
    }
    let mut slots = vec![Slot::Wildcard; 9];
    let (r, c) = full[0][0];
    slots[r * 3 + c] = Slot::Variable;
    Some(ExpectedPattern { slots })
}

/// Expected pattern dispatch covering the grid/sequence name collision on
/// "head".
pub fn expected_pattern_for(example: &Example, vocab: &Vocabulary) -> Option<ExpectedPattern> {
    if example.task == "head" && example.context.grid().is_some() {
        expected_grid_head_pattern(example)
    } else {
        expected_pattern(example, vocab)
    }
}

// ── Attention export ───────────────────────────────────────────────────

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BindingClass {
    OneToOne,
    OneToMany,
    ManyToOne,
}

#[derive(Serialize, Deserialize)]
pub struct AttentionRow {
    pub token: String,
    pub psi: f64,
}

#[derive(Serialize, Deserialize)]
pub struct AttentionExport {
    pub rows: Vec<AttentionRow>,
    pub cols: Vec<String>,
    pub p: Vec<Vec<f64>>,
    pub classification: BindingClass,
}

/// Secondary attention mass above this fraction counts as a second binding.
const SECONDARY_MASS: f64 = 0.25;

/// Classify the binding structure of variable rows by their argmax columns.
pub fn classify_bindings(p: &[Vec<f64>], variable_rows: &[usize]) -> BindingClass {
    let rows: Vec<usize> = if variable_rows.is_empty() {
        (0..p.len()).collect()
    } else {
        variable_rows.to_vec()
    };
    let argmaxes: Vec<usize> = rows.iter().map(|&r| crate::models::argmax(&p[r])).collect();
    let mut seen = std::collections::HashSet::new();
    for &a in &argmaxes {
        if !seen.insert(a) {
            return BindingClass::ManyToOne;
        }
    }
    for &r in &rows {
        let heavy = p[r].iter().filter(|&&v| v >= SECONDARY_MASS).count();
        if heavy >= 2 {
            return BindingClass::OneToMany;
        }
    }
    BindingClass::OneToOne
}

/// Build the exportable attention document for one unify trace.
pub fn attention_export(
    trace: &UnificationTrace,
    row_tokens: &[String],
    col_tokens: &[String],
) -> Result<AttentionExport> {
    let shape = trace.p.shape().to_vec();
    if shape.len() != 2 || shape[0] != row_tokens.len() || shape[1] != col_tokens.len() {
        return Err(Error::shape(format!(
            "attention {:?} does not match {} rows x {} cols",
            shape,
            row_tokens.len(),
            col_tokens.len()
        )));
    }
    let p: Vec<Vec<f64>> = (0..shape[0])
        .map(|r| trace.p.data()[r * shape[1]..(r + 1) * shape[1]].to_vec())
        .collect();
    let inv = extract_invariant(
        vec![row_tokens.to_vec()],
        vec![trace.psi.clone()],
        ExtractPolicy::MeanOfVariables,
    )?;
    let variable_rows: Vec<usize> =
        inv.flat_flags().iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i).collect();
    Ok(AttentionExport {
        rows: row_tokens
            .iter()
            .zip(&trace.psi)
            .map(|(t, &v)| AttentionRow { token: t.clone(), psi: v })
            .collect(),
        cols: col_tokens.to_vec(),
        p,
        classification: classify_bindings(
            &(0..shape[0])
                .map(|r| trace.p.data()[r * shape[1]..(r + 1) * shape[1]].to_vec())
                .collect::<Vec<_>>(),
            &variable_rows,
        ),
    })
}

pub fn export_attention(
    trace: &UnificationTrace,
    row_tokens: &[String],
    col_tokens: &[String],
    path: &std::path::Path,
) -> Result<AttentionExport> {
    let doc = attention_export(trace, row_tokens, col_tokens)?;
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(f, &doc)?;
    Ok(doc)
}

// ── Report assembly ────────────────────────────────────────────────────

/// One extracted invariant on disk (invariants.json holds a list of these).
#[derive(Serialize, Deserialize, Clone)]
pub struct InvariantRecord {
    pub task: String,
    pub fold: usize,
    pub tokens: Vec<Vec<String>>,
    pub psi: Vec<Vec<f64>>,
    pub flags: Vec<Vec<bool>>,
    pub threshold: f64,
    pub match_class: Option<MatchClass>,
}

/// Extract every invariant of a trained model into symbolic form, matching
/// against the task's expected pattern when the task defines one.
pub fn extract_model_invariants(
    model: &crate::models::AnyModel,
    ps: &crate::params::ParamSet,
    vocab: &Vocabulary,
    policy: ExtractPolicy,
    fold: usize,
) -> Result<Vec<InvariantRecord>> {
    use crate::models::AnyModel;
    let mut out = Vec::new();
    let mut push = |example: &Example, psi_of: &dyn Fn(crate::data::SymbolId) -> Result<f64>| -> Result<()> {
        let sentences: Vec<Vec<crate::data::SymbolId>> = match &example.context {
            crate::data::Context::Sentences(s) => s.clone(),
            crate::data::Context::Grid(_) => {
                let flat = example.context.grid_flat().expect("grid");
                flat.chunks(3).map(|r| r.to_vec()).collect()
            }
        };
        let mut tokens = Vec::with_capacity(sentences.len());
        let mut psi = Vec::with_capacity(sentences.len());
        for sent in &sentences {
            tokens.push(
                sent.iter().map(|&id| vocab.token(id).map(String::from)).collect::<Result<Vec<_>>>()?,
            );
            psi.push(sent.iter().map(|&id| psi_of(id)).collect::<Result<Vec<_>>>()?);
        }
        let inv = extract_invariant(tokens, psi, policy)?;
        let match_class = expected_pattern_for(example, vocab)
            .map(|want| match_invariant(&inv, &want))
            .transpose()?;
        out.push(InvariantRecord {
            task: example.task.clone(),
            fold,
            tokens: inv.tokens,
            psi: inv.psi,
            flags: inv.flags,
            threshold: inv.threshold,
            match_class,
        });
        Ok(())
    };

    match model {
        AnyModel::Umlp(m) => {
            for group in &m.invariants {
                for inv in group {
                    push(&inv.example, &|id| inv.variableness(ps, id))?;
                }
            }
        }
        AnyModel::Ucnn(m) => {
            for group in &m.invariants {
                for inv in group {
                    push(&inv.example, &|id| inv.variableness(ps, id))?;
                }
            }
        }
        AnyModel::Urnn(m) => {
            for inv in &m.invariants {
                push(&inv.example, &|id| m.variableness(ps, id))?;
            }
        }
        AnyModel::Umn(m) => {
            for inv in &m.invariants {
                push(&inv.example, &|id| inv.variableness(ps, id))?;
            }
        }
    }
    Ok(out)
}

pub struct ReportSummary {
    /// Task -> error rates (%) across runs, best-validation epoch when a
    /// validation split exists, final iteration otherwise.
    pub per_task_errors: BTreeMap<String, Vec<f64>>,
    pub mean_error: f64,
    pub over_five: usize,
    pub invariant_exact: usize,
    pub invariant_total: usize,
}

fn run_task_error(rows: &[MetricsRow], task: &str) -> Option<f64> {
    let has_val = rows.iter().any(|r| r.split == "val");
    let acc = if has_val {
        // Test accuracy at the iteration with the highest mean val accuracy.
        let mut by_iter: BTreeMap<usize, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for r in rows {
            let e = by_iter.entry(r.iteration).or_default();
            if r.split == "val" {
                e.0.push(r.accuracy);
            } else if r.split == "test" && r.task == task {
                e.1.push(r.accuracy);
            }
        }
        let best = by_iter
            .iter()
            .filter(|(_, (v, t))| !v.is_empty() && !t.is_empty())
            .max_by(|a, b| {
                let va = a.1 .0.iter().sum::<f64>() / a.1 .0.len() as f64;
                let vb = b.1 .0.iter().sum::<f64>() / b.1 .0.len() as f64;
                va.partial_cmp(&vb).unwrap().then(a.0.cmp(b.0))
            })?;
        let t = &best.1 .1;
        t.iter().sum::<f64>() / t.len() as f64
    } else {
        let last = rows
            .iter()
            .filter(|r| r.split == "test" && r.task == task)
            .max_by_key(|r| r.iteration)?;
        last.accuracy
    };
    Some((1.0 - acc) * 100.0)
}

pub fn report(metrics_runs: &[Vec<MetricsRow>], invariants: &[InvariantRecord]) -> ReportSummary {
    let mut per_task_errors: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for rows in metrics_runs {
        let mut tasks: Vec<String> =
            rows.iter().filter(|r| r.split == "test").map(|r| r.task.clone()).collect();
        tasks.sort();
        tasks.dedup();
        for task in tasks {
            if let Some(err) = run_task_error(rows, &task) {
                per_task_errors.entry(task).or_default().push(err);
            }
        }
    }
    let task_means: Vec<f64> = per_task_errors
        .values()
        .map(|v| v.iter().sum::<f64>() / v.len() as f64)
        .collect();
    let mean_error = if task_means.is_empty() {
        0.0
    } else {
        task_means.iter().sum::<f64>() / task_means.len() as f64
    };
    let over_five = task_means.iter().filter(|&&e| e > 5.0).count();
    let invariant_total = invariants.iter().filter(|r| r.match_class.is_some()).count();
    let invariant_exact = invariants
        .iter()
        .filter(|r| r.match_class == Some(MatchClass::Exact))
        .count();
    ReportSummary { per_task_errors, mean_error, over_five, invariant_exact, invariant_total }
}

pub fn render_report(s: &ReportSummary) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<16} {:>10} {:>6}\n", "task", "error(%)", "runs"));
    for (task, errs) in &s.per_task_errors {
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        out.push_str(&format!("{:<16} {:>10.2} {:>6}\n", task, mean, errs.len()));
    }
    out.push_str(&format!("mean error: {:.2}%\n", s.mean_error));
    out.push_str(&format!("tasks with error > 5%: {}\n", s.over_five));
    if s.invariant_total > 0 {
        out.push_str(&format!(
            "invariant exact matches: {}/{} ({:.1}%)\n",
            s.invariant_exact,
            s.invariant_total,
            100.0 * s.invariant_exact as f64 / s.invariant_total as f64
        ));
    }
    out
}

pub fn report_csv(s: &ReportSummary) -> String {
    let mut out = String::from("task,error_percent,runs\n");
    for (task, errs) in &s.per_task_errors {
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        out.push_str(&format!("{task},{mean},{}\n", errs.len()));
    }
    out.push_str(&format!("__mean__,{},\n", s.mean_error));
    out.push_str(&format!("__over5__,{},\n", s.over_five));
    if s.invariant_total > 0 {
        out.push_str(&format!(
            "__invariants__,{}/{},{}\n",
            s.invariant_exact,
            s.invariant_total,
            100.0 * s.invariant_exact as f64 / s.invariant_total as f64
        ));
    }
    out
}
