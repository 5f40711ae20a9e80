//! Datasets: generators for sequence, grid and logical-reasoning tasks with
//! certifying oracles, loaders for bAbI-format and sentiment files, splits,
//! dedup and invariant selection.

pub mod babi;
pub mod grid;
pub mod jsonl;
pub mod logic;
pub mod select;
pub mod sentiment;
pub mod sequences;
pub mod vocab;

pub use select::{dedup, kfold_split, pick_invariants, PickMode};
pub use vocab::Vocabulary;

use serde::{Deserialize, Serialize};

pub type SymbolId = usize;

/// Which family a dataset file belongs to; fixes the in-memory context shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Seq,
    Grid,
    Logic,
    Babi,
    Sentiment,
}

impl DatasetKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "seq" | "sequences" => Some(DatasetKind::Seq),
            "grid" => Some(DatasetKind::Grid),
            "logic" => Some(DatasetKind::Logic),
            "babi" => Some(DatasetKind::Babi),
            "sentiment" => Some(DatasetKind::Sentiment),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DatasetKind::Seq => "seq",
            DatasetKind::Grid => "grid",
            DatasetKind::Logic => "logic",
            DatasetKind::Babi => "babi",
            DatasetKind::Sentiment => "sentiment",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Context {
    /// One or more token sequences (stories are several, flat inputs one).
    Sentences(Vec<Vec<SymbolId>>),
    /// 3x3 symbol grid, 0 = background.
    Grid([[SymbolId; 3]; 3]),
}

impl Context {
    pub fn sentences(&self) -> Option<&Vec<Vec<SymbolId>>> {
        match self {
            Context::Sentences(s) => Some(s),
            Context::Grid(_) => None,
        }
    }

    pub fn grid(&self) -> Option<&[[SymbolId; 3]; 3]> {
        match self {
            Context::Grid(g) => Some(g),
            Context::Sentences(_) => None,
        }
    }

    /// Grid cells in reading order.
    pub fn grid_flat(&self) -> Option<[SymbolId; 9]> {
        self.grid().map(|g| {
            let mut out = [0; 9];
            for r in 0..3 {
                for c in 0..3 {
                    out[r * 3 + c] = g[r][c];
                }
            }
            out
        })
    }
}

/// One (context, query, answer) triple with optional supporting-fact indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub context: Context,
    pub query: Vec<SymbolId>,
    pub answer: SymbolId,
    pub supports: Option<Vec<usize>>,
    pub task: String,
}

impl Example {
    /// Key identifying a duplicate: same context and query.
    pub fn dedup_key(&self) -> (Context, Vec<SymbolId>) {
        (self.context.clone(), self.query.clone())
    }
}
