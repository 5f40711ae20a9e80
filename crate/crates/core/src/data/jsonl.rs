//! Dataset JSONL: one example per line with fields context, query, answer,
//! supports, task. Context and query hold token strings so files are
//! self-describing; ids are assigned by first occurrence on load.

use super::vocab::Vocabulary;
use super::{Context, DatasetKind, Example, SymbolId};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct RawExample {
    pub context: Vec<Vec<String>>,
    pub query: Vec<String>,
    pub answer: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub supports: Option<Vec<usize>>,
    pub task: String,
}

pub fn to_raw(ex: &Example, vocab: &Vocabulary) -> Result<RawExample> {
    let context = match &ex.context {
        Context::Sentences(ss) => ss
            .iter()
            .map(|s| s.iter().map(|&id| vocab.token(id).map(String::from)).collect())
            .collect::<Result<Vec<Vec<String>>>>()?,
        Context::Grid(grid) => grid
            .iter()
            .map(|row| row.iter().map(|&id| vocab.token(id).map(String::from)).collect())
            .collect::<Result<Vec<Vec<String>>>>()?,
    };
    Ok(RawExample {
        context,
        query: ex.query.iter().map(|&id| vocab.token(id).map(String::from)).collect::<Result<_>>()?,
        answer: vocab.token(ex.answer)?.to_string(),
        supports: ex.supports.clone(),
        task: ex.task.clone(),
    })
}

pub fn from_raw(raw: &RawExample, kind: DatasetKind, vocab: &mut Vocabulary) -> Result<Example> {
    let context = match kind {
        DatasetKind::Grid => {
            if raw.context.len() != 3 || raw.context.iter().any(|r| r.len() != 3) {
                return Err(Error::shape(format!("grid context must be 3x3, got {:?}", raw.context)));
            }
            let mut g = [[0usize; 3]; 3];
            for r in 0..3 {
                for c in 0..3 {
                    g[r][c] = vocab.intern(&raw.context[r][c]);
                }
            }
            Context::Grid(g)
        }
        _ => Context::Sentences(
            raw.context
                .iter()
                .map(|s| s.iter().map(|t| vocab.intern(t)).collect::<Vec<SymbolId>>())
                .collect(),
        ),
    };
    Ok(Example {
        context,
        query: raw.query.iter().map(|t| vocab.intern(t)).collect(),
        answer: vocab.intern(&raw.answer),
        supports: raw.supports.clone(),
        task: raw.task.clone(),
    })
}

pub fn write_jsonl(path: &Path, examples: &[Example], vocab: &Vocabulary) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for ex in examples {
        let raw = to_raw(ex, vocab)?;
        serde_json::to_writer(&mut f, &raw)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_jsonl(path: &Path, kind: DatasetKind, vocab: &mut Vocabulary) -> Result<Vec<Example>> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in f.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawExample = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push(from_raw(&raw, kind, vocab)?);
    }
    Ok(out)
}
