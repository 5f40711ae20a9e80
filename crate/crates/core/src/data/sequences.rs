//! Fixed-length sequence tasks: length-4 digit strings over symbols 1..8,
//! predicting a constant, the head, the tail, or the duplicated symbol.

use super::select::dedup;
use super::vocab::Vocabulary;
use super::{Context, Example, SymbolId};
use crate::error::{Error, Result};
use crate::rng::Stream;

pub const SEQ_LEN: usize = 4;
pub const NUM_SYMBOLS: usize = 8;
/// Answer of the constant task (the digit "2").
pub const CONST_ANSWER: &str = "2";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeqTask {
    Const,
    Head,
    Tail,
    Dup,
}

pub const SEQ_TASKS: [SeqTask; 4] = [SeqTask::Const, SeqTask::Head, SeqTask::Tail, SeqTask::Dup];

impl SeqTask {
    pub fn name(&self) -> &'static str {
        match self {
            SeqTask::Const => "const",
            SeqTask::Head => "head",
            SeqTask::Tail => "tail",
            SeqTask::Dup => "dup",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "const" | "constant" => Some(SeqTask::Const),
            "head" => Some(SeqTask::Head),
            "tail" => Some(SeqTask::Tail),
            "dup" | "duplicate" => Some(SeqTask::Dup),
            _ => None,
        }
    }
}

/// Ensure digits 1..=8 are interned at matching ids.
pub fn seq_vocab(vocab: &mut Vocabulary) {
    for d in 1..=NUM_SYMBOLS {
        vocab.intern(&d.to_string());
    }
}

/// The task's ground-truth answer for a digit sequence; an independent
/// counting/indexing oracle usable on any sequence.
pub fn seq_answer(digits: &[u8], task: SeqTask) -> Result<u8> {
    if digits.len() != SEQ_LEN {
        return Err(Error::argument(format!("sequence length {} != {}", digits.len(), SEQ_LEN)));
    }
    match task {
        SeqTask::Const => Ok(2),
        SeqTask::Head => Ok(digits[0]),
        SeqTask::Tail => Ok(digits[SEQ_LEN - 1]),
        SeqTask::Dup => {
            let mut counts = [0usize; NUM_SYMBOLS + 1];
            for &d in digits {
                counts[d as usize] += 1;
            }
            let twice: Vec<u8> =
                (1..=NUM_SYMBOLS as u8).filter(|&d| counts[d as usize] == 2).collect();
            if twice.len() == 1 && counts.iter().all(|&c| c <= 2) {
                Ok(twice[0])
            } else {
                Err(Error::argument(format!("not a duplicate sequence: {digits:?}")))
            }
        }
    }
}

fn random_sequence(stream: &mut Stream) -> Vec<u8> {
    (0..SEQ_LEN).map(|_| (stream.below(NUM_SYMBOLS) + 1) as u8).collect()
}

/// Exactly one symbol appears twice, the other two positions hold two further
/// distinct symbols.
fn random_dup_sequence(stream: &mut Stream) -> Vec<u8> {
    let dup = (stream.below(NUM_SYMBOLS) + 1) as u8;
    let mut others: Vec<u8> = (1..=NUM_SYMBOLS as u8).filter(|&d| d != dup).collect();
    stream.shuffle(&mut others);
    let mut seq = vec![dup, dup, others[0], others[1]];
    stream.shuffle(&mut seq);
    seq
}

fn to_example(digits: &[u8], task: SeqTask, answer: u8, vocab: &mut Vocabulary) -> Example {
    let context: Vec<SymbolId> = digits.iter().map(|d| vocab.intern(&d.to_string())).collect();
    let query = vec![vocab.intern(task.name())];
    Example {
        context: Context::Sentences(vec![context]),
        query,
        answer: vocab.intern(&answer.to_string()),
        supports: None,
        task: task.name().to_string(),
    }
}

/// Generate `n` random triples for a task and keep only the unique ones.
pub fn gen_sequences(
    task: SeqTask,
    n: usize,
    vocab: &mut Vocabulary,
    stream: &mut Stream,
) -> Result<Vec<Example>> {
    if n == 0 {
        return Err(Error::argument("n must be >= 1"));
    }
    seq_vocab(vocab);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let digits = match task {
            SeqTask::Dup => random_dup_sequence(stream),
            _ => random_sequence(stream),
        };
        let answer = seq_answer(&digits, task)?;
        out.push(to_example(&digits, task, answer, vocab));
    }
    Ok(dedup(out))
}
