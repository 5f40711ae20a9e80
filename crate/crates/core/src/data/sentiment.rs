//! Sentiment phrases: tab-separated "phrase<TAB>score" rows thresholded into
//! binary labels, plus a word-embedding text loader ("word v1 ... v300").

use super::vocab::Vocabulary;
use super::{Context, Example};
use crate::error::{Error, Result};
use std::collections::HashMap;
use std::path::Path;

pub const NEG_THRESHOLD: f64 = 0.1;
pub const POS_THRESHOLD: f64 = 0.9;
pub const MAX_WORDS: usize = 20;

pub const POSITIVE: &str = "positive";
pub const NEGATIVE: &str = "negative";
pub const QUERY_TOKEN: &str = "sentiment";

/// Load and threshold phrase/score rows. Rows with scores strictly between
/// the thresholds and phrases longer than `max_words` are discarded.
pub fn load_sentiment(path: &Path, vocab: &mut Vocabulary) -> Result<Vec<Example>> {
    let text = std::fs::read_to_string(path)?;
    parse_sentiment(&text, vocab, NEG_THRESHOLD, POS_THRESHOLD, MAX_WORDS)
}

pub fn parse_sentiment(
    text: &str,
    vocab: &mut Vocabulary,
    neg_threshold: f64,
    pos_threshold: f64,
    max_words: usize,
) -> Result<Vec<Example>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let (phrase, score_str) = raw.rsplit_once('\t').ok_or_else(|| Error::Parse {
            line: line_no,
            msg: "expected \"phrase<TAB>score\"".to_string(),
        })?;
        let score: f64 = score_str.trim().parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("unparsable score {score_str:?}"),
        })?;
        let label = if score <= neg_threshold {
            NEGATIVE
        } else if score >= pos_threshold {
            POSITIVE
        } else {
            continue;
        };
        let words: Vec<String> =
            phrase.to_lowercase().split_whitespace().map(|w| w.to_string()).collect();
        if words.is_empty() || words.len() > max_words {
            continue;
        }
        out.push(Example {
            context: Context::Sentences(vec![words.iter().map(|w| vocab.intern(w)).collect()]),
            query: vec![vocab.intern(QUERY_TOKEN)],
            answer: vocab.intern(label),
            supports: None,
            task: "sentiment".to_string(),
        });
    }
    Ok(out)
}

/// Parse an embedding text file: one word followed by its vector per line.
pub fn load_embeddings(path: &Path) -> Result<HashMap<String, Vec<f64>>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = HashMap::new();
    let mut dim = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let mut parts = raw.split_whitespace();
        let Some(word) = parts.next() else { continue };
        let vec: Vec<f64> = parts
            .map(|v| {
                v.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("bad embedding value {v:?}"),
                })
            })
            .collect::<Result<_>>()?;
        if vec.is_empty() {
            // Header lines like "400000 300" are skipped.
            continue;
        }
        match dim {
            None => dim = Some(vec.len()),
            Some(d) if d != vec.len() => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("embedding width {} != {}", vec.len(), d),
                })
            }
            _ => {}
        }
        out.insert(word.to_lowercase(), vec);
    }
    Ok(out)
}
