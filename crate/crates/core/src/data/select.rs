//! Duplicate removal, k-fold splits, and invariant selection.

use super::Example;
use crate::error::{Error, Result};
use crate::rng::Stream;
use std::collections::HashSet;

/// Remove duplicates by (context, query), keeping the first occurrence.
pub fn dedup(examples: Vec<Example>) -> Vec<Example> {
    let mut seen = HashSet::new();
    examples.into_iter().filter(|e| seen.insert(e.dedup_key())).collect()
}

/// Disjoint folds covering 0..n whose sizes differ by at most one,
/// assignment shuffled by the stream.
pub fn kfold_split(n: usize, k: usize, stream: &mut Stream) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::argument(format!("k = {k} must be >= 2")));
    }
    if n < k {
        return Err(Error::argument(format!("{n} examples cannot fill {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    stream.shuffle(&mut order);
    let mut folds = vec![Vec::with_capacity(n / k + 1); k];
    for (i, idx) in order.into_iter().enumerate() {
        folds[i % k].push(idx);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PickMode {
    Random,
    /// Greedy farthest-point selection under cosine similarity of
    /// bag-of-words query vectors; the first pick is random.
    Dissimilar,
}

impl PickMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "random" => Some(PickMode::Random),
            "dissimilar" => Some(PickMode::Dissimilar),
            _ => None,
        }
    }
}

fn bow(example: &Example) -> std::collections::HashMap<usize, f64> {
    let mut m = std::collections::HashMap::new();
    for &t in &example.query {
        *m.entry(t).or_insert(0.0) += 1.0;
    }
    m
}

fn cosine(a: &std::collections::HashMap<usize, f64>, b: &std::collections::HashMap<usize, f64>) -> f64 {
    let dot: f64 = a.iter().filter_map(|(k, v)| b.get(k).map(|w| v * w)).sum();
    let na: f64 = a.values().map(|v| v * v).sum::<f64>().sqrt();
    let nb: f64 = b.values().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na * nb)
}

/// Indices of `n` examples to lift into invariants.
pub fn pick_invariants(
    examples: &[Example],
    n: usize,
    mode: PickMode,
    stream: &mut Stream,
) -> Result<Vec<usize>> {
    if n > examples.len() {
        return Err(Error::argument(format!(
            "cannot pick {n} invariants from {} examples",
            examples.len()
        )));
    }
    if n == 0 {
        return Err(Error::argument("invariant count must be >= 1"));
    }
    match mode {
        PickMode::Random => Ok(stream.sample_indices(examples.len(), n)),
        PickMode::Dissimilar => {
            let bows: Vec<_> = examples.iter().map(bow).collect();
            let mut chosen = vec![stream.below(examples.len())];
            while chosen.len() < n {
                // Most dissimilar to the closest already-chosen question.
                let next = (0..examples.len())
                    .filter(|i| !chosen.contains(i))
                    .map(|i| {
                        let worst = chosen
                            .iter()
                            .map(|&c| cosine(&bows[i], &bows[c]))
                            .fold(f64::NEG_INFINITY, f64::max);
                        (i, worst)
                    })
                    .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)))
                    .map(|(i, _)| i)
                    .expect("candidates remain");
                chosen.push(next);
            }
            Ok(chosen)
        }
    }
}
