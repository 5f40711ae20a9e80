//! Loader for the standard numbered-story text format: statement lines feed
//! a running story, question lines carry tab-separated answer and supporting
//! line numbers. Tokens are lower-cased; periods and question marks dropped.

use super::vocab::Vocabulary;
use super::{Context, Example, SymbolId};
use crate::error::{Error, Result};
use std::path::Path;

pub fn tokenize(line: &str) -> Vec<String> {
    line.to_lowercase()
        .replace(['.', '?'], " ")
        .split_whitespace()
        .map(|t| t.to_string())
        .collect()
}

/// Parse one bAbI-format file into examples. Stories reset when the line
/// number drops back to 1; each question snapshots the statements seen so far
/// in its story, with supporting line numbers remapped to statement indices.
pub fn load_babi(path: &Path, vocab: &mut Vocabulary) -> Result<Vec<Example>> {
    let text = std::fs::read_to_string(path)?;
    parse_babi(&text, vocab)
}

pub fn parse_babi(text: &str, vocab: &mut Vocabulary) -> Result<Vec<Example>> {
    let mut examples = Vec::new();
    let mut story: Vec<Vec<SymbolId>> = Vec::new();
    // Original line number of each statement -> its index in `story`.
    let mut line_to_slot: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    let mut last_no = 0usize;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let (no_str, rest) = raw.split_once(' ').ok_or_else(|| Error::Parse {
            line: line_no,
            msg: "expected \"<number> <text>\"".to_string(),
        })?;
        let no: usize = no_str.parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("bad line number {no_str:?}"),
        })?;
        if no == 1 || no <= last_no {
            story.clear();
            line_to_slot.clear();
        }
        last_no = no;

        if rest.contains('\t') {
            // Question line: question \t answer [\t supports]
            let mut parts = rest.split('\t');
            let question = parts.next().unwrap_or("");
            let answer = parts.next().ok_or_else(|| Error::Parse {
                line: line_no,
                msg: "question line missing answer".to_string(),
            })?;
            let supports_str = parts.next().unwrap_or("").trim();
            let mut supports = Vec::new();
            if !supports_str.is_empty() {
                for tok in supports_str.split_whitespace() {
                    let n: usize = tok.parse().map_err(|_| Error::Parse {
                        line: line_no,
                        msg: format!("bad supporting line number {tok:?}"),
                    })?;
                    let slot = line_to_slot.get(&n).ok_or_else(|| Error::Parse {
                        line: line_no,
                        msg: format!("supporting line {n} not in story"),
                    })?;
                    supports.push(*slot);
                }
            }
            if story.is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "question before any story statement".to_string(),
                });
            }
            let query: Vec<SymbolId> = tokenize(question).iter().map(|t| vocab.intern(t)).collect();
            // Multi-word answers stay one unique symbol.
            let answer_sym = vocab.intern(answer.trim().to_lowercase().as_str());
            examples.push(Example {
                context: Context::Sentences(story.clone()),
                query,
                answer: answer_sym,
                supports: if supports.is_empty() { None } else { Some(supports) },
                task: "babi".to_string(),
            });
        } else {
            let toks = tokenize(rest);
            if toks.is_empty() {
                return Err(Error::Parse { line: line_no, msg: "empty statement".to_string() });
            }
            line_to_slot.insert(no, story.len());
            story.push(toks.iter().map(|t| vocab.intern(t)).collect());
        }
    }
    Ok(examples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_statement_story_with_question() {
        let text = "1 Mary went to the kitchen.\n2 Sandra journeyed to the garden.\n3 Where is Mary?\tkitchen\t1\n";
        let mut vocab = Vocabulary::new();
        let examples = parse_babi(text, &mut vocab).unwrap();
        assert_eq!(examples.len(), 1);
        let ex = &examples[0];
        assert_eq!(ex.context.sentences().unwrap().len(), 2);
        assert_eq!(ex.answer, vocab.id("kitchen").unwrap());
        assert_eq!(ex.supports, Some(vec![0]));
        let first: Vec<&str> = ex.context.sentences().unwrap()[0]
            .iter()
            .map(|&id| vocab.token(id).unwrap())
            .collect();
        assert_eq!(first, vec!["mary", "went", "to", "the", "kitchen"]);
    }

    #[test]
    fn empty_file_gives_empty_list() {
        let mut vocab = Vocabulary::new();
        assert!(parse_babi("", &mut vocab).unwrap().is_empty());
    }

    #[test]
    fn supports_map_past_question_lines() {
        // Line numbers include questions; supporting index 4 maps to the
        // third statement slot (index 2).
        let text = "1 John moved to the hallway.\n2 Mary went to the bathroom.\n3 Where is John?\thallway\t1\n4 John went to the office.\n5 Where is John?\toffice\t4\n";
        let mut vocab = Vocabulary::new();
        let examples = parse_babi(text, &mut vocab).unwrap();
        assert_eq!(examples.len(), 2);
        assert_eq!(examples[1].supports, Some(vec![2]));
        assert_eq!(examples[1].context.sentences().unwrap().len(), 3);
    }

    #[test]
    fn story_resets_on_line_one() {
        let text = "1 A b.\n2 Where is a?\tb\t1\n1 C d.\n2 Where is c?\td\t1\n";
        let mut vocab = Vocabulary::new();
        let examples = parse_babi(text, &mut vocab).unwrap();
        assert_eq!(examples[1].context.sentences().unwrap().len(), 1);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let mut vocab = Vocabulary::new();
        match parse_babi("1 ok line.\nnonsense\n", &mut vocab) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn multi_word_answer_is_single_symbol() {
        let text = "1 The path goes north then south.\n2 How do you go?\tn,s\t1\n";
        let mut vocab = Vocabulary::new();
        let examples = parse_babi(text, &mut vocab).unwrap();
        assert_eq!(examples[0].answer, vocab.id("n,s").unwrap());
    }
}
