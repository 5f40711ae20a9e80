//! Symbol vocabulary: a bijection between token strings and dense ids.
//! Id 0 is reserved for padding/background and renders as "0".

use super::SymbolId;
use crate::error::{Error, Result};
use std::collections::HashMap;

#[derive(Clone, Debug, Default)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, SymbolId>,
}

pub const PAD: SymbolId = 0;
pub const PAD_TOKEN: &str = "0";

impl Vocabulary {
    pub fn new() -> Self {
        let mut v = Vocabulary { tokens: Vec::new(), index: HashMap::new() };
        v.tokens.push(PAD_TOKEN.to_string());
        v.index.insert(PAD_TOKEN.to_string(), PAD);
        v
    }

    /// Id of `tok`, inserting it when unseen.
    pub fn intern(&mut self, tok: &str) -> SymbolId {
        if let Some(&id) = self.index.get(tok) {
            return id;
        }
        let id = self.tokens.len();
        self.tokens.push(tok.to_string());
        self.index.insert(tok.to_string(), id);
        id
    }

    pub fn id(&self, tok: &str) -> Option<SymbolId> {
        self.index.get(tok).copied()
    }

    pub fn require(&self, tok: &str) -> Result<SymbolId> {
        self.id(tok).ok_or_else(|| Error::vocab(format!("unknown symbol {tok:?}")))
    }

    pub fn token(&self, id: SymbolId) -> Result<&str> {
        self.tokens
            .get(id)
            .map(|s| s.as_str())
            .ok_or_else(|| Error::vocab(format!("symbol id {id} out of range")))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn from_tokens(tokens: &[String]) -> Result<Self> {
        if tokens.first().map(|t| t.as_str()) != Some(PAD_TOKEN) {
            return Err(Error::vocab("vocabulary must start with the padding token \"0\"".to_string()));
        }
        let mut v = Vocabulary::new();
        for t in &tokens[1..] {
            if v.index.contains_key(t) {
                return Err(Error::vocab(format!("duplicate token {t:?}")));
            }
            v.intern(t);
        }
        Ok(v)
    }
}
