use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const EOS: &str = "<eos>";
/// Placeholder a frame embedding replaces.
pub const IMAGE: &str = "<image>";
pub const ZERO: &str = "0";
pub const ONE: &str = "1";

const SPECIALS: [&str; 6] = [PAD, UNK, EOS, IMAGE, ZERO, ONE];

/// Word-level vocabulary. Ids 0..6 are the fixed special tokens, followed by
/// corpus words in sorted order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self { tokens, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    /// Vocabulary over every whitespace-separated word of `texts`.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let words: BTreeSet<&str> = texts
            .into_iter()
            .flat_map(str::split_whitespace)
            .filter(|w| !SPECIALS.contains(w))
            .collect();
        let tokens: Vec<String> = SPECIALS
            .iter()
            .copied()
            .chain(words)
            .map(String::from)
            .collect();
        tokens.into()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in SPECIALS.iter().enumerate() {
            if self.tokens.get(i).map(String::as_str) != Some(s) {
                return Err(Error::invalid(format!("vocab slot {i} must be {s:?}")));
            }
        }
        if self.index.len() != self.tokens.len() {
            return Err(Error::invalid("vocab has duplicate tokens"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(1)
    }

    pub fn token(&self, id: u32) -> &str {
        self.tokens.get(id as usize).map(String::as_str).unwrap_or(UNK)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn eos(&self) -> u32 {
        2
    }

    pub fn image(&self) -> u32 {
        3
    }

    pub fn zero(&self) -> u32 {
        4
    }

    pub fn one(&self) -> u32 {
        5
    }

    /// Render generated ids, dropping EOS and everything after it.
    pub fn detokenize(&self, ids: &[u32]) -> String {
        ids.iter()
            .take_while(|&&i| i != self.eos())
            .map(|&i| self.token(i))
            .collect::<Vec<_>>()
            .concat()
    }
}
