//! Symbol set for labels, plus the CTC blank convention.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered symbol set. Class indices 0..V map to symbols; index V is the CTC
/// blank, which is deliberately not a symbol and never appears in labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Vocabulary {
    symbols: Vec<char>,
}

impl Vocabulary {
    pub fn new(symbols: &str) -> Result<Self> {
        let chars: Vec<char> = symbols.chars().collect();
        if chars.len() < 2 {
            return Err(Error::data(format!(
                "vocabulary needs at least 2 symbols, got {}",
                chars.len()
            )));
        }
        for (i, &c) in chars.iter().enumerate() {
            if c.is_control() {
                return Err(Error::data(format!(
                    "vocabulary symbol at position {i} is a control character"
                )));
            }
            if chars[..i].contains(&c) {
                return Err(Error::data(format!("duplicate vocabulary symbol {c:?}")));
            }
        }
        Ok(Vocabulary { symbols: chars })
    }

    /// The 26 lowercase ASCII letters; the default desk-scale vocabulary.
    pub fn lowercase_latin() -> Self {
        Vocabulary::new("abcdefghijklmnopqrstuvwxyz").expect("static vocab is valid")
    }

    /// Number of real symbols (V). Classes run 0..=V, blank last.
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Index of the blank class: always V, one past the last symbol.
    pub fn blank_index(&self) -> usize {
        self.symbols.len()
    }

    /// Total class count including blank (V + 1).
    pub fn n_classes(&self) -> usize {
        self.symbols.len() + 1
    }

    pub fn symbol(&self, index: usize) -> Option<char> {
        self.symbols.get(index).copied()
    }

    pub fn index_of(&self, c: char) -> Option<usize> {
        self.symbols.iter().position(|&s| s == c)
    }

    /// Encodes a label into class indices; any out-of-vocabulary character is
    /// an error (labels are contracts, not suggestions).
    pub fn encode(&self, label: &str) -> Result<Vec<usize>> {
        label
            .chars()
            .map(|c| {
                self.index_of(c)
                    .ok_or_else(|| Error::data(format!("label character {c:?} not in vocabulary")))
            })
            .collect()
    }

    /// Decodes class indices back into a string. Blank is not decodable.
    pub fn decode(&self, indices: &[usize]) -> Result<String> {
        indices
            .iter()
            .map(|&i| {
                self.symbol(i)
                    .ok_or_else(|| Error::data(format!("class index {i} out of range")))
            })
            .collect()
    }

    pub fn as_string(&self) -> String {
        self.symbols.iter().collect()
    }
}

impl TryFrom<String> for Vocabulary {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        Vocabulary::new(&s)
    }
}

impl From<Vocabulary> for String {
    fn from(v: Vocabulary) -> String {
        v.as_string()
    }
}
