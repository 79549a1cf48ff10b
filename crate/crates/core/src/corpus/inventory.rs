//! The 70-symbol phoneme inventory.

use std::collections::HashMap;
use std::path::Path;

use super::CorpusError;

/// 39 CMU phoneme types with vowel stress combinations (each treated as a
/// mono-phoneme) plus a reserved silence slot: 24 consonants + 15 vowels x 3
/// stress levels + SIL = 70. Index = position in the shipped list.
#[derive(Debug, Clone)]
pub struct PhonemeInventory {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

/// Shipped default list; one symbol per line, index = line number.
const DEFAULT_SYMBOLS: &str = include_str!("../../data/phonemes_70.txt");

impl PhonemeInventory {
    pub const SIZE: usize = 70;
    pub const SILENCE: &'static str = "SIL";

    /// The shipped CMU-derived inventory.
    pub fn cmu_stress() -> Self {
        Self::from_symbols(DEFAULT_SYMBOLS.lines().map(str::to_string).collect())
            .expect("shipped inventory is valid")
    }

    /// Loads an inventory file: one symbol per line.
    pub fn from_file(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_symbols(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_string)
                .collect(),
        )
    }

    pub fn from_symbols(symbols: Vec<String>) -> Result<Self, CorpusError> {
        if symbols.len() != Self::SIZE {
            return Err(CorpusError::InvalidInventory(format!(
                "expected {} symbols, got {}",
                Self::SIZE,
                symbols.len()
            )));
        }
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, s) in symbols.iter().enumerate() {
            if index.insert(s.clone(), i).is_some() {
                return Err(CorpusError::InvalidInventory(format!("duplicate symbol \"{s}\"")));
            }
        }
        Ok(Self { symbols, index })
    }

    pub fn symbol(&self, id: usize) -> &str {
        &self.symbols[id]
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.index.get(symbol).copied()
    }

    /// The reserved silence slot, if the inventory has one.
    pub fn silence(&self) -> Option<usize> {
        self.index_of(Self::SILENCE)
    }

    /// Vowel-class symbols carry a trailing stress digit (CMU convention);
    /// these act as syllable nuclei for speaking-rate measurement.
    pub fn is_vowel(&self, id: usize) -> bool {
        self.symbols[id].ends_with(|c: char| c.is_ascii_digit())
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    /// Serializes the list back out (one symbol per line).
    pub fn write_file(&self, path: &Path) -> Result<(), CorpusError> {
        let mut text = self.symbols.join("\n");
        text.push('\n');
        std::fs::write(path, text).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}
