use std::collections::{BTreeMap, HashMap};

use crate::metrics::tokenize;

pub const START: usize = 0;
pub const END: usize = 1;
pub const PAD: usize = 2;
pub const UNK: usize = 3;

const RESERVED: [&str; 4] = ["<start>", "<end>", "<pad>", "<unk>"];

/// Word ↔ index map. Indices 0–3 are `<start>`, `<end>`, `<pad>`, `<unk>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Every token seen in `captions`, ordered by descending frequency and
    /// then lexicographically.
    pub fn build<S: AsRef<str>>(captions: &[S]) -> Self {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for c in captions {
            for tok in tokenize(c.as_ref()) {
                *counts.entry(tok).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Self::from_words(ranked.into_iter().map(|(w, _)| w))
    }

    /// Reserved tokens followed by `words` in the given order. Duplicates and
    /// reserved spellings are skipped.
    pub fn from_words<I: IntoIterator<Item = String>>(words: I) -> Self {
        let mut v = Self {
            words: Vec::new(),
            index: HashMap::new(),
        };
        for w in RESERVED.iter().map(|s| s.to_string()).chain(words) {
            if !v.index.contains_key(&w) {
                v.index.insert(w.clone(), v.words.len());
                v.words.push(w);
            }
        }
        v
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, index: usize) -> Option<&str> {
        self.words.get(index).map(String::as_str)
    }

    /// Non-reserved words in index order.
    pub fn content_words(&self) -> &[String] {
        &self.words[RESERVED.len()..]
    }

    /// Tokenized caption as indices, unknown words mapped to `<unk>`.
    pub fn encode(&self, caption: &str) -> Vec<usize> {
        tokenize(caption)
            .iter()
            .map(|t| self.index_of(t).unwrap_or(UNK))
            .collect()
    }

    /// `<start> tokens.. <end>`.
    pub fn frame(&self, tokens: &[usize]) -> Vec<usize> {
        let mut out = Vec::with_capacity(tokens.len() + 2);
        out.push(START);
        out.extend_from_slice(tokens);
        out.push(END);
        out
    }

    /// Space-joined words with `<start>`, `<end>` and `<pad>` dropped.
    pub fn decode(&self, tokens: &[usize]) -> String {
        tokens
            .iter()
            .filter(|&&t| !matches!(t, START | END | PAD))
            .map(|&t| self.word(t).unwrap_or("<unk>"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}
