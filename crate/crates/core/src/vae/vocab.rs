use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::VaeError;

pub const PAD: char = ' ';
pub const MAX_VOCAB: usize = 64;

/// Sorted character set; the pad character is always index 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Vocabulary {
    chars: Vec<char>,
    index: HashMap<char, usize>,
}

impl Vocabulary {
    pub fn from_chars(chars: impl IntoIterator<Item = char>) -> Result<Self, VaeError> {
        let mut set: BTreeSet<char> = chars.into_iter().collect();
        set.insert(PAD);
        if set.len() > MAX_VOCAB {
            return Err(VaeError::TooManyCharacters(set.len()));
        }
        // space sorts before every printable SMILES character
        let chars: Vec<char> = set.into_iter().collect();
        debug_assert_eq!(chars[0], PAD);
        let index = chars.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        Ok(Vocabulary { chars, index })
    }

    /// Every character of the corpus plus pad.
    pub fn build<S: AsRef<str>>(corpus: &[S], max_len: usize) -> Result<Self, VaeError> {
        if corpus.is_empty() {
            return Err(VaeError::EmptyCorpus);
        }
        let mut set = BTreeSet::new();
        for (line, s) in corpus.iter().enumerate() {
            let s = s.as_ref();
            let len = s.chars().count();
            if len > max_len {
                return Err(VaeError::StringTooLong { line: line + 1, len, max: max_len });
            }
            set.extend(s.chars());
        }
        Vocabulary::from_chars(set)
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn index_of(&self, c: char) -> Option<usize> {
        self.index.get(&c).copied()
    }

    pub fn char_at(&self, i: usize) -> char {
        self.chars[i]
    }

    pub fn encode(&self, s: &str, max_len: usize) -> Result<EncodedString, VaeError> {
        let mut indices = Vec::with_capacity(max_len);
        for c in s.chars() {
            if indices.len() == max_len {
                return Err(VaeError::StringTooLong { line: 0, len: s.chars().count(), max: max_len });
            }
            let i = self.index_of(c).ok_or(VaeError::UnknownCharacter(c))?;
            indices.push(i);
        }
        let length = indices.len();
        indices.resize(max_len, 0);
        Ok(EncodedString { indices, length })
    }

    /// Characters up to (not including) the first pad.
    pub fn decode(&self, indices: &[usize]) -> String {
        indices.iter().take_while(|&&i| i != 0).map(|&i| self.chars[i]).collect()
    }
}

impl TryFrom<String> for Vocabulary {
    type Error = VaeError;

    fn try_from(s: String) -> Result<Self, VaeError> {
        Vocabulary::from_chars(s.chars())
    }
}

impl From<Vocabulary> for String {
    fn from(v: Vocabulary) -> String {
        v.chars.into_iter().collect()
    }
}

/// Fixed-length index sequence, padded with index 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedString {
    pub indices: Vec<usize>,
    pub length: usize,
}

impl EncodedString {
    /// Row-major one-hot matrix `[max_len, vocab]`.
    pub fn one_hot(&self, vocab: usize) -> Vec<f32> {
        let mut m = vec![0.0; self.indices.len() * vocab];
        for (t, &i) in self.indices.iter().enumerate() {
            m[t * vocab + i] = 1.0;
        }
        m
    }

    /// One-hot of the previous character at each position; position 0
    /// sees the pad symbol.
    pub fn shifted_one_hot(&self, vocab: usize) -> Vec<f32> {
        let mut m = vec![0.0; self.indices.len() * vocab];
        for t in 0..self.indices.len() {
            let prev = if t == 0 { 0 } else { self.indices[t - 1] };
            m[t * vocab + prev] = 1.0;
        }
        m
    }
}
