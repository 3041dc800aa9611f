//! Word-level tokenization, vocabulary construction and corpus ingestion.
//!
//! Ids `0..5` are reserved for the special tokens in the fixed order
//! PAD, UNK, CLS, MASK, INS. Corpus tokens start at [`FIRST_WORD_ID`].

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const CLS: u32 = 2;
pub const MASK: u32 = 3;
pub const INS: u32 = 4;
pub const FIRST_WORD_ID: u32 = 5;

pub const SPECIAL_LITERALS: [&str; 5] = ["[PAD]", "[UNK]", "[CLS]", "[MASK]", "[INS]"];

pub fn is_special(id: u32) -> bool {
    id < FIRST_WORD_ID
}

/// Bidirectional token/id mapping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    token_to_id: HashMap<String, u32>,
    id_to_token: Vec<String>,
    lowercase: bool,
}

impl Vocab {
    fn with_specials(lowercase: bool) -> Self {
        let mut vocab = Vocab {
            token_to_id: HashMap::new(),
            id_to_token: Vec::new(),
            lowercase,
        };
        for lit in SPECIAL_LITERALS {
            vocab.id_to_token.push(lit.to_string());
        }
        vocab
    }

    fn push_word(&mut self, token: String) {
        let id = self.id_to_token.len() as u32;
        self.token_to_id.insert(token.clone(), id);
        self.id_to_token.push(token);
    }

    /// Builds a vocabulary from whitespace tokens of `text` sorted by
    /// descending frequency, ties broken lexicographically.
    pub fn build(text: &str, min_count: usize, max_size: usize, lowercase: bool) -> Result<Self> {
        if min_count == 0 {
            return Err(Error::config("min_count must be >= 1"));
        }
        if max_size < SPECIAL_LITERALS.len() {
            return Err(Error::config(format!(
                "max_size must be >= {}",
                SPECIAL_LITERALS.len()
            )));
        }
        let mut counts: HashMap<String, usize> = HashMap::new();
        for tok in text.split_whitespace() {
            *counts.entry(normalize(tok, lowercase)).or_default() += 1;
        }
        if counts.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut ranked: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(tok, n)| *n >= min_count && !SPECIAL_LITERALS.contains(&tok.as_str()))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(max_size - SPECIAL_LITERALS.len());

        let mut vocab = Vocab::with_specials(lowercase);
        for (tok, _) in ranked {
            vocab.push_word(tok);
        }
        Ok(vocab)
    }

    /// Builds a vocabulary directly from an ordered word list (ids follow list order).
    pub fn from_words<I, S>(words: I, lowercase: bool) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut vocab = Vocab::with_specials(lowercase);
        for w in words {
            let w = w.as_ref();
            if w.is_empty() || w.chars().any(char::is_whitespace) {
                return Err(Error::config(format!("invalid vocab token {w:?}")));
            }
            if SPECIAL_LITERALS.contains(&w) || vocab.token_to_id.contains_key(w) {
                return Err(Error::config(format!("duplicate vocab token {w:?}")));
            }
            vocab.push_word(w.to_string());
        }
        Ok(vocab)
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    /// Number of non-special tokens.
    pub fn num_words(&self) -> usize {
        self.len() - SPECIAL_LITERALS.len()
    }

    pub fn lowercase(&self) -> bool {
        self.lowercase
    }

    pub fn id(&self, token: &str) -> u32 {
        let tok = normalize(token, self.lowercase);
        self.token_to_id.get(&tok).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: u32) -> Result<&str> {
        self.id_to_token
            .get(id as usize)
            .map(String::as_str)
            .ok_or(Error::UnknownId(id))
    }

    pub fn encode(&self, sentence: &str) -> Vec<u32> {
        sentence.split_whitespace().map(|t| self.id(t)).collect()
    }

    pub fn encode_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn decode(&self, ids: &[u32]) -> Result<String> {
        let mut out = String::new();
        for (i, &id) in ids.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(self.token(id)?);
        }
        Ok(out)
    }

    /// Serializes to the vocab file format: one token per line, line number = id.
    pub fn to_file_string(&self) -> String {
        let mut s = String::new();
        for tok in &self.id_to_token {
            s.push_str(tok);
            s.push('\n');
        }
        s
    }

    pub fn from_file_string(text: &str, lowercase: bool) -> Result<Self> {
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() < SPECIAL_LITERALS.len() {
            return Err(Error::config("vocab file shorter than the special-token header"));
        }
        for (i, lit) in SPECIAL_LITERALS.iter().enumerate() {
            if lines[i] != *lit {
                return Err(Error::Parse {
                    path: "<vocab>".into(),
                    line: i + 1,
                    msg: format!("expected special token {lit}, found {:?}", lines[i]),
                });
            }
        }
        Vocab::from_words(&lines[SPECIAL_LITERALS.len()..], lowercase)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::error::write(path, self.to_file_string())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, lowercase: bool) -> Result<Self> {
        let text = crate::error::read_to_string(path)?;
        Self::from_file_string(&text, lowercase)
    }

    /// Hex SHA-256 of the vocab file bytes; stored in checkpoints.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_file_string().as_bytes());
        let mut hex = String::with_capacity(64);
        for b in digest {
            let _ = write!(hex, "{b:02x}");
        }
        hex
    }

    pub fn word_ids(&self) -> std::ops::Range<u32> {
        FIRST_WORD_ID..self.len() as u32
    }
}

fn normalize(tok: &str, lowercase: bool) -> String {
    if lowercase {
        tok.to_lowercase()
    } else {
        tok.to_string()
    }
}

/// Encoded sentences; one per non-empty input line.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub sentences: Vec<Vec<u32>>,
    pub source_path: String,
}

impl Corpus {
    pub fn from_text(vocab: &Vocab, text: &str, source_path: impl Into<String>) -> Self {
        let sentences = text
            .lines()
            .map(|l| vocab.encode(l))
            .filter(|s| !s.is_empty())
            .collect();
        Corpus {
            sentences,
            source_path: source_path.into(),
        }
    }

    pub fn load(vocab: &Vocab, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = crate::error::read_to_string(path)?;
        Ok(Self::from_text(vocab, &text, path.display().to_string()))
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn num_tokens(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn frequency_order() {
        let v = Vocab::build("a b a", 1, 100, true).unwrap();
        assert_eq!(v.len(), 7);
        assert_eq!(v.id("a"), 5);
        assert_eq!(v.id("b"), 6);
    }

    #[test]
    fn min_count_cutoff() {
        let v = Vocab::build("a b a", 2, 100, true).unwrap();
        assert_eq!(v.len(), 6);
        assert_eq!(v.id("a"), 5);
        assert_eq!(v.id("b"), UNK);
    }

    #[test]
    fn max_size_keeps_most_frequent() {
        let v = Vocab::build("x y\nz y", 1, 6, true).unwrap();
        assert_eq!(v.len(), 6);
        assert_eq!(v.id("y"), 5);
        assert_eq!(v.id("x"), UNK);
    }

    #[test]
    fn ties_are_lexicographic() {
        let v = Vocab::build("c a b", 1, 100, true).unwrap();
        assert_eq!(v.encode("a b c"), vec![5, 6, 7]);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(Vocab::build("  \n ", 1, 10, true), Err(Error::EmptyCorpus)));
        assert_eq!(Vocab::build("", 1, 10, true).unwrap_err().to_string(), "empty corpus");
    }

    #[test]
    fn special_literals_never_become_words() {
        let v = Vocab::build("[MASK] [MASK] hi", 1, 100, false).unwrap();
        assert_eq!(v.len(), 6);
        assert_eq!(v.id("[MASK]"), UNK);
        assert_eq!(v.id("hi"), 5);
    }

    #[test]
    fn encode_decode_basics() {
        let v = Vocab::build("a b a", 1, 100, true).unwrap();
        assert_eq!(v.encode("a b"), vec![5, 6]);
        assert_eq!(v.encode("a q"), vec![5, UNK]);
        assert_eq!(v.encode(""), Vec::<u32>::new());
        assert_eq!(v.decode(&[5, 6]).unwrap(), "a b");
        assert_eq!(v.decode(&[MASK]).unwrap(), "[MASK]");
        assert_eq!(v.decode(&[]).unwrap(), "");
        assert!(matches!(v.decode(&[99]), Err(Error::UnknownId(99))));
    }

    #[test]
    fn lowercasing_is_configurable() {
        let lower = Vocab::build("Hello hello", 1, 100, true).unwrap();
        assert_eq!(lower.num_words(), 1);
        let cased = Vocab::build("Hello hello", 1, 100, false).unwrap();
        assert_eq!(cased.num_words(), 2);
        assert_eq!(cased.id("HELLO"), UNK);
    }

    #[test]
    fn vocab_file_round_trip_and_determinism() {
        let text = "the cat sat on the mat\nthe dog sat";
        let a = Vocab::build(text, 1, 100, true).unwrap();
        let b = Vocab::build(text, 1, 100, true).unwrap();
        assert_eq!(a.to_file_string(), b.to_file_string());
        assert_eq!(a.hash(), b.hash());
        let file = a.to_file_string();
        assert!(file.starts_with("[PAD]\n[UNK]\n[CLS]\n[MASK]\n[INS]\n"));
        let back = Vocab::from_file_string(&file, true).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn corpus_skips_blank_lines() {
        let v = Vocab::build("a b", 1, 100, true).unwrap();
        let c = Corpus::from_text(&v, "a b\n\n b a c\n", "mem");
        assert_eq!(c.sentences, vec![vec![5, 6], vec![6, 5, UNK]]);
        assert_eq!(c.num_tokens(), 5);
    }

    proptest! {
        #[test]
        fn round_trip_in_vocab_sentences(idx in proptest::collection::vec(0usize..6, 0..20), sep in "[ \t]{1,3}") {
            let words = ["alpha", "beta", "gamma", "delta", "eps", "zeta"];
            let v = Vocab::from_words(words, true).unwrap();
            let raw: Vec<&str> = idx.iter().map(|&i| words[i]).collect();
            let sentence = raw.join(&sep);
            let normalized = raw.join(" ");
            prop_assert_eq!(v.decode(&v.encode(&sentence)).unwrap(), normalized);
        }
    }
}
