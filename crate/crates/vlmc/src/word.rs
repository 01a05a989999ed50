//! Alphabets and finite words.
//!
//! Index 0 of a word is its left-most letter, the most recently emitted one:
//! when the chain moves from `U` to `αU`, the new letter is prepended.
//! "Prefix" therefore means a left part and the shift drops the left-most letter.

use crate::error::{Result, VlmcError};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::cmp::Ordering;
use std::fmt;

/// Largest supported alphabet; letters are serialized as single digits.
pub const MAX_ALPHABET: usize = 10;

/// Alphabet `{0, .., size-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Alphabet(usize);

impl Alphabet {
    pub fn new(size: usize) -> Result<Self> {
        if (2..=MAX_ALPHABET).contains(&size) {
            Ok(Alphabet(size))
        } else {
            Err(VlmcError::Alphabet(size))
        }
    }

    pub fn size(self) -> usize {
        self.0
    }

    pub fn letters(self) -> impl Iterator<Item = u8> {
        (0..self.0).map(|a| a as u8)
    }

    pub fn check(self, w: &[u8]) -> Result<()> {
        match w.iter().find(|&&l| l as usize >= self.0) {
            Some(&letter) => Err(VlmcError::LetterOutOfRange { letter, size: self.0 }),
            None => Ok(()),
        }
    }

    /// All words of length `n` in lexicographic order.
    pub fn words_of_len(self, n: usize) -> Vec<Word> {
        let mut out = vec![Word::empty()];
        for _ in 0..n {
            let mut next = Vec::with_capacity(out.len() * self.0);
            for w in &out {
                for a in self.letters() {
                    let mut v = w.0.clone();
                    v.push(a);
                    next.push(Word(v));
                }
            }
            out = next;
        }
        out
    }
}

/// A finite word. Ordered by length, then lexicographically.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Word(Vec<u8>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn from_letters(v: Vec<u8>) -> Self {
        Word(v)
    }

    /// Parses a digit string such as `"0100"`; `""` and `"∅"` give the empty word.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "∅" {
            return Ok(Word::empty());
        }
        s.chars()
            .map(|c| c.to_digit(10).map(|d| d as u8))
            .collect::<Option<Vec<u8>>>()
            .map(Word)
            .ok_or_else(|| VlmcError::ParseWord(s.to_string()))
    }

    /// Parses and validates against an alphabet.
    pub fn parse_in(s: &str, alphabet: Alphabet) -> Result<Self> {
        let w = Word::parse(s)?;
        alphabet.check(&w.0)?;
        Ok(w)
    }

    /// `letter` repeated `n` times.
    pub fn repeat(letter: u8, n: usize) -> Self {
        Word(vec![letter; n])
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<u8> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Drops the left-most letter; the shift of the empty word is empty.
    pub fn shift(&self) -> Word {
        Word(self.0.get(1..).unwrap_or(&[]).to_vec())
    }

    pub fn prefix(&self, n: usize) -> Word {
        Word(self.0[..n.min(self.0.len())].to_vec())
    }

    /// `letter · self`.
    pub fn prepend(&self, letter: u8) -> Word {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.push(letter);
        v.extend_from_slice(&self.0);
        Word(v)
    }

    /// `self · letter`.
    pub fn append(&self, letter: u8) -> Word {
        let mut v = self.0.clone();
        v.push(letter);
        Word(v)
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    pub fn starts_with(&self, p: &[u8]) -> bool {
        self.0.starts_with(p)
    }
}

impl From<&[u8]> for Word {
    fn from(s: &[u8]) -> Self {
        Word(s.to_vec())
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &l in &self.0 {
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            write!(f, "∅")
        } else {
            write!(f, "{self}")
        }
    }
}

impl Serialize for Word {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Word::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Shorthand for tests and examples: `w("0101")`. Panics on non-digits.
pub fn w(s: &str) -> Word {
    Word::parse(s).expect("digit word")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_examples() {
        assert_eq!(w("010100").shift(), w("10100"));
        assert_eq!(Word::empty().shift(), Word::empty());
        assert_eq!(w("1").shift(), Word::empty());
    }

    #[test]
    fn shortlex_order() {
        let mut v = vec![w("10"), w("0"), w("001"), w("01"), w("")];
        v.sort();
        assert_eq!(v, vec![w(""), w("0"), w("01"), w("10"), w("001")]);
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(Word::parse("01a").is_err());
        assert_eq!(Word::parse("∅").unwrap(), Word::empty());
        let a = Alphabet::new(2).unwrap();
        assert!(Word::parse_in("012", a).is_err());
    }

    #[test]
    fn alphabet_bounds() {
        assert!(Alphabet::new(1).is_err());
        assert!(Alphabet::new(11).is_err());
        assert_eq!(Alphabet::new(3).unwrap().words_of_len(2).len(), 9);
    }

    #[test]
    fn serde_roundtrip() {
        let x = w("0120");
        let s = serde_json::to_string(&x).unwrap();
        assert_eq!(s, "\"0120\"");
        assert_eq!(serde_json::from_str::<Word>(&s).unwrap(), x);
    }
}
