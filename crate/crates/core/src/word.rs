//! Freely reduced words over named generators.
//!
//! Words act on the left: the word `f g` is the map `f ∘ g`, so its last
//! letter is applied first.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WordError {
    #[error("bad token `{0}` in word (expected `name` or `name^-1`)")]
    BadToken(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Letter {
    pub generator: String,
    pub inverse: bool,
}

impl Letter {
    pub fn new(generator: impl Into<String>, inverse: bool) -> Letter {
        Letter {
            generator: generator.into(),
            inverse,
        }
    }

    pub fn inv(&self) -> Letter {
        Letter {
            generator: self.generator.clone(),
            inverse: !self.inverse,
        }
    }

    fn cancels(&self, other: &Letter) -> bool {
        self.generator == other.generator && self.inverse != other.inverse
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.inverse {
            write!(f, "{}^-1", self.generator)
        } else {
            f.write_str(&self.generator)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Word(Vec<Letter>);

impl Word {
    pub fn empty() -> Word {
        Word(Vec::new())
    }

    pub fn gen(name: &str) -> Word {
        Word(vec![Letter::new(name, false)])
    }

    /// Freely reduces the given letters.
    pub fn from_letters(letters: impl IntoIterator<Item = Letter>) -> Word {
        let mut out: Vec<Letter> = Vec::new();
        for l in letters {
            if out.last().is_some_and(|last| last.cancels(&l)) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Word(out)
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Reduced product `self · rhs`.
    pub fn concat(&self, rhs: &Word) -> Word {
        Word::from_letters(self.0.iter().chain(rhs.0.iter()).cloned())
    }

    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(Letter::inv).collect())
    }

    pub fn pow(&self, n: i64) -> Word {
        let base = if n < 0 { self.inverse() } else { self.clone() };
        let mut out = Word::empty();
        for _ in 0..n.unsigned_abs() {
            out = out.concat(&base);
        }
        out
    }

    /// Generator names mentioned, in order of first appearance.
    pub fn generators(&self) -> Vec<&str> {
        let mut seen: Vec<&str> = Vec::new();
        for l in &self.0 {
            if !seen.contains(&l.generator.as_str()) {
                seen.push(&l.generator);
            }
        }
        seen
    }

    /// All reduced words of length `<= radius`, shortest first; within one
    /// length, ordered by generator position with `g` before `g^-1`.
    pub fn ball(generators: &[String], radius: usize) -> Vec<Word> {
        let alphabet: Vec<Letter> = generators
            .iter()
            .flat_map(|g| [Letter::new(g.clone(), false), Letter::new(g.clone(), true)])
            .collect();
        let mut out = vec![Word::empty()];
        let mut layer = vec![Word::empty()];
        for _ in 0..radius {
            let mut next = Vec::new();
            for w in &layer {
                for l in &alphabet {
                    if w.0.last().is_some_and(|last| last.cancels(l)) {
                        continue;
                    }
                    let mut letters = w.0.clone();
                    letters.push(l.clone());
                    next.push(Word(letters));
                }
            }
            out.extend(next.iter().cloned());
            layer = next;
        }
        out
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '-') && !s.starts_with('-')
}

impl FromStr for Word {
    type Err = WordError;

    fn from_str(s: &str) -> Result<Word, WordError> {
        let mut letters = Vec::new();
        for tok in s.split_whitespace() {
            let (name, inverse) = match tok.strip_suffix("^-1") {
                Some(n) => (n, true),
                None => (tok, false),
            };
            if !valid_name(name) {
                return Err(WordError::BadToken(tok.to_string()));
            }
            letters.push(Letter::new(name, inverse));
        }
        Ok(Word::from_letters(letters))
    }
}

impl Serialize for Word {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Word, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    #[test]
    fn parse_and_reduce() {
        assert_eq!(w("g g^-1"), Word::empty());
        assert_eq!(w("a b b^-1 a").to_string(), "a a");
        assert_eq!(w("  f   g^-1 ").len(), 2);
        assert!("a ^-1".parse::<Word>().is_err());
        assert!("a^2".parse::<Word>().is_err());
    }

    #[test]
    fn inverse_and_concat() {
        let x = w("a b^-1 c");
        assert_eq!(x.inverse().to_string(), "c^-1 b a^-1");
        assert!(x.concat(&x.inverse()).is_empty());
        assert_eq!(w("a b").concat(&w("b^-1 c")), w("a c"));
        assert_eq!(w("k").pow(-3).to_string(), "k^-1 k^-1 k^-1");
    }

    #[test]
    fn ball_counts() {
        let gens = vec!["a".to_string(), "b".to_string()];
        let ball = Word::ball(&gens, 5);
        // 1 + 4 + 12 + 36 + 108 + 324
        assert_eq!(ball.len(), 485);
        assert!(ball
            .iter()
            .all(|x| Word::from_letters(x.letters().iter().cloned()) == *x));
        assert_eq!(ball[1].to_string(), "a");
        assert_eq!(ball[2].to_string(), "a^-1");
        let one = Word::ball(&["t".to_string()], 3);
        assert_eq!(one.len(), 7);
    }
}
