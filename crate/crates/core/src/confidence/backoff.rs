use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::{Error, Result};

/// Which n-gram order a word-trigram language model would use for a word.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BackoffState {
    Full,
    Backoff,
    Unknown,
}

impl BackoffState {
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Seen words and trigrams of the language-model training text. Sentence
/// boundaries are padded with `<s>`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BackoffTable {
    unigrams: BTreeSet<String>,
    trigrams: BTreeSet<String>,
}

const SEP: char = ' ';

fn key(a: &str, b: &str, c: &str) -> String {
    format!("{a}{SEP}{b}{SEP}{c}")
}

impl BackoffTable {
    pub fn build<S: AsRef<str>>(sentences: &[Vec<S>]) -> Self {
        let mut t = BackoffTable::default();
        for s in sentences {
            let words: Vec<String> = s.iter().map(|w| w.as_ref().to_lowercase()).collect();
            for i in 0..words.len() {
                t.unigrams.insert(words[i].clone());
                t.trigrams.insert(t.context_key(&words, i));
            }
        }
        t
    }

    fn context_key(&self, words: &[String], i: usize) -> String {
        let at = |j: isize| if j < 0 { "<s>" } else { words[j as usize].as_str() };
        let i = i as isize;
        key(at(i - 2), at(i - 1), at(i))
    }

    pub fn state<S: AsRef<str>>(&self, words: &[S], i: usize) -> BackoffState {
        let lower: Vec<String> = words.iter().map(|w| w.as_ref().to_lowercase()).collect();
        if !self.unigrams.contains(&lower[i]) {
            BackoffState::Unknown
        } else if self.trigrams.contains(&self.context_key(&lower, i)) {
            BackoffState::Full
        } else {
            BackoffState::Backoff
        }
    }

    pub fn states<S: AsRef<str>>(&self, words: &[S]) -> Vec<BackoffState> {
        (0..words.len()).map(|i| self.state(words, i)).collect()
    }

    pub fn write_to(&self, s: &mut String) {
        let _ = writeln!(s, "unigrams {}", self.unigrams.len());
        for w in &self.unigrams {
            let _ = writeln!(s, "{w}");
        }
        let _ = writeln!(s, "trigrams {}", self.trigrams.len());
        for t in &self.trigrams {
            let _ = writeln!(s, "{t}");
        }
    }

    pub fn read_from<'a, I: Iterator<Item = &'a str>>(lines: &mut I) -> Result<Self> {
        let mut count = |key: &str| -> Result<usize> {
            lines
                .next()
                .and_then(|l| l.strip_prefix(key))
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Error::Format(format!("expected `{key} <n>`")))
        };
        let nu = count("unigrams")?;
        let mut t = BackoffTable::default();
        for _ in 0..nu {
            let w = lines.next().ok_or_else(|| Error::Format("truncated unigrams".into()))?;
            t.unigrams.insert(w.to_string());
        }
        let nt = lines
            .next()
            .and_then(|l| l.strip_prefix("trigrams"))
            .and_then(|v| v.trim().parse::<usize>().ok())
            .ok_or_else(|| Error::Format("expected `trigrams <n>`".into()))?;
        for _ in 0..nt {
            let w = lines.next().ok_or_else(|| Error::Format("truncated trigrams".into()))?;
            if w.split(SEP).count() != 3 {
                return Err(Error::Format(format!("malformed trigram `{w}`")));
            }
            t.trigrams.insert(w.to_string());
        }
        Ok(t)
    }
}
