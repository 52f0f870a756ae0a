//! Semantic-category lexicons.
//!
//! File format: one entry per line, `phrase<TAB>CATEGORY[<TAB>VALUE]`.
//! Phrases may span several words and are matched case-insensitively. The
//! optional third column gives the normalized value used for concept values
//! (`thirty three<TAB>FIGURE<TAB>33`); without it the lowercased phrase is
//! the value.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LexEntry {
    /// Lowercased words used for matching.
    pub words: Vec<String>,
    /// Words as written in the lexicon file.
    pub surface: Vec<String>,
    pub category: String,
    pub value: Option<String>,
}

impl LexEntry {
    pub fn phrase(&self) -> String {
        self.words.join(" ")
    }

    pub fn normalized(&self) -> String {
        self.value.clone().unwrap_or_else(|| self.phrase())
    }
}

/// A lexicon match over `[start, end)` word positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LexMatch {
    pub start: usize,
    pub end: usize,
    pub entry: usize,
}

#[derive(Clone, Debug, Default)]
pub struct Lexicon {
    entries: Vec<LexEntry>,
    by_first: HashMap<String, Vec<usize>>,
    max_words: usize,
}

impl Lexicon {
    pub fn from_entries(entries: Vec<LexEntry>) -> Self {
        let mut by_first: HashMap<String, Vec<usize>> = HashMap::new();
        let mut max_words = 0;
        for (i, e) in entries.iter().enumerate() {
            max_words = max_words.max(e.words.len());
            by_first.entry(e.words[0].clone()).or_default().push(i);
        }
        Lexicon {
            entries,
            by_first,
            max_words,
        }
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 2 || cols.len() > 3 {
                return Err(Error::parse(origin, n + 1, "expected phrase<TAB>CATEGORY[<TAB>VALUE]"));
            }
            let surface: Vec<String> = cols[0].split_whitespace().map(str::to_string).collect();
            let words: Vec<String> = surface.iter().map(|w| w.to_lowercase()).collect();
            if words.is_empty() || cols[1].trim().is_empty() {
                return Err(Error::parse(origin, n + 1, "empty phrase or category"));
            }
            entries.push(LexEntry {
                words,
                surface,
                category: cols[1].trim().to_string(),
                value: cols.get(2).map(|v| v.trim().to_string()).filter(|v| !v.is_empty()),
            });
        }
        Ok(Self::from_entries(entries))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn default_lexicon() -> Self {
        Self::parse(include_str!("../../data/lexicon.tsv"), "data/lexicon.tsv")
            .expect("bundled lexicon parses")
    }

    pub fn entries(&self) -> &[LexEntry] {
        &self.entries
    }

    pub fn entry(&self, i: usize) -> &LexEntry {
        &self.entries[i]
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn categories(&self) -> BTreeSet<String> {
        self.entries.iter().map(|e| e.category.clone()).collect()
    }

    pub fn entries_of<'a>(&'a self, category: &'a str) -> impl Iterator<Item = &'a LexEntry> + 'a {
        self.entries.iter().filter(move |e| e.category == category)
    }

    /// All entries whose phrase occurs at `start` in `words` (lowercased).
    fn matches_at(&self, words: &[String], start: usize) -> Vec<(usize, usize)> {
        let Some(cands) = self.by_first.get(&words[start]) else {
            return Vec::new();
        };
        cands
            .iter()
            .filter_map(|&i| {
                let e = &self.entries[i];
                let end = start + e.words.len();
                (end <= words.len() && words[start..end] == e.words[..]).then_some((i, end))
            })
            .collect()
    }

    /// Categories of every phrase occurrence covering each word.
    pub fn covering_categories<S: AsRef<str>>(&self, words: &[S]) -> Vec<BTreeSet<String>> {
        let lower: Vec<String> = words.iter().map(|w| w.as_ref().to_lowercase()).collect();
        let mut out = vec![BTreeSet::new(); lower.len()];
        for start in 0..lower.len() {
            for (i, end) in self.matches_at(&lower, start) {
                for cats in &mut out[start..end] {
                    cats.insert(self.entries[i].category.clone());
                }
            }
        }
        out
    }

    /// Categories of single-word entries equal to `word`.
    pub fn word_categories(&self, word: &str) -> BTreeSet<String> {
        let w = word.to_lowercase();
        self.by_first
            .get(&w)
            .into_iter()
            .flatten()
            .filter(|&&i| self.entries[i].words.len() == 1)
            .map(|&i| self.entries[i].category.clone())
            .collect()
    }

    /// Greedy left-to-right longest-match segmentation; ties between
    /// entries of equal length go to the first-listed entry.
    pub fn longest_matches<S: AsRef<str>>(&self, words: &[S]) -> Vec<LexMatch> {
        let lower: Vec<String> = words.iter().map(|w| w.as_ref().to_lowercase()).collect();
        let mut out = Vec::new();
        let mut start = 0;
        while start < lower.len() {
            let best = self
                .matches_at(&lower, start)
                .into_iter()
                .fold(None::<(usize, usize)>, |acc, (i, end)| match acc {
                    Some((_, e)) if e >= end => acc,
                    _ => Some((i, end)),
                });
            match best {
                Some((entry, end)) => {
                    out.push(LexMatch { start, end, entry });
                    start = end;
                }
                None => start += 1,
            }
        }
        out
    }

    /// Normalized concept value of a word span: the joined values of the
    /// lexicon matches inside it, or the lowercased surface when nothing
    /// matches.
    pub fn normalize<S: AsRef<str>>(&self, words: &[S]) -> String {
        let matches = self.longest_matches(words);
        if matches.is_empty() {
            words
                .iter()
                .map(|w| w.as_ref().to_lowercase())
                .collect::<Vec<_>>()
                .join(" ")
        } else {
            matches
                .iter()
                .map(|m| self.entries[m.entry].normalized())
                .collect::<Vec<_>>()
                .join(" ")
        }
    }

    pub fn max_words(&self) -> usize {
        self.max_words
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex() -> Lexicon {
        Lexicon::parse(
            "paris\tTOWN\nthirty three\tFIGURE\t33\nthirty-three\tFIGURE\t33\nthirty\tFIGURE\t30\nthree\tFIGURE\t3\nmay\tMONTH\n",
            "test",
        )
        .unwrap()
    }

    #[test]
    fn longest_match_prefers_multiword_entries() {
        let l = lex();
        let m = l.longest_matches(&["the", "thirty", "three", "of", "May"]);
        assert_eq!(m.len(), 2);
        assert_eq!((m[0].start, m[0].end), (1, 3));
        assert_eq!(l.normalize(&["the", "thirty", "three", "of", "May"]), "33 may");
    }

    #[test]
    fn normalize_falls_back_to_lowercase_surface() {
        assert_eq!(lex().normalize(&["Grand", "Hotel"]), "grand hotel");
        assert_eq!(lex().normalize(&["Paris"]), "paris");
    }

    #[test]
    fn covering_categories_marks_every_word_of_a_phrase() {
        let cats = lex().covering_categories(&["thirty", "three", "x"]);
        assert!(cats[0].contains("FIGURE") && cats[1].contains("FIGURE"));
        assert!(cats[2].is_empty());
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = Lexicon::parse("paris\tTOWN\nbroken\n", "lx").unwrap_err();
        assert!(err.to_string().contains("lx:2"), "{err}");
    }
}
