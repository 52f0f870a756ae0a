//! Domain grammar: weighted carrier phrases with concept slots, slot
//! realizations drawing from the semantic-category lexicon, a part-of-speech
//! dictionary and the acoustic confusion table used by the noise channel.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use super::LabelScheme;
use crate::features::Lexicon;
use crate::{Error, Result};

/// One element of a slot realization.
#[derive(Clone, Debug, PartialEq)]
pub enum Piece {
    Word(String),
    /// A phrase of the given lexicon category, optionally restricted to
    /// entries whose numeric value lies in `lo..=hi`.
    Category {
        name: String,
        range: Option<(u32, u32)>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Realization {
    pub weight: f64,
    pub pieces: Vec<Piece>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PatternPiece {
    Word(String),
    Slot { concept: String, optional: bool },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pattern {
    pub weight: f64,
    pub pieces: Vec<PatternPiece>,
}

#[derive(Clone, Debug)]
pub struct DomainGrammar {
    pub slots: BTreeMap<String, Vec<Realization>>,
    pub patterns: Vec<Pattern>,
    /// Lowercased word → (POS, lemma).
    pub pos: HashMap<String, (String, String)>,
    pub category_pos: HashMap<String, String>,
    pub confusions: BTreeMap<String, Vec<String>>,
    pub fillers: Vec<String>,
    pub lexicon: Lexicon,
}

fn parse_weighted<'a>(line: &'a str, origin: &str, n: usize) -> Result<(f64, &'a str)> {
    let (w, rest) = line
        .split_once('\t')
        .ok_or_else(|| Error::parse(origin, n, "expected weight<TAB>text"))?;
    let weight: f64 = w
        .trim()
        .parse()
        .map_err(|_| Error::parse(origin, n, format!("bad weight `{w}`")))?;
    if !(weight > 0.0 && weight.is_finite()) {
        return Err(Error::parse(origin, n, "weight must be positive"));
    }
    Ok((weight, rest.trim()))
}

fn parse_piece(tok: &str, origin: &str, n: usize) -> Result<Piece> {
    let Some(inner) = tok.strip_prefix('<').and_then(|t| t.strip_suffix('>')) else {
        return Ok(Piece::Word(tok.to_string()));
    };
    let (name, range) = match inner.split_once(':') {
        None => (inner, None),
        Some((name, r)) => {
            let (lo, hi) = r
                .split_once('-')
                .ok_or_else(|| Error::parse(origin, n, format!("bad range in `{tok}`")))?;
            let lo: u32 = lo.parse().map_err(|_| Error::parse(origin, n, "bad range"))?;
            let hi: u32 = hi.parse().map_err(|_| Error::parse(origin, n, "bad range"))?;
            (name, Some((lo, hi)))
        }
    };
    Ok(Piece::Category {
        name: name.to_string(),
        range,
    })
}

impl DomainGrammar {
    pub fn parse(text: &str, origin: &str, lexicon: Lexicon) -> Result<Self> {
        enum Section {
            None,
            Slot(String),
            Patterns,
            Pos,
            CatPos,
            Confusions,
            Fillers,
        }
        let mut g = DomainGrammar {
            slots: BTreeMap::new(),
            patterns: Vec::new(),
            pos: HashMap::new(),
            category_pos: HashMap::new(),
            confusions: BTreeMap::new(),
            fillers: Vec::new(),
            lexicon,
        };
        let mut section = Section::None;
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(h) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = match h.split_once(' ') {
                    Some(("slot", name)) => {
                        g.slots.entry(name.to_string()).or_default();
                        Section::Slot(name.to_string())
                    }
                    None if h == "patterns" => Section::Patterns,
                    None if h == "pos" => Section::Pos,
                    None if h == "catpos" => Section::CatPos,
                    None if h == "confusions" => Section::Confusions,
                    None if h == "fillers" => Section::Fillers,
                    _ => return Err(Error::parse(origin, n, format!("unknown section `{h}`"))),
                };
                continue;
            }
            match &section {
                Section::None => return Err(Error::parse(origin, n, "text outside any section")),
                Section::Slot(name) => {
                    let (weight, body) = parse_weighted(line, origin, n)?;
                    let pieces = body
                        .split_whitespace()
                        .map(|t| parse_piece(t, origin, n))
                        .collect::<Result<Vec<_>>>()?;
                    g.slots
                        .get_mut(name)
                        .expect("slot registered")
                        .push(Realization { weight, pieces });
                }
                Section::Patterns => {
                    let (weight, body) = parse_weighted(line, origin, n)?;
                    let pieces = body
                        .split_whitespace()
                        .map(|t| match t.strip_prefix('{').and_then(|t| t.strip_suffix('}')) {
                            Some(s) => match s.strip_suffix('?') {
                                Some(c) => PatternPiece::Slot {
                                    concept: c.to_string(),
                                    optional: true,
                                },
                                None => PatternPiece::Slot {
                                    concept: s.to_string(),
                                    optional: false,
                                },
                            },
                            None => PatternPiece::Word(t.to_string()),
                        })
                        .collect();
                    g.patterns.push(Pattern { weight, pieces });
                }
                Section::Pos => {
                    let cols: Vec<&str> = line.split('\t').collect();
                    if cols.len() < 2 {
                        return Err(Error::parse(origin, n, "expected word<TAB>POS[<TAB>lemma]"));
                    }
                    let w = cols[0].to_lowercase();
                    let lemma = cols.get(2).map_or_else(|| w.clone(), |l| l.to_string());
                    g.pos.insert(w, (cols[1].to_string(), lemma));
                }
                Section::CatPos => {
                    let (c, p) = line
                        .split_once('\t')
                        .ok_or_else(|| Error::parse(origin, n, "expected CATEGORY<TAB>POS"))?;
                    g.category_pos.insert(c.to_string(), p.trim().to_string());
                }
                Section::Confusions => {
                    let (w, cands) = line
                        .split_once('\t')
                        .ok_or_else(|| Error::parse(origin, n, "expected word<TAB>candidates"))?;
                    let cands: Vec<String> = cands
                        .split_whitespace()
                        .filter(|c| !c.eq_ignore_ascii_case(w))
                        .map(str::to_string)
                        .collect();
                    if !cands.is_empty() {
                        g.confusions.insert(w.to_lowercase(), cands);
                    }
                }
                Section::Fillers => g.fillers.extend(line.split_whitespace().map(str::to_string)),
            }
        }
        g.check()?;
        Ok(g)
    }

    pub fn load(path: &Path, lexicon: Lexicon) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string(), lexicon)
    }

    pub fn default_grammar() -> Self {
        Self::parse(
            include_str!("../../data/default.grammar"),
            "data/default.grammar",
            Lexicon::default_lexicon(),
        )
        .expect("bundled grammar parses")
    }

    /// Entries of `category` usable for a placeholder; hyphenated spellings
    /// are matched by the lexicon but never generated.
    pub fn category_choices(&self, name: &str, range: Option<(u32, u32)>) -> Vec<usize> {
        self.lexicon
            .entries()
            .iter()
            .enumerate()
            .filter(|(_, e)| e.category == name && !e.words.iter().any(|w| w.contains('-')))
            .filter(|(_, e)| match range {
                None => true,
                Some((lo, hi)) => e
                    .value
                    .as_deref()
                    .and_then(|v| v.parse::<u32>().ok())
                    .is_some_and(|v| (lo..=hi).contains(&v)),
            })
            .map(|(i, _)| i)
            .collect()
    }

    fn check(&self) -> Result<()> {
        if self.patterns.is_empty() {
            return Err(Error::Config("grammar has no patterns".into()));
        }
        for p in &self.patterns {
            for piece in &p.pieces {
                if let PatternPiece::Slot { concept, .. } = piece {
                    if self.slots.get(concept).map_or(true, Vec::is_empty) {
                        return Err(Error::Config(format!("slot `{concept}` has no realizations")));
                    }
                }
            }
        }
        for (name, reals) in &self.slots {
            for r in reals {
                let mut has_category = false;
                for piece in &r.pieces {
                    if let Piece::Category { name: cat, range } = piece {
                        has_category = true;
                        if self.category_choices(cat, *range).is_empty() {
                            return Err(Error::Config(format!(
                                "slot `{name}`: no lexicon entries for <{cat}>"
                            )));
                        }
                    }
                }
                if !has_category {
                    let words: Vec<&str> = r
                        .pieces
                        .iter()
                        .filter_map(|p| match p {
                            Piece::Word(w) => Some(w.as_str()),
                            Piece::Category { .. } => None,
                        })
                        .collect();
                    if self.lexicon.longest_matches(&words).is_empty() {
                        return Err(Error::Config(format!(
                            "slot `{name}`: realization `{}` has no lexicon value",
                            words.join(" ")
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn scheme(&self) -> LabelScheme {
        LabelScheme::new(self.slots.keys().cloned())
    }

    /// Expected number of mentions of each concept per utterance, from the
    /// pattern weights (optional slots count one half).
    pub fn expected_concept_rates(&self) -> BTreeMap<String, f64> {
        let total: f64 = self.patterns.iter().map(|p| p.weight).sum();
        let mut rates: BTreeMap<String, f64> = self.slots.keys().map(|k| (k.clone(), 0.0)).collect();
        for p in &self.patterns {
            for piece in &p.pieces {
                if let PatternPiece::Slot { concept, optional } = piece {
                    let w = if *optional { 0.5 } else { 1.0 };
                    *rates.get_mut(concept).expect("checked slot") += w * p.weight / total;
                }
            }
        }
        rates
    }

    /// Every surface form the grammar can produce, sorted.
    pub fn vocabulary(&self) -> Vec<String> {
        let mut v: Vec<String> = Vec::new();
        for p in &self.patterns {
            for piece in &p.pieces {
                if let PatternPiece::Word(w) = piece {
                    v.push(w.clone());
                }
            }
        }
        for reals in self.slots.values() {
            for r in reals {
                for piece in &r.pieces {
                    match piece {
                        Piece::Word(w) => v.push(w.clone()),
                        Piece::Category { name, range } => {
                            for i in self.category_choices(name, *range) {
                                v.extend(self.lexicon.entry(i).surface.iter().cloned());
                            }
                        }
                    }
                }
            }
        }
        v.sort();
        v.dedup();
        v
    }
}
