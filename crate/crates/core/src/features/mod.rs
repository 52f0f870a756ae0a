//! Per-token discrete features shared by the taggers and the confidence
//! estimator.
//!
//! Every feature key is namespaced by its attribute (`w=`, `cat=`, `pos=`,
//! `pre2=`, `pap=`, ...) and every attribute belongs to exactly one family,
//! so keys from different families cannot collide.

mod lexicon;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

pub use lexicon::{LexEntry, LexMatch, Lexicon};

use crate::corpus::Token;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    Surface,
    SemCategories,
    Syntactic,
    Morphological,
    Pap,
    MlpConf,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Surface,
        Family::SemCategories,
        Family::Syntactic,
        Family::Morphological,
        Family::Pap,
        Family::MlpConf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Surface => "surface",
            Family::SemCategories => "sem",
            Family::Syntactic => "syntactic",
            Family::Morphological => "morph",
            Family::Pap => "pap",
            Family::MlpConf => "conf",
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown feature family `{s}`")))
    }
}

/// Which families are extracted and how many confidence bins are used.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureSpec {
    families: BTreeSet<Family>,
    bins: usize,
}

pub const DEFAULT_BINS: usize = 10;

impl FeatureSpec {
    pub fn new<I: IntoIterator<Item = Family>>(families: I, bins: usize) -> Result<Self> {
        let families: BTreeSet<Family> = families.into_iter().collect();
        if families.is_empty() {
            return Err(Error::Config("feature spec enables no family".into()));
        }
        if bins < 2 {
            return Err(Error::Config(format!("need at least 2 confidence bins, got {bins}")));
        }
        Ok(FeatureSpec { families, bins })
    }

    pub fn all() -> Self {
        Self::new(Family::ALL, DEFAULT_BINS).expect("valid")
    }

    /// Everything except the two confidence measures.
    pub fn without_confidence() -> Self {
        Self::new(
            [
                Family::Surface,
                Family::SemCategories,
                Family::Syntactic,
                Family::Morphological,
            ],
            DEFAULT_BINS,
        )
        .expect("valid")
    }

    pub fn with(&self, family: Family) -> Self {
        let mut s = self.clone();
        s.families.insert(family);
        s
    }

    pub fn has(&self, family: Family) -> bool {
        self.families.contains(&family)
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn families(&self) -> impl Iterator<Item = Family> + '_ {
        self.families.iter().copied()
    }

    /// Comma-separated family names, e.g. `surface,sem,pap`.
    pub fn parse(list: &str, bins: usize) -> Result<Self> {
        let fams = list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<Family>>>()?;
        Self::new(fams, bins)
    }
}

impl fmt::Display for FeatureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.families.iter().map(|f| f.name()).collect();
        write!(f, "{}", names.join(","))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DiscreteFeature {
    pub family: Family,
    pub key: String,
}

impl DiscreteFeature {
    fn new(family: Family, attr: &str, value: impl fmt::Display) -> Self {
        DiscreteFeature {
            family,
            key: format!("{attr}={value}"),
        }
    }
}

/// Letter n-grams are taken over lowercased code points.
fn lower_chars(word: &str) -> Vec<char> {
    word.chars().flat_map(char::to_lowercase).collect()
}

fn prefix(chars: &[char], n: usize) -> Option<String> {
    (chars.len() >= n).then(|| chars[..n].iter().collect())
}

fn suffix(chars: &[char], n: usize) -> Option<String> {
    (chars.len() >= n).then(|| chars[chars.len() - n..].iter().collect())
}

fn is_capitalized(word: &str) -> bool {
    word.chars().next().is_some_and(char::is_uppercase)
}

/// Prefixes and suffixes of length 1..=4 (truncated for short words) and
/// the initial-capital flag.
pub fn morphological_features(token: &Token) -> BTreeSet<DiscreteFeature> {
    let chars = lower_chars(&token.surface);
    let mut out = BTreeSet::new();
    for n in 1..=4 {
        if let Some(p) = prefix(&chars, n) {
            out.insert(DiscreteFeature::new(Family::Morphological, &format!("pre{n}"), p));
        }
        if let Some(s) = suffix(&chars, n) {
            out.insert(DiscreteFeature::new(Family::Morphological, &format!("suf{n}"), s));
        }
    }
    out.insert(DiscreteFeature::new(
        Family::Morphological,
        "cap",
        is_capitalized(&token.surface),
    ));
    out
}

/// Token categories from the annotation column plus single-word lexicon
/// lookup of the surface.
pub fn semantic_categories(token: &Token, lexicon: &Lexicon) -> BTreeSet<String> {
    let mut cats: BTreeSet<String> = token.sem_categories.iter().cloned().collect();
    cats.extend(lexicon.word_categories(&token.surface));
    cats
}

pub fn semantic_category_features(token: &Token, lexicon: &Lexicon) -> BTreeSet<DiscreteFeature> {
    semantic_categories(token, lexicon)
        .into_iter()
        .map(|c| DiscreteFeature::new(Family::SemCategories, "cat", c))
        .collect()
}

/// Equal-width bin index of `c` among `k` bins; 1.0 falls in the top bin.
pub fn confidence_bin(c: f64, k: usize) -> Result<usize> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::Range(format!("confidence {c} outside [0,1]")));
    }
    if k < 2 {
        return Err(Error::Range(format!("bin count {k} below 2")));
    }
    Ok(((c * k as f64).floor() as usize).min(k - 1))
}

/// `measure` is `pap` or `conf`.
pub fn discretize_confidence(c: f64, k: usize, measure: Family) -> Result<DiscreteFeature> {
    let bin = confidence_bin(c, k)?;
    Ok(DiscreteFeature::new(measure, measure.name(), bin))
}

pub const ABSENT: &str = "absent";
pub const NONE: &str = "_";

/// Single-valued attributes addressed by CRF templates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Attr {
    Word,
    Lemma,
    Pos,
    Governor,
    Relation,
    Categories,
    Prefix(u8),
    Suffix(u8),
    Cap,
    Pap,
    Conf,
}

impl Attr {
    pub fn family(self) -> Family {
        match self {
            Attr::Word => Family::Surface,
            Attr::Categories => Family::SemCategories,
            Attr::Lemma | Attr::Pos | Attr::Governor | Attr::Relation => Family::Syntactic,
            Attr::Prefix(_) | Attr::Suffix(_) | Attr::Cap => Family::Morphological,
            Attr::Pap => Family::Pap,
            Attr::Conf => Family::MlpConf,
        }
    }

    pub fn name(self) -> String {
        match self {
            Attr::Word => "w".into(),
            Attr::Lemma => "lem".into(),
            Attr::Pos => "pos".into(),
            Attr::Governor => "gov".into(),
            Attr::Relation => "rel".into(),
            Attr::Categories => "cat".into(),
            Attr::Prefix(n) => format!("pre{n}"),
            Attr::Suffix(n) => format!("suf{n}"),
            Attr::Cap => "cap".into(),
            Attr::Pap => "pap".into(),
            Attr::Conf => "conf".into(),
        }
    }
}

impl FromStr for Attr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let affix = |rest: &str| -> Option<u8> {
            rest.parse::<u8>().ok().filter(|n| (1..=4).contains(n))
        };
        Ok(match s {
            "w" => Attr::Word,
            "lem" => Attr::Lemma,
            "pos" => Attr::Pos,
            "gov" => Attr::Governor,
            "rel" => Attr::Relation,
            "cat" => Attr::Categories,
            "cap" => Attr::Cap,
            "pap" => Attr::Pap,
            "conf" => Attr::Conf,
            _ => {
                if let Some(n) = s.strip_prefix("pre").and_then(affix) {
                    Attr::Prefix(n)
                } else if let Some(n) = s.strip_prefix("suf").and_then(affix) {
                    Attr::Suffix(n)
                } else {
                    return Err(Error::Config(format!("unknown attribute `{s}`")));
                }
            }
        })
    }
}

/// Value of `attr` for token `i`. Undefined values (a 4-letter prefix of a
/// 2-letter word, no category) are `_`; a missing confidence is `absent`.
pub fn attribute(tokens: &[Token], i: usize, attr: Attr, bins: usize, lexicon: &Lexicon) -> String {
    let t = &tokens[i];
    let conf = |v: Option<f64>| match v {
        None => ABSENT.to_string(),
        Some(c) => confidence_bin(c.clamp(0.0, 1.0), bins)
            .expect("clamped")
            .to_string(),
    };
    match attr {
        Attr::Word => t.surface.to_lowercase(),
        Attr::Lemma => t.lemma.clone(),
        Attr::Pos => t.pos.clone(),
        Attr::Governor => t
            .governor
            .map_or_else(|| "ROOT".to_string(), |g| tokens[g].lemma.clone()),
        Attr::Relation => t.deprel.clone(),
        Attr::Categories => {
            let cats = semantic_categories(t, lexicon);
            if cats.is_empty() {
                NONE.to_string()
            } else {
                cats.into_iter().collect::<Vec<_>>().join("+")
            }
        }
        Attr::Prefix(n) => prefix(&lower_chars(&t.surface), n as usize).unwrap_or_else(|| NONE.into()),
        Attr::Suffix(n) => suffix(&lower_chars(&t.surface), n as usize).unwrap_or_else(|| NONE.into()),
        Attr::Cap => is_capitalized(&t.surface).to_string(),
        Attr::Pap => conf(t.pap),
        Attr::Conf => conf(t.mlp_conf),
    }
}

/// Union of the enabled families for token `i`. Absent confidences yield an
/// explicit `absent` feature.
pub fn token_features(
    tokens: &[Token],
    i: usize,
    spec: &FeatureSpec,
    lexicon: &Lexicon,
) -> BTreeSet<DiscreteFeature> {
    let t = &tokens[i];
    let mut out = BTreeSet::new();
    if spec.has(Family::Surface) {
        out.insert(DiscreteFeature::new(Family::Surface, "w", t.surface.to_lowercase()));
    }
    if spec.has(Family::SemCategories) {
        out.extend(semantic_category_features(t, lexicon));
    }
    if spec.has(Family::Syntactic) {
        for a in [Attr::Lemma, Attr::Pos, Attr::Governor, Attr::Relation] {
            let v = attribute(tokens, i, a, spec.bins, lexicon);
            out.insert(DiscreteFeature::new(Family::Syntactic, &a.name(), v));
        }
    }
    if spec.has(Family::Morphological) {
        out.extend(morphological_features(t));
    }
    for (fam, attr) in [(Family::Pap, Attr::Pap), (Family::MlpConf, Attr::Conf)] {
        if spec.has(fam) {
            let v = attribute(tokens, i, attr, spec.bins, lexicon);
            out.insert(DiscreteFeature::new(fam, &attr.name(), v));
        }
    }
    out
}
