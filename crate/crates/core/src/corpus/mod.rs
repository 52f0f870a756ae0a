//! Data model, corpus file format, synthetic corpus generation and
//! label-space transformations.

mod generate;
mod grammar;
mod labels;
mod tsv;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

pub use generate::{generate_corpus, Annotator};
pub use grammar::{DomainGrammar, Pattern, PatternPiece, Piece, Realization};
pub use labels::{
    augment_error_labels, labels_of, segments_from_labels, segments_of, strip_error_labels,
    ConceptSegment, LabelScheme,
};
pub use tsv::{
    format_dataset, format_outputs, parse_dataset, parse_outputs, read_dataset, read_outputs,
    write_dataset, write_outputs, DatasetFormat,
};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ErrorFlag {
    Correct,
    Error,
}

impl ErrorFlag {
    pub fn is_error(self) -> bool {
        self == ErrorFlag::Error
    }
}

/// Concept tag attached to one word.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Null,
    Begin(String),
    Inside(String),
    ErrorC,
    ErrorN,
}

impl Label {
    pub fn concept(&self) -> Option<&str> {
        match self {
            Label::Begin(c) | Label::Inside(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_error(&self) -> bool {
        matches!(self, Label::ErrorC | Label::ErrorN)
    }

    pub fn is_null(&self) -> bool {
        *self == Label::Null
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Null => f.write_str("null"),
            Label::Begin(c) => write!(f, "B-{c}"),
            Label::Inside(c) => write!(f, "I-{c}"),
            Label::ErrorC => f.write_str("ERROR-C"),
            Label::ErrorN => f.write_str("ERROR-N"),
        }
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "null" => Ok(Label::Null),
            "ERROR-C" => Ok(Label::ErrorC),
            "ERROR-N" => Ok(Label::ErrorN),
            _ => {
                if let Some(c) = s.strip_prefix("B-").filter(|c| !c.is_empty()) {
                    Ok(Label::Begin(c.to_string()))
                } else if let Some(c) = s.strip_prefix("I-").filter(|c| !c.is_empty()) {
                    Ok(Label::Inside(c.to_string()))
                } else {
                    Err(format!("invalid label `{s}`"))
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub surface: String,
    pub lemma: String,
    pub pos: String,
    /// Index of the syntactic head within the utterance; `None` for the root.
    pub governor: Option<usize>,
    pub deprel: String,
    /// Sorted, deduplicated.
    pub sem_categories: Vec<String>,
    pub pap: Option<f64>,
    pub mlp_conf: Option<f64>,
    pub error_flag: Option<ErrorFlag>,
    pub label: Label,
}

impl Token {
    pub fn new(surface: &str) -> Self {
        Token {
            surface: surface.to_string(),
            lemma: "_".into(),
            pos: "_".into(),
            governor: None,
            deprel: "_".into(),
            sem_categories: Vec::new(),
            pap: None,
            mlp_conf: None,
            error_flag: None,
            label: Label::Null,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub tokens: Vec<Token>,
    /// Clean reference transcription when `tokens` is an ASR hypothesis.
    pub reference: Option<Vec<Token>>,
}

impl Utterance {
    pub fn surfaces(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.surface.as_str()).collect()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.tokens.iter().map(|t| t.label.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// The gold side of scoring: the reference tokens when present.
    pub fn gold_tokens(&self) -> &[Token] {
        self.reference.as_deref().unwrap_or(&self.tokens)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |message: String| Error::Schema {
            utterance: self.id.clone(),
            message,
        };
        validate_tokens(&self.tokens).map_err(fail)?;
        if let Some(r) = &self.reference {
            validate_tokens(r).map_err(|m| fail(format!("reference: {m}")))?;
        }
        Ok(())
    }
}

fn validate_tokens(tokens: &[Token]) -> std::result::Result<(), String> {
    if tokens.is_empty() {
        return Err("utterance has no tokens".into());
    }
    for (i, t) in tokens.iter().enumerate() {
        if let Some(g) = t.governor {
            if g >= tokens.len() {
                return Err(format!("token {} governor {} out of range", i + 1, g + 1));
            }
            if g == i {
                return Err(format!("token {} governs itself", i + 1));
            }
        }
        for (name, v) in [("pap", t.pap), ("conf", t.mlp_conf)] {
            if let Some(c) = v {
                if !(0.0..=1.0).contains(&c) {
                    return Err(format!("token {} {name} {c} outside [0,1]", i + 1));
                }
            }
        }
    }
    let labels: Vec<Label> = tokens.iter().map(|t| t.label.clone()).collect();
    LabelScheme::check_transitions(&labels)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub utterances: Vec<Utterance>,
}

impl Dataset {
    pub fn new(utterances: Vec<Utterance>) -> Result<Self> {
        let d = Dataset { utterances };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for u in &self.utterances {
            if !seen.insert(u.id.as_str()) {
                return Err(Error::Schema {
                    utterance: u.id.clone(),
                    message: "duplicate utterance id".into(),
                });
            }
            u.validate()?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.utterances.iter().map(Utterance::len).sum()
    }

    pub fn outputs(&self) -> Vec<TaggerOutput> {
        self.utterances
            .iter()
            .map(|u| TaggerOutput {
                id: u.id.clone(),
                labels: u.labels(),
            })
            .collect()
    }
}

/// Per-word labels emitted by one system for one utterance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaggerOutput {
    pub id: String,
    pub labels: Vec<Label>,
}
