//! Observation templates.
//!
//! One template per line:
//!
//! ```text
//! # comment
//! U:w[0]            unigram over the current word
//! U:w[-1]/w[0]      conjunction of two attributes
//! U:cat[-2]
//! B:y[-1]/y[0]      label-bigram transitions
//! ```
//!
//! Attribute names are those of [`Attr`]; offsets lie in `-WINDOW..=WINDOW`.
//! An instantiated key joins the parts with `|` on both sides of `=`, e.g.
//! `w[-1]|w[0]=a|b`. Offsets falling outside the utterance produce the
//! sentinels [`BOS`] and [`EOS`].

use std::fmt;
use std::path::Path;

use crate::corpus::Token;
use crate::features::{attribute, Attr, FeatureSpec, Lexicon};
use crate::{Error, Result};

pub const WINDOW: i32 = 2;
pub const BOS: &str = "<BOS>";
pub const EOS: &str = "<EOS>";
const TRANSITIONS: &str = "B:y[-1]/y[0]";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Template {
    parts: Vec<(Attr, i32)>,
}

impl Template {
    pub fn new(parts: Vec<(Attr, i32)>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::Config("template without parts".into()));
        }
        if let Some((a, o)) = parts.iter().find(|(_, o)| o.abs() > WINDOW) {
            return Err(Error::Config(format!(
                "offset {o} of `{}` outside -{WINDOW}..{WINDOW}",
                a.name()
            )));
        }
        Ok(Template { parts })
    }

    pub fn parts(&self) -> &[(Attr, i32)] {
        &self.parts
    }

    /// Left-hand side of instantiated keys, e.g. `w[-1]|w[0]`.
    pub fn prefix(&self) -> String {
        self.parts
            .iter()
            .map(|(a, o)| format!("{}[{o}]", a.name()))
            .collect::<Vec<_>>()
            .join("|")
    }

    /// Active only when every attribute's family is enabled.
    pub fn enabled(&self, spec: &FeatureSpec) -> bool {
        self.parts.iter().all(|(a, _)| spec.has(a.family()))
    }

    fn parse_body(body: &str) -> Result<Self> {
        let parts = body
            .split('/')
            .map(|p| {
                let bad = || Error::Config(format!("malformed template part `{p}`"));
                let (name, rest) = p.trim().split_once('[').ok_or_else(bad)?;
                let off = rest.strip_suffix(']').ok_or_else(bad)?;
                let off: i32 = off.parse().map_err(|_| bad())?;
                Ok((name.parse::<Attr>()?, off))
            })
            .collect::<Result<Vec<_>>>()?;
        Template::new(parts)
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let body: Vec<String> = self
            .parts
            .iter()
            .map(|(a, o)| format!("{}[{o}]", a.name()))
            .collect();
        write!(f, "U:{}", body.join("/"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemplateSet {
    pub observations: Vec<Template>,
    pub transitions: bool,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::parse(DEFAULT_TEMPLATES, "default templates").expect("default templates parse")
    }
}

const DEFAULT_TEMPLATES: &str = "\
U:w[-1]
U:w[0]
U:w[1]
U:w[-1]/w[0]
U:w[0]/w[1]
U:pos[-1]
U:pos[0]
U:pos[1]
U:pos[-1]/pos[0]
U:pos[0]/pos[1]
U:cat[-2]
U:cat[-1]
U:cat[0]
U:cat[1]
U:cat[2]
U:pre1[0]
U:pre2[0]
U:pre3[0]
U:pre4[0]
U:suf1[0]
U:suf2[0]
U:suf3[0]
U:suf4[0]
U:cap[0]
U:lem[0]
U:gov[0]
U:rel[0]
U:pap[0]
U:conf[0]
U:cat[0]/pap[0]
U:cat[0]/conf[0]
U:w[0]/pap[0]
U:w[0]/conf[0]
B:y[-1]/y[0]
";

impl TemplateSet {
    pub fn empty() -> Self {
        TemplateSet {
            observations: Vec::new(),
            transitions: false,
        }
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut set = Self::empty();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |e: Error| Error::parse(origin, n + 1, e.to_string());
            if line == TRANSITIONS {
                set.transitions = true;
            } else if let Some(body) = line.strip_prefix("U:") {
                set.observations.push(Template::parse_body(body).map_err(err)?);
            } else {
                return Err(Error::parse(
                    origin,
                    n + 1,
                    format!("expected `U:...` or `{TRANSITIONS}`, found `{line}`"),
                ));
            }
        }
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn format(&self) -> String {
        let mut s = String::new();
        for t in &self.observations {
            s.push_str(&t.to_string());
            s.push('\n');
        }
        if self.transitions {
            s.push_str(TRANSITIONS);
            s.push('\n');
        }
        s
    }

    pub fn active<'a>(&'a self, spec: &'a FeatureSpec) -> impl Iterator<Item = &'a Template> + 'a {
        self.observations.iter().filter(move |t| t.enabled(spec))
    }
}

/// Feature keys of every position of `tokens`.
pub fn expand_templates(
    tokens: &[Token],
    templates: &TemplateSet,
    spec: &FeatureSpec,
    lexicon: &Lexicon,
) -> Vec<Vec<String>> {
    let active: Vec<&Template> = templates.active(spec).collect();
    let mut attrs: Vec<Attr> = Vec::new();
    let plans: Vec<(String, Vec<(usize, i32)>)> = active
        .iter()
        .map(|t| {
            let parts = t
                .parts
                .iter()
                .map(|&(a, o)| {
                    let c = attrs.iter().position(|&x| x == a).unwrap_or_else(|| {
                        attrs.push(a);
                        attrs.len() - 1
                    });
                    (c, o)
                })
                .collect();
            (t.prefix(), parts)
        })
        .collect();
    let columns: Vec<Vec<String>> = attrs
        .iter()
        .map(|&a| {
            (0..tokens.len())
                .map(|i| attribute(tokens, i, a, spec.bins(), lexicon))
                .collect()
        })
        .collect();
    let n = tokens.len() as i32;
    (0..n)
        .map(|i| {
            plans
                .iter()
                .map(|(prefix, parts)| {
                    let mut key = String::with_capacity(prefix.len() + 16);
                    key.push_str(prefix);
                    key.push('=');
                    for (k, &(c, o)) in parts.iter().enumerate() {
                        if k > 0 {
                            key.push('|');
                        }
                        let j = i + o;
                        key.push_str(if j < 0 {
                            BOS
                        } else if j >= n {
                            EOS
                        } else {
                            &columns[c][j as usize]
                        });
                    }
                    key
                })
                .collect()
        })
        .collect()
}
