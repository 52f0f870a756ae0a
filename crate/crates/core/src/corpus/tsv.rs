//! Tab-separated corpus and tagger-output files.
//!
//! Corpus rows carry eleven columns,
//! `INDEX SURFACE LEMMA POS GOV DEPREL SEMCATS PAP CONF ERRFLAG LABEL`.
//! `INDEX` and `GOV` are 1-based with `GOV=0` for the root, `SEMCATS` is
//! `|`-joined, `_` marks an absent field and `ERRFLAG` is `correct` or
//! `error`. Each utterance starts with `# id=<text>` and ends with a blank
//! line. A hypothesis utterance lists its clean reference after a `# ref`
//! line inside the same block.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use super::{Dataset, ErrorFlag, Label, TaggerOutput, Token, Utterance};
use crate::{Error, Result};

/// Selects which of the eleven columns a reader must find filled. Every
/// column is always present; this only controls presence checks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DatasetFormat {
    pub require_error_flags: bool,
    pub require_confidences: bool,
}

const COLUMNS: usize = 11;

fn opt<'a>(s: &'a str) -> Option<&'a str> {
    (s != "_").then_some(s)
}

fn parse_unit(s: &str, what: &str) -> std::result::Result<Option<f64>, String> {
    match opt(s) {
        None => Ok(None),
        Some(v) => {
            let c: f64 = v.parse().map_err(|_| format!("bad {what} value `{v}`"))?;
            if !(0.0..=1.0).contains(&c) {
                return Err(format!("{what} value {c} outside [0,1]"));
            }
            Ok(Some(c))
        }
    }
}

fn parse_row(cols: &[&str], expected_index: usize) -> std::result::Result<Token, String> {
    if cols.len() != COLUMNS {
        return Err(format!("expected {COLUMNS} columns, found {}", cols.len()));
    }
    let index: usize = cols[0].parse().map_err(|_| format!("bad INDEX `{}`", cols[0]))?;
    if index != expected_index {
        return Err(format!("INDEX {index} out of sequence, expected {expected_index}"));
    }
    if cols[1].is_empty() || cols[1] == "_" {
        return Err("empty SURFACE".into());
    }
    let governor = match opt(cols[4]) {
        None | Some("0") => None,
        Some(g) => {
            let g: usize = g.parse().map_err(|_| format!("bad GOV `{g}`"))?;
            Some(g - 1)
        }
    };
    let sem_categories = match opt(cols[6]) {
        None => Vec::new(),
        Some(s) => {
            let mut v: Vec<String> = s.split('|').map(str::to_string).collect();
            v.sort();
            v.dedup();
            v
        }
    };
    let error_flag = match cols[9] {
        "_" => None,
        "correct" => Some(ErrorFlag::Correct),
        "error" => Some(ErrorFlag::Error),
        other => return Err(format!("bad ERRFLAG `{other}`")),
    };
    Ok(Token {
        surface: cols[1].to_string(),
        lemma: cols[2].to_string(),
        pos: cols[3].to_string(),
        governor,
        deprel: cols[5].to_string(),
        sem_categories,
        pap: parse_unit(cols[7], "PAP")?,
        mlp_conf: parse_unit(cols[8], "CONF")?,
        error_flag,
        label: cols[10].parse()?,
    })
}

struct Pending {
    id: String,
    id_line: usize,
    tokens: Vec<(Token, usize)>,
    reference: Option<Vec<(Token, usize)>>,
}

impl Pending {
    fn finish(self, origin: &str) -> Result<Utterance> {
        for part in std::iter::once(&self.tokens).chain(self.reference.as_ref()) {
            if part.is_empty() {
                return Err(Error::parse(origin, self.id_line, "utterance has no tokens"));
            }
            for (t, line) in part {
                if let Some(g) = t.governor {
                    if g >= part.len() {
                        return Err(Error::parse(
                            origin,
                            *line,
                            format!("governor {} outside utterance of {} tokens", g + 1, part.len()),
                        ));
                    }
                }
            }
        }
        let strip = |v: Vec<(Token, usize)>| v.into_iter().map(|(t, _)| t).collect::<Vec<_>>();
        let u = Utterance {
            id: self.id,
            tokens: strip(self.tokens),
            reference: self.reference.map(strip),
        };
        u.validate()?;
        Ok(u)
    }
}

pub fn parse_dataset(text: &str, origin: &str) -> Result<Dataset> {
    let mut utterances = Vec::new();
    let mut ids = HashSet::new();
    let mut cur: Option<Pending> = None;
    let mut flush = |cur: &mut Option<Pending>, utterances: &mut Vec<Utterance>| -> Result<()> {
        if let Some(p) = cur.take() {
            let line = p.id_line;
            let u = p.finish(origin)?;
            if !ids.insert(u.id.clone()) {
                return Err(Error::parse(origin, line, format!("duplicate id `{}`", u.id)));
            }
            utterances.push(u);
        }
        Ok(())
    };
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            flush(&mut cur, &mut utterances)?;
            continue;
        }
        if let Some(id) = line.strip_prefix("# id=") {
            flush(&mut cur, &mut utterances)?;
            cur = Some(Pending {
                id: id.to_string(),
                id_line: line_no,
                tokens: Vec::new(),
                reference: None,
            });
            continue;
        }
        if line == "# ref" {
            match cur.as_mut() {
                Some(p) if p.reference.is_none() => p.reference = Some(Vec::new()),
                _ => return Err(Error::parse(origin, line_no, "misplaced `# ref`")),
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let p = cur
            .as_mut()
            .ok_or_else(|| Error::parse(origin, line_no, "token row before `# id=` line"))?;
        let target = match p.reference.as_mut() {
            Some(r) => r,
            None => &mut p.tokens,
        };
        let cols: Vec<&str> = line.split('\t').collect();
        let tok = parse_row(&cols, target.len() + 1).map_err(|m| Error::parse(origin, line_no, m))?;
        target.push((tok, line_no));
    }
    flush(&mut cur, &mut utterances)?;
    Ok(Dataset { utterances })
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text, &path.display().to_string())
}

impl Dataset {
    /// Check that the optional columns named by `format` are filled.
    pub fn check_format(&self, format: DatasetFormat) -> Result<()> {
        for u in &self.utterances {
            for (i, t) in u.tokens.iter().enumerate() {
                let missing = if format.require_error_flags && t.error_flag.is_none() {
                    Some("ERRFLAG")
                } else if format.require_confidences && (t.pap.is_none() || t.mlp_conf.is_none()) {
                    Some("PAP/CONF")
                } else {
                    None
                };
                if let Some(col) = missing {
                    return Err(Error::Precondition(format!(
                        "utterance {} token {}: {col} missing",
                        u.id,
                        i + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

fn write_tokens(out: &mut String, tokens: &[Token]) {
    let unit = |v: Option<f64>| v.map_or_else(|| "_".to_string(), |c| c.to_string());
    for (i, t) in tokens.iter().enumerate() {
        let semcats = if t.sem_categories.is_empty() {
            "_".to_string()
        } else {
            t.sem_categories.join("|")
        };
        let flag = match t.error_flag {
            None => "_",
            Some(ErrorFlag::Correct) => "correct",
            Some(ErrorFlag::Error) => "error",
        };
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            i + 1,
            t.surface,
            t.lemma,
            t.pos,
            t.governor.map_or(0, |g| g + 1),
            t.deprel,
            semcats,
            unit(t.pap),
            unit(t.mlp_conf),
            flag,
            t.label
        );
    }
}

pub fn format_dataset(data: &Dataset) -> String {
    let mut out = String::new();
    for u in &data.utterances {
        let _ = writeln!(out, "# id={}", u.id);
        write_tokens(&mut out, &u.tokens);
        if let Some(r) = &u.reference {
            out.push_str("# ref\n");
            write_tokens(&mut out, r);
        }
        out.push('\n');
    }
    out
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    std::fs::write(path, format_dataset(data)).map_err(|e| Error::io(path, e))
}

pub fn format_outputs(outputs: &[TaggerOutput]) -> String {
    let mut out = String::new();
    for o in outputs {
        let _ = writeln!(out, "# id={}", o.id);
        for l in &o.labels {
            let _ = writeln!(out, "{l}");
        }
        out.push('\n');
    }
    out
}

pub fn parse_outputs(text: &str, origin: &str) -> Result<Vec<TaggerOutput>> {
    let mut outputs: Vec<TaggerOutput> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(id) = line.strip_prefix("# id=") {
            outputs.push(TaggerOutput {
                id: id.to_string(),
                labels: Vec::new(),
            });
            continue;
        }
        let cur = outputs
            .last_mut()
            .ok_or_else(|| Error::parse(origin, n + 1, "label before `# id=` line"))?;
        let label: Label = line.parse().map_err(|m: String| Error::parse(origin, n + 1, m))?;
        cur.labels.push(label);
    }
    Ok(outputs)
}

pub fn read_outputs(path: &Path) -> Result<Vec<TaggerOutput>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_outputs(&text, &path.display().to_string())
}

pub fn write_outputs(path: &Path, outputs: &[TaggerOutput]) -> Result<()> {
    std::fs::write(path, format_outputs(outputs)).map_err(|e| Error::io(path, e))
}
