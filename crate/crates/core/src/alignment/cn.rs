//! Pivot-aligned confusion networks and word posteriors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::channel::{sample_nbest, NBestList, NoiseConfig};
use super::{align_words, EditOp};
use crate::corpus::Utterance;
use crate::{Error, Result};

pub const EPSILON: &str = "<eps>";

#[derive(Clone, Debug, PartialEq)]
pub struct CnEntry {
    /// `None` is epsilon.
    pub word: Option<String>,
    pub posterior: f64,
}

/// Bins in time order. Bins aligned to a 1-best word list that word first;
/// bins holding insertions list epsilon first.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfusionNetwork {
    pub id: String,
    pub bins: Vec<Vec<CnEntry>>,
}

#[derive(Default)]
struct Acc(Vec<(Option<String>, f64)>);

impl Acc {
    fn add(&mut self, word: Option<&str>, w: f64) {
        let key = word.map(str::to_lowercase);
        match self
            .0
            .iter_mut()
            .find(|(k, _)| k.as_deref().map(str::to_lowercase) == key)
        {
            Some(e) => e.1 += w,
            None => self.0.push((word.map(str::to_string), w)),
        }
    }

    fn into_bin(mut self, total: f64, with_epsilon: bool) -> Vec<CnEntry> {
        let mut bin: Vec<CnEntry> = self
            .0
            .drain(..)
            .map(|(word, c)| CnEntry {
                word,
                posterior: c / total,
            })
            .collect();
        if with_epsilon {
            let mass: f64 = bin.iter().map(|e| e.posterior).sum();
            bin.insert(
                0,
                CnEntry {
                    word: None,
                    posterior: (1.0 - mass).max(0.0),
                },
            );
        }
        bin
    }
}

/// Align every hypothesis to the first one and pool weights per bin.
/// The r-th word a hypothesis inserts before pivot position g lands in
/// insertion bin (g, r); hypotheses without it contribute epsilon there.
pub fn build_cn(nbest: &NBestList) -> Result<ConfusionNetwork> {
    let Some((_, pivot)) = nbest.hypotheses.first() else {
        return Err(Error::Precondition(format!("n-best list {} is empty", nbest.id)));
    };
    let total: f64 = nbest.hypotheses.iter().map(|(w, _)| w).sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Precondition(format!("n-best list {} has no positive weight", nbest.id)));
    }
    let mut word_bins: Vec<Acc> = pivot.iter().map(|_| Acc::default()).collect();
    let mut ins_bins: BTreeMap<(usize, usize), Acc> = BTreeMap::new();
    for (w, hyp) in &nbest.hypotheses {
        let al = align_words(pivot, hyp);
        let (mut gap, mut r) = (0, 0);
        for s in &al.steps {
            match s.op {
                EditOp::Match | EditOp::Substitution => {
                    let j = s.ref_index.expect("paired step");
                    word_bins[j].add(Some(&hyp[s.hyp_index.expect("paired step")]), *w);
                    (gap, r) = (j + 1, 0);
                }
                EditOp::Deletion => {
                    let j = s.ref_index.expect("deletion has a pivot index");
                    word_bins[j].add(None, *w);
                    (gap, r) = (j + 1, 0);
                }
                EditOp::Insertion => {
                    let word = &hyp[s.hyp_index.expect("insertion has a hyp index")];
                    ins_bins.entry((gap, r)).or_default().add(Some(word), *w);
                    r += 1;
                }
            }
        }
    }
    let mut ins_bins = ins_bins.into_iter().peekable();
    let mut bins = Vec::new();
    let mut word_bins = word_bins.into_iter();
    for g in 0..=pivot.len() {
        while let Some((_, acc)) = ins_bins.next_if(|((gg, _), _)| *gg == g) {
            bins.push(acc.into_bin(total, true));
        }
        if let Some(acc) = word_bins.next() {
            bins.push(acc.into_bin(total, false));
        }
    }
    Ok(ConfusionNetwork {
        id: nbest.id.clone(),
        bins,
    })
}

/// Posterior of each 1-best word in its own bin.
pub fn pap_of<S: AsRef<str>>(cn: &ConfusionNetwork, hyp: &[S]) -> Result<Vec<f64>> {
    let pivot: Vec<&CnEntry> = cn
        .bins
        .iter()
        .filter_map(|b| b.first().filter(|e| e.word.is_some()))
        .collect();
    if pivot.len() != hyp.len() {
        return Err(Error::Alignment(format!(
            "{}: network has {} pivot bins, hypothesis has {} words",
            cn.id,
            pivot.len(),
            hyp.len()
        )));
    }
    pivot
        .iter()
        .zip(hyp)
        .enumerate()
        .map(|(i, (e, w))| {
            let word = e.word.as_deref().expect("filtered");
            if word.to_lowercase() == w.as_ref().to_lowercase() {
                Ok(e.posterior.clamp(0.0, 1.0))
            } else {
                Err(Error::Alignment(format!(
                    "{}: word {} is `{}` but pivot bin holds `{word}`",
                    cn.id,
                    i + 1,
                    w.as_ref()
                )))
            }
        })
        .collect()
}

/// Sample the n-best of a recognized utterance's reference, build its
/// network and store the word posteriors in the `pap` column.
pub fn attach_pap(hyp: &Utterance, cfg: &NoiseConfig) -> Result<(Utterance, ConfusionNetwork)> {
    let reference = hyp.reference.as_ref().ok_or_else(|| {
        Error::Precondition(format!("utterance {} has no reference tokens", hyp.id))
    })?;
    let ref_words: Vec<&str> = reference.iter().map(|t| t.surface.as_str()).collect();
    let nbest = sample_nbest(&hyp.id, &ref_words, cfg, cfg.nbest)?;
    let cn = build_cn(&nbest)?;
    let pap = pap_of(&cn, &hyp.surfaces())?;
    let mut out = hyp.clone();
    for (t, p) in out.tokens.iter_mut().zip(pap) {
        t.pap = Some(p);
    }
    Ok((out, cn))
}

pub fn format_cns(cns: &[ConfusionNetwork]) -> String {
    let mut out = String::new();
    for cn in cns {
        let _ = writeln!(out, "# id={}", cn.id);
        for bin in &cn.bins {
            let cells: Vec<String> = bin
                .iter()
                .map(|e| format!("{}:{}", e.word.as_deref().unwrap_or(EPSILON), e.posterior))
                .collect();
            let _ = writeln!(out, "{}", cells.join(" "));
        }
        out.push('\n');
    }
    out
}

pub fn parse_cns(text: &str, origin: &str) -> Result<Vec<ConfusionNetwork>> {
    let mut cns: Vec<ConfusionNetwork> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        if let Some(id) = raw.strip_prefix("# id=") {
            cns.push(ConfusionNetwork {
                id: id.to_string(),
                bins: Vec::new(),
            });
            continue;
        }
        let cur = cns
            .last_mut()
            .ok_or_else(|| Error::parse(origin, n + 1, "bin before `# id=` line"))?;
        let bin = raw
            .split_whitespace()
            .map(|cell| {
                let (w, p) = cell
                    .rsplit_once(':')
                    .ok_or_else(|| Error::parse(origin, n + 1, format!("expected word:posterior, got `{cell}`")))?;
                let posterior: f64 = p
                    .parse()
                    .ok()
                    .filter(|p| (0.0..=1.0).contains(p))
                    .ok_or_else(|| Error::parse(origin, n + 1, format!("invalid posterior `{p}`")))?;
                Ok(CnEntry {
                    word: (w != EPSILON).then(|| w.to_string()),
                    posterior,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        cur.bins.push(bin);
    }
    Ok(cns)
}

pub fn read_cns(path: &Path) -> Result<Vec<ConfusionNetwork>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_cns(&text, &path.display().to_string())
}

pub fn write_cns(path: &Path, cns: &[ConfusionNetwork]) -> Result<()> {
    std::fs::write(path, format_cns(cns)).map_err(|e| Error::io(path, e))
}
