//! Simulated recognizer: a seeded substitution/deletion/insertion channel
//! applied to reference word sequences.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{align_words, EditOp};
use crate::corpus::{Annotator, Dataset, DomainGrammar, ErrorFlag, Label, Utterance};
use crate::seed;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseConfig {
    pub substitution: f64,
    pub deletion: f64,
    pub insertion: f64,
    /// Probability that an error of the 1-best is shared by the n-best
    /// alternatives (an acoustically stable mistake).
    pub systematic: f64,
    /// Probability that a given alternative repeats a systematic error.
    pub persistence: f64,
    /// Alternatives are weighted `exp(-sharpness · distance to the 1-best)`.
    pub sharpness: f64,
    pub nbest: usize,
    pub seed: u64,
    /// Lowercased word to acoustically close candidates.
    pub confusions: BTreeMap<String, Vec<String>>,
    pub fillers: Vec<String>,
    pub vocabulary: Vec<String>,
}

impl NoiseConfig {
    /// Default rates (expected WER 23.5%) with the grammar's confusion
    /// table, fillers and vocabulary.
    pub fn from_grammar(grammar: &DomainGrammar, seed: u64) -> Self {
        NoiseConfig {
            substitution: 0.15,
            deletion: 0.05,
            insertion: 0.035,
            systematic: 0.25,
            persistence: 0.8,
            sharpness: 0.5,
            nbest: 10,
            seed,
            confusions: grammar.confusions.clone(),
            fillers: grammar.fillers.clone(),
            vocabulary: grammar.vocabulary(),
        }
    }

    /// Configured expected WER in percent.
    pub fn target_wer(&self) -> f64 {
        100.0 * (self.substitution + self.deletion + self.insertion)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = [
            ("substitution", self.substitution),
            ("deletion", self.deletion),
            ("insertion", self.insertion),
            ("systematic", self.systematic),
            ("persistence", self.persistence),
        ];
        for (name, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} rate {v} outside [0,1]")));
            }
        }
        let sum = self.substitution + self.deletion + self.insertion;
        if sum >= 1.0 {
            return Err(Error::Config(format!("noise rates sum to {sum}, must be below 1")));
        }
        if !(self.sharpness >= 0.0 && self.sharpness.is_finite()) {
            return Err(Error::Config(format!("sharpness {} must be finite and >= 0", self.sharpness)));
        }
        if self.nbest == 0 {
            return Err(Error::Config("n-best size must be at least 1".into()));
        }
        if self.insertion > 0.0 && self.fillers.is_empty() {
            return Err(Error::Config("insertion rate > 0 but no filler words".into()));
        }
        if self.substitution > 0.0 && self.vocabulary.len() < 2 {
            return Err(Error::Config("substitution rate > 0 but vocabulary too small".into()));
        }
        Ok(())
    }

    fn difficulty(&self, word: &str) -> f64 {
        let lower = word.to_lowercase();
        let mut w = 1.0;
        if lower.chars().count() <= 3 {
            w += 1.5;
        }
        if self.confusions.contains_key(&lower) {
            w += 1.0;
        }
        w
    }

    fn substitute(&self, word: &str, rng: &mut ChaCha8Rng) -> String {
        let lower = word.to_lowercase();
        if let Some(c) = self.confusions.get(&lower) {
            return c[rng.gen_range(0..c.len())].clone();
        }
        loop {
            let cand = &self.vocabulary[rng.gen_range(0..self.vocabulary.len())];
            if cand.to_lowercase() != lower {
                return cand.clone();
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Op {
    Keep,
    Sub(String),
    Del,
}

/// One channel draw as an edit script over reference positions.
#[derive(Clone, Debug)]
struct Draw {
    ops: Vec<(Op, bool)>,
    /// `inserts[g]` precede reference position `g`; the flag marks
    /// systematic events.
    inserts: Vec<Vec<(String, bool)>>,
}

impl Draw {
    fn sample<S: AsRef<str>>(reference: &[S], cfg: &NoiseConfig, rng: &mut ChaCha8Rng) -> Draw {
        let n = reference.len();
        let err = cfg.substitution + cfg.deletion;
        let k = (0..n).filter(|_| rng.gen_bool(err)).count();
        // Weighted sampling without replacement: keep the k largest u^(1/w).
        let mut keyed: Vec<(f64, usize)> = reference
            .iter()
            .enumerate()
            .map(|(j, w)| (rng.gen::<f64>().powf(1.0 / cfg.difficulty(w.as_ref())), j))
            .collect();
        keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut chosen: Vec<usize> = keyed[..k].iter().map(|&(_, j)| j).collect();
        chosen.sort_unstable();
        let mut ops: Vec<(Op, bool)> = vec![(Op::Keep, false); n];
        for j in chosen {
            let op = if rng.gen_bool(cfg.substitution / err) {
                Op::Sub(cfg.substitute(reference[j].as_ref(), rng))
            } else {
                Op::Del
            };
            ops[j] = (op, rng.gen_bool(cfg.systematic));
        }
        let mut inserts = vec![Vec::new(); n + 1];
        for _ in 0..n {
            if rng.gen_bool(cfg.insertion) {
                let g = rng.gen_range(0..=n);
                let w = cfg.fillers[rng.gen_range(0..cfg.fillers.len())].clone();
                inserts[g].push((w, rng.gen_bool(cfg.systematic)));
            }
        }
        Draw { ops, inserts }
    }

    /// Copy systematic events of `pivot` into `self`, each with probability
    /// `persistence`.
    fn overlay(&mut self, pivot: &Draw, persistence: f64, rng: &mut ChaCha8Rng) {
        for (j, (op, sys)) in pivot.ops.iter().enumerate() {
            if *sys && rng.gen_bool(persistence) {
                self.ops[j] = (op.clone(), false);
            }
        }
        for (g, ins) in pivot.inserts.iter().enumerate() {
            let shared: Vec<(String, bool)> = ins
                .iter()
                .filter(|(_, sys)| *sys && rng.gen_bool(persistence))
                .map(|(w, _)| (w.clone(), false))
                .collect();
            self.inserts[g].splice(0..0, shared);
        }
    }

    fn realize<S: AsRef<str>>(&self, reference: &[S]) -> Vec<String> {
        let mut out = Vec::new();
        for (g, ins) in self.inserts.iter().enumerate() {
            out.extend(ins.iter().map(|(w, _)| w.clone()));
            if let Some((op, _)) = self.ops.get(g) {
                match op {
                    Op::Keep => out.push(reference[g].as_ref().to_string()),
                    Op::Sub(w) => out.push(w.clone()),
                    Op::Del => {}
                }
            }
        }
        if out.is_empty() {
            if let Some(first) = reference.first() {
                out.push(first.as_ref().to_string());
            }
        }
        out
    }
}

fn pivot_draw<S: AsRef<str>>(id: &str, reference: &[S], cfg: &NoiseConfig) -> Draw {
    let mut rng = seed::rng(seed::derive(cfg.seed, id));
    Draw::sample(reference, cfg, &mut rng)
}

/// Weighted n-best list; entry 0 is the 1-best.
#[derive(Clone, Debug, PartialEq)]
pub struct NBestList {
    pub id: String,
    pub hypotheses: Vec<(f64, Vec<String>)>,
}

/// `n` channel draws for one reference. Entry 0 is the draw used by
/// [`corrupt`]; every other entry is an independent draw that repeats the
/// 1-best's systematic errors and is down-weighted by its distance to it.
pub fn sample_nbest<S: AsRef<str>>(
    id: &str,
    reference: &[S],
    cfg: &NoiseConfig,
    n: usize,
) -> Result<NBestList> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::Precondition("n-best size must be at least 1".into()));
    }
    let pivot = pivot_draw(id, reference, cfg);
    let best = pivot.realize(reference);
    let mut hypotheses = vec![(1.0, best.clone())];
    for k in 1..n {
        let mut rng = seed::rng(seed::derive_n(cfg.seed, id, k as u64));
        let mut d = Draw::sample(reference, cfg, &mut rng);
        d.overlay(&pivot, cfg.persistence, &mut rng);
        let words = d.realize(reference);
        let dist = align_words(&best, &words).cost as f64;
        hypotheses.push(((-cfg.sharpness * dist).exp(), words));
    }
    Ok(NBestList {
        id: id.to_string(),
        hypotheses,
    })
}

/// Re-label hypothesis tokens from their reference: matched and substituted
/// tokens copy the aligned reference label, inserted tokens are null and an
/// inside tag that lost its beginning is promoted to a beginning.
pub fn project_labels(hyp: &Utterance) -> Result<Utterance> {
    let reference = hyp.reference.as_ref().ok_or_else(|| {
        Error::Precondition(format!("utterance {} has no reference tokens", hyp.id))
    })?;
    let ref_words: Vec<&str> = reference.iter().map(|t| t.surface.as_str()).collect();
    let alignment = align_words(&ref_words, &hyp.surfaces());
    let mut out = hyp.clone();
    for s in &alignment.steps {
        if let Some(h) = s.hyp_index {
            out.tokens[h].label = match s.ref_index {
                Some(r) => reference[r].label.clone(),
                None => Label::Null,
            };
        }
    }
    repair_bio(&mut out.tokens);
    Ok(out)
}

fn repair_bio(tokens: &mut [crate::corpus::Token]) {
    let mut prev: Option<String> = None;
    for t in tokens.iter_mut() {
        if let Label::Inside(c) = &t.label {
            if prev.as_deref() != Some(c.as_str()) {
                t.label = Label::Begin(c.clone());
            }
        }
        prev = t.label.concept().map(str::to_string);
    }
}

/// Recognize one reference utterance: the 1-best channel draw, annotated,
/// with error flags from the word alignment and projected gold labels.
pub fn corrupt(utt: &Utterance, cfg: &NoiseConfig, annotator: &Annotator) -> Result<Utterance> {
    cfg.validate()?;
    let reference: Vec<&str> = utt.surfaces();
    let words = pivot_draw(&utt.id, &reference, cfg).realize(&reference);
    let mut tokens = annotator.annotate(&words);
    let alignment = align_words(&reference, &words);
    for s in &alignment.steps {
        if let Some(h) = s.hyp_index {
            tokens[h].error_flag = Some(if s.op == EditOp::Match {
                ErrorFlag::Correct
            } else {
                ErrorFlag::Error
            });
        }
    }
    let hyp = Utterance {
        id: utt.id.clone(),
        tokens,
        reference: Some(utt.tokens.clone()),
    };
    project_labels(&hyp)
}

pub fn corrupt_dataset(data: &Dataset, cfg: &NoiseConfig, annotator: &Annotator) -> Result<Dataset> {
    let utterances = data
        .utterances
        .par_iter()
        .map(|u| corrupt(u, cfg, annotator))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(utterances)
}

pub fn format_nbest(lists: &[NBestList]) -> String {
    let mut out = String::new();
    for l in lists {
        let _ = writeln!(out, "# id={}", l.id);
        for (w, words) in &l.hypotheses {
            let _ = writeln!(out, "{w}\t{}", words.join(" "));
        }
        out.push('\n');
    }
    out
}

pub fn parse_nbest(text: &str, origin: &str) -> Result<Vec<NBestList>> {
    let mut lists: Vec<NBestList> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        if let Some(id) = raw.strip_prefix("# id=") {
            lists.push(NBestList {
                id: id.to_string(),
                hypotheses: Vec::new(),
            });
            continue;
        }
        let cur = lists
            .last_mut()
            .ok_or_else(|| Error::parse(origin, n + 1, "hypothesis before `# id=` line"))?;
        let (w, words) = raw
            .split_once('\t')
            .ok_or_else(|| Error::parse(origin, n + 1, "expected weight<TAB>words"))?;
        let w: f64 = w
            .parse()
            .ok()
            .filter(|w: &f64| *w > 0.0 && w.is_finite())
            .ok_or_else(|| Error::parse(origin, n + 1, format!("invalid weight `{w}`")))?;
        cur.hypotheses
            .push((w, words.split_whitespace().map(str::to_string).collect()));
    }
    if let Some(l) = lists.iter().find(|l| l.hypotheses.is_empty()) {
        return Err(Error::parse(origin, 0, format!("n-best list {} is empty", l.id)));
    }
    Ok(lists)
}

pub fn read_nbest(path: &Path) -> Result<Vec<NBestList>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_nbest(&text, &path.display().to_string())
}

pub fn write_nbest(path: &Path, lists: &[NBestList]) -> Result<()> {
    std::fs::write(path, format_nbest(lists)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::{wer, word_edit_counts, EditCounts};
    use crate::corpus::generate_corpus;

    fn grammar() -> DomainGrammar {
        DomainGrammar::default_grammar()
    }

    fn silent(g: &DomainGrammar) -> NoiseConfig {
        NoiseConfig {
            substitution: 0.0,
            deletion: 0.0,
            insertion: 0.0,
            ..NoiseConfig::from_grammar(g, 1)
        }
    }

    #[test]
    fn zero_noise_is_identity() {
        let g = grammar();
        let d = generate_corpus(&g, 30, 5, "u").unwrap();
        let h = corrupt_dataset(&d, &silent(&g), &Annotator::new(&g)).unwrap();
        for (r, u) in d.utterances.iter().zip(&h.utterances) {
            assert_eq!(r.surfaces(), u.surfaces());
            assert_eq!(r.labels(), u.labels());
            assert!(u.tokens.iter().all(|t| t.error_flag == Some(ErrorFlag::Correct)));
        }
    }

    #[test]
    fn degenerate_rates_rejected() {
        let g = grammar();
        let cfg = NoiseConfig {
            substitution: 0.0,
            deletion: 1.0,
            insertion: 0.0,
            ..NoiseConfig::from_grammar(&g, 1)
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn corruption_is_reproducible_and_flags_follow_matches() {
        let g = grammar();
        let d = generate_corpus(&g, 200, 2, "u").unwrap();
        let cfg = NoiseConfig::from_grammar(&g, 9);
        let a = corrupt_dataset(&d, &cfg, &Annotator::new(&g)).unwrap();
        let b = corrupt_dataset(&d, &cfg, &Annotator::new(&g)).unwrap();
        assert_eq!(a, b);
        for u in &a.utterances {
            let r: Vec<&str> = u.reference.as_ref().unwrap().iter().map(|t| t.surface.as_str()).collect();
            let al = align_words(&r, &u.surfaces());
            for s in al.steps.iter().filter(|s| s.hyp_index.is_some()) {
                let flag = u.tokens[s.hyp_index.unwrap()].error_flag.unwrap();
                assert_eq!(flag == ErrorFlag::Correct, s.op == EditOp::Match);
            }
        }
    }

    #[test]
    fn measured_wer_tracks_configured_rates() {
        let g = grammar();
        let d = generate_corpus(&g, 2500, 3, "u").unwrap();
        let cfg = NoiseConfig::from_grammar(&g, 4);
        let h = corrupt_dataset(&d, &cfg, &Annotator::new(&g)).unwrap();
        let mut c = EditCounts::default();
        for u in &h.utterances {
            let r: Vec<&str> = u.reference.as_ref().unwrap().iter().map(|t| t.surface.as_str()).collect();
            c.add(&word_edit_counts(&r, &u.surfaces()));
        }
        assert!(c.reference_len() >= 20_000, "{}", c.reference_len());
        let w = c.rate().unwrap();
        assert!((w - cfg.target_wer()).abs() <= 1.5, "measured {w}");
    }

    #[test]
    fn nbest_shapes() {
        let g = grammar();
        let cfg = NoiseConfig::from_grammar(&g, 3);
        let words = ["i", "want", "two", "rooms", "in", "Paris", "for", "three", "nights", "please"];
        let one = sample_nbest("x", &words, &cfg, 1).unwrap();
        assert_eq!(one.hypotheses.len(), 1);
        let many = sample_nbest("x", &words, &cfg, 50).unwrap();
        assert_eq!(many, sample_nbest("x", &words, &cfg, 50).unwrap());
        assert_eq!(many.hypotheses[0], one.hypotheses[0]);
        let mut distinct: Vec<&Vec<String>> = many.hypotheses.iter().map(|(_, h)| h).collect();
        distinct.sort();
        distinct.dedup();
        assert!(distinct.len() >= 2);
        assert!(many.hypotheses.iter().all(|(w, _)| *w <= many.hypotheses[0].0));
        assert!(sample_nbest("x", &words, &cfg, 0).is_err());
    }

    #[test]
    fn insertions_are_null_and_orphans_promoted() {
        let mut g = grammar();
        g.fillers = vec!["uh".into()];
        let ann = Annotator::new(&g);
        let mut reference = ann.annotate(&["go", "to", "saint", "malo"]);
        reference[2].label = Label::Begin("TOWN".into());
        reference[3].label = Label::Inside("TOWN".into());
        let hyp_tokens = ann.annotate(&["uh", "go", "to", "malo"]);
        let hyp = Utterance {
            id: "x".into(),
            tokens: hyp_tokens,
            reference: Some(reference),
        };
        let p = project_labels(&hyp).unwrap();
        assert_eq!(
            p.labels(),
            vec![Label::Null, Label::Null, Label::Null, Label::Begin("TOWN".into())]
        );
        assert_eq!(wer(&["go", "to", "saint", "malo"], &p.surfaces()).unwrap(), 50.0);
    }

    #[test]
    fn nbest_file_round_trips() {
        let g = grammar();
        let cfg = NoiseConfig::from_grammar(&g, 3);
        let l = vec![sample_nbest("a", &["book", "a", "room"], &cfg, 4).unwrap()];
        let text = format_nbest(&l);
        assert_eq!(parse_nbest(&text, "t").unwrap(), l);
    }
}
