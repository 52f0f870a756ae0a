use std::fmt::Write as _;

use crate::alignment::{align, EditCosts, EditCounts};
use crate::corpus::{segments_from_labels, segments_of, ConceptSegment, Dataset, Label, TaggerOutput};
use crate::features::Lexicon;
use crate::{Error, Result};

use super::combine::ConsensusOutput;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScoreReport {
    /// Edit counts over concept labels.
    pub concept: EditCounts,
    /// Edit counts over (concept, value) pairs.
    pub value: EditCounts,
    pub ref_segments: usize,
    pub hyp_segments: usize,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl ScoreReport {
    pub fn cer(&self) -> f64 {
        100.0 * self.concept.errors() as f64 / self.ref_segments as f64
    }

    pub fn cver(&self) -> f64 {
        100.0 * self.value.errors() as f64 / self.ref_segments as f64
    }

    /// Matched hypothesis segments over hypothesis segments (0 when the
    /// hypothesis has none).
    pub fn precision(&self) -> f64 {
        ratio(self.concept.matches, self.hyp_segments)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.concept.matches, self.ref_segments)
    }

    pub fn value_precision(&self) -> f64 {
        ratio(self.value.matches, self.hyp_segments)
    }

    pub fn value_recall(&self) -> f64 {
        ratio(self.value.matches, self.ref_segments)
    }

    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let rows: [(&str, String); 14] = [
            ("cer", format!("{:.4}", self.cer())),
            ("cver", format!("{:.4}", self.cver())),
            ("precision", format!("{:.4}", self.precision())),
            ("recall", format!("{:.4}", self.recall())),
            ("value_precision", format!("{:.4}", self.value_precision())),
            ("value_recall", format!("{:.4}", self.value_recall())),
            ("ref_segments", self.ref_segments.to_string()),
            ("hyp_segments", self.hyp_segments.to_string()),
            ("concept_sub", self.concept.substitutions.to_string()),
            ("concept_del", self.concept.deletions.to_string()),
            ("concept_ins", self.concept.insertions.to_string()),
            ("value_sub", self.value.substitutions.to_string()),
            ("value_del", self.value.deletions.to_string()),
            ("value_ins", self.value.insertions.to_string()),
        ];
        for (k, v) in rows {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    pub fn to_text(&self) -> String {
        format!(
            "CER {:.2}%  (S={} D={} I={} / {} reference concepts)\n\
             CVER {:.2}%  (S={} D={} I={})\n\
             concepts: P={:.4} R={:.4}   concept-values: P={:.4} R={:.4}\n",
            self.cer(),
            self.concept.substitutions,
            self.concept.deletions,
            self.concept.insertions,
            self.ref_segments,
            self.cver(),
            self.value.substitutions,
            self.value.deletions,
            self.value.insertions,
            self.precision(),
            self.recall(),
            self.value_precision(),
            self.value_recall()
        )
    }
}

/// Reference segments and hypothesis words precomputed for repeated
/// scoring of different label sequences over one dataset.
pub struct Scorer<'a> {
    lexicon: &'a Lexicon,
    ids: Vec<String>,
    words: Vec<Vec<String>>,
    reference: Vec<Vec<ConceptSegment>>,
}

impl<'a> Scorer<'a> {
    /// Reference segments come from the reference tokens when present
    /// (recognized data) and from the tokens' own labels otherwise.
    pub fn new(data: &Dataset, lexicon: &'a Lexicon) -> Self {
        Scorer {
            lexicon,
            ids: data.utterances.iter().map(|u| u.id.clone()).collect(),
            words: data
                .utterances
                .iter()
                .map(|u| u.tokens.iter().map(|t| t.surface.clone()).collect())
                .collect(),
            reference: data
                .utterances
                .iter()
                .map(|u| segments_of(u.gold_tokens(), lexicon))
                .collect(),
        }
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn check_pairing(&self, outputs: &[TaggerOutput]) -> Result<()> {
        if outputs.len() != self.ids.len() {
            return Err(Error::Pairing(format!(
                "{} outputs for {} utterances",
                outputs.len(),
                self.ids.len()
            )));
        }
        for ((id, words), o) in self.ids.iter().zip(&self.words).zip(outputs) {
            if *id != o.id {
                return Err(Error::Pairing(format!("expected utterance {id}, found {}", o.id)));
            }
            if words.len() != o.labels.len() {
                return Err(Error::Pairing(format!(
                    "{id}: {} labels for {} words",
                    o.labels.len(),
                    words.len()
                )));
            }
        }
        Ok(())
    }

    pub fn score(&self, outputs: &[TaggerOutput]) -> Result<ScoreReport> {
        self.score_kept(outputs, None)
    }

    /// Positions with `keep[u][i] == false` are removed from the hypothesis
    /// before segment extraction, so they neither open, close nor split a
    /// segment.
    pub fn score_kept(&self, outputs: &[TaggerOutput], keep: Option<&[Vec<bool>]>) -> Result<ScoreReport> {
        self.check_pairing(outputs)?;
        let mut rep = ScoreReport::default();
        for (u, ((words, reference), o)) in self.words.iter().zip(&self.reference).zip(outputs).enumerate() {
            let kept = |i: usize| keep.map_or(true, |k| k[u][i]);
            let (words, labels): (Vec<&str>, Vec<Label>) = words
                .iter()
                .zip(&o.labels)
                .enumerate()
                .filter(|(i, _)| kept(*i))
                .map(|(_, (w, l))| (w.as_str(), if l.is_error() { Label::Null } else { l.clone() }))
                .unzip();
            let hyp = segments_from_labels(&words, &labels, self.lexicon);
            let r: Vec<&str> = reference.iter().map(|s| s.label.as_str()).collect();
            let h: Vec<&str> = hyp.iter().map(|s| s.label.as_str()).collect();
            rep.concept.add(&align(&r, &h, EditCosts::default()).counts());
            let r: Vec<(&str, &str)> = reference.iter().map(|s| (s.label.as_str(), s.value.as_str())).collect();
            let h: Vec<(&str, &str)> = hyp.iter().map(|s| (s.label.as_str(), s.value.as_str())).collect();
            rep.value.add(&align(&r, &h, EditCosts::default()).counts());
            rep.ref_segments += reference.len();
            rep.hyp_segments += hyp.len();
        }
        if rep.ref_segments == 0 {
            return Err(Error::UndefinedRate("reference has no concept segments".into()));
        }
        Ok(rep)
    }
}

pub fn score(reference: &Dataset, outputs: &[TaggerOutput], lexicon: &Lexicon) -> Result<ScoreReport> {
    Scorer::new(reference, lexicon).score(outputs)
}

/// Abstained positions are dropped from the hypothesis: they add no
/// segment and never break an agreed one, so they cost recall only.
pub fn score_consensus(
    reference: &Dataset,
    outputs: &[ConsensusOutput],
    lexicon: &Lexicon,
) -> Result<ScoreReport> {
    let o: Vec<TaggerOutput> = outputs.iter().map(|c| c.output.clone()).collect();
    let keep: Vec<Vec<bool>> = outputs
        .iter()
        .map(|c| c.abstained.iter().map(|a| !a).collect())
        .collect();
    for (c, k) in outputs.iter().zip(&keep) {
        if k.len() != c.output.labels.len() {
            return Err(Error::Pairing(format!("{}: abstention mask length differs from labels", c.output.id)));
        }
    }
    Scorer::new(reference, lexicon).score_kept(&o, Some(&keep))
}
