use std::collections::BTreeSet;

use super::{Label, TaggerOutput, Token, Utterance};
use crate::features::Lexicon;
use crate::{Error, Result};

/// Concept inventory plus the fixed null and error tags.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LabelScheme {
    pub concepts: BTreeSet<String>,
}

impl LabelScheme {
    pub fn new<I, S>(concepts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        LabelScheme {
            concepts: concepts.into_iter().map(Into::into).collect(),
        }
    }

    /// Every label the scheme admits, null first, then B/I per concept,
    /// then (optionally) the two error tags.
    pub fn labels(&self, with_errors: bool) -> Vec<Label> {
        let mut out = vec![Label::Null];
        for c in &self.concepts {
            out.push(Label::Begin(c.clone()));
            out.push(Label::Inside(c.clone()));
        }
        if with_errors {
            out.push(Label::ErrorC);
            out.push(Label::ErrorN);
        }
        out
    }

    pub fn admits(&self, label: &Label) -> bool {
        label.concept().map_or(true, |c| self.concepts.contains(c))
    }

    /// `I-c` may only follow `B-c`, `I-c`, or `ERROR-C` (a concept word
    /// whose tag was replaced by the error tag).
    pub fn check_transitions(labels: &[Label]) -> std::result::Result<(), String> {
        let mut prev = &Label::Null;
        for (i, l) in labels.iter().enumerate() {
            if let Label::Inside(c) = l {
                let ok = match prev {
                    Label::Begin(p) | Label::Inside(p) => p == c,
                    Label::ErrorC => true,
                    _ => false,
                };
                if !ok {
                    return Err(format!("token {}: {l} cannot follow {prev}", i + 1));
                }
            }
            prev = l;
        }
        Ok(())
    }

    pub fn validate(&self, labels: &[Label]) -> std::result::Result<(), String> {
        if let Some(l) = labels.iter().find(|l| !self.admits(l)) {
            return Err(format!("label {l} outside the concept inventory"));
        }
        Self::check_transitions(labels)
    }
}

/// A concept mention: label, normalized value and token span `[start, end)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ConceptSegment {
    pub label: String,
    pub value: String,
    pub start: usize,
    pub end: usize,
}

/// Maximal B/I runs of `labels` over `surfaces`. An `I-c` that does not
/// continue a run of `c` opens a new segment; error tags count as null.
pub fn segments_from_labels<S: AsRef<str>>(
    surfaces: &[S],
    labels: &[Label],
    lexicon: &Lexicon,
) -> Vec<ConceptSegment> {
    let mut spans: Vec<(String, usize, usize)> = Vec::new();
    let mut open: Option<(String, usize)> = None;
    for (i, l) in labels.iter().enumerate() {
        match l {
            Label::Inside(c) if open.as_ref().is_some_and(|(o, _)| o == c) => {}
            Label::Begin(c) | Label::Inside(c) => {
                if let Some((o, s)) = open.take() {
                    spans.push((o, s, i));
                }
                open = Some((c.clone(), i));
            }
            _ => {
                if let Some((o, s)) = open.take() {
                    spans.push((o, s, i));
                }
            }
        }
    }
    if let Some((o, s)) = open {
        spans.push((o, s, labels.len()));
    }
    spans
        .into_iter()
        .map(|(label, start, end)| ConceptSegment {
            value: lexicon.normalize(&surfaces[start..end]),
            label,
            start,
            end,
        })
        .collect()
}

pub fn segments_of(tokens: &[Token], lexicon: &Lexicon) -> Vec<ConceptSegment> {
    let surfaces: Vec<&str> = tokens.iter().map(|t| t.surface.as_str()).collect();
    let labels: Vec<Label> = tokens.iter().map(|t| t.label.clone()).collect();
    segments_from_labels(&surfaces, &labels, lexicon)
}

/// Inverse of [`segments_of`]: B/I labels for non-overlapping spans.
pub fn labels_of(segments: &[ConceptSegment], len: usize) -> Vec<Label> {
    let mut labels = vec![Label::Null; len];
    for s in segments {
        labels[s.start] = Label::Begin(s.label.clone());
        for l in &mut labels[s.start + 1..s.end] {
            *l = Label::Inside(s.label.clone());
        }
    }
    labels
}

/// Replace the projected tag of every erroneous hypothesis word by
/// `ERROR-C` when it carries a concept tag (its aligned reference word
/// supports a concept) and by `ERROR-N` otherwise (null-aligned or inserted
/// words, whose projected tag is null).
pub fn augment_error_labels(hyp: &Utterance) -> Result<Utterance> {
    let mut out = hyp.clone();
    for (i, t) in out.tokens.iter_mut().enumerate() {
        let flag = t.error_flag.ok_or_else(|| {
            Error::Precondition(format!("utterance {} token {} has no error flag", hyp.id, i + 1))
        })?;
        if flag.is_error() {
            t.label = if t.label.concept().is_some() {
                Label::ErrorC
            } else {
                Label::ErrorN
            };
        }
    }
    Ok(out)
}

pub fn strip_error_labels(output: &TaggerOutput) -> TaggerOutput {
    TaggerOutput {
        id: output.id.clone(),
        labels: output
            .labels
            .iter()
            .map(|l| if l.is_error() { Label::Null } else { l.clone() })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ErrorFlag;

    fn l(s: &str) -> Label {
        s.parse().unwrap()
    }

    fn lex() -> Lexicon {
        Lexicon::parse(
            "paris\tTOWN\nthirty\tFIGURE\t30\nthree\tFIGURE\t3\nthirty three\tFIGURE\t33\n",
            "t",
        )
        .unwrap()
    }

    fn out(labels: &[&str]) -> TaggerOutput {
        TaggerOutput {
            id: "u".into(),
            labels: labels.iter().map(|s| l(s)).collect(),
        }
    }

    #[test]
    fn strip_maps_error_tags_to_null() {
        assert_eq!(
            strip_error_labels(&out(&["B-TOWN", "ERROR-N", "null"])),
            out(&["B-TOWN", "null", "null"])
        );
        assert_eq!(strip_error_labels(&out(&["ERROR-C", "ERROR-C"])), out(&["null", "null"]));
        let clean = out(&["B-TOWN", "I-TOWN", "null"]);
        assert_eq!(strip_error_labels(&clean), clean);
    }

    #[test]
    fn all_null_labels_have_no_segments() {
        assert!(segments_from_labels(&["a", "b"], &[Label::Null, Label::Null], &lex()).is_empty());
    }

    #[test]
    fn single_town_segment_is_lowercased() {
        let segs = segments_from_labels(&["in", "Paris"], &[l("null"), l("B-TOWN")], &lex());
        assert_eq!(
            segs,
            vec![ConceptSegment {
                label: "TOWN".into(),
                value: "paris".into(),
                start: 1,
                end: 2
            }]
        );
    }

    #[test]
    fn figure_words_normalize_to_digits() {
        let segs = segments_from_labels(&["thirty", "three"], &[l("B-DATE"), l("I-DATE")], &lex());
        assert_eq!(segs.len(), 1);
        assert_eq!((segs[0].label.as_str(), segs[0].value.as_str()), ("DATE", "33"));
        assert_eq!((segs[0].start, segs[0].end), (0, 2));
    }

    #[test]
    fn orphan_inside_opens_a_segment() {
        let segs = segments_from_labels(
            &["a", "b", "c"],
            &[l("B-X"), l("I-Y"), l("I-Y")],
            &Lexicon::default(),
        );
        assert_eq!(segs.len(), 2);
        assert_eq!((segs[1].start, segs[1].end), (1, 3));
    }

    #[test]
    fn transitions_reject_inside_after_null() {
        assert!(LabelScheme::check_transitions(&[l("null"), l("I-TOWN")]).is_err());
        assert!(LabelScheme::check_transitions(&[l("B-TOWN"), l("I-DATE")]).is_err());
        assert!(LabelScheme::check_transitions(&[l("ERROR-C"), l("I-TOWN")]).is_ok());
        assert!(LabelScheme::check_transitions(&[l("B-TOWN"), l("I-TOWN")]).is_ok());
    }

    fn hyp(labels: &[&str], flags: &[Option<ErrorFlag>]) -> Utterance {
        Utterance {
            id: "h".into(),
            tokens: labels
                .iter()
                .zip(flags)
                .map(|(s, f)| {
                    let mut t = Token::new("w");
                    t.label = l(s);
                    t.error_flag = *f;
                    t
                })
                .collect(),
            reference: None,
        }
    }

    #[test]
    fn augmentation_follows_the_supporting_concept() {
        use ErrorFlag::*;
        let h = hyp(
            &["null", "B-TOWN", "null"],
            &[Some(Correct), Some(Error), Some(Error)],
        );
        let a = augment_error_labels(&h).unwrap();
        assert_eq!(a.labels(), vec![l("null"), l("ERROR-C"), l("ERROR-N")]);

        let clean = hyp(&["null", "B-TOWN"], &[Some(Correct), Some(Correct)]);
        assert_eq!(augment_error_labels(&clean).unwrap(), clean);

        let missing = hyp(&["null"], &[None]);
        assert!(matches!(augment_error_labels(&missing), Err(crate::Error::Precondition(_))));
    }
}
