//! Levenshtein alignment, WER, the simulated recognizer and confusion
//! networks.

mod channel;
mod cn;

pub use channel::{
    corrupt, corrupt_dataset, format_nbest, parse_nbest, project_labels, read_nbest,
    sample_nbest, write_nbest, NBestList, NoiseConfig,
};
pub use cn::{
    attach_pap, build_cn, format_cns, pap_of, parse_cns, read_cns, write_cns, ConfusionNetwork,
    CnEntry,
};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EditOp {
    Match,
    Substitution,
    Insertion,
    Deletion,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Step {
    pub op: EditOp,
    pub ref_index: Option<usize>,
    pub hyp_index: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EditCosts {
    pub substitution: u32,
    pub insertion: u32,
    pub deletion: u32,
}

impl Default for EditCosts {
    fn default() -> Self {
        EditCosts {
            substitution: 1,
            insertion: 1,
            deletion: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EditCounts {
    pub matches: usize,
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
}

impl EditCounts {
    pub fn errors(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }

    pub fn reference_len(&self) -> usize {
        self.matches + self.substitutions + self.deletions
    }

    pub fn add(&mut self, o: &EditCounts) {
        self.matches += o.matches;
        self.substitutions += o.substitutions;
        self.insertions += o.insertions;
        self.deletions += o.deletions;
    }

    /// `100·(S+D+I)/N`.
    pub fn rate(&self) -> Result<f64> {
        match self.reference_len() {
            0 => Err(Error::UndefinedRate("empty reference".into())),
            n => Ok(100.0 * self.errors() as f64 / n as f64),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alignment {
    pub steps: Vec<Step>,
    pub cost: u64,
}

impl Alignment {
    pub fn counts(&self) -> EditCounts {
        let mut c = EditCounts::default();
        for s in &self.steps {
            match s.op {
                EditOp::Match => c.matches += 1,
                EditOp::Substitution => c.substitutions += 1,
                EditOp::Insertion => c.insertions += 1,
                EditOp::Deletion => c.deletions += 1,
            }
        }
        c
    }
}

/// Minimum-cost edit script from `reference` to `hyp`. Among optimal
/// scripts the backtrace prefers match, then substitution, deletion and
/// insertion.
pub fn align<T: PartialEq>(reference: &[T], hyp: &[T], costs: EditCosts) -> Alignment {
    let (n, m) = (reference.len(), hyp.len());
    let w = m + 1;
    let mut d = vec![0u64; (n + 1) * w];
    for j in 1..=m {
        d[j] = d[j - 1] + costs.insertion as u64;
    }
    for i in 1..=n {
        d[i * w] = d[(i - 1) * w] + costs.deletion as u64;
        for j in 1..=m {
            let diag = d[(i - 1) * w + j - 1]
                + if reference[i - 1] == hyp[j - 1] {
                    0
                } else {
                    costs.substitution as u64
                };
            let del = d[(i - 1) * w + j] + costs.deletion as u64;
            let ins = d[i * w + j - 1] + costs.insertion as u64;
            d[i * w + j] = diag.min(del).min(ins);
        }
    }
    let mut steps = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        let step = |op, r: Option<usize>, h: Option<usize>| Step {
            op,
            ref_index: r,
            hyp_index: h,
        };
        if i > 0 && j > 0 && reference[i - 1] == hyp[j - 1] && d[(i - 1) * w + j - 1] == here {
            steps.push(step(EditOp::Match, Some(i - 1), Some(j - 1)));
            i -= 1;
            j -= 1;
        } else if i > 0
            && j > 0
            && reference[i - 1] != hyp[j - 1]
            && d[(i - 1) * w + j - 1] + costs.substitution as u64 == here
        {
            steps.push(step(EditOp::Substitution, Some(i - 1), Some(j - 1)));
            i -= 1;
            j -= 1;
        } else if i > 0 && d[(i - 1) * w + j] + costs.deletion as u64 == here {
            steps.push(step(EditOp::Deletion, Some(i - 1), None));
            i -= 1;
        } else {
            steps.push(step(EditOp::Insertion, None, Some(j - 1)));
            j -= 1;
        }
    }
    steps.reverse();
    Alignment {
        steps,
        cost: d[n * w + m],
    }
}

fn lowercase<S: AsRef<str>>(words: &[S]) -> Vec<String> {
    words.iter().map(|w| w.as_ref().to_lowercase()).collect()
}

/// Case-insensitive word alignment with unit costs.
pub fn align_words<R: AsRef<str>, H: AsRef<str>>(reference: &[R], hyp: &[H]) -> Alignment {
    align(&lowercase(reference), &lowercase(hyp), EditCosts::default())
}

pub fn word_edit_counts<R: AsRef<str>, H: AsRef<str>>(reference: &[R], hyp: &[H]) -> EditCounts {
    align_words(reference, hyp).counts()
}

/// Word error rate in percent.
pub fn wer<R: AsRef<str>, H: AsRef<str>>(reference: &[R], hyp: &[H]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::UndefinedRate("WER of an empty reference".into()));
    }
    word_edit_counts(reference, hyp).rate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Minimum edit cost by exhaustive recursion over every edit script.
    fn brute_cost(r: &[u8], h: &[u8], c: EditCosts) -> u64 {
        match (r.split_first(), h.split_first()) {
            (None, None) => 0,
            (Some(_), None) => r.len() as u64 * c.deletion as u64,
            (None, Some(_)) => h.len() as u64 * c.insertion as u64,
            (Some((a, rr)), Some((b, hh))) => {
                let diag = brute_cost(rr, hh, c) + if a == b { 0 } else { c.substitution as u64 };
                let del = brute_cost(rr, h, c) + c.deletion as u64;
                let ins = brute_cost(r, hh, c) + c.insertion as u64;
                diag.min(del).min(ins)
            }
        }
    }

    fn script_cost(a: &Alignment, c: EditCosts) -> u64 {
        a.steps
            .iter()
            .map(|s| match s.op {
                EditOp::Match => 0,
                EditOp::Substitution => c.substitution as u64,
                EditOp::Insertion => c.insertion as u64,
                EditOp::Deletion => c.deletion as u64,
            })
            .sum()
    }

    #[test]
    fn identical_single_word_is_one_match() {
        let a = align(&["x"], &["x"], EditCosts::default());
        assert_eq!(a.cost, 0);
        assert_eq!(a.steps.len(), 1);
        assert_eq!(a.steps[0].op, EditOp::Match);
    }

    #[test]
    fn abc_to_ac_deletes_b() {
        let a = align(&['a', 'b', 'c'], &['a', 'c'], EditCosts::default());
        let ops: Vec<EditOp> = a.steps.iter().map(|s| s.op).collect();
        assert_eq!(ops, vec![EditOp::Match, EditOp::Deletion, EditOp::Match]);
        assert_eq!(a.cost, 1);
    }

    #[test]
    fn wer_examples() {
        assert_eq!(wer(&["a", "b"], &["a", "b"]).unwrap(), 0.0);
        assert_eq!(wer(&["a", "b", "c", "d"], &["a", "x", "c", "d"]).unwrap(), 25.0);
        let empty: [&str; 0] = [];
        assert!(matches!(wer(&empty, &["a"]), Err(Error::UndefinedRate(_))));
    }

    proptest! {
        #[test]
        fn cost_matches_exhaustive_minimum(
            r in prop::collection::vec(0u8..4, 0..=6),
            h in prop::collection::vec(0u8..4, 0..=6),
            sub in 1u32..4, ins in 1u32..4, del in 1u32..4,
        ) {
            let c = EditCosts { substitution: sub, insertion: ins, deletion: del };
            let a = align(&r, &h, c);
            prop_assert_eq!(a.cost, brute_cost(&r, &h, c));
            prop_assert_eq!(script_cost(&a, c), a.cost);
            let refs: Vec<usize> = a.steps.iter().filter_map(|s| s.ref_index).collect();
            let hyps: Vec<usize> = a.steps.iter().filter_map(|s| s.hyp_index).collect();
            prop_assert_eq!(refs, (0..r.len()).collect::<Vec<_>>());
            prop_assert_eq!(hyps, (0..h.len()).collect::<Vec<_>>());
        }

        #[test]
        fn wer_ignores_consistent_relabeling(
            r in prop::collection::vec(0u8..5, 1..=8),
            h in prop::collection::vec(0u8..5, 0..=8),
            shift in 1u8..5,
        ) {
            let name = |v: &[u8], k: u8| v.iter().map(|x| format!("w{}", (x + k) % 5)).collect::<Vec<_>>();
            prop_assert_eq!(wer(&name(&r, 0), &name(&h, 0)).unwrap(), wer(&name(&r, shift), &name(&h, shift)).unwrap());
            prop_assert_eq!(wer(&name(&r, 0), &name(&r, 0)).unwrap(), 0.0);
        }
    }
}
