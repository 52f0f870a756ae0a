use std::fmt::Write as _;

use crate::corpus::{Dataset, ErrorFlag};
use crate::{Error, Result};

pub const NCE_EPSILON: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct ConfidenceRecord {
    pub id: String,
    pub index: usize,
    pub correct: bool,
    pub confidence: f64,
}

/// One record per token carrying both an error flag and the selected
/// confidence (`pap` when `use_pap`, the MLP column otherwise).
pub fn confidence_records(data: &Dataset, use_pap: bool) -> Result<Vec<ConfidenceRecord>> {
    let mut out = Vec::with_capacity(data.token_count());
    for u in &data.utterances {
        for (i, t) in u.tokens.iter().enumerate() {
            let c = if use_pap { t.pap } else { t.mlp_conf };
            let (Some(flag), Some(confidence)) = (t.error_flag, c) else {
                return Err(Error::Precondition(format!(
                    "{} token {}: missing error flag or confidence",
                    u.id,
                    i + 1
                )));
            };
            out.push(ConfidenceRecord {
                id: u.id.clone(),
                index: i,
                correct: flag == ErrorFlag::Correct,
                confidence,
            });
        }
    }
    Ok(out)
}

fn binary_entropy(p: f64) -> f64 {
    -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
}

/// Normalized cross entropy in bits, confidences clipped to
/// `[NCE_EPSILON, 1 - NCE_EPSILON]`.
pub fn nce(records: &[ConfidenceRecord]) -> Result<f64> {
    let n = records.len();
    let n_correct = records.iter().filter(|r| r.correct).count();
    if n_correct == 0 || n_correct == n {
        return Err(Error::DegenerateBaseline(format!(
            "{n_correct} of {n} records correct; both classes are required"
        )));
    }
    let h_base = binary_entropy(n_correct as f64 / n as f64);
    let sum: f64 = records
        .iter()
        .map(|r| {
            let c = r.confidence.clamp(NCE_EPSILON, 1.0 - NCE_EPSILON);
            if r.correct {
                c.log2()
            } else {
                (1.0 - c).log2()
            }
        })
        .sum();
    let h_cond = -sum / n as f64;
    Ok((h_base - h_cond) / h_base)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub mean_confidence: Option<f64>,
    pub fraction_correct: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationReport {
    pub bins: Vec<CalibrationBin>,
    /// `None` when every record has the same correctness.
    pub nce: Option<f64>,
}

/// Equal-width reliability table; the top bin is closed on the right.
pub fn calibration_bins(records: &[ConfidenceRecord], k: usize) -> Result<CalibrationReport> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 calibration bins, got {k}")));
    }
    let mut count = vec![0usize; k];
    let mut conf = vec![0.0; k];
    let mut correct = vec![0usize; k];
    for r in records {
        let b = crate::features::confidence_bin(r.confidence, k)?;
        count[b] += 1;
        conf[b] += r.confidence;
        correct[b] += r.correct as usize;
    }
    let bins = (0..k)
        .map(|b| CalibrationBin {
            lower: b as f64 / k as f64,
            upper: (b + 1) as f64 / k as f64,
            count: count[b],
            mean_confidence: (count[b] > 0).then(|| conf[b] / count[b] as f64),
            fraction_correct: (count[b] > 0).then(|| correct[b] as f64 / count[b] as f64),
        })
        .collect();
    let nce = match nce(records) {
        Ok(v) => Some(v),
        Err(Error::DegenerateBaseline(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(CalibrationReport { bins, nce })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| format!("{x:.6}"))
}

impl CalibrationReport {
    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<13} {:>8} {:>10} {:>10}", "interval", "count", "mean_conf", "correct");
        for b in &self.bins {
            let close = if b.upper >= 1.0 { ']' } else { ')' };
            let _ = writeln!(
                s,
                "[{:.2},{:.2}{close}   {:>8} {:>10} {:>10}",
                b.lower,
                b.upper,
                b.count,
                opt(b.mean_confidence),
                opt(b.fraction_correct)
            );
        }
        let _ = writeln!(s, "records={}", self.total());
        let _ = writeln!(s, "nce={}", opt(self.nce));
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("lower,upper,count,mean_confidence,fraction_correct\n");
        for b in &self.bins {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                b.lower,
                b.upper,
                b.count,
                opt(b.mean_confidence),
                opt(b.fraction_correct)
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn recs(flags: &[bool], conf: &[f64]) -> Vec<ConfidenceRecord> {
        flags
            .iter()
            .zip(conf)
            .enumerate()
            .map(|(i, (&correct, &confidence))| ConfidenceRecord {
                id: "u".into(),
                index: i,
                correct,
                confidence,
            })
            .collect()
    }

    #[test]
    fn constant_at_base_rate_scores_zero() {
        let r = recs(&[true, true, true, false], &[0.75; 4]);
        assert!(nce(&r).unwrap().abs() < 1e-9);
    }

    #[test]
    fn clipped_oracle_scores_near_one() {
        let flags = [true, false, true, true, false];
        let conf: Vec<f64> = flags.iter().map(|&c| if c { 1.0 } else { 0.0 }).collect();
        assert!(nce(&recs(&flags, &conf)).unwrap() >= 0.99);
    }

    #[test]
    fn four_record_case() {
        // Evaluated independently: H_base = 0.8112781244591328,
        // H_cond = 0.2369655941662061.
        let r = recs(&[true, true, true, false], &[0.9, 0.8, 0.9, 0.2]);
        assert!((nce(&r).unwrap() - 0.7079107805055294).abs() < 1e-9);
    }

    #[test]
    fn single_class_is_degenerate() {
        let r = recs(&[true, true], &[0.9, 0.8]);
        assert!(matches!(nce(&r), Err(Error::DegenerateBaseline(_))));
    }

    #[test]
    fn one_occupied_bin() {
        let r = recs(&[true; 5], &[0.95; 5]);
        let rep = calibration_bins(&r, 10).unwrap();
        let occupied: Vec<&CalibrationBin> = rep.bins.iter().filter(|b| b.count > 0).collect();
        assert_eq!(occupied.len(), 1);
        assert_eq!(occupied[0].fraction_correct, Some(1.0));
        assert_eq!(rep.nce, None);
        assert!(rep.to_csv().lines().count() == 11);
    }

    proptest! {
        #[test]
        fn bins_match_recount(pairs in prop::collection::vec((any::<bool>(), 0.0f64..=1.0), 1..1000), k in 2usize..20) {
            let flags: Vec<bool> = pairs.iter().map(|p| p.0).collect();
            let conf: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let rep = calibration_bins(&recs(&flags, &conf), k).unwrap();
            prop_assert_eq!(rep.total(), pairs.len());
            for (b, bin) in rep.bins.iter().enumerate() {
                let inside: Vec<&(bool, f64)> = pairs
                    .iter()
                    .filter(|(_, c)| {
                        let lo = b as f64 / k as f64;
                        let hi = (b + 1) as f64 / k as f64;
                        (*c >= lo && *c < hi) || (b == k - 1 && *c == 1.0)
                    })
                    .collect();
                prop_assert_eq!(bin.count, inside.len());
                if let Some(f) = bin.fraction_correct {
                    let c = inside.iter().filter(|p| p.0).count() as f64 / inside.len() as f64;
                    prop_assert!((f - c).abs() < 1e-12);
                    prop_assert!((0.0..=1.0).contains(&f));
                }
            }
        }

        #[test]
        fn calibrated_beats_constant(seed in 0u64..50) {
            use rand::prelude::*;
            let mut rng = crate::seed::rng(seed);
            let probs: Vec<f64> = (0..4000).map(|_| rng.gen_range(0.02..0.98)).collect();
            let flags: Vec<bool> = probs.iter().map(|&p| rng.gen_bool(p)).collect();
            let pc = flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64;
            let cal = nce(&recs(&flags, &probs)).unwrap();
            let constant = nce(&recs(&flags, &vec![pc; flags.len()])).unwrap();
            prop_assert!(cal >= constant);
        }
    }
}
