use crate::corpus::{Dataset, Label, TaggerOutput};
use crate::features::Lexicon;
use crate::{Error, Result};

use super::scoring::Scorer;

fn check_lengths(outputs: &[&TaggerOutput]) -> Result<()> {
    let Some(first) = outputs.first() else {
        return Err(Error::Precondition("no system outputs to combine".into()));
    };
    for o in outputs {
        if o.id != first.id {
            return Err(Error::Pairing(format!("combining {} with {}", first.id, o.id)));
        }
        if o.labels.len() != first.labels.len() {
            return Err(Error::Alignment(format!(
                "{}: systems disagree on length ({} vs {})",
                o.id,
                first.labels.len(),
                o.labels.len()
            )));
        }
    }
    Ok(())
}

/// Per-position weighted vote. Ties go to the label proposed by the
/// earliest system in `outputs` order.
pub fn combine_weighted(outputs: &[&TaggerOutput], weights: &[f64]) -> Result<TaggerOutput> {
    check_lengths(outputs)?;
    if weights.len() != outputs.len() {
        return Err(Error::Config(format!(
            "{} weights for {} systems",
            weights.len(),
            outputs.len()
        )));
    }
    if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) || !weights.iter().any(|w| *w > 0.0) {
        return Err(Error::Config(format!("invalid combination weights {weights:?}")));
    }
    let n = outputs[0].labels.len();
    let labels = (0..n)
        .map(|i| {
            // Candidates in system priority order with their summed weight.
            let mut votes: Vec<(&Label, f64)> = Vec::with_capacity(outputs.len());
            for (o, &w) in outputs.iter().zip(weights) {
                let l = &o.labels[i];
                match votes.iter_mut().find(|(c, _)| *c == l) {
                    Some(v) => v.1 += w,
                    None => votes.push((l, w)),
                }
            }
            let best = votes
                .iter()
                .fold(None::<(&Label, f64)>, |acc, &(l, w)| match acc {
                    Some((_, bw)) if bw >= w => acc,
                    _ => Some((l, w)),
                })
                .expect("at least one system");
            best.0.clone()
        })
        .collect();
    Ok(TaggerOutput {
        id: outputs[0].id.clone(),
        labels,
    })
}

fn transpose<'a>(systems: &'a [Vec<TaggerOutput>]) -> Result<Vec<Vec<&'a TaggerOutput>>> {
    let Some(first) = systems.first() else {
        return Err(Error::Precondition("no systems to combine".into()));
    };
    if let Some(s) = systems.iter().find(|s| s.len() != first.len()) {
        return Err(Error::Pairing(format!(
            "systems cover {} and {} utterances",
            first.len(),
            s.len()
        )));
    }
    Ok((0..first.len())
        .map(|u| systems.iter().map(|s| &s[u]).collect())
        .collect())
}

pub fn combine_corpus(systems: &[Vec<TaggerOutput>], weights: &[f64]) -> Result<Vec<TaggerOutput>> {
    transpose(systems)?
        .iter()
        .map(|outs| combine_weighted(outs, weights))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsensusOutput {
    /// Agreed labels; abstaining positions hold `null`.
    pub output: TaggerOutput,
    pub abstained: Vec<bool>,
}

/// Keep a position only when every system proposes the same label.
pub fn consensus(outputs: &[&TaggerOutput]) -> Result<ConsensusOutput> {
    check_lengths(outputs)?;
    let n = outputs[0].labels.len();
    let mut labels = Vec::with_capacity(n);
    let mut abstained = Vec::with_capacity(n);
    for i in 0..n {
        let l = &outputs[0].labels[i];
        let agree = outputs.iter().all(|o| o.labels[i] == *l);
        labels.push(if agree { l.clone() } else { Label::Null });
        abstained.push(!agree);
    }
    Ok(ConsensusOutput {
        output: TaggerOutput {
            id: outputs[0].id.clone(),
            labels,
        },
        abstained,
    })
}

pub fn consensus_corpus(systems: &[Vec<TaggerOutput>]) -> Result<Vec<ConsensusOutput>> {
    transpose(systems)?.iter().map(|outs| consensus(outs)).collect()
}

/// Tagger-output layout with `?` marking an abstention.
pub fn format_consensus(outputs: &[ConsensusOutput]) -> String {
    let mut out = String::new();
    for c in outputs {
        out.push_str("# id=");
        out.push_str(&c.output.id);
        out.push('\n');
        for (l, a) in c.output.labels.iter().zip(&c.abstained) {
            if *a {
                out.push_str("?\n");
            } else {
                out.push_str(&l.to_string());
                out.push('\n');
            }
        }
        out.push('\n');
    }
    out
}

pub fn parse_consensus(text: &str, origin: &str) -> Result<Vec<ConsensusOutput>> {
    let mut out: Vec<ConsensusOutput> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(id) = line.strip_prefix("# id=") {
            out.push(ConsensusOutput {
                output: TaggerOutput {
                    id: id.to_string(),
                    labels: Vec::new(),
                },
                abstained: Vec::new(),
            });
            continue;
        }
        let cur = out
            .last_mut()
            .ok_or_else(|| Error::parse(origin, n + 1, "label before `# id=` line"))?;
        let (label, abstain) = if line == "?" {
            (Label::Null, true)
        } else {
            (line.parse().map_err(|m: String| Error::parse(origin, n + 1, m))?, false)
        };
        cur.output.labels.push(label);
        cur.abstained.push(abstain);
    }
    Ok(out)
}

/// All weight vectors on the simplex whose entries are multiples of
/// `step`, in lexicographic order of their unit counts.
pub fn simplex_grid(systems: usize, step: f64) -> Result<Vec<Vec<f64>>> {
    let units = (1.0 / step).round();
    if systems == 0 || !(step > 0.0 && step <= 1.0) || (units * step - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("grid step {step} must divide 1")));
    }
    let units = units as usize;
    let mut out = Vec::new();
    let mut cur = vec![0usize; systems];
    fn rec(i: usize, left: usize, cur: &mut Vec<usize>, units: usize, out: &mut Vec<Vec<f64>>) {
        if i + 1 == cur.len() {
            cur[i] = left;
            out.push(cur.iter().map(|&u| u as f64 / units as f64).collect());
            return;
        }
        for u in (0..=left).rev() {
            cur[i] = u;
            rec(i + 1, left - u, cur, units, out);
        }
    }
    rec(0, units, &mut cur, units, &mut out);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TunedWeights {
    pub weights: Vec<f64>,
    pub dev_cer: f64,
}

/// Grid search over the simplex minimizing dev CER; among equal CERs the
/// weighting closest to uniform wins, then the earliest grid point.
pub fn tune_weights(
    systems: &[Vec<TaggerOutput>],
    reference: &Dataset,
    step: f64,
    lexicon: &Lexicon,
) -> Result<TunedWeights> {
    let grid = simplex_grid(systems.len(), step)?;
    let scorer = Scorer::new(reference, lexicon);
    let uniform = 1.0 / systems.len() as f64;
    // (errors, distance to uniform, CER, grid index)
    let mut best: Option<(usize, f64, f64, usize)> = None;
    for (g, w) in grid.iter().enumerate() {
        let rep = scorer.score(&combine_corpus(systems, w)?)?;
        let errors = rep.concept.errors();
        let dist: f64 = w.iter().map(|x| (x - uniform).powi(2)).sum();
        let better = match best {
            None => true,
            Some((be, bd, _, _)) => errors < be || (errors == be && dist < bd - 1e-12),
        };
        if better {
            best = Some((errors, dist, rep.cer(), g));
        }
    }
    let (_, _, dev_cer, g) = best.expect("grid is never empty");
    Ok(TunedWeights {
        weights: grid[g].clone(),
        dev_cer,
    })
}
