//! Feature-templated linear-chain CRF.
//!
//! Parameters are one flat vector: `features × labels` emission weights
//! followed by start, `labels × labels` transition and end weights. The
//! last three blocks stay at zero when the template set disables
//! transitions.

mod lattice;
mod templates;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;

pub use lattice::{Lattice, Marginals};
pub use templates::{expand_templates, Template, TemplateSet, BOS, EOS, WINDOW};

use crate::corpus::{Dataset, Label, TaggerOutput, Utterance};
use crate::features::{FeatureSpec, Lexicon};
use crate::{seed, Error, Result};

const MAGIC: &str = "slu-crf 1";

#[derive(Clone, Debug, PartialEq)]
pub struct CrfHyper {
    /// Strength of the `(l2/2)·||w||²` penalty on the whole training set.
    pub l2: f64,
    pub epochs: usize,
    pub lr: f64,
    /// `lr_t = lr / (1 + decay·t/N)` after `t` examples of an `N`-example set.
    pub decay: f64,
    pub seed: u64,
}

impl Default for CrfHyper {
    fn default() -> Self {
        CrfHyper {
            l2: 1.0,
            epochs: 10,
            lr: 0.2,
            decay: 1.0,
            seed: 1,
        }
    }
}

/// Everything that defines a CRF system besides its weights.
#[derive(Clone, Debug)]
pub struct CrfSetup {
    pub templates: TemplateSet,
    pub spec: FeatureSpec,
    pub hyper: CrfHyper,
    /// Fixed label inventory; inferred from the training data when `None`.
    pub labels: Option<Vec<Label>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrfModel {
    labels: Vec<Label>,
    label_ids: HashMap<Label, usize>,
    templates: TemplateSet,
    spec: FeatureSpec,
    keys: Vec<String>,
    index: HashMap<String, u32>,
    weights: Vec<f64>,
    l2: f64,
}

/// One utterance as feature ids per position plus gold label ids.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoded {
    pub features: Vec<Vec<u32>>,
    pub gold: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct CrfTraining {
    pub model: CrfModel,
    /// Mean dev log-likelihood per utterance after each epoch.
    pub dev_log_likelihood: Vec<f64>,
}

impl CrfModel {
    pub fn new(
        labels: Vec<Label>,
        templates: TemplateSet,
        spec: FeatureSpec,
        keys: Vec<String>,
        l2: f64,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Config("empty label inventory".into()));
        }
        let label_ids: HashMap<Label, usize> =
            labels.iter().cloned().enumerate().map(|(i, l)| (l, i)).collect();
        if label_ids.len() != labels.len() {
            return Err(Error::Config("duplicate label in inventory".into()));
        }
        let index: HashMap<String, u32> =
            keys.iter().cloned().enumerate().map(|(i, k)| (k, i as u32)).collect();
        if index.len() != keys.len() {
            return Err(Error::Format("duplicate feature key".into()));
        }
        let l = labels.len();
        let n = keys.len() * l + 2 * l + l * l;
        Ok(CrfModel {
            labels,
            label_ids,
            templates,
            spec,
            keys,
            index,
            weights: vec![0.0; n],
            l2,
        })
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    pub fn spec(&self) -> &FeatureSpec {
        &self.spec
    }

    pub fn feature_count(&self) -> usize {
        self.keys.len()
    }

    pub fn l2(&self) -> f64 {
        self.l2
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    fn start_offset(&self) -> usize {
        self.keys.len() * self.labels.len()
    }

    fn trans_offset(&self) -> usize {
        self.start_offset() + self.labels.len()
    }

    fn end_offset(&self) -> usize {
        self.trans_offset() + self.labels.len() * self.labels.len()
    }

    pub fn feature_keys(&self, utt: &Utterance, lexicon: &Lexicon) -> Vec<Vec<String>> {
        expand_templates(&utt.tokens, &self.templates, &self.spec, lexicon)
    }

    /// Feature ids per position; unknown keys are dropped. Gold ids are
    /// empty unless `with_gold`.
    pub fn encode(&self, utt: &Utterance, lexicon: &Lexicon, with_gold: bool) -> Result<Encoded> {
        let features = self
            .feature_keys(utt, lexicon)
            .into_iter()
            .map(|keys| keys.iter().filter_map(|k| self.index.get(k).copied()).collect())
            .collect();
        let gold = if with_gold {
            utt.tokens
                .iter()
                .map(|t| {
                    self.label_ids.get(&t.label).copied().ok_or_else(|| Error::Schema {
                        utterance: utt.id.clone(),
                        message: format!("label {} outside the model inventory", t.label),
                    })
                })
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        Ok(Encoded { features, gold })
    }

    pub fn lattice(&self, ex: &Encoded) -> Lattice {
        lattice_of(&self.weights, self.labels.len(), self.keys.len(), ex, 1.0)
    }

    pub fn viterbi(&self, utt: &Utterance, lexicon: &Lexicon) -> TaggerOutput {
        let ex = self.encode(utt, lexicon, false).expect("no gold requested");
        let (path, _) = self.lattice(&ex).viterbi();
        TaggerOutput {
            id: utt.id.clone(),
            labels: path.into_iter().map(|y| self.labels[y].clone()).collect(),
        }
    }

    /// Posterior label distribution per position, columns in `labels()` order.
    pub fn marginals(&self, utt: &Utterance, lexicon: &Lexicon) -> Vec<Vec<f64>> {
        let ex = self.encode(utt, lexicon, false).expect("no gold requested");
        let m = self.lattice(&ex).marginals();
        m.unary.chunks(self.labels.len()).map(<[f64]>::to_vec).collect()
    }

    pub fn predict(&self, data: &Dataset, lexicon: &Lexicon) -> Vec<TaggerOutput> {
        data.utterances.par_iter().map(|u| self.viterbi(u, lexicon)).collect()
    }

    /// Summed conditional log-likelihood of `batch` minus `(l2/2)·||w||²`,
    /// and its gradient with respect to the weights.
    pub fn log_likelihood_and_gradient(&self, batch: &[Encoded]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.weights.len()];
        let mut ll = 0.0;
        for ex in batch {
            ll += accumulate(&self.weights, self.labels.len(), self.keys.len(), ex, 1.0, &mut grad, self.templates.transitions);
        }
        for (g, w) in grad.iter_mut().zip(&self.weights) {
            *g -= self.l2 * w;
        }
        ll -= 0.5 * self.l2 * self.weights.iter().map(|w| w * w).sum::<f64>();
        (ll, grad)
    }

    pub fn log_likelihood(&self, ex: &Encoded) -> f64 {
        let lat = self.lattice(ex);
        lat.score(&ex.gold) - lat.log_partition()
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    /// Continue stochastic training from the current weights.
    pub fn fit(&mut self, train: &[Encoded], dev: &[Encoded], hyper: &CrfHyper) -> Vec<f64> {
        let l = self.labels.len();
        let nf = self.keys.len();
        let n = train.len().max(1) as f64;
        let transitions = self.templates.transitions;
        let (so, to, eo) = (self.start_offset(), self.trans_offset(), self.end_offset());
        // w = scale · v keeps the L2 shrinkage O(1) per example.
        let mut v = std::mem::take(&mut self.weights);
        let mut scale = 1.0;
        let mut order: Vec<usize> = (0..train.len()).collect();
        let mut t = 0usize;
        let mut dev_ll = Vec::with_capacity(hyper.epochs);
        let mut unary_g = Vec::new();
        for epoch in 0..hyper.epochs {
            let mut rng = seed::rng(seed::derive_n(hyper.seed, "crf-epoch", epoch as u64));
            order.shuffle(&mut rng);
            for &k in &order {
                let ex = &train[k];
                let lr = hyper.lr / (1.0 + hyper.decay * t as f64 / n);
                t += 1;
                scale *= 1.0 - lr * self.l2 / n;
                if scale < 1e-9 {
                    v.iter_mut().for_each(|x| *x *= scale);
                    scale = 1.0;
                }
                let lat = lattice_of(&v, l, nf, ex, scale);
                let m = lat.marginals();
                let step = lr / scale;
                unary_g.clear();
                unary_g.extend(m.unary.iter().map(|p| -p));
                for (i, &y) in ex.gold.iter().enumerate() {
                    unary_g[i * l + y] += 1.0;
                }
                for (i, feats) in ex.features.iter().enumerate() {
                    let g = &unary_g[i * l..(i + 1) * l];
                    for &f in feats {
                        let row = &mut v[f as usize * l..(f as usize + 1) * l];
                        for (w, gv) in row.iter_mut().zip(g) {
                            *w += step * gv;
                        }
                    }
                }
                if transitions {
                    let last = ex.gold.len() - 1;
                    for y in 0..l {
                        v[so + y] += step * ((ex.gold[0] == y) as u8 as f64 - m.unary[y]);
                        v[eo + y] += step * ((ex.gold[last] == y) as u8 as f64 - m.unary[last * l + y]);
                    }
                    for (w, p) in v[to..eo].iter_mut().zip(&m.pair) {
                        *w -= step * p;
                    }
                    for pair in ex.gold.windows(2) {
                        v[to + pair[0] * l + pair[1]] += step;
                    }
                }
            }
            self.weights = v.iter().map(|x| x * scale).collect();
            if !dev.is_empty() {
                let lls: Vec<f64> = dev.par_iter().map(|ex| self.log_likelihood(ex)).collect();
                dev_ll.push(lls.iter().sum::<f64>() / dev.len() as f64);
            }
            log::debug!("crf epoch {epoch}: dev ll {:?}", dev_ll.last());
        }
        self.weights = v.into_iter().map(|x| x * scale).collect();
        dev_ll
    }

    pub fn format(&self) -> String {
        let l = self.labels.len();
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC}");
        let _ = writeln!(s, "l2 {}", self.l2);
        let _ = writeln!(s, "bins {}", self.spec.bins());
        let _ = writeln!(s, "families {}", self.spec);
        let tpl = self.templates.format();
        let _ = writeln!(s, "templates {}", tpl.lines().count());
        s.push_str(&tpl);
        let _ = writeln!(s, "labels {l}");
        for lab in &self.labels {
            let _ = writeln!(s, "{lab}");
        }
        let kept: Vec<usize> = (0..self.keys.len())
            .filter(|&f| self.weights[f * l..(f + 1) * l].iter().any(|w| *w != 0.0))
            .collect();
        let _ = writeln!(s, "features {}", kept.len());
        for f in kept {
            s.push_str(&self.keys[f]);
            s.push('\t');
            push_row(&mut s, &self.weights[f * l..(f + 1) * l]);
        }
        s.push_str("start ");
        push_row(&mut s, &self.weights[self.start_offset()..self.trans_offset()]);
        s.push_str("end ");
        push_row(&mut s, &self.weights[self.end_offset()..]);
        s.push_str("transitions\n");
        for row in self.weights[self.trans_offset()..self.end_offset()].chunks(l) {
            push_row(&mut s, row);
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::Format(format!("truncated model: missing {what}")))
        };
        if next("header")? != MAGIC {
            return Err(Error::Format(format!("not a `{MAGIC}` model")));
        }
        let l2: f64 = field(next("l2")?, "l2")?;
        let bins: usize = field(next("bins")?, "bins")?;
        let fams = next("families")?
            .strip_prefix("families ")
            .ok_or_else(|| Error::Format("expected `families`".into()))?
            .to_string();
        let spec = FeatureSpec::parse(&fams, bins).map_err(|e| Error::Format(e.to_string()))?;
        let nt: usize = field(next("templates")?, "templates")?;
        let mut tpl = String::new();
        for _ in 0..nt {
            tpl.push_str(next("template")?);
            tpl.push('\n');
        }
        let templates = TemplateSet::parse(&tpl, "model").map_err(|e| Error::Format(e.to_string()))?;
        let nl: usize = field(next("labels")?, "labels")?;
        let labels = (0..nl)
            .map(|_| next("label")?.parse::<Label>().map_err(Error::Format))
            .collect::<Result<Vec<_>>>()?;
        let nf: usize = field(next("features")?, "features")?;
        let mut keys = Vec::with_capacity(nf);
        let mut rows = Vec::with_capacity(nf);
        for _ in 0..nf {
            let line = next("feature")?;
            let (k, w) = line
                .split_once('\t')
                .ok_or_else(|| Error::Format(format!("malformed feature line `{line}`")))?;
            keys.push(k.to_string());
            rows.push(parse_row(w, nl)?);
        }
        let start = parse_row(
            next("start")?
                .strip_prefix("start ")
                .ok_or_else(|| Error::Format("expected `start`".into()))?,
            nl,
        )?;
        let end = parse_row(
            next("end")?
                .strip_prefix("end ")
                .ok_or_else(|| Error::Format("expected `end`".into()))?,
            nl,
        )?;
        if next("transitions")? != "transitions" {
            return Err(Error::Format("expected `transitions`".into()));
        }
        let mut trans = Vec::with_capacity(nl * nl);
        for _ in 0..nl {
            trans.extend(parse_row(next("transition row")?, nl)?);
        }
        let mut model = CrfModel::new(labels, templates, spec, keys, l2)?;
        let mut w: Vec<f64> = rows.into_iter().flatten().collect();
        w.extend(start);
        w.extend(trans);
        w.extend(end);
        model.weights = w;
        Ok(model)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.format()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

fn push_row(s: &mut String, row: &[f64]) {
    for (i, w) in row.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{w}");
    }
    s.push('\n');
}

fn parse_row(text: &str, n: usize) -> Result<Vec<f64>> {
    let row = text
        .split_ascii_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| Error::Format(format!("weight `{t}`: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    if row.len() != n || row.iter().any(|w| !w.is_finite()) {
        return Err(Error::Format(format!("expected {n} finite weights, found `{text}`")));
    }
    Ok(row)
}

fn field<T: std::str::FromStr>(line: &str, name: &str) -> Result<T> {
    line.strip_prefix(name)
        .and_then(|r| r.strip_prefix(' '))
        .and_then(|r| r.trim().parse().ok())
        .ok_or_else(|| Error::Format(format!("expected `{name} <value>`, found `{line}`")))
}

fn lattice_of(w: &[f64], l: usize, nf: usize, ex: &Encoded, scale: f64) -> Lattice {
    let n = ex.features.len();
    let mut emit = vec![0.0; n * l];
    for (i, feats) in ex.features.iter().enumerate() {
        let row = &mut emit[i * l..(i + 1) * l];
        for &f in feats {
            let wf = &w[f as usize * l..(f as usize + 1) * l];
            for (e, x) in row.iter_mut().zip(wf) {
                *e += x;
            }
        }
        if scale != 1.0 {
            row.iter_mut().for_each(|e| *e *= scale);
        }
    }
    let so = nf * l;
    let to = so + l;
    let eo = to + l * l;
    let s = |r: &[f64]| r.iter().map(|x| x * scale).collect::<Vec<f64>>();
    Lattice {
        n,
        labels: l,
        emit,
        start: s(&w[so..to]),
        trans: s(&w[to..eo]),
        end: s(&w[eo..eo + l]),
    }
}

/// Adds `∂ log p(gold)/∂w` to `grad`; returns `log p(gold)`.
fn accumulate(w: &[f64], l: usize, nf: usize, ex: &Encoded, scale: f64, grad: &mut [f64], transitions: bool) -> f64 {
    let lat = lattice_of(w, l, nf, ex, scale);
    let m = lat.marginals();
    for (i, feats) in ex.features.iter().enumerate() {
        for &f in feats {
            let row = &mut grad[f as usize * l..(f as usize + 1) * l];
            for (y, g) in row.iter_mut().enumerate() {
                *g += (ex.gold[i] == y) as u8 as f64 - m.unary[i * l + y];
            }
        }
    }
    if transitions {
        let (so, to, eo) = (nf * l, nf * l + l, nf * l + l + l * l);
        let last = ex.gold.len() - 1;
        for y in 0..l {
            grad[so + y] += (ex.gold[0] == y) as u8 as f64 - m.unary[y];
            grad[eo + y] += (ex.gold[last] == y) as u8 as f64 - m.unary[last * l + y];
        }
        for (g, p) in grad[to..eo].iter_mut().zip(&m.pair) {
            *g -= p;
        }
        for pair in ex.gold.windows(2) {
            grad[to + pair[0] * l + pair[1]] += 1.0;
        }
    }
    lat.score(&ex.gold) - m.log_z
}

/// Sorted label inventory of a dataset (`null` first).
pub fn label_inventory(data: &Dataset) -> Vec<Label> {
    let mut set: std::collections::BTreeSet<Label> = data
        .utterances
        .iter()
        .flat_map(|u| u.tokens.iter().map(|t| t.label.clone()))
        .collect();
    set.insert(Label::Null);
    set.into_iter().collect()
}

pub fn train_crf(
    train: &Dataset,
    dev: Option<&Dataset>,
    setup: &CrfSetup,
    lexicon: &Lexicon,
) -> Result<CrfTraining> {
    if train.is_empty() {
        return Err(Error::Precondition("CRF training set is empty".into()));
    }
    let labels = match &setup.labels {
        Some(l) => l.clone(),
        None => {
            let mut l = label_inventory(train);
            if let Some(d) = dev {
                l.extend(label_inventory(d));
                l.sort();
                l.dedup();
            }
            l
        }
    };
    let keyed: Vec<Vec<Vec<String>>> = train
        .utterances
        .par_iter()
        .map(|u| expand_templates(&u.tokens, &setup.templates, &setup.spec, lexicon))
        .collect();
    let mut index: HashMap<&str, ()> = HashMap::new();
    let mut keys: Vec<String> = Vec::new();
    for k in keyed.iter().flatten().flatten() {
        if index.insert(k.as_str(), ()).is_none() {
            keys.push(k.clone());
        }
    }
    drop(index);
    let mut model = CrfModel::new(
        labels,
        setup.templates.clone(),
        setup.spec.clone(),
        keys,
        setup.hyper.l2,
    )?;
    let encoded: Vec<Encoded> = train
        .utterances
        .iter()
        .zip(&keyed)
        .map(|(u, ks)| {
            let features = ks
                .iter()
                .map(|pos| pos.iter().map(|k| model.index[k]).collect())
                .collect();
            let gold = u
                .tokens
                .iter()
                .map(|t| {
                    model.label_ids.get(&t.label).copied().ok_or_else(|| Error::Schema {
                        utterance: u.id.clone(),
                        message: format!("label {} outside the inventory", t.label),
                    })
                })
                .collect::<Result<_>>()?;
            Ok(Encoded { features, gold })
        })
        .collect::<Result<_>>()?;
    drop(keyed);
    let dev_encoded: Vec<Encoded> = match dev {
        Some(d) => d
            .utterances
            .par_iter()
            .map(|u| model.encode(u, lexicon, true))
            .collect::<Result<_>>()?,
        None => Vec::new(),
    };
    let dev_log_likelihood = model.fit(&encoded, &dev_encoded, &setup.hyper);
    if model.weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Training("CRF weights diverged".into()));
    }
    Ok(CrfTraining {
        model,
        dev_log_likelihood,
    })
}
