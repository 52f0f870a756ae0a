//! Encoder-decoder concept tagger with additive attention.
//!
//! Each word enters the encoder as its learned embedding concatenated with
//! a continuous feature vector (semantic categories, POS and dependency
//! relation one-hots, capitalization, and the raw confidence values with
//! presence flags, each group gated by the [`FeatureSpec`]). Forward and
//! backward GRUs produce annotations `h_i = [f_i; b_i]`. The decoder emits
//! exactly one label per input word: step `t` attends over all annotations
//! with the previous state, then feeds `[label embedding of y_{t-1}; c_t; h_t]`
//! to a GRU whose state is projected onto the label inventory.

mod gru;

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::corpus::{Dataset, Label, TaggerOutput, Token, Utterance};
use crate::features::{semantic_categories, Family, FeatureSpec, Lexicon};
use crate::nn::{self, gemv, gemv_t, ger, softmax_in_place, BlockId, Layout};
use crate::{seed, Error, Result};
use gru::{GruCache, GruGrads, GruParams};

const MAGIC: &str = "slu-eda 1";
pub const UNKNOWN: &str = "<unk>";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdaDims {
    pub embedding: usize,
    pub hidden: usize,
    pub decoder: usize,
    pub label_embedding: usize,
    pub attention: usize,
}

impl Default for EdaDims {
    fn default() -> Self {
        EdaDims {
            embedding: 32,
            hidden: 32,
            decoder: 32,
            label_embedding: 16,
            attention: 32,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdaHyper {
    pub dims: EdaDims,
    /// Adam step size of the first epoch.
    pub lr: f64,
    /// Per-epoch multiplicative step-size decay.
    pub lr_decay: f64,
    pub epochs: usize,
    pub batch: usize,
    /// Gradient norm clipping threshold per batch.
    pub clip: f64,
    /// Words seen fewer times map to the unknown embedding.
    pub min_count: usize,
    pub seed: u64,
}

impl Default for EdaHyper {
    fn default() -> Self {
        EdaHyper {
            dims: EdaDims::default(),
            lr: 0.005,
            lr_decay: 0.4,
            epochs: 3,
            batch: 16,
            clip: 5.0,
            min_count: 2,
            seed: 1,
        }
    }
}

/// Inventories behind the continuous feature vector.
#[derive(Clone, Debug, PartialEq)]
pub struct EdaInputs {
    spec: FeatureSpec,
    categories: Vec<String>,
    pos: Vec<String>,
    relations: Vec<String>,
}

impl EdaInputs {
    pub fn from_data(data: &Dataset, spec: &FeatureSpec, lexicon: &Lexicon) -> Self {
        let mut cats: BTreeSet<String> = lexicon.categories();
        let mut pos = BTreeSet::new();
        let mut rels = BTreeSet::new();
        for t in data.utterances.iter().flat_map(|u| &u.tokens) {
            cats.extend(t.sem_categories.iter().cloned());
            pos.insert(t.pos.clone());
            rels.insert(t.deprel.clone());
        }
        EdaInputs {
            spec: spec.clone(),
            categories: cats.into_iter().collect(),
            pos: pos.into_iter().collect(),
            relations: rels.into_iter().collect(),
        }
    }

    pub fn spec(&self) -> &FeatureSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        let s = &self.spec;
        let mut d = 0;
        if s.has(Family::SemCategories) {
            d += self.categories.len();
        }
        if s.has(Family::Syntactic) {
            d += self.pos.len() + self.relations.len();
        }
        if s.has(Family::Morphological) {
            d += 1;
        }
        if s.has(Family::Pap) {
            d += 2;
        }
        if s.has(Family::MlpConf) {
            d += 2;
        }
        d
    }

    pub fn vector(&self, t: &Token, lexicon: &Lexicon) -> Vec<f64> {
        let s = &self.spec;
        let mut v = Vec::with_capacity(self.dim());
        let one_hot = |v: &mut Vec<f64>, inv: &[String], x: &str| {
            let at = inv.binary_search_by(|c| c.as_str().cmp(x)).ok();
            v.extend((0..inv.len()).map(|k| (Some(k) == at) as u8 as f64));
        };
        if s.has(Family::SemCategories) {
            let cats = semantic_categories(t, lexicon);
            v.extend(self.categories.iter().map(|c| cats.contains(c) as u8 as f64));
        }
        if s.has(Family::Syntactic) {
            one_hot(&mut v, &self.pos, &t.pos);
            one_hot(&mut v, &self.relations, &t.deprel);
        }
        if s.has(Family::Morphological) {
            v.push(t.surface.chars().next().is_some_and(char::is_uppercase) as u8 as f64);
        }
        for (fam, c) in [(Family::Pap, t.pap), (Family::MlpConf, t.mlp_conf)] {
            if s.has(fam) {
                v.push(c.unwrap_or(0.0).clamp(0.0, 1.0));
                v.push(c.is_some() as u8 as f64);
            }
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Blocks {
    emb: BlockId,
    w_f: BlockId,
    u_f: BlockId,
    b_f: BlockId,
    w_b: BlockId,
    u_b: BlockId,
    b_b: BlockId,
    w_init: BlockId,
    b_init: BlockId,
    lab: BlockId,
    w_att: BlockId,
    u_att: BlockId,
    b_att: BlockId,
    v_att: BlockId,
    w_dec: BlockId,
    u_dec: BlockId,
    b_dec: BlockId,
    w_out: BlockId,
    b_out: BlockId,
}

fn build_layout(d: &EdaDims, vocab: usize, feat: usize, labels: usize) -> (Layout, Blocks) {
    let mut l = Layout::new();
    let (h, s, a) = (d.hidden, d.decoder, d.attention);
    let x = d.embedding + feat;
    let u = d.label_embedding + 4 * h;
    let blocks = Blocks {
        emb: l.add("emb", vocab, d.embedding),
        w_f: l.add("W_f", 3 * h, x),
        u_f: l.add("U_f", 3 * h, h),
        b_f: l.add("b_f", 1, 3 * h),
        w_b: l.add("W_b", 3 * h, x),
        u_b: l.add("U_b", 3 * h, h),
        b_b: l.add("b_b", 1, 3 * h),
        w_init: l.add("W_init", s, h),
        b_init: l.add("b_init", 1, s),
        lab: l.add("lab", labels + 1, d.label_embedding),
        w_att: l.add("W_att", a, s),
        u_att: l.add("U_att", a, 2 * h),
        b_att: l.add("b_att", 1, a),
        v_att: l.add("v_att", 1, a),
        w_dec: l.add("W_dec", 3 * s, u),
        u_dec: l.add("U_dec", 3 * s, s),
        b_dec: l.add("b_dec", 1, 3 * s),
        w_out: l.add("W_out", labels, s),
        b_out: l.add("b_out", 1, labels),
    };
    (l, blocks)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdaModel {
    dims: EdaDims,
    labels: Vec<Label>,
    label_ids: HashMap<Label, usize>,
    vocab: Vec<String>,
    vocab_ids: HashMap<String, usize>,
    inputs: EdaInputs,
    layout: Layout,
    blocks: Blocks,
    params: Vec<f64>,
}

/// Word ids, feature vectors and (optionally) gold label ids.
#[derive(Clone, Debug, PartialEq)]
pub struct EdaExample {
    pub words: Vec<usize>,
    pub features: Vec<Vec<f64>>,
    pub gold: Vec<usize>,
}

/// One decoder step.
#[derive(Clone, Debug)]
pub struct AttentionStep {
    pub alpha: Vec<f64>,
    pub context: Vec<f64>,
    pub state: Vec<f64>,
    pub previous: usize,
    pub distribution: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub enum DecodeMode<'a> {
    TeacherForced(&'a [usize]),
    Greedy,
}

struct StepTrace {
    prev: usize,
    s_prev: Vec<f64>,
    g: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    context: Vec<f64>,
    dec: GruCache,
    state: Vec<f64>,
    probs: Vec<f64>,
}

struct Trace {
    fwd: Vec<GruCache>,
    bwd: Vec<GruCache>,
    annotations: Vec<Vec<f64>>,
    s0: Vec<f64>,
    steps: Vec<StepTrace>,
}

#[derive(Clone, Debug)]
pub struct EdaTraining {
    pub model: EdaModel,
    /// Mean per-word cross-entropy of each epoch.
    pub epoch_losses: Vec<f64>,
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = k;
        }
    }
    best
}

impl EdaModel {
    pub fn new(dims: EdaDims, labels: Vec<Label>, vocab: Vec<String>, inputs: EdaInputs) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Config("empty label inventory".into()));
        }
        if vocab.first().map(String::as_str) != Some(UNKNOWN) {
            return Err(Error::Config(format!("vocabulary must start with {UNKNOWN}")));
        }
        if [dims.embedding, dims.hidden, dims.decoder, dims.label_embedding, dims.attention].contains(&0) {
            return Err(Error::Config("EDA dimensions must be positive".into()));
        }
        let label_ids = labels.iter().cloned().enumerate().map(|(i, l)| (l, i)).collect();
        let vocab_ids: HashMap<String, usize> =
            vocab.iter().cloned().enumerate().map(|(i, w)| (w, i)).collect();
        if vocab_ids.len() != vocab.len() {
            return Err(Error::Format("duplicate vocabulary entry".into()));
        }
        let (layout, blocks) = build_layout(&dims, vocab.len(), inputs.dim(), labels.len());
        let params = vec![0.0; layout.len()];
        Ok(EdaModel {
            dims,
            labels,
            label_ids,
            vocab,
            vocab_ids,
            inputs,
            layout,
            blocks,
            params,
        })
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn dims(&self) -> EdaDims {
        self.dims
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn init_random(&mut self, seed: u64) {
        let mut rng = seed::rng(seed);
        self.params = self.layout.init_uniform(&mut rng, 1.0);
    }

    pub fn word_id(&self, surface: &str) -> usize {
        self.vocab_ids.get(&surface.to_lowercase()).copied().unwrap_or(0)
    }

    pub fn example(&self, utt: &Utterance, lexicon: &Lexicon, with_gold: bool) -> Result<EdaExample> {
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
        Ok(EdaExample {
            words: utt.tokens.iter().map(|t| self.word_id(&t.surface)).collect(),
            features: utt.tokens.iter().map(|t| self.inputs.vector(t, lexicon)).collect(),
            gold,
        })
    }

    fn gru<'a>(&self, p: &'a [f64], w: BlockId, u: BlockId, b: BlockId) -> GruParams<'a> {
        GruParams {
            w: self.layout.slice(p, w),
            u: self.layout.slice(p, u),
            b: self.layout.slice(p, b),
        }
    }

    fn encode_with(&self, p: &[f64], ex: &EdaExample) -> (Vec<GruCache>, Vec<GruCache>, Vec<Vec<f64>>) {
        let b = &self.blocks;
        let n = ex.words.len();
        let hd = self.dims.hidden;
        let xs: Vec<Vec<f64>> = ex
            .words
            .iter()
            .zip(&ex.features)
            .map(|(&w, f)| {
                let mut x = self.layout.row(p, b.emb, w).to_vec();
                x.extend_from_slice(f);
                x
            })
            .collect();
        let fp = self.gru(p, b.w_f, b.u_f, b.b_f);
        let bp = self.gru(p, b.w_b, b.u_b, b.b_b);
        let mut fwd = Vec::with_capacity(n);
        let mut fstates = Vec::with_capacity(n);
        let mut h = vec![0.0; hd];
        for x in &xs {
            let (o, c) = gru::step(&fp, x, &h);
            fwd.push(c);
            fstates.push(o.clone());
            h = o;
        }
        let mut bwd: Vec<GruCache> = Vec::with_capacity(n);
        let mut bstates = vec![Vec::new(); n];
        let mut h = vec![0.0; hd];
        for i in (0..n).rev() {
            let (o, c) = gru::step(&bp, &xs[i], &h);
            bwd.push(c);
            bstates[i] = o.clone();
            h = o;
        }
        bwd.reverse();
        let annotations = fstates
            .into_iter()
            .zip(bstates)
            .map(|(mut f, b)| {
                f.extend(b);
                f
            })
            .collect();
        (fwd, bwd, annotations)
    }

    /// Encoder annotations `[forward; backward]`, one per word.
    pub fn encode(&self, ex: &EdaExample) -> Vec<Vec<f64>> {
        self.encode_with(&self.params, ex).2
    }

    fn projections(&self, p: &[f64], annotations: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let ua = self.layout.slice(p, self.blocks.u_att);
        annotations
            .iter()
            .map(|h| {
                let mut v = vec![0.0; self.dims.attention];
                gemv(ua, h, &mut v);
                v
            })
            .collect()
    }

    /// Returns `(tanh activations, α, c)`.
    fn attend_with(
        &self,
        p: &[f64],
        s_prev: &[f64],
        annotations: &[Vec<f64>],
        proj: &[Vec<f64>],
    ) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
        let b = &self.blocks;
        let mut q = self.layout.slice(p, b.b_att).to_vec();
        gemv(self.layout.slice(p, b.w_att), s_prev, &mut q);
        let va = self.layout.slice(p, b.v_att);
        let g: Vec<Vec<f64>> = proj
            .iter()
            .map(|pj| pj.iter().zip(&q).map(|(a, b)| (a + b).tanh()).collect())
            .collect();
        let mut alpha: Vec<f64> = g.iter().map(|gj| nn::dot(va, gj)).collect();
        softmax_in_place(&mut alpha);
        let mut c = vec![0.0; 2 * self.dims.hidden];
        for (a, h) in alpha.iter().zip(annotations) {
            nn::axpy(&mut c, *a, h);
        }
        (g, alpha, c)
    }

    /// Attention weights and context for decoder state `s_prev`.
    pub fn attend(&self, s_prev: &[f64], annotations: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        let proj = self.projections(&self.params, annotations);
        let (_, a, c) = self.attend_with(&self.params, s_prev, annotations, &proj);
        (a, c)
    }

    fn run(&self, p: &[f64], ex: &EdaExample, mode: DecodeMode) -> Trace {
        let b = &self.blocks;
        let (fwd, bwd, annotations) = self.encode_with(p, ex);
        let n = annotations.len();
        let hd = self.dims.hidden;
        let mut s0 = self.layout.slice(p, b.b_init).to_vec();
        gemv(self.layout.slice(p, b.w_init), &annotations[0][hd..], &mut s0);
        s0.iter_mut().for_each(|v| *v = v.tanh());
        let proj = self.projections(p, &annotations);
        let dp = self.gru(p, b.w_dec, b.u_dec, b.b_dec);
        let wo = self.layout.slice(p, b.w_out);
        let mut steps: Vec<StepTrace> = Vec::with_capacity(n);
        let mut s = s0.clone();
        let mut prev = self.labels.len();
        for t in 0..n {
            let (g, alpha, context) = self.attend_with(p, &s, &annotations, &proj);
            let mut u = self.layout.row(p, b.lab, prev).to_vec();
            u.extend_from_slice(&context);
            u.extend_from_slice(&annotations[t]);
            let (state, dec) = gru::step(&dp, &u, &s);
            let mut probs = self.layout.slice(p, b.b_out).to_vec();
            gemv(wo, &state, &mut probs);
            softmax_in_place(&mut probs);
            let next = match mode {
                DecodeMode::TeacherForced(gold) => gold[t],
                DecodeMode::Greedy => argmax(&probs),
            };
            steps.push(StepTrace {
                prev,
                s_prev: std::mem::replace(&mut s, state.clone()),
                g,
                alpha,
                context,
                dec,
                state,
                probs,
            });
            prev = next;
        }
        Trace {
            fwd,
            bwd,
            annotations,
            s0,
            steps,
        }
    }

    /// Decoder steps; teacher-forced mode feeds the given labels back.
    pub fn decode(&self, ex: &EdaExample, mode: DecodeMode) -> (Vec<usize>, Vec<AttentionStep>) {
        let trace = self.run(&self.params, ex, mode);
        let labels = match mode {
            DecodeMode::TeacherForced(gold) => gold.to_vec(),
            DecodeMode::Greedy => trace.steps.iter().map(|s| argmax(&s.probs)).collect(),
        };
        let steps = trace
            .steps
            .into_iter()
            .map(|s| AttentionStep {
                alpha: s.alpha,
                context: s.context,
                state: s.state,
                previous: s.prev,
                distribution: s.probs,
            })
            .collect();
        (labels, steps)
    }

    pub fn tag(&self, utt: &Utterance, lexicon: &Lexicon) -> TaggerOutput {
        let ex = self.example(utt, lexicon, false).expect("no gold requested");
        let (ids, _) = self.decode(&ex, DecodeMode::Greedy);
        TaggerOutput {
            id: utt.id.clone(),
            labels: ids.into_iter().map(|y| self.labels[y].clone()).collect(),
        }
    }

    pub fn predict(&self, data: &Dataset, lexicon: &Lexicon) -> Vec<TaggerOutput> {
        data.utterances.par_iter().map(|u| self.tag(u, lexicon)).collect()
    }

    /// Teacher-forced cross-entropy (summed over words) at parameters `p`.
    pub fn loss_at(&self, p: &[f64], ex: &EdaExample) -> f64 {
        let trace = self.run(p, ex, DecodeMode::TeacherForced(&ex.gold));
        trace
            .steps
            .iter()
            .zip(&ex.gold)
            .map(|(s, &y)| -s.probs[y].max(f64::MIN_POSITIVE).ln())
            .sum()
    }

    /// Adds the gradient of [`loss_at`](Self::loss_at) into `grad`.
    pub fn loss_grad(&self, p: &[f64], ex: &EdaExample, grad: &mut [f64]) -> f64 {
        let b = &self.blocks;
        let lay = &self.layout;
        let tr = self.run(p, ex, DecodeMode::TeacherForced(&ex.gold));
        let n = ex.words.len();
        let (hd, sd, ad) = (self.dims.hidden, self.dims.decoder, self.dims.attention);
        let ld = self.dims.label_embedding;
        let mut loss = 0.0;
        let mut dann = vec![vec![0.0; 2 * hd]; n];
        let mut dproj = vec![vec![0.0; ad]; n];
        let mut ds = vec![0.0; sd];
        let dp = self.gru(p, b.w_dec, b.u_dec, b.b_dec);
        let mut g_wdec = vec![0.0; lay.block(b.w_dec).len()];
        let mut g_udec = vec![0.0; lay.block(b.u_dec).len()];
        let mut g_bdec = vec![0.0; 3 * sd];
        let mut g_watt = vec![0.0; lay.block(b.w_att).len()];
        let mut g_batt = vec![0.0; ad];
        let mut g_vatt = vec![0.0; ad];
        let wo = lay.slice(p, b.w_out);
        let wa = lay.slice(p, b.w_att);
        let va = lay.slice(p, b.v_att);
        for t in (0..n).rev() {
            let st = &tr.steps[t];
            let y = ex.gold[t];
            loss -= st.probs[y].max(f64::MIN_POSITIVE).ln();
            let mut d_o = st.probs.clone();
            d_o[y] -= 1.0;
            ger(lay.slice_mut(grad, b.w_out), &d_o, &st.state);
            nn::axpy(lay.slice_mut(grad, b.b_out), 1.0, &d_o);
            gemv_t(wo, &d_o, &mut ds);
            let mut du = vec![0.0; ld + 4 * hd];
            let mut gg = GruGrads {
                w: &mut g_wdec,
                u: &mut g_udec,
                b: &mut g_bdec,
            };
            let ds_prev = gru::backward(&dp, &mut gg, &st.dec, &ds, &mut du);
            ds = ds_prev;
            nn::axpy(lay.row_mut(grad, b.lab, st.prev), 1.0, &du[..ld]);
            let dc = &du[ld..ld + 2 * hd];
            nn::axpy(&mut dann[t], 1.0, &du[ld + 2 * hd..]);
            // Attention.
            let dalpha: Vec<f64> = tr.annotations.iter().map(|h| nn::dot(dc, h)).collect();
            let mean: f64 = st.alpha.iter().zip(&dalpha).map(|(a, d)| a * d).sum();
            let mut dq = vec![0.0; ad];
            for j in 0..n {
                nn::axpy(&mut dann[j], st.alpha[j], dc);
                let de = st.alpha[j] * (dalpha[j] - mean);
                if de == 0.0 {
                    continue;
                }
                nn::axpy(&mut g_vatt, de, &st.g[j]);
                for k in 0..ad {
                    let dpre = de * va[k] * (1.0 - st.g[j][k] * st.g[j][k]);
                    dq[k] += dpre;
                    dproj[j][k] += dpre;
                }
            }
            ger(&mut g_watt, &dq, &st.s_prev);
            nn::axpy(&mut g_batt, 1.0, &dq);
            gemv_t(wa, &dq, &mut ds);
        }
        lay.slice_mut(grad, b.w_dec).iter_mut().zip(&g_wdec).for_each(|(g, d)| *g += d);
        lay.slice_mut(grad, b.u_dec).iter_mut().zip(&g_udec).for_each(|(g, d)| *g += d);
        nn::axpy(lay.slice_mut(grad, b.b_dec), 1.0, &g_bdec);
        nn::axpy(lay.slice_mut(grad, b.w_att), 1.0, &g_watt);
        nn::axpy(lay.slice_mut(grad, b.b_att), 1.0, &g_batt);
        nn::axpy(lay.slice_mut(grad, b.v_att), 1.0, &g_vatt);
        let ua = lay.slice(p, b.u_att);
        for j in 0..n {
            ger(lay.slice_mut(grad, b.u_att), &dproj[j], &tr.annotations[j]);
            gemv_t(ua, &dproj[j], &mut dann[j]);
        }
        // Initial decoder state from the first backward state.
        let dpre0: Vec<f64> = ds.iter().zip(&tr.s0).map(|(d, s)| d * (1.0 - s * s)).collect();
        ger(lay.slice_mut(grad, b.w_init), &dpre0, &tr.annotations[0][hd..]);
        nn::axpy(lay.slice_mut(grad, b.b_init), 1.0, &dpre0);
        let mut db0 = vec![0.0; hd];
        gemv_t(lay.slice(p, b.w_init), &dpre0, &mut db0);
        nn::axpy(&mut dann[0][hd..], 1.0, &db0);
        // Encoder.
        let xd = self.dims.embedding + self.inputs.dim();
        let mut dx = vec![vec![0.0; xd]; n];
        let fp = self.gru(p, b.w_f, b.u_f, b.b_f);
        let bp = self.gru(p, b.w_b, b.u_b, b.b_b);
        let mut gw = vec![0.0; lay.block(b.w_f).len()];
        let mut gu = vec![0.0; lay.block(b.u_f).len()];
        let mut gb = vec![0.0; 3 * hd];
        let mut carry = vec![0.0; hd];
        for i in (0..n).rev() {
            let d: Vec<f64> = (0..hd).map(|k| dann[i][k] + carry[k]).collect();
            let mut gg = GruGrads {
                w: &mut gw,
                u: &mut gu,
                b: &mut gb,
            };
            carry = gru::backward(&fp, &mut gg, &tr.fwd[i], &d, &mut dx[i]);
        }
        nn::axpy(lay.slice_mut(grad, b.w_f), 1.0, &gw);
        nn::axpy(lay.slice_mut(grad, b.u_f), 1.0, &gu);
        nn::axpy(lay.slice_mut(grad, b.b_f), 1.0, &gb);
        gw.iter_mut().for_each(|v| *v = 0.0);
        gu.iter_mut().for_each(|v| *v = 0.0);
        gb.iter_mut().for_each(|v| *v = 0.0);
        let mut carry = vec![0.0; hd];
        for i in 0..n {
            let d: Vec<f64> = (0..hd).map(|k| dann[i][hd + k] + carry[k]).collect();
            let mut gg = GruGrads {
                w: &mut gw,
                u: &mut gu,
                b: &mut gb,
            };
            carry = gru::backward(&bp, &mut gg, &tr.bwd[i], &d, &mut dx[i]);
        }
        nn::axpy(lay.slice_mut(grad, b.w_b), 1.0, &gw);
        nn::axpy(lay.slice_mut(grad, b.u_b), 1.0, &gu);
        nn::axpy(lay.slice_mut(grad, b.b_b), 1.0, &gb);
        for (&w, d) in ex.words.iter().zip(&dx) {
            nn::axpy(lay.row_mut(grad, b.emb, w), 1.0, &d[..self.dims.embedding]);
        }
        loss
    }

    /// Summed loss and gradient over a batch, reduced in fixed shard order.
    pub fn batch_loss_grad(&self, batch: &[&EdaExample]) -> (f64, Vec<f64>) {
        nn::sharded_gradient(batch, self.params.len(), 4, |ex, g| self.loss_grad(&self.params, ex, g))
    }

    pub fn format(&self) -> String {
        let d = &self.dims;
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC}");
        let _ = writeln!(
            s,
            "dims {} {} {} {} {}",
            d.embedding, d.hidden, d.decoder, d.label_embedding, d.attention
        );
        let _ = writeln!(s, "families {}", self.inputs.spec);
        let _ = writeln!(s, "bins {}", self.inputs.spec.bins());
        let mut list = |name: &str, items: &mut dyn Iterator<Item = String>| {
            let items: Vec<String> = items.collect();
            let _ = writeln!(s, "{name} {}", items.len());
            for i in items {
                let _ = writeln!(s, "{i}");
            }
        };
        list("labels", &mut self.labels.iter().map(ToString::to_string));
        list("vocab", &mut self.vocab.iter().cloned());
        list("categories", &mut self.inputs.categories.iter().cloned());
        list("pos", &mut self.inputs.pos.iter().cloned());
        list("relations", &mut self.inputs.relations.iter().cloned());
        nn::write_params(&mut s, &self.layout, &self.params);
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
        let dims: Vec<usize> = next("dims")?
            .strip_prefix("dims ")
            .ok_or_else(|| Error::Format("expected `dims`".into()))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Format(format!("bad dimension `{t}`"))))
            .collect::<Result<_>>()?;
        if dims.len() != 5 {
            return Err(Error::Format("expected five dimensions".into()));
        }
        let dims = EdaDims {
            embedding: dims[0],
            hidden: dims[1],
            decoder: dims[2],
            label_embedding: dims[3],
            attention: dims[4],
        };
        let fams = next("families")?
            .strip_prefix("families ")
            .ok_or_else(|| Error::Format("expected `families`".into()))?
            .to_string();
        let bins: usize = next("bins")?
            .strip_prefix("bins ")
            .and_then(|b| b.parse().ok())
            .ok_or_else(|| Error::Format("expected `bins <k>`".into()))?;
        let spec = FeatureSpec::parse(&fams, bins).map_err(|e| Error::Format(e.to_string()))?;
        let mut list = |name: &str| -> Result<Vec<String>> {
            let header = next(name)?;
            let n: usize = header
                .strip_prefix(name)
                .and_then(|r| r.trim().parse().ok())
                .ok_or_else(|| Error::Format(format!("expected `{name} <n>`, found `{header}`")))?;
            (0..n).map(|_| next(name).map(str::to_string)).collect()
        };
        let labels = list("labels")?
            .iter()
            .map(|l| l.parse::<Label>().map_err(Error::Format))
            .collect::<Result<Vec<_>>>()?;
        let vocab = list("vocab")?;
        let inputs = EdaInputs {
            spec,
            categories: list("categories")?,
            pos: list("pos")?,
            relations: list("relations")?,
        };
        let mut model = EdaModel::new(dims, labels, vocab, inputs)?;
        model.params = nn::read_params(&mut lines, &model.layout)?;
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

pub fn build_vocabulary(data: &Dataset, min_count: usize) -> Vec<String> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for t in data.utterances.iter().flat_map(|u| &u.tokens) {
        *counts.entry(t.surface.to_lowercase()).or_default() += 1;
    }
    let mut words: Vec<String> = counts
        .into_iter()
        .filter(|(w, c)| *c >= min_count.max(1) && w != UNKNOWN)
        .map(|(w, _)| w)
        .collect();
    words.sort();
    words.insert(0, UNKNOWN.to_string());
    words
}

pub fn train_eda(
    train: &Dataset,
    spec: &FeatureSpec,
    lexicon: &Lexicon,
    hyper: &EdaHyper,
    labels: Option<Vec<Label>>,
) -> Result<EdaTraining> {
    if train.is_empty() {
        return Err(Error::Precondition("EDA training set is empty".into()));
    }
    let labels = labels.unwrap_or_else(|| crate::crf::label_inventory(train));
    let vocab = build_vocabulary(train, hyper.min_count);
    let inputs = EdaInputs::from_data(train, spec, lexicon);
    let mut model = EdaModel::new(hyper.dims, labels, vocab, inputs)?;
    model.init_random(seed::derive(hyper.seed, "eda-init"));
    let examples: Vec<EdaExample> = train
        .utterances
        .par_iter()
        .map(|u| model.example(u, lexicon, true))
        .collect::<Result<_>>()?;
    let words = train.token_count().max(1) as f64;
    let mut adam = nn::Adam::new(model.params.len(), hyper.lr);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut epoch_losses = Vec::with_capacity(hyper.epochs);
    for epoch in 0..hyper.epochs {
        adam.lr = hyper.lr * hyper.lr_decay.powi(epoch as i32);
        let mut rng = seed::rng(seed::derive_n(hyper.seed, "eda-epoch", epoch as u64));
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(hyper.batch.max(1)) {
            let batch: Vec<&EdaExample> = chunk.iter().map(|&k| &examples[k]).collect();
            let (loss, mut g) = model.batch_loss_grad(&batch);
            total += loss;
            let scale = 1.0 / batch.len() as f64;
            g.iter_mut().for_each(|v| *v *= scale);
            nn::clip_norm(&mut g, hyper.clip);
            adam.step(&mut model.params, &g);
        }
        if !total.is_finite() || model.params.iter().any(|v| !v.is_finite()) {
            return Err(Error::Training(format!("EDA diverged in epoch {epoch}")));
        }
        log::debug!("eda epoch {epoch}: loss {}", total / words);
        epoch_losses.push(total / words);
    }
    Ok(EdaTraining { model, epoch_losses })
}

#[cfg(test)]
mod tests;
