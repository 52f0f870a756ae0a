use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::backoff::{BackoffState, BackoffTable};
use super::embeddings::{EmbeddingTable, OovPolicy};
use crate::corpus::{Dataset, ErrorFlag, Token, Utterance};
use crate::nn::{self, gemv, gemv_t, ger, BlockId, Layout};
use crate::seed;
use crate::{Error, Result};

const MAGIC: &str = "slu-msmlp 1";
const STREAMS: [&str; 6] = ["emb", "len", "lm", "pos", "rel", "gpos"];
const UNK: &str = "<unk>";
const PAD: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq)]
pub struct MlpHyper {
    pub projection: usize,
    pub merge: usize,
    pub hidden: usize,
    pub window: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
}

impl Default for MlpHyper {
    fn default() -> Self {
        MlpHyper {
            projection: 16,
            merge: 64,
            hidden: 32,
            window: 2,
            lr: 0.1,
            epochs: 8,
            batch: 32,
            seed: 1,
        }
    }
}

/// Inputs of one hypothesis word, indices into the model inventories.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpExample {
    pub words: Vec<u32>,
    pub length: f64,
    pub lm: usize,
    pub pos: usize,
    pub rel: usize,
    pub gpos: usize,
    pub correct: bool,
}

#[derive(Clone, Debug, PartialEq)]
struct Ids {
    pe: BlockId,
    be: BlockId,
    pl: BlockId,
    bl: BlockId,
    /// One-hot streams: lm, pos, rel, gpos (row lookup tables) and biases.
    onehot: [(BlockId, BlockId); 4],
    m: BlockId,
    bm: BlockId,
    h: BlockId,
    bh: BlockId,
    o: BlockId,
    bo: BlockId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MsMlpModel {
    pub projection: usize,
    pub merge: usize,
    pub hidden: usize,
    pub window: usize,
    /// POS inventory, `<unk>` first; governor POS adds `ROOT` at the end.
    pub pos: Vec<String>,
    pub rel: Vec<String>,
    pub embeddings: EmbeddingTable,
    pub backoff: BackoffTable,
    layout: Layout,
    ids: Ids,
    pub params: Vec<f64>,
}

/// Softmax probability of the Correct unit, kept strictly inside (0, 1).
pub fn correct_probability(scores: [f64; 2]) -> f64 {
    let p = nn::sigmoid(scores[0] - scores[1]);
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)
}

struct Acts {
    x_emb: Vec<f64>,
    streams: Vec<f64>,
    m: Vec<f64>,
    h: Vec<f64>,
    o: [f64; 2],
}

fn tanh_all(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = x.tanh());
}

fn tanh_back(d: &mut [f64], y: &[f64]) {
    for (dv, yv) in d.iter_mut().zip(y) {
        *dv *= 1.0 - yv * yv;
    }
}

impl MsMlpModel {
    fn shaped(
        hyper: &MlpHyper,
        pos: Vec<String>,
        rel: Vec<String>,
        embeddings: EmbeddingTable,
        backoff: BackoffTable,
    ) -> Self {
        let p = hyper.projection;
        let emb_in = (2 * hyper.window + 1) * embeddings.dim();
        let mut l = Layout::new();
        let ids = Ids {
            pe: l.add("Pemb", p, emb_in),
            be: l.add("bemb", 1, p),
            pl: l.add("Plen", p, 1),
            bl: l.add("blen", 1, p),
            onehot: [
                (l.add("Plm", BackoffState::COUNT, p), l.add("blm", 1, p)),
                (l.add("Ppos", pos.len(), p), l.add("bpos", 1, p)),
                (l.add("Prel", rel.len(), p), l.add("brel", 1, p)),
                (l.add("Pgpos", pos.len() + 1, p), l.add("bgpos", 1, p)),
            ],
            m: l.add("M", hyper.merge, STREAMS.len() * p),
            bm: l.add("bm", 1, hyper.merge),
            h: l.add("H", hyper.hidden, hyper.merge),
            bh: l.add("bh", 1, hyper.hidden),
            o: l.add("O", 2, hyper.hidden),
            bo: l.add("bo", 1, 2),
        };
        let params = vec![0.0; l.len()];
        MsMlpModel {
            projection: p,
            merge: hyper.merge,
            hidden: hyper.hidden,
            window: hyper.window,
            pos,
            rel,
            embeddings,
            backoff,
            layout: l,
            ids,
            params,
        }
    }

    fn find(inv: &[String], v: &str) -> usize {
        inv.iter().position(|x| x == v).unwrap_or(0)
    }

    /// Inputs for token `i` of `tokens`.
    pub fn example(&self, tokens: &[Token], i: usize) -> MlpExample {
        let n = tokens.len() as isize;
        let w = self.window as isize;
        let words = (i as isize - w..=i as isize + w)
            .map(|j| {
                if j < 0 || j >= n {
                    PAD
                } else {
                    self.embeddings
                        .index_of(&tokens[j as usize].surface)
                        .map_or(PAD, |k| k as u32)
                }
            })
            .collect();
        let surfaces: Vec<&str> = tokens.iter().map(|t| t.surface.as_str()).collect();
        let t = &tokens[i];
        MlpExample {
            words,
            length: t.surface.chars().count() as f64 / 10.0,
            lm: self.backoff.state(&surfaces, i).index(),
            pos: Self::find(&self.pos, &t.pos),
            rel: Self::find(&self.rel, &t.deprel),
            gpos: t
                .governor
                .map_or(self.pos.len(), |g| Self::find(&self.pos, &tokens[g].pos)),
            correct: t.error_flag != Some(ErrorFlag::Error),
        }
    }

    fn forward(&self, params: &[f64], ex: &MlpExample) -> Acts {
        let l = &self.layout;
        let ids = &self.ids;
        let p = self.projection;
        let d = self.embeddings.dim();
        let mut x_emb = vec![0.0; ex.words.len() * d];
        for (k, &w) in ex.words.iter().enumerate() {
            if w != PAD {
                x_emb[k * d..(k + 1) * d].copy_from_slice(self.embeddings.row(w as usize));
            }
        }
        let mut streams = vec![0.0; STREAMS.len() * p];
        {
            let u = &mut streams[..p];
            u.copy_from_slice(l.slice(params, ids.be));
            gemv(l.slice(params, ids.pe), &x_emb, u);
        }
        {
            let u = &mut streams[p..2 * p];
            u.copy_from_slice(l.slice(params, ids.bl));
            nn::axpy(u, ex.length, l.slice(params, ids.pl));
        }
        for (s, (&(tab, bias), idx)) in ids
            .onehot
            .iter()
            .zip([ex.lm, ex.pos, ex.rel, ex.gpos])
            .enumerate()
        {
            let u = &mut streams[(s + 2) * p..(s + 3) * p];
            u.copy_from_slice(l.slice(params, bias));
            nn::axpy(u, 1.0, l.row(params, tab, idx));
        }
        tanh_all(&mut streams);
        let mut m = l.slice(params, ids.bm).to_vec();
        gemv(l.slice(params, ids.m), &streams, &mut m);
        tanh_all(&mut m);
        let mut h = l.slice(params, ids.bh).to_vec();
        gemv(l.slice(params, ids.h), &m, &mut h);
        tanh_all(&mut h);
        let mut o = l.slice(params, ids.bo).to_vec();
        gemv(l.slice(params, ids.o), &h, &mut o);
        Acts {
            x_emb,
            streams,
            m,
            h,
            o: [o[0], o[1]],
        }
    }

    /// Cross-entropy of one example, accumulating its gradient into `g`.
    fn loss_grad(&self, params: &[f64], ex: &MlpExample, g: &mut [f64]) -> f64 {
        let a = self.forward(params, ex);
        let l = &self.layout;
        let ids = &self.ids;
        let p = self.projection;
        let mut prob = a.o;
        nn::softmax_in_place(&mut prob);
        let target = if ex.correct { 0 } else { 1 };
        let loss = nn::log_sum_exp(&a.o) - a.o[target];
        let mut d_o = prob;
        d_o[target] -= 1.0;
        ger(l.slice_mut(g, ids.o), &d_o, &a.h);
        nn::axpy(l.slice_mut(g, ids.bo), 1.0, &d_o);
        let mut dh = vec![0.0; a.h.len()];
        gemv_t(l.slice(params, ids.o), &d_o, &mut dh);
        tanh_back(&mut dh, &a.h);
        ger(l.slice_mut(g, ids.h), &dh, &a.m);
        nn::axpy(l.slice_mut(g, ids.bh), 1.0, &dh);
        let mut dm = vec![0.0; a.m.len()];
        gemv_t(l.slice(params, ids.h), &dh, &mut dm);
        tanh_back(&mut dm, &a.m);
        ger(l.slice_mut(g, ids.m), &dm, &a.streams);
        nn::axpy(l.slice_mut(g, ids.bm), 1.0, &dm);
        let mut ds = vec![0.0; a.streams.len()];
        gemv_t(l.slice(params, ids.m), &dm, &mut ds);
        tanh_back(&mut ds, &a.streams);
        ger(l.slice_mut(g, ids.pe), &ds[..p], &a.x_emb);
        nn::axpy(l.slice_mut(g, ids.be), 1.0, &ds[..p]);
        let dl = &ds[p..2 * p];
        nn::axpy(l.slice_mut(g, ids.pl), ex.length, dl);
        nn::axpy(l.slice_mut(g, ids.bl), 1.0, dl);
        for (s, (&(tab, bias), idx)) in ids
            .onehot
            .iter()
            .zip([ex.lm, ex.pos, ex.rel, ex.gpos])
            .enumerate()
        {
            let d = &ds[(s + 2) * p..(s + 3) * p];
            nn::axpy(l.row_mut(g, tab, idx), 1.0, d);
            nn::axpy(l.slice_mut(g, bias), 1.0, d);
        }
        loss
    }

    /// Mean loss and gradient over `batch`.
    pub fn batch_loss_grad(&self, params: &[f64], batch: &[&MlpExample]) -> (f64, Vec<f64>) {
        let (loss, mut g) =
            nn::sharded_gradient(batch, params.len(), 8, |ex, g| self.loss_grad(params, ex, g));
        let n = batch.len().max(1) as f64;
        g.iter_mut().for_each(|v| *v /= n);
        (loss / n, g)
    }

    pub fn scores(&self, ex: &MlpExample) -> [f64; 2] {
        self.forward(&self.params, ex).o
    }

    /// Softmax-Correct confidence of token `i`.
    pub fn confidence_of(&self, tokens: &[Token], i: usize) -> f64 {
        correct_probability(self.scores(&self.example(tokens, i)))
    }

    pub fn examples(&self, data: &Dataset) -> Vec<MlpExample> {
        data.utterances
            .par_iter()
            .flat_map_iter(|u| (0..u.len()).map(move |i| self.example(&u.tokens, i)))
            .collect()
    }

    /// Train on `data`, whose tokens must all carry error flags. The
    /// backoff table is built from the reference transcripts.
    pub fn train(
        data: &Dataset,
        embeddings: EmbeddingTable,
        hyper: &MlpHyper,
    ) -> Result<MlpTraining> {
        if data.is_empty() {
            return Err(Error::Training("empty training set".into()));
        }
        for u in &data.utterances {
            if let Some(i) = u.tokens.iter().position(|t| t.error_flag.is_none()) {
                return Err(Error::Precondition(format!("{} token {} has no error flag", u.id, i + 1)));
            }
        }
        let refs: Vec<Vec<&str>> = data
            .utterances
            .iter()
            .map(|u| u.gold_tokens().iter().map(|t| t.surface.as_str()).collect())
            .collect();
        let backoff = BackoffTable::build(&refs);
        let inventory = |f: &dyn Fn(&Token) -> &str| -> Vec<String> {
            let mut v: Vec<String> = data
                .utterances
                .iter()
                .flat_map(|u| u.tokens.iter().map(|t| f(t).to_string()))
                .collect();
            v.sort();
            v.dedup();
            v.retain(|x| x != UNK);
            v.insert(0, UNK.to_string());
            v
        };
        let pos = inventory(&|t: &Token| t.pos.as_str());
        let rel = inventory(&|t: &Token| t.deprel.as_str());
        let mut model = Self::shaped(hyper, pos, rel, embeddings, backoff);
        let mut rng = seed::rng(hyper.seed);
        model.params = model.layout.init_uniform(&mut rng, 1.0);
        let examples = model.examples(data);
        let mut order: Vec<usize> = (0..examples.len()).collect();
        let mut epoch_losses = Vec::with_capacity(hyper.epochs);
        for _ in 0..hyper.epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for chunk in order.chunks(hyper.batch.max(1)) {
                let batch: Vec<&MlpExample> = chunk.iter().map(|&i| &examples[i]).collect();
                let (loss, g) = model.batch_loss_grad(&model.params, &batch);
                total += loss * chunk.len() as f64;
                nn::axpy(&mut model.params, -hyper.lr, &g);
            }
            let mean = total / examples.len() as f64;
            if !mean.is_finite() {
                return Err(Error::Training("MS-MLP diverged".into()));
            }
            log::info!("msmlp epoch {} loss {mean:.5}", epoch_losses.len() + 1);
            epoch_losses.push(mean);
        }
        Ok(MlpTraining {
            model,
            epoch_losses,
        })
    }

    pub fn format(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC}");
        let _ = writeln!(
            s,
            "widths projection={} merge={} hidden={} output=2",
            self.projection, self.merge, self.hidden
        );
        let _ = writeln!(s, "window {}", self.window);
        let _ = writeln!(s, "streams {}", STREAMS.join(" "));
        for (name, inv) in [("pos", &self.pos), ("rel", &self.rel)] {
            let _ = writeln!(s, "{name} {}", inv.len());
            for v in inv {
                let _ = writeln!(s, "{v}");
            }
        }
        let oov = match &self.embeddings.oov {
            OovPolicy::Zero => "zero".to_string(),
            OovPolicy::Row(w) => format!("row {w}"),
        };
        let _ = writeln!(
            s,
            "embeddings {} {} {oov}",
            self.embeddings.len(),
            self.embeddings.dim()
        );
        s.push_str(&self.embeddings.format());
        self.backoff.write_to(&mut s);
        nn::write_params(&mut s, &self.layout, &self.params);
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |m: String| Error::Format(format!("MS-MLP model: {m}"));
        let mut lines = text.lines();
        if lines.next() != Some(MAGIC) {
            return Err(bad(format!("missing `{MAGIC}` header")));
        }
        let widths = lines.next().unwrap_or_default();
        let mut w = [0usize; 4];
        for (k, key) in ["projection=", "merge=", "hidden=", "output="].iter().enumerate() {
            w[k] = widths
                .split_whitespace()
                .find_map(|f| f.strip_prefix(key))
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad(format!("widths line lacks {key}")))?;
        }
        if w[3] != 2 {
            return Err(bad(format!("output width {} (must be 2)", w[3])));
        }
        fn field<'a>(lines: &mut impl Iterator<Item = &'a str>, key: &str) -> Result<String> {
            lines
                .next()
                .and_then(|l| l.strip_prefix(key))
                .map(|v| v.trim().to_string())
                .ok_or_else(|| Error::Format(format!("MS-MLP model: expected `{key}` line")))
        }
        let window: usize = field(&mut lines, "window")?.parse().map_err(|_| bad("bad window".into()))?;
        if field(&mut lines, "streams")? != STREAMS.join(" ") {
            return Err(bad("unsupported stream order".into()));
        }
        let mut inventories = Vec::new();
        for key in ["pos", "rel"] {
            let n: usize = field(&mut lines, key)?.parse().map_err(|_| bad(format!("bad {key} count")))?;
            let mut inv = Vec::with_capacity(n);
            for _ in 0..n {
                inv.push(lines.next().ok_or_else(|| bad(format!("truncated {key} list")))?.to_string());
            }
            inventories.push(inv);
        }
        let header = lines.next().and_then(|l| l.strip_prefix("embeddings ")).ok_or_else(|| bad("expected embeddings line".into()))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        let (n, dim): (usize, usize) = match parts.as_slice() {
            [n, d, ..] => (n.parse().map_err(|_| bad("bad count".into()))?, d.parse().map_err(|_| bad("bad dim".into()))?),
            _ => return Err(bad("bad embeddings line".into())),
        };
        let oov = match &parts[2..] {
            ["zero"] => OovPolicy::Zero,
            ["row", w] => OovPolicy::Row(w.to_string()),
            _ => return Err(bad("bad OOV policy".into())),
        };
        let mut table_text = String::new();
        for _ in 0..n {
            table_text.push_str(lines.next().ok_or_else(|| bad("truncated embeddings".into()))?);
            table_text.push('\n');
        }
        let mut embeddings = EmbeddingTable::parse(&table_text, "model")?;
        if embeddings.dim() != dim {
            return Err(bad("embedding dimension mismatch".into()));
        }
        embeddings.oov = oov;
        let backoff = BackoffTable::read_from(&mut lines)?;
        let hyper = MlpHyper {
            projection: w[0],
            merge: w[1],
            hidden: w[2],
            window,
            ..MlpHyper::default()
        };
        let rel = inventories.pop().expect("two inventories");
        let pos = inventories.pop().expect("two inventories");
        let mut m = Self::shaped(&hyper, pos, rel, embeddings, backoff);
        m.params = nn::read_params(&mut lines, &m.layout)?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.format()).map_err(|e| Error::io(path, e))
    }
}

pub struct MlpTraining {
    pub model: MsMlpModel,
    pub epoch_losses: Vec<f64>,
}

/// Fill the `conf` column of every token.
pub fn attach_confidences(model: &MsMlpModel, data: &Dataset) -> Dataset {
    let utterances = data
        .utterances
        .par_iter()
        .map(|u| {
            let mut out: Utterance = u.clone();
            for i in 0..u.len() {
                out.tokens[i].mlp_conf = Some(model.confidence_of(&u.tokens, i));
            }
            out
        })
        .collect();
    Dataset { utterances }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;

    fn table(words: &[&str], dim: usize, seed: u64) -> EmbeddingTable {
        let mut rng = seed::rng(seed);
        let mut t = EmbeddingTable::new(dim);
        for w in words {
            let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            t.insert(w, &v).unwrap();
        }
        t
    }

    /// Tokens whose error flag is determined by their POS tag.
    fn separable(n: usize, seed: u64) -> Dataset {
        let mut rng = seed::rng(seed);
        let words = ["a", "b", "c", "d"];
        let utterances = (0..n)
            .map(|k| {
                let tokens = (0..4)
                    .map(|i| {
                        let mut t = Token::new(words[rng.gen_range(0..4)]);
                        let err = rng.gen_bool(0.3);
                        t.pos = if err { "X".into() } else { "Y".into() };
                        t.deprel = "dep".into();
                        t.governor = (i > 0).then_some(0);
                        t.error_flag = Some(if err { ErrorFlag::Error } else { ErrorFlag::Correct });
                        t
                    })
                    .collect();
                Utterance {
                    id: format!("s{k}"),
                    tokens,
                    reference: None,
                }
            })
            .collect();
        Dataset { utterances }
    }

    fn small_hyper() -> MlpHyper {
        MlpHyper {
            projection: 4,
            merge: 6,
            hidden: 5,
            window: 1,
            lr: 0.2,
            epochs: 0,
            batch: 8,
            seed: 2,
        }
    }

    #[test]
    fn closed_form_softmax() {
        assert!((correct_probability([2.0, 0.0]) - 1.0 / (1.0 + (-2f64).exp())).abs() < 1e-15);
        assert_eq!(correct_probability([0.3, 0.3]), 0.5);
        assert!(correct_probability([-50.0, 50.0]) < 1e-6);
        for s in [[-800.0, 800.0], [800.0, -800.0]] {
            let c = correct_probability(s);
            assert!(c > 0.0 && c < 1.0);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data = separable(3, 1);
        let emb = table(&["a", "b", "c", "d"], 3, 1);
        let mut m = MsMlpModel::train(&data, emb, &small_hyper()).unwrap().model;
        let mut rng = seed::rng(9);
        m.params.iter_mut().for_each(|p| *p = rng.gen_range(-0.5..0.5));
        let ex = m.examples(&data);
        let batch: Vec<&MlpExample> = ex.iter().take(10).collect();
        let (_, g) = m.batch_loss_grad(&m.params, &batch);
        let idx: Vec<usize> = (0..m.params.len()).collect();
        let err = nn::max_relative_error(&m.params, &g, &idx, 1e-4, 1e-7, |p| {
            m.batch_loss_grad(p, &batch).0
        });
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn separable_streams_are_learned() {
        let data = separable(200, 3);
        let emb = table(&["a", "b", "c", "d"], 3, 1);
        let hyper = MlpHyper {
            epochs: 30,
            ..small_hyper()
        };
        let m = MsMlpModel::train(&data, emb, &hyper).unwrap().model;
        let ex = m.examples(&data);
        let right = ex
            .iter()
            .filter(|e| (correct_probability(m.scores(e)) > 0.5) == e.correct)
            .count();
        assert!(right as f64 / ex.len() as f64 >= 0.98);
    }

    #[test]
    fn single_class_saturates() {
        let mut data = separable(50, 4);
        for u in &mut data.utterances {
            for t in &mut u.tokens {
                t.error_flag = Some(ErrorFlag::Correct);
            }
        }
        let hyper = MlpHyper {
            epochs: 30,
            ..small_hyper()
        };
        let m = MsMlpModel::train(&data, table(&["a"], 2, 1), &hyper).unwrap().model;
        for u in &data.utterances {
            assert!(m.confidence_of(&u.tokens, 0) > 0.95);
        }
    }

    #[test]
    fn loss_decreases_with_small_steps() {
        let data = separable(4, 5);
        let mut m = MsMlpModel::train(&data, table(&["a", "b"], 2, 1), &small_hyper())
            .unwrap()
            .model;
        let ex = m.examples(&data);
        let batch: Vec<&MlpExample> = ex.iter().collect();
        let mut prev = f64::INFINITY;
        for _ in 0..20 {
            let (loss, g) = m.batch_loss_grad(&m.params, &batch);
            assert!(loss <= prev + 1e-12);
            prev = loss;
            nn::axpy(&mut m.params, -0.01, &g);
        }
    }

    #[test]
    fn model_round_trips_and_rejects_empty_data() {
        let data = separable(5, 6);
        let mut emb = table(&["a", "b", "<unk>"], 2, 1);
        emb.oov = OovPolicy::Row("<unk>".into());
        let hyper = MlpHyper {
            epochs: 1,
            ..small_hyper()
        };
        let m = MsMlpModel::train(&data, emb.clone(), &hyper).unwrap().model;
        let back = MsMlpModel::parse(&m.format()).unwrap();
        assert_eq!(back, m);
        assert!(matches!(
            MsMlpModel::train(&Dataset::default(), emb, &hyper),
            Err(Error::Training(_))
        ));
    }
}
