use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;

use super::embeddings::{EmbeddingTable, OovPolicy, UNKNOWN};
use crate::nn::{self, gemv, gemv_t, ger, BlockId, Layout};
use crate::seed;
use crate::{Error, Result};

const MAGIC: &str = "slu-autoencoder 1";

#[derive(Clone, Debug, PartialEq)]
pub struct AeHyper {
    pub bottleneck: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub seed: u64,
}

impl Default for AeHyper {
    fn default() -> Self {
        AeHyper {
            bottleneck: 16,
            epochs: 60,
            lr: 0.5,
            batch: 16,
            seed: 1,
        }
    }
}

/// `z = tanh(We x + be)`, `x̂ = Wd z + bd` over the concatenation of the
/// source tables in `sources` order.
#[derive(Clone, Debug, PartialEq)]
pub struct AutoencoderModel {
    pub sources: Vec<(String, usize)>,
    pub bottleneck: usize,
    layout: Layout,
    ids: [BlockId; 4],
    pub params: Vec<f64>,
}

impl AutoencoderModel {
    fn shaped(sources: Vec<(String, usize)>, bottleneck: usize) -> Self {
        let input: usize = sources.iter().map(|s| s.1).sum();
        let mut layout = Layout::new();
        let ids = [
            layout.add("We", bottleneck, input),
            layout.add("be", 1, bottleneck),
            layout.add("Wd", input, bottleneck),
            layout.add("bd", 1, input),
        ];
        let params = vec![0.0; layout.len()];
        AutoencoderModel {
            sources,
            bottleneck,
            layout,
            ids,
            params,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.sources.iter().map(|s| s.1).sum()
    }

    pub fn encode(&self, x: &[f64]) -> Vec<f64> {
        let [we, be, _, _] = self.ids;
        let mut z = self.layout.slice(&self.params, be).to_vec();
        gemv(self.layout.slice(&self.params, we), x, &mut z);
        z.iter_mut().for_each(|v| *v = v.tanh());
        z
    }

    /// Loss `(1/D)·|x̂ - x|²` of one vector, accumulating its gradient.
    fn loss_grad(&self, params: &[f64], x: &[f64], g: Option<&mut [f64]>) -> f64 {
        let [we, be, wd, bd] = self.ids;
        let l = &self.layout;
        let mut z = l.slice(params, be).to_vec();
        gemv(l.slice(params, we), x, &mut z);
        z.iter_mut().for_each(|v| *v = v.tanh());
        let mut y = l.slice(params, bd).to_vec();
        gemv(l.slice(params, wd), &z, &mut y);
        let dim = x.len() as f64;
        let diff: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
        let loss = diff.iter().map(|d| d * d).sum::<f64>() / dim;
        if let Some(g) = g {
            let dy: Vec<f64> = diff.iter().map(|d| 2.0 * d / dim).collect();
            ger(l.slice_mut(g, wd), &dy, &z);
            nn::axpy(l.slice_mut(g, bd), 1.0, &dy);
            let mut dz = vec![0.0; z.len()];
            gemv_t(l.slice(params, wd), &dy, &mut dz);
            for (d, zv) in dz.iter_mut().zip(&z) {
                *d *= 1.0 - zv * zv;
            }
            ger(l.slice_mut(g, we), &dz, x);
            nn::axpy(l.slice_mut(g, be), 1.0, &dz);
        }
        loss
    }

    /// Mean loss and gradient over `xs`.
    pub fn batch_loss_grad(&self, params: &[f64], xs: &[&[f64]]) -> (f64, Vec<f64>) {
        let (loss, mut g) = nn::sharded_gradient(xs, params.len(), 16, |x, g| {
            self.loss_grad(params, x, Some(g))
        });
        let n = xs.len().max(1) as f64;
        g.iter_mut().for_each(|v| *v /= n);
        (loss / n, g)
    }

    pub fn format(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC}");
        let _ = writeln!(s, "bottleneck {}", self.bottleneck);
        let _ = writeln!(s, "sources {}", self.sources.len());
        for (name, dim) in &self.sources {
            let _ = writeln!(s, "{name} {dim}");
        }
        nn::write_params(&mut s, &self.layout, &self.params);
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let bad = |m: &str| Error::Format(format!("autoencoder model: {m}"));
        if lines.next() != Some(MAGIC) {
            return Err(bad("missing `slu-autoencoder 1` header"));
        }
        let field = |line: Option<&str>, key: &str| -> Result<usize> {
            line.and_then(|l| l.strip_prefix(key))
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| bad(&format!("expected `{key} <n>`")))
        };
        let bottleneck = field(lines.next(), "bottleneck")?;
        let k = field(lines.next(), "sources")?;
        let mut sources = Vec::with_capacity(k);
        for _ in 0..k {
            let line = lines.next().ok_or_else(|| bad("truncated source list"))?;
            let (name, dim) = line
                .split_once(' ')
                .and_then(|(n, d)| Some((n.to_string(), d.parse::<usize>().ok()?)))
                .ok_or_else(|| bad("expected `<name> <dim>`"))?;
            sources.push((name, dim));
        }
        let mut m = Self::shaped(sources, bottleneck);
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

fn concat(tables: &[(String, EmbeddingTable)], word: &str) -> Vec<f64> {
    tables.iter().flat_map(|(_, t)| t.lookup(word).iter().copied()).collect()
}

/// Train on the words shared by every table. Returns the model and its
/// final mean squared reconstruction error.
pub fn train_autoencoder(
    tables: &[(String, EmbeddingTable)],
    hyper: &AeHyper,
) -> Result<(AutoencoderModel, f64)> {
    if hyper.bottleneck < 1 {
        return Err(Error::Config("bottleneck dimension must be at least 1".into()));
    }
    if tables.len() < 2 {
        return Err(Error::Config("fusion needs at least two embedding tables".into()));
    }
    let mut shared: Vec<&String> = tables[0]
        .1
        .words()
        .iter()
        .filter(|w| tables[1..].iter().all(|(_, t)| t.get(w).is_some()))
        .collect();
    shared.sort();
    if shared.is_empty() {
        return Err(Error::Training("embedding tables share no vocabulary".into()));
    }
    let data: Vec<Vec<f64>> = shared.iter().map(|w| concat(tables, w)).collect();
    let sources = tables.iter().map(|(n, t)| (n.clone(), t.dim())).collect();
    let mut model = AutoencoderModel::shaped(sources, hyper.bottleneck);
    let mut rng = seed::rng(hyper.seed);
    model.params = model.layout.init_uniform(&mut rng, 1.0);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(hyper.batch.max(1)) {
            let xs: Vec<&[f64]> = chunk.iter().map(|&i| data[i].as_slice()).collect();
            let (_, g) = model.batch_loss_grad(&model.params, &xs);
            nn::axpy(&mut model.params, -hyper.lr, &g);
        }
    }
    let xs: Vec<&[f64]> = data.iter().map(Vec::as_slice).collect();
    let (mse, _) = model.batch_loss_grad(&model.params, &xs);
    if !mse.is_finite() {
        return Err(Error::Training("autoencoder diverged".into()));
    }
    Ok((model, mse))
}

/// Bottleneck activation for `word`; each source applies its OOV policy.
pub fn fuse(model: &AutoencoderModel, tables: &[(String, EmbeddingTable)], word: &str) -> Result<Vec<f64>> {
    let names: Vec<(&str, usize)> = tables.iter().map(|(n, t)| (n.as_str(), t.dim())).collect();
    let expected: Vec<(&str, usize)> = model.sources.iter().map(|(n, d)| (n.as_str(), *d)).collect();
    if names != expected {
        return Err(Error::Config(format!(
            "tables {names:?} do not match the model's sources {expected:?}"
        )));
    }
    Ok(model.encode(&concat(tables, word)))
}

/// Fused vectors for the union vocabulary plus an `<unk>` row holding the
/// encoding of an all-zero input.
pub fn fused_table(model: &AutoencoderModel, tables: &[(String, EmbeddingTable)]) -> Result<EmbeddingTable> {
    let mut vocab: Vec<&String> = tables.iter().flat_map(|(_, t)| t.words()).collect();
    vocab.sort();
    vocab.dedup();
    let mut out = EmbeddingTable::new(model.bottleneck);
    for w in vocab {
        out.insert(w, &fuse(model, tables, w)?)?;
    }
    out.insert(UNKNOWN, &model.encode(&vec![0.0; model.input_dim()]))?;
    out.oov = OovPolicy::Row(UNKNOWN.into());
    Ok(out)
}
