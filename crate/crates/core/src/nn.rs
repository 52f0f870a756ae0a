//! Shared plumbing for the hand-written networks: flat parameter buffers
//! addressed through a block layout, deterministic sharded gradient
//! reduction, optimizers, a text parameter codec and a finite-difference
//! gradient checker.

use std::fmt::Write as _;

use ndarray::{ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2};
use rand::Rng;
use rayon::prelude::*;

use crate::{Error, Result};

pub type BlockId = usize;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl Block {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Named, shaped regions of one flat `f64` buffer.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Layout {
    blocks: Vec<Block>,
    len: usize,
}

impl Layout {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, rows: usize, cols: usize) -> BlockId {
        self.blocks.push(Block {
            name: name.to_string(),
            rows,
            cols,
            offset: self.len,
        });
        self.len += rows * cols;
        self.blocks.len() - 1
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, id: BlockId) -> &Block {
        &self.blocks[id]
    }

    pub fn range(&self, id: BlockId) -> std::ops::Range<usize> {
        let b = &self.blocks[id];
        b.offset..b.offset + b.len()
    }

    pub fn mat<'a>(&self, data: &'a [f64], id: BlockId) -> ArrayView2<'a, f64> {
        let b = &self.blocks[id];
        ArrayView2::from_shape((b.rows, b.cols), &data[self.range(id)]).expect("block shape")
    }

    pub fn mat_mut<'a>(&self, data: &'a mut [f64], id: BlockId) -> ArrayViewMut2<'a, f64> {
        let b = &self.blocks[id];
        let r = self.range(id);
        ArrayViewMut2::from_shape((b.rows, b.cols), &mut data[r]).expect("block shape")
    }

    pub fn vec<'a>(&self, data: &'a [f64], id: BlockId) -> ArrayView1<'a, f64> {
        ArrayView1::from(&data[self.range(id)])
    }

    pub fn vec_mut<'a>(&self, data: &'a mut [f64], id: BlockId) -> ArrayViewMut1<'a, f64> {
        let r = self.range(id);
        ArrayViewMut1::from(&mut data[r])
    }

    pub fn slice<'a>(&self, data: &'a [f64], id: BlockId) -> &'a [f64] {
        &data[self.range(id)]
    }

    pub fn slice_mut<'a>(&self, data: &'a mut [f64], id: BlockId) -> &'a mut [f64] {
        let r = self.range(id);
        &mut data[r]
    }

    /// Row `row` of a matrix block as a slice (embedding lookups).
    pub fn row<'a>(&self, data: &'a [f64], id: BlockId, row: usize) -> &'a [f64] {
        let b = &self.blocks[id];
        let start = b.offset + row * b.cols;
        &data[start..start + b.cols]
    }

    pub fn row_mut<'a>(&self, data: &'a mut [f64], id: BlockId, row: usize) -> &'a mut [f64] {
        let b = &self.blocks[id];
        let start = b.offset + row * b.cols;
        &mut data[start..start + b.cols]
    }

    /// Uniform(-s, s) initialisation with `s = scale / sqrt(cols)` for
    /// matrices; bias vectors (single row named `b*`) start at zero.
    pub fn init_uniform<R: Rng>(&self, rng: &mut R, scale: f64) -> Vec<f64> {
        let mut data = vec![0.0; self.len];
        for b in &self.blocks {
            if b.name.starts_with('b') && b.rows == 1 {
                continue;
            }
            let s = scale / (b.cols.max(1) as f64).sqrt();
            for v in &mut data[b.offset..b.offset + b.len()] {
                *v = rng.gen_range(-s..s);
            }
        }
        data
    }
}

/// `g += d ⊗ x` for a matrix block gradient.
pub fn outer_acc(mut g: ArrayViewMut2<f64>, d: &[f64], x: &[f64]) {
    for (mut row, &di) in g.rows_mut().into_iter().zip(d) {
        if di == 0.0 {
            continue;
        }
        for (gv, &xv) in row.iter_mut().zip(x) {
            *gv += di * xv;
        }
    }
}

/// `out += W x` for row-major `W` with `x.len()` columns.
pub fn gemv(w: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o += dot(row, x);
    }
}

/// `out += Wᵀ d` for row-major `W` with `out.len()` columns.
pub fn gemv_t(w: &[f64], d: &[f64], out: &mut [f64]) {
    let cols = out.len();
    for (&dr, row) in d.iter().zip(w.chunks_exact(cols)) {
        if dr != 0.0 {
            axpy(out, dr, row);
        }
    }
}

/// `G += d xᵀ` for row-major `G` with `x.len()` columns.
pub fn ger(g: &mut [f64], d: &[f64], x: &[f64]) {
    let cols = x.len();
    for (&dr, row) in d.iter().zip(g.chunks_exact_mut(cols)) {
        if dr != 0.0 {
            axpy(row, dr, x);
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yv, xv) in y.iter_mut().zip(x) {
        *yv += a * xv;
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Summed loss and gradient over `items`, computed in fixed-size shards.
///
/// Shards are evaluated in parallel on the current rayon pool but reduced
/// strictly in shard order, so the result is bit-identical for any thread
/// count.
pub fn sharded_gradient<T, F>(items: &[T], n_params: usize, shard: usize, f: F) -> (f64, Vec<f64>)
where
    T: Sync,
    F: Fn(&T, &mut [f64]) -> f64 + Sync,
{
    let parts: Vec<(f64, Vec<f64>)> = items
        .par_chunks(shard.max(1))
        .map(|chunk| {
            let mut g = vec![0.0; n_params];
            let mut loss = 0.0;
            for item in chunk {
                loss += f(item, &mut g);
            }
            (loss, g)
        })
        .collect();
    let mut total = vec![0.0; n_params];
    let mut loss = 0.0;
    for (l, g) in parts {
        loss += l;
        axpy(&mut total, 1.0, &g);
    }
    (loss, total)
}

pub fn clip_norm(g: &mut [f64], max_norm: f64) {
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        g.iter_mut().for_each(|x| *x *= s);
    }
}

#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// Descent step on `params` along gradient `g` of the loss.
    pub fn step(&mut self, params: &mut [f64], g: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g[i] * g[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

/// Serialise parameters block by block: `block <name> <rows> <cols>`
/// followed by one line per row. Values use the shortest round-trip form.
pub fn write_params(out: &mut String, layout: &Layout, data: &[f64]) {
    for (id, b) in layout.blocks().iter().enumerate() {
        let _ = writeln!(out, "block {} {} {}", b.name, b.rows, b.cols);
        let m = layout.mat(data, id);
        for row in m.rows() {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(' ');
                }
                first = false;
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
    }
}

/// Parse parameters written by [`write_params`]; the layout must match.
pub fn read_params<'a, I>(lines: &mut I, layout: &Layout) -> Result<Vec<f64>>
where
    I: Iterator<Item = &'a str>,
{
    let mut data = vec![0.0; layout.len()];
    for (id, b) in layout.blocks().iter().enumerate() {
        let header = lines
            .next()
            .ok_or_else(|| Error::Format(format!("missing block {}", b.name)))?;
        let expect = format!("block {} {} {}", b.name, b.rows, b.cols);
        if header.trim() != expect {
            return Err(Error::Format(format!(
                "expected `{expect}`, found `{}`",
                header.trim()
            )));
        }
        let mut m = layout.mat_mut(&mut data, id);
        for r in 0..b.rows {
            let line = lines
                .next()
                .ok_or_else(|| Error::Format(format!("block {} truncated", b.name)))?;
            let mut n = 0;
            for (c, tok) in line.split_ascii_whitespace().enumerate() {
                if c >= b.cols {
                    return Err(Error::Format(format!("block {} row {r} too long", b.name)));
                }
                m[[r, c]] = tok
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("block {}: {e}", b.name)))?;
                n += 1;
            }
            if n != b.cols {
                return Err(Error::Format(format!("block {} row {r} too short", b.name)));
            }
        }
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Format("non-finite parameter".into()));
    }
    Ok(data)
}

/// Largest relative error between an analytic gradient and central finite
/// differences of `loss` at the given coordinates.
///
/// The relative error is `|a - n| / max(|a|, |n|, floor)`; the floor keeps
/// coordinates whose true derivative is zero from dominating the result.
pub fn max_relative_error<F>(
    params: &[f64],
    analytic: &[f64],
    indices: &[usize],
    h: f64,
    floor: f64,
    loss: F,
) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let mut p = params.to_vec();
    let mut worst: f64 = 0.0;
    for &i in indices {
        let orig = p[i];
        p[i] = orig + h;
        let up = loss(&p);
        p[i] = orig - h;
        let down = loss(&p);
        p[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[i];
        let denom = a.abs().max(numeric.abs()).max(floor);
        worst = worst.max((a - numeric).abs() / denom);
    }
    worst
}
