//! Exact inference on a linear-chain score lattice.
//!
//! Scores live in the log domain. The recursions factor
//! `log Σ exp(a + t)` as `m + tmax + log Σ exp(a - m)·exp(t - tmax)` so the
//! transition exponentials are computed once per lattice rather than once
//! per position; a cell whose factored sum underflows is recomputed with a
//! plain log-sum-exp.

use crate::nn::log_sum_exp;

const UNDERFLOW: f64 = 1e-250;

#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    pub n: usize,
    pub labels: usize,
    /// `n × labels`, row-major.
    pub emit: Vec<f64>,
    pub start: Vec<f64>,
    /// `labels × labels`, `trans[from * labels + to]`.
    pub trans: Vec<f64>,
    pub end: Vec<f64>,
}

/// Posterior marginals of one lattice.
#[derive(Clone, Debug)]
pub struct Marginals {
    pub log_z: f64,
    /// `n × labels` unary posteriors.
    pub unary: Vec<f64>,
    /// Expected transition counts summed over positions, `labels × labels`.
    pub pair: Vec<f64>,
}

struct ExpTrans {
    tmax: f64,
    e: Vec<f64>,
}

impl Lattice {
    pub fn zeros(n: usize, labels: usize) -> Self {
        Lattice {
            n,
            labels,
            emit: vec![0.0; n * labels],
            start: vec![0.0; labels],
            trans: vec![0.0; labels * labels],
            end: vec![0.0; labels],
        }
    }

    pub fn emit_row(&self, i: usize) -> &[f64] {
        &self.emit[i * self.labels..(i + 1) * self.labels]
    }

    pub fn score(&self, path: &[usize]) -> f64 {
        assert_eq!(path.len(), self.n);
        let l = self.labels;
        let mut s = self.start[path[0]] + self.end[path[self.n - 1]];
        for (i, &y) in path.iter().enumerate() {
            s += self.emit[i * l + y];
            if i > 0 {
                s += self.trans[path[i - 1] * l + y];
            }
        }
        s
    }

    fn exp_trans(&self) -> ExpTrans {
        let tmax = self.trans.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let tmax = if tmax.is_finite() { tmax } else { 0.0 };
        ExpTrans {
            tmax,
            e: self.trans.iter().map(|t| (t - tmax).exp()).collect(),
        }
    }

    /// Forward log-scores `alpha[i][y]` (including `emit[i][y]`) and log Z.
    pub fn forward(&self) -> (Vec<f64>, f64) {
        let (l, n) = (self.labels, self.n);
        let et = self.exp_trans();
        let mut alpha = vec![0.0; n * l];
        for y in 0..l {
            alpha[y] = self.start[y] + self.emit[y];
        }
        let mut a = vec![0.0; l];
        for i in 1..n {
            let (prev, cur) = alpha.split_at_mut(i * l);
            let prev = &prev[(i - 1) * l..];
            let m = max(prev);
            for (av, p) in a.iter_mut().zip(prev) {
                *av = (p - m).exp();
            }
            for y in 0..l {
                let mut s = 0.0;
                for (yp, av) in a.iter().enumerate() {
                    s += av * et.e[yp * l + y];
                }
                cur[y] = self.emit[i * l + y]
                    + if s > UNDERFLOW {
                        m + et.tmax + s.ln()
                    } else {
                        let terms: Vec<f64> = (0..l).map(|yp| prev[yp] + self.trans[yp * l + y]).collect();
                        log_sum_exp(&terms)
                    };
            }
        }
        let last: Vec<f64> = (0..l).map(|y| alpha[(n - 1) * l + y] + self.end[y]).collect();
        let log_z = log_sum_exp(&last);
        (alpha, log_z)
    }

    /// Backward log-scores `beta[i][y]` (excluding `emit[i][y]`) and log Z.
    pub fn backward(&self) -> (Vec<f64>, f64) {
        let (l, n) = (self.labels, self.n);
        let et = self.exp_trans();
        let mut beta = vec![0.0; n * l];
        beta[(n - 1) * l..].copy_from_slice(&self.end);
        let mut v = vec![0.0; l];
        let mut nxt = vec![0.0; l];
        for i in (0..n - 1).rev() {
            for y in 0..l {
                nxt[y] = self.emit[(i + 1) * l + y] + beta[(i + 1) * l + y];
            }
            let m = max(&nxt);
            for (vv, x) in v.iter_mut().zip(&nxt) {
                *vv = (x - m).exp();
            }
            for y in 0..l {
                let row = &et.e[y * l..(y + 1) * l];
                let s: f64 = row.iter().zip(&v).map(|(e, x)| e * x).sum();
                beta[i * l + y] = if s > UNDERFLOW {
                    m + et.tmax + s.ln()
                } else {
                    let terms: Vec<f64> = (0..l).map(|yn| self.trans[y * l + yn] + nxt[yn]).collect();
                    log_sum_exp(&terms)
                };
            }
        }
        let first: Vec<f64> = (0..l).map(|y| self.start[y] + self.emit[y] + beta[y]).collect();
        (beta, log_sum_exp(&first))
    }

    pub fn log_partition(&self) -> f64 {
        self.forward().1
    }

    pub fn marginals(&self) -> Marginals {
        let (l, n) = (self.labels, self.n);
        let (alpha, log_z) = self.forward();
        let (beta, _) = self.backward();
        let unary: Vec<f64> = alpha
            .iter()
            .zip(&beta)
            .map(|(a, b)| (a + b - log_z).exp())
            .collect();
        let mut pair = vec![0.0; l * l];
        if n > 1 {
            let et = self.exp_trans();
            let mut u = vec![0.0; l];
            let mut w = vec![0.0; l];
            for i in 1..n {
                let prev = &alpha[(i - 1) * l..i * l];
                let ma = max(prev);
                for (uv, p) in u.iter_mut().zip(prev) {
                    *uv = (p - ma).exp();
                }
                let mut nxt = vec![0.0; l];
                for y in 0..l {
                    nxt[y] = self.emit[i * l + y] + beta[i * l + y];
                }
                let mb = max(&nxt);
                for (wv, x) in w.iter_mut().zip(&nxt) {
                    *wv = (x - mb).exp();
                }
                let scale = (ma + mb + et.tmax - log_z).exp();
                if scale.is_finite() && scale > 0.0 {
                    for a in 0..l {
                        let ua = u[a] * scale;
                        if ua == 0.0 {
                            continue;
                        }
                        for b in 0..l {
                            pair[a * l + b] += ua * et.e[a * l + b] * w[b];
                        }
                    }
                } else {
                    for a in 0..l {
                        for b in 0..l {
                            pair[a * l + b] += (prev[a] + self.trans[a * l + b] + nxt[b] - log_z).exp();
                        }
                    }
                }
            }
        }
        Marginals { log_z, unary, pair }
    }

    /// Best path and its score; ties go to the smallest label id.
    pub fn viterbi(&self) -> (Vec<usize>, f64) {
        let (l, n) = (self.labels, self.n);
        let mut delta = vec![0.0; n * l];
        let mut back = vec![0usize; n * l];
        for y in 0..l {
            delta[y] = self.start[y] + self.emit[y];
        }
        for i in 1..n {
            for y in 0..l {
                let mut best = f64::NEG_INFINITY;
                let mut arg = 0;
                for yp in 0..l {
                    let s = delta[(i - 1) * l + yp] + self.trans[yp * l + y];
                    if s > best {
                        best = s;
                        arg = yp;
                    }
                }
                delta[i * l + y] = best + self.emit[i * l + y];
                back[i * l + y] = arg;
            }
        }
        let mut best = f64::NEG_INFINITY;
        let mut y = 0;
        for c in 0..l {
            let s = delta[(n - 1) * l + c] + self.end[c];
            if s > best {
                best = s;
                y = c;
            }
        }
        let mut path = vec![0; n];
        path[n - 1] = y;
        for i in (1..n).rev() {
            path[i - 1] = back[i * l + path[i]];
        }
        (path, best)
    }
}

fn max(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m.is_finite() {
        m
    } else {
        0.0
    }
}
