//! GRU cell over flat parameter slices.
//!
//! `W` is `3H × X`, `U` is `3H × H`, `b` is `3H`, gates stacked as
//! update `z`, reset `r`, candidate `n`:
//!
//! ```text
//! z = σ(Wz x + Uz h + bz)
//! r = σ(Wr x + Ur h + br)
//! n = tanh(Wn x + bn + Un (r ⊙ h))
//! h' = (1 − z) ⊙ n + z ⊙ h
//! ```

use crate::nn::{gemv, gemv_t, ger, sigmoid};

pub struct GruParams<'a> {
    pub w: &'a [f64],
    pub u: &'a [f64],
    pub b: &'a [f64],
}

pub struct GruGrads<'a> {
    pub w: &'a mut [f64],
    pub u: &'a mut [f64],
    pub b: &'a mut [f64],
}

/// Activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct GruCache {
    pub x: Vec<f64>,
    pub h: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    n: Vec<f64>,
    rh: Vec<f64>,
}

pub fn step(p: &GruParams, x: &[f64], h: &[f64]) -> (Vec<f64>, GruCache) {
    let hd = h.len();
    let mut a = p.b.to_vec();
    gemv(p.w, x, &mut a);
    gemv(&p.u[..2 * hd * hd], h, &mut a[..2 * hd]);
    let z: Vec<f64> = a[..hd].iter().map(|&v| sigmoid(v)).collect();
    let r: Vec<f64> = a[hd..2 * hd].iter().map(|&v| sigmoid(v)).collect();
    let rh: Vec<f64> = r.iter().zip(h).map(|(r, h)| r * h).collect();
    let mut an = a[2 * hd..].to_vec();
    gemv(&p.u[2 * hd * hd..], &rh, &mut an);
    let n: Vec<f64> = an.iter().map(|v| v.tanh()).collect();
    let out = (0..hd).map(|k| (1.0 - z[k]) * n[k] + z[k] * h[k]).collect();
    (
        out,
        GruCache {
            x: x.to_vec(),
            h: h.to_vec(),
            z,
            r,
            n,
            rh,
        },
    )
}

/// Accumulates parameter gradients; adds `∂L/∂x` into `dx` and returns `∂L/∂h`.
pub fn backward(p: &GruParams, g: &mut GruGrads, c: &GruCache, dout: &[f64], dx: &mut [f64]) -> Vec<f64> {
    let hd = c.h.len();
    let mut dh: Vec<f64> = (0..hd).map(|k| dout[k] * c.z[k]).collect();
    let mut da = vec![0.0; 3 * hd];
    for k in 0..hd {
        let dz = dout[k] * (c.h[k] - c.n[k]);
        let dn = dout[k] * (1.0 - c.z[k]);
        da[k] = dz * c.z[k] * (1.0 - c.z[k]);
        da[2 * hd + k] = dn * (1.0 - c.n[k] * c.n[k]);
    }
    let un = &p.u[2 * hd * hd..];
    ger(&mut g.u[2 * hd * hd..], &da[2 * hd..], &c.rh);
    let mut drh = vec![0.0; hd];
    gemv_t(un, &da[2 * hd..], &mut drh);
    for k in 0..hd {
        dh[k] += drh[k] * c.r[k];
        da[hd + k] = drh[k] * c.h[k] * c.r[k] * (1.0 - c.r[k]);
    }
    ger(&mut g.u[..2 * hd * hd], &da[..2 * hd], &c.h);
    gemv_t(&p.u[..2 * hd * hd], &da[..2 * hd], &mut dh);
    ger(g.w, &da, &c.x);
    for (b, d) in g.b.iter_mut().zip(&da) {
        *b += d;
    }
    gemv_t(p.w, &da, dx);
    dh
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::max_relative_error;
    use rand::Rng;

    #[test]
    fn cell_gradient_matches_finite_differences() {
        let (xd, hd) = (4, 3);
        let mut rng = crate::seed::rng(2);
        let mut v = |n: usize| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
        let (w, u, b, x, h, dout) = (v(3 * hd * xd), v(3 * hd * hd), v(3 * hd), v(xd), v(hd), v(hd));
        // Loss = dout · h'; check d/dx, d/dh and d/dW.
        let loss = |w: &[f64], x: &[f64], h: &[f64]| {
            let (o, _) = step(&GruParams { w, u: &u, b: &b }, x, h);
            o.iter().zip(&dout).map(|(a, b)| a * b).sum::<f64>()
        };
        let p = GruParams { w: &w, u: &u, b: &b };
        let (_, cache) = step(&p, &x, &h);
        let (mut gw, mut gu, mut gb) = (vec![0.0; w.len()], vec![0.0; u.len()], vec![0.0; b.len()]);
        let mut dx = vec![0.0; xd];
        let dh = backward(
            &p,
            &mut GruGrads { w: &mut gw, u: &mut gu, b: &mut gb },
            &cache,
            &dout,
            &mut dx,
        );
        let idx = |n: usize| (0..n).collect::<Vec<_>>();
        assert!(max_relative_error(&x, &dx, &idx(xd), 1e-5, 1e-8, |x| loss(&w, x, &h)) < 1e-6);
        assert!(max_relative_error(&h, &dh, &idx(hd), 1e-5, 1e-8, |h| loss(&w, &x, h)) < 1e-6);
        assert!(max_relative_error(&w, &gw, &idx(w.len()), 1e-5, 1e-8, |w| loss(w, &x, &h)) < 1e-6);
    }

    #[test]
    fn zero_parameters_halve_the_state() {
        let z = vec![0.0; 3 * 2 * 2];
        let (o, _) = step(&GruParams { w: &z, u: &z, b: &[0.0; 6] }, &[1.0, -1.0], &[0.4, 0.0]);
        assert_eq!(o, vec![0.2, 0.0]);
    }
}
