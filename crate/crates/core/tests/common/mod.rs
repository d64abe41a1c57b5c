//! Nested-loop reference implementations shared by the integration tests.
//!
//! Everything here is written from the formulas directly, without going
//! through the autograd kernels, so agreement is meaningful.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn patch(v: &[f64], w: usize, x0: usize, y0: usize, k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(k * k);
    for y in y0..y0 + k {
        for x in x0..x0 + k {
            out.push(v[y * w + x]);
        }
    }
    out
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}

fn positions(w: usize, h: usize, k: usize, step: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut y = 0;
    while y + k <= h {
        let mut x = 0;
        while x + k <= w {
            out.push((x, y));
            x += step;
        }
        y += step;
    }
    out
}

/// Mean over windows of `cov / (σ1 σ2 + ε)`.
pub fn pearson(a: &[f64], b: &[f64], w: usize, h: usize, k: usize, step: usize, eps: f64) -> f64 {
    let pos = positions(w, h, k, step);
    let mut total = 0.0;
    for &(x, y) in &pos {
        let (pa, pb) = (patch(a, w, x, y, k), patch(b, w, x, y, k));
        let (ma, mb) = (mean(&pa), mean(&pb));
        let cov = pa.iter().zip(&pb).map(|(u, v)| (u - ma) * (v - mb)).sum::<f64>() / pa.len() as f64;
        total += cov / (var(&pa).sqrt() * var(&pb).sqrt() + eps);
    }
    total / pos.len() as f64
}

/// `(mean |σ²1 − σ²2|, mean |m1 − m2|)` over windows.
pub fn stats_dist(a: &[f64], b: &[f64], w: usize, h: usize, k: usize, step: usize) -> (f64, f64) {
    let pos = positions(w, h, k, step);
    let (mut s, mut m) = (0.0, 0.0);
    for &(x, y) in &pos {
        let (pa, pb) = (patch(a, w, x, y, k), patch(b, w, x, y, k));
        s += (var(&pa) - var(&pb)).abs();
        m += (mean(&pa) - mean(&pb)).abs();
    }
    (s / pos.len() as f64, m / pos.len() as f64)
}

/// Mean of window means and of window variances of one plane.
pub fn window_summary(a: &[f64], w: usize, h: usize, k: usize) -> (f64, f64) {
    let pos = positions(w, h, k, 1);
    let (mut m, mut s) = (0.0, 0.0);
    for &(x, y) in &pos {
        let p = patch(a, w, x, y, k);
        m += mean(&p);
        s += var(&p);
    }
    (m / pos.len() as f64, s / pos.len() as f64)
}

/// `[μ_1..μ_C, τ_1..τ_C]` for each sample of a `[B, C, H, W]` buffer.
pub fn latent(f: &[f64], b: usize, c: usize, hw: usize) -> Vec<Vec<f64>> {
    (0..b)
        .map(|i| {
            let chans: Vec<&[f64]> = (0..c).map(|j| &f[(i * c + j) * hw..(i * c + j + 1) * hw]).collect();
            let mut z: Vec<f64> = chans.iter().map(|ch| mean(ch)).collect();
            z.extend(chans.iter().map(|ch| var(ch).sqrt()));
            z
        })
        .collect()
}

/// Rank of every other node by squared distance, lower index first on ties.
pub fn knn(nodes: &[f64], n: usize, d: usize, k: usize) -> Vec<Vec<usize>> {
    (0..n)
        .map(|i| {
            let mut ranked: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| ((0..d).map(|t| (nodes[i * d + t] - nodes[j * d + t]).powi(2)).sum(), j))
                .collect();
            ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            ranked.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

/// 2×2 mean pooling, odd trailing row/column dropped.
pub fn pool(v: &[f64], w: usize, h: usize) -> (Vec<f64>, usize, usize) {
    let (w2, h2) = (w / 2, h / 2);
    let mut out = vec![0.0; w2 * h2];
    for y in 0..h2 {
        for x in 0..w2 {
            let mut s = 0.0;
            for dy in 0..2 {
                for dx in 0..2 {
                    s += v[(2 * y + dy) * w + 2 * x + dx];
                }
            }
            out[y * w2 + x] = s / 4.0;
        }
    }
    (out, w2, h2)
}

/// `Σ_k (1 − ρ_k)` for one frame over three pooling levels.
pub fn structure(a: &[f64], b: &[f64], w: usize, h: usize) -> f64 {
    let (mut a, mut b, mut w, mut h) = (a.to_vec(), b.to_vec(), w, h);
    let mut total = 0.0;
    for k in 0..3 {
        if k > 0 {
            let (pa, w2, h2) = pool(&a, w, h);
            b = pool(&b, w, h).0;
            (a, w, h) = (pa, w2, h2);
        }
        let p = 5.min(w).min(h);
        total += 1.0 - pearson(&a, &b, w, h, p, 1, 1e-8);
    }
    total
}

/// `(mean |∂x| + mean |∂y|)²` of one frame.
pub fn tv(v: &[f64], w: usize, h: usize) -> f64 {
    let mut gx = 0.0;
    if w > 1 {
        for y in 0..h {
            for x in 0..w - 1 {
                gx += (v[y * w + x + 1] - v[y * w + x]).abs();
            }
        }
        gx /= (h * (w - 1)) as f64;
    }
    let mut gy = 0.0;
    if h > 1 {
        for y in 0..h - 1 {
            for x in 0..w {
                gy += (v[(y + 1) * w + x] - v[y * w + x]).abs();
            }
        }
        gy /= ((h - 1) * w) as f64;
    }
    (gx + gy).powi(2)
}

pub fn sim(u: &[f64], v: &[f64], eta: f64, c: f64) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let l1: f64 = u.iter().zip(v).map(|(a, b)| (a - b).abs()).sum();
    (dot / (eta + c * l1)).exp()
}

/// Domain contrastive loss with anchor `i` paired to positive `i mod M`.
pub fn domain_cl(zo: &[Vec<f64>], zgl: &[Vec<f64>], zh: &[Vec<f64>], zpl: &[Vec<f64>], eta: f64, c: f64) -> f64 {
    let mut total = 0.0;
    for (i, a) in zo.iter().enumerate() {
        let pos = sim(a, &zgl[i % zgl.len()], eta, c);
        let nh: f64 = zh.iter().map(|n| sim(a, n, eta, c)).sum();
        let np: f64 = zpl.iter().map(|n| sim(a, n, eta, c)).sum();
        total += -(pos / (pos + nh)).ln() - (pos / (pos + np)).ln();
    }
    total / zo.len() as f64
}

pub fn instance_cl(z: &[Vec<f64>], pos: usize, neg: usize, eta: f64, c: f64) -> f64 {
    let mut total = 0.0;
    let mut n = 0;
    for (i, a) in z.iter().enumerate() {
        if i == pos || i == neg {
            continue;
        }
        let (sp, sn) = (sim(a, &z[pos], eta, c), sim(a, &z[neg], eta, c));
        total += -(sp / (sp + sn)).ln();
        n += 1;
    }
    total / n as f64
}

/// Dual contrastive discriminator objective, evaluated without stabilization.
pub fn dcl_d(real: &[f64], fake: &[f64]) -> f64 {
    let sf: f64 = fake.iter().map(|f| f.exp()).sum();
    let sr: f64 = real.iter().map(|r| (-r).exp()).sum();
    let a: f64 = real.iter().map(|r| (r.exp() / (r.exp() + sf)).ln()).sum::<f64>() / real.len() as f64;
    let b: f64 = fake.iter().map(|f| ((-f).exp() / ((-f).exp() + sr)).ln()).sum::<f64>() / fake.len() as f64;
    a + b
}

/// Backward bilinear warp with coordinates clamped to the border.
pub fn warp(v: &[f64], w: usize, h: usize, u: &[f64], vv: &[f64]) -> Vec<f64> {
    let at = |x: usize, y: usize| v[y * w + x];
    (0..w * h)
        .map(|i| {
            let sx = ((i % w) as f64 + u[i]).clamp(0.0, (w - 1) as f64);
            let sy = ((i / w) as f64 + vv[i]).clamp(0.0, (h - 1) as f64);
            let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
            let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
            (1.0 - fy) * ((1.0 - fx) * at(x0, y0) + fx * at(x1, y0)) + fy * ((1.0 - fx) * at(x0, y1) + fx * at(x1, y1))
        })
        .collect()
}
