use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, Continuous, ContinuousCDF, Normal};

use super::constants as k;
use crate::error::{Error, Result};
use crate::imaging::{LdrImage, LuminanceMap, RadianceImage};

/// Overall quality `q` with its structural fidelity `s` and naturalness `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TmqiResult {
    pub q: f64,
    pub s: f64,
    pub n: f64,
}

/// Row-major plane used internally.
#[derive(Clone, Debug)]
struct Plane {
    w: usize,
    h: usize,
    v: Vec<f64>,
}

impl Plane {
    /// 2×2 mean followed by decimation; an odd edge is mirrored.
    fn half(&self) -> Plane {
        let (w2, h2) = (self.w.div_ceil(2), self.h.div_ceil(2));
        let at = |x: usize, y: usize| self.v[y.min(self.h - 1) * self.w + x.min(self.w - 1)];
        let mut v = Vec::with_capacity(w2 * h2);
        for y in 0..h2 {
            for x in 0..w2 {
                let (sx, sy) = (2 * x, 2 * y);
                v.push(0.25 * (at(sx, sy) + at(sx + 1, sy) + at(sx, sy + 1) + at(sx + 1, sy + 1)));
            }
        }
        Plane { w: w2, h: h2, v }
    }
}

fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let mut w: Vec<f64> = (0..size * size)
        .map(|i| {
            let (y, x) = ((i / size) as f64 - c, (i % size) as f64 - c);
            (-(x * x + y * y) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// "Valid" correlation of `p` with a square window.
fn filter_valid(p: &Plane, win: &[f64], size: usize) -> Plane {
    let (wo, ho) = (p.w - size + 1, p.h - size + 1);
    let mut v = vec![0.0; wo * ho];
    for y in 0..ho {
        for x in 0..wo {
            let mut acc = 0.0;
            for dy in 0..size {
                let row = &p.v[(y + dy) * p.w + x..(y + dy) * p.w + x + size];
                let wr = &win[dy * size..(dy + 1) * size];
                acc += row.iter().zip(wr).map(|(a, b)| a * b).sum::<f64>();
            }
            v[y * wo + x] = acc;
        }
    }
    Plane { w: wo, h: ho, v }
}

/// Mean local structural similarity at spatial frequency `f`.
fn s_local(hdr: &Plane, ldr: &Plane, f: f64) -> f64 {
    let size = k::WINDOW_SIZE.min(hdr.w).min(hdr.h);
    let win = gaussian_window(size, k::WINDOW_SIGMA);
    let prod = |a: &Plane, b: &Plane| Plane { w: a.w, h: a.h, v: a.v.iter().zip(&b.v).map(|(x, y)| x * y).collect() };
    let mu1 = filter_valid(hdr, &win, size);
    let mu2 = filter_valid(ldr, &win, size);
    let s11 = filter_valid(&prod(hdr, hdr), &win, size);
    let s22 = filter_valid(&prod(ldr, ldr), &win, size);
    let s12 = filter_valid(&prod(hdr, ldr), &win, size);

    let u = 128.0 / (1.4 * k::csf(f));
    let prior = Normal::new(u, u / 3.0).expect("positive spread");
    let mut sum = 0.0;
    for i in 0..mu1.v.len() {
        let sigma1 = (s11.v[i] - mu1.v[i] * mu1.v[i]).max(0.0).sqrt();
        let sigma2 = (s22.v[i] - mu2.v[i] * mu2.v[i]).max(0.0).sqrt();
        let sigma12 = s12.v[i] - mu1.v[i] * mu2.v[i];
        let p1 = prior.cdf(sigma1);
        let p2 = prior.cdf(sigma2);
        let signal = (2.0 * p1 * p2 + k::C1) / (p1 * p1 + p2 * p2 + k::C1);
        let structure = (sigma12 + k::C2) / (sigma1 * sigma2 + k::C2);
        sum += signal * structure;
    }
    sum / mu1.v.len() as f64
}

/// Multi-scale structural fidelity. Scales stop once a side drops below the
/// window size (the first scale is always used, with a shrunken window if
/// needed); the exponents of the used scales are renormalized.
fn structural_fidelity(mut hdr: Plane, mut ldr: Plane) -> f64 {
    let mut logs = 0.0;
    let mut wsum = 0.0;
    for (l, (&wt, &f)) in k::SCALE_WEIGHTS.iter().zip(&k::SCALE_FREQUENCIES).enumerate() {
        if l > 0 {
            if hdr.w.min(hdr.h) < 2 * k::WINDOW_SIZE - 1 {
                break;
            }
            hdr = hdr.half();
            ldr = ldr.half();
        }
        let s = s_local(&hdr, &ldr, f).clamp(0.0, 1.0);
        if s == 0.0 {
            return 0.0;
        }
        logs += wt * s.ln();
        wsum += wt;
    }
    (logs / wsum).exp()
}

/// Statistical naturalness of an 8-bit-scale luminance plane.
fn naturalness(ldr: &Plane) -> f64 {
    let mean = ldr.v.iter().sum::<f64>() / ldr.v.len() as f64;
    // Pixel-weighted mean of per-block sample standard deviations.
    let b = k::CONTRAST_BLOCK;
    let mut weighted = 0.0;
    for by in (0..ldr.h).step_by(b) {
        for bx in (0..ldr.w).step_by(b) {
            let (bh, bw) = (b.min(ldr.h - by), b.min(ldr.w - bx));
            let n = bh * bw;
            if n < 2 {
                continue;
            }
            let vals = (0..bh).flat_map(|y| (0..bw).map(move |x| (y, x))).map(|(y, x)| ldr.v[(by + y) * ldr.w + bx + x]);
            let m = vals.clone().sum::<f64>() / n as f64;
            let var = vals.map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64;
            weighted += var.sqrt() * n as f64;
        }
    }
    let sig = weighted / ldr.v.len() as f64;

    let beta = Beta::new(k::CONTRAST_BETA_A, k::CONTRAST_BETA_B).expect("valid shape");
    let mode = (k::CONTRAST_BETA_A - 1.0) / (k::CONTRAST_BETA_A + k::CONTRAST_BETA_B - 2.0);
    let pc = beta.pdf(sig / k::CONTRAST_SCALE) / beta.pdf(mode);
    let normal = Normal::new(k::BRIGHTNESS_MEAN, k::BRIGHTNESS_STD).expect("positive spread");
    let pb = normal.pdf(mean) / normal.pdf(k::BRIGHTNESS_MEAN);
    (pb * pc).clamp(0.0, 1.0)
}

fn score(hdr: &[f64], ldr: Vec<f64>, w: usize, h: usize) -> Result<TmqiResult> {
    let (lo, hi) = hdr.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(hi > 0.0) || hdr.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("HDR luminance has no positive value".into()));
    }
    let factor = if hi > lo { k::HDR_RANGE / (hi - lo) } else { 0.0 };
    let hdr = Plane { w, h, v: hdr.iter().map(|v| (v - lo) * factor).collect() };
    let ldr = Plane { w, h, v: ldr };
    let n = naturalness(&ldr);
    let s = structural_fidelity(hdr, ldr);
    let q = k::A * s.powf(k::ALPHA) + (1.0 - k::A) * n.powf(k::BETA);
    Ok(TmqiResult { q, s, n })
}

/// Quality of a tone-mapped luminance plane (values in `[0, 1]`) against the
/// raw HDR luminance of the same scene.
pub fn tmqi(hdr: &LuminanceMap, ldr: &LuminanceMap) -> Result<TmqiResult> {
    if (hdr.width(), hdr.height()) != (ldr.width(), ldr.height()) {
        return Err(Error::ShapeMismatch(format!(
            "HDR {}x{} vs LDR {}x{}",
            hdr.width(),
            hdr.height(),
            ldr.width(),
            ldr.height()
        )));
    }
    let l = ldr.values().iter().map(|v| v.clamp(0.0, 1.0) * k::LDR_RANGE).collect();
    score(hdr.values(), l, hdr.width(), hdr.height())
}

/// Quality of an RGB tone-mapped image against its RGB radiance source, using
/// the metric's own luminance weights.
pub fn tmqi_rgb(hdr: &RadianceImage, ldr: &LdrImage) -> Result<TmqiResult> {
    if (hdr.width(), hdr.height()) != (ldr.width(), ldr.height()) {
        return Err(Error::ShapeMismatch("HDR and LDR sizes differ".into()));
    }
    let y = |d: &[f64], scale: f64| -> Vec<f64> {
        d.chunks_exact(3).map(|p| scale * (k::RGB_TO_Y[0] * p[0] + k::RGB_TO_Y[1] * p[1] + k::RGB_TO_Y[2] * p[2])).collect()
    };
    score(&y(hdr.data(), 1.0), y(ldr.data(), k::LDR_RANGE), hdr.width(), hdr.height())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csf_peak_region() {
        assert!(k::csf(4.0) > k::csf(16.0));
        assert!(k::csf(4.0) > k::csf(1.0));
    }

    #[test]
    fn naturalness_is_one_at_prior_modes() {
        // Mean at the brightness mode and every block's std at the contrast mode.
        let mode = (k::CONTRAST_BETA_A - 1.0) / (k::CONTRAST_BETA_A + k::CONTRAST_BETA_B - 2.0);
        let target_std = mode * k::CONTRAST_SCALE;
        // Two-valued 2x2 blocks: values m ± d have sample std d·sqrt(4/3).
        let d = target_std / (4.0f64 / 3.0).sqrt();
        let plane = Plane { w: 2, h: 2, v: vec![k::BRIGHTNESS_MEAN - d, k::BRIGHTNESS_MEAN + d, k::BRIGHTNESS_MEAN + d, k::BRIGHTNESS_MEAN - d] };
        assert!((naturalness(&plane) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn identical_scaled_planes_have_high_fidelity() {
        let (w, h) = (32, 32);
        let hdr: Vec<f64> = (0..w * h).map(|i| 2.5 + ((i % w) as f64 * 0.3).sin() + ((i / w) as f64 * 0.2).cos()).collect();
        let (lo, hi) = (hdr.iter().cloned().fold(f64::INFINITY, f64::min), hdr.iter().cloned().fold(0.0, f64::max));
        let ldr: Vec<f64> = hdr.iter().map(|v| (v - lo) / (hi - lo)).collect();
        let r = tmqi(&LuminanceMap::raw(w, h, hdr).unwrap(), &LuminanceMap::normalized(w, h, ldr).unwrap()).unwrap();
        assert!(r.s > 0.5 && r.s <= 1.0, "{r:?}");
        assert!((0.0..=1.0).contains(&r.q));
    }
}
