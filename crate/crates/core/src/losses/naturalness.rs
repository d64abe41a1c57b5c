use autograd::{Tensor, Var};

use super::plane;
use crate::error::{Error, Result};
use crate::imaging::LuminanceMap;

/// Patch side of the naturalness statistics.
pub const NATURALNESS_PATCH: usize = 11;

/// Per-window mean and variance, `[.., Ho, Wo]` each.
fn window_stats(x: &Var, patch: usize, step: usize) -> Result<(Var, Var)> {
    let m = x.box_mean(patch, step)?;
    let var = x.square().box_mean(patch, step)?.sub(&m.square())?;
    Ok((m, var))
}

fn mean_last2(v: &Var) -> Result<Var> {
    let nd = v.shape().len();
    Ok(v.mean_axis(nd - 1, false)?.mean_axis(nd - 2, false)?)
}

fn check_pair(a: &Var, b: &Var, patch: usize) -> Result<usize> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    let s = a.shape();
    if s.len() < 2 {
        return Err(Error::ShapeMismatch(format!("need at least 2 dims, got {s:?}")));
    }
    let (h, w) = (s[s.len() - 2], s[s.len() - 1]);
    if patch == 0 || h < patch || w < patch {
        return Err(Error::TooSmall(format!("{h}x{w} plane for {patch}x{patch} patches")));
    }
    Ok(patch)
}

/// `(φ_σ, φ_m)` per plane: mean absolute difference of window variances and of
/// window means.
pub fn stats_dist(a: &Var, b: &Var, patch: usize, step: usize) -> Result<(Var, Var)> {
    check_pair(a, b, patch)?;
    let (ma, va) = window_stats(a, patch, step)?;
    let (mb, vb) = window_stats(b, patch, step)?;
    Ok((mean_last2(&va.sub(&vb)?.abs())?, mean_last2(&ma.sub(&mb)?.abs())?))
}

pub fn naturalness_stats_dist(i1: &LuminanceMap, i2: &LuminanceMap, patch: usize, step: usize) -> Result<(f64, f64)> {
    let (s, m) = stats_dist(&plane(i1)?, &plane(i2)?, patch, step)?;
    Ok((s.item(), m.item()))
}

fn effective_patch(v: &Var) -> usize {
    let s = v.shape();
    NATURALNESS_PATCH.min(s[s.len() - 2]).min(s[s.len() - 1])
}

/// `Σ_t [φ_σ + φ_m]` between good-LDR and output clips `[B, T, H, W]`,
/// averaged over the batch.
pub fn naturalness_inter(ygl: &Var, yo: &Var) -> Result<Var> {
    let (s, m) = stats_dist(ygl, yo, effective_patch(yo), 1)?;
    Ok(s.add(&m)?.sum_axis(1, false)?.mean())
}

/// Scores a quadrant: `(hdr raw luminance, candidate LDR luminance) → quality`.
pub type QuadrantScore<'a> = dyn Fn(&LuminanceMap, &LuminanceMap) -> Result<f64> + 'a;

/// Intra-frame naturalness for outputs `[B, T, H, W]` given the raw HDR luminance
/// of the same shape. Each frame's best-scoring quadrant (ties to the lowest
/// index, order TL, TR, BL, BR) becomes a fixed label whose mean window
/// statistics the whole frame is pulled towards. Returns the loss averaged
/// over the batch and the selected quadrant per `(b, t)`.
pub fn naturalness_intra(yo: &Var, hdr: &Tensor, score: &QuadrantScore<'_>) -> Result<(Var, Vec<usize>)> {
    let (b, t, h, w) = yo.value().dims4()?;
    if hdr.shape() != yo.shape() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", hdr.shape(), yo.shape())));
    }
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::OddDimensions(h, w));
    }
    let (qh, qw) = (h / 2, w / 2);
    let patch = NATURALNESS_PATCH.min(qh).min(qw);
    let quadrant = |data: &[f64], q: usize| -> Vec<f64> {
        let (y0, x0) = ((q / 2) * qh, (q % 2) * qw);
        (0..qh).flat_map(|y| data[(y0 + y) * w + x0..(y0 + y) * w + x0 + qw].iter().copied()).collect()
    };
    let mut labels = Vec::with_capacity(b * t * qh * qw);
    let mut picks = Vec::with_capacity(b * t);
    for f in 0..b * t {
        let out = &yo.value().data()[f * h * w..(f + 1) * h * w];
        let src = &hdr.data()[f * h * w..(f + 1) * h * w];
        let mut best = (0, f64::NEG_INFINITY);
        for q in 0..4 {
            let hq = LuminanceMap::raw(qw, qh, quadrant(src, q))?;
            let oq = LuminanceMap::normalized(qw, qh, quadrant(out, q).into_iter().map(|v| v.clamp(0.0, 1.0)).collect())?;
            let s = score(&hq, &oq)?;
            if s > best.1 {
                best = (q, s);
            }
        }
        picks.push(best.0);
        labels.extend(quadrant(out, best.0));
    }
    let label = Var::constant(Tensor::from_vec(&[b, t, qh, qw], labels)?);
    let (lm, lv) = window_stats(&label, patch, 1)?;
    let (om, ov) = window_stats(yo, patch, 1)?;
    let phi_s = mean_last2(&lv)?.sub(&mean_last2(&ov)?)?.abs();
    let phi_m = mean_last2(&lm)?.sub(&mean_last2(&om)?)?.abs();
    Ok((phi_s.add(&phi_m)?.sum_axis(1, false)?.mean(), picks))
}

/// `Σ_t (mean|∇x| + mean|∇y|)²` with forward differences over valid positions,
/// averaged over the batch. A direction with no valid pair contributes 0.
pub fn tv_loss(yo: &Var) -> Result<Var> {
    let (b, t, h, w) = yo.value().dims4()?;
    if h < 2 && w < 2 {
        return Err(Error::TooSmall(format!("{h}x{w} frame has no neighbours")));
    }
    let mut g = Var::constant(Tensor::zeros(&[b, t]));
    if w > 1 {
        let dx = yo.narrow(3, 1, w - 1)?.sub(&yo.narrow(3, 0, w - 1)?)?.abs();
        g = g.add(&mean_last2(&dx)?)?;
    }
    if h > 1 {
        let dy = yo.narrow(2, 1, h - 1)?.sub(&yo.narrow(2, 0, h - 1)?)?.abs();
        g = g.add(&mean_last2(&dy)?)?;
    }
    Ok(g.square().sum_axis(1, false)?.mean())
}
