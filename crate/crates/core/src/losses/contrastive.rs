use autograd::{Tensor, Var};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default `η` of the similarity kernel.
pub const SIMILARITY_ETA: f64 = 1e-2;
/// Default `c` of the similarity kernel.
pub const SIMILARITY_C: f64 = 1.0;

/// Network a latent code was extracted from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentSource {
    Discriminator,
    Generator,
}

/// `[μ_1..μ_q, τ_1..τ_q]` of one sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentCode {
    pub values: Vec<f64>,
    pub source: LatentSource,
}

impl LatentCode {
    /// Splits a `[B, 2q]` code matrix into per-sample codes.
    pub fn from_rows(codes: &Var, source: LatentSource) -> Result<Vec<Self>> {
        let &[b, l] = codes.shape() else {
            return Err(Error::ShapeMismatch(format!("codes must be [B, 2q], got {:?}", codes.shape())));
        };
        Ok((0..b)
            .map(|i| Self { values: codes.value().data()[i * l..(i + 1) * l].to_vec(), source })
            .collect())
    }

    pub fn q(&self) -> usize {
        self.values.len() / 2
    }
}

/// Per-channel spatial mean and standard deviation of `[B, C, H, W]`, as `[B, 2C]`.
pub fn latent_code(f: &Var) -> Result<Var> {
    let (b, c, h, w) = f.value().dims4()?;
    let x = f.reshape(&[b, c, h * w])?;
    let mu = x.mean_axis(2, true)?;
    let var = x.sub(&mu)?.square().mean_axis(2, false)?;
    let tau = var.sqrt();
    Ok(Var::concat(&[mu.reshape(&[b, c])?, tau], 1)?)
}

/// `ln s(u, v) = uᵀv / (η + c‖u − v‖₁)` over the last axis, with broadcasting.
pub fn log_similarity(u: &Var, v: &Var, eta: f64, c: f64) -> Result<Var> {
    let (lu, lv) = (*u.shape().last().unwrap_or(&0), *v.shape().last().unwrap_or(&0));
    if lu != lv {
        return Err(Error::LengthMismatch(lu, lv));
    }
    let axis = u.shape().len().max(v.shape().len()) - 1;
    let dot = u.mul(v)?.sum_axis(axis, false)?;
    let l1 = u.sub(v)?.abs().sum_axis(axis, false)?;
    Ok(dot.div(&l1.scale(c).add_scalar(eta))?)
}

/// `s(u, v) = exp(uᵀv / (η + c‖u − v‖₁))`.
pub fn similarity(u: &[f64], v: &[f64], eta: f64, c: f64) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch(u.len(), v.len()));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let l1: f64 = u.iter().zip(v).map(|(a, b)| (a - b).abs()).sum();
    Ok((dot / (eta + c * l1)).exp())
}

fn rows(codes: &Var, what: &'static str) -> Result<(usize, usize)> {
    match codes.shape() {
        &[n, l] if n > 0 => Ok((n, l)),
        &[0, _] => Err(Error::EmptyBatch(what)),
        s => Err(Error::ShapeMismatch(format!("{what} codes must be [N, L], got {s:?}"))),
    }
}

/// Pairwise `ln s` between rows of `[n, L]` and `[m, L]`, as `[n, m]`.
fn pairwise(a: &Var, b: &Var, eta: f64, c: f64) -> Result<Var> {
    let (n, l) = (a.shape()[0], a.shape()[1]);
    let m = b.shape()[0];
    log_similarity(&a.reshape(&[n, 1, l])?, &b.reshape(&[1, m, l])?, eta, c)
}

/// `−ln(s_pos / (s_pos + Σ s_neg))` per anchor from log-similarities.
fn info_nce(log_pos: &Var, log_neg: &Var) -> Result<Var> {
    let n = log_pos.shape()[0];
    let all = Var::concat(&[log_pos.reshape(&[n, 1])?, log_neg.clone()], 1)?;
    Ok(all.logsumexp_axis(1, false)?.sub(log_pos)?)
}

/// Domain contrastive loss. Anchor `i` pairs with positive `i mod M`; every
/// anchor is contrasted against all input-domain and all poor-LDR negatives.
pub fn domain_cl_loss(z_o: &Var, z_gl: &Var, z_h: &Var, z_pl: &Var, eta: f64, c: f64) -> Result<Var> {
    let (b, l) = rows(z_o, "outputs")?;
    let (m, lg) = rows(z_gl, "good LDR")?;
    let (_, lh) = rows(z_h, "input negatives")?;
    let (_, lp) = rows(z_pl, "poor LDR negatives")?;
    for other in [lg, lh, lp] {
        if other != l {
            return Err(Error::LengthMismatch(l, other));
        }
    }
    let pos_idx: Vec<usize> = (0..b).map(|i| i % m).collect();
    let pos = z_gl.index_select(0, &pos_idx)?;
    let log_pos = log_similarity(z_o, &pos, eta, c)?;
    let term_h = info_nce(&log_pos, &pairwise(z_o, z_h, eta, c)?)?;
    let term_pl = info_nce(&log_pos, &pairwise(z_o, z_pl, eta, c)?)?;
    Ok(term_h.add(&term_pl)?.mean())
}

/// Indices of the positive (highest score) and negative (lowest score)
/// samples. Ties go to the lowest index; the negative is never the positive.
pub fn select_instances(scores: &[f64]) -> Result<(usize, usize)> {
    if scores.len() < 3 {
        return Err(Error::BatchTooSmall(scores.len()));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument(format!("score {i} is not finite")));
    }
    let mut pos = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[pos] {
            pos = i;
        }
    }
    let mut neg = usize::from(pos == 0);
    for (i, &s) in scores.iter().enumerate() {
        if i != pos && s < scores[neg] {
            neg = i;
        }
    }
    if scores.iter().all(|&s| s == scores[0]) {
        log::warn!("all {} instance scores are equal; using index tie-break", scores.len());
    }
    Ok((pos, neg))
}

/// Instance contrastive loss over a batch of generator codes `[B, L]`.
pub fn instance_cl_loss(z: &Var, scores: &[f64], eta: f64, c: f64) -> Result<Var> {
    let (b, _) = rows(z, "generator")?;
    if scores.len() != b {
        return Err(Error::ShapeMismatch(format!("{b} codes but {} scores", scores.len())));
    }
    let (pos, neg) = select_instances(scores)?;
    let anchors: Vec<usize> = (0..b).filter(|&i| i != pos && i != neg).collect();
    let za = z.index_select(0, &anchors)?;
    let n = anchors.len();
    let zp = z.index_select(0, &vec![pos; n])?;
    let zn = z.index_select(0, &vec![neg; n])?;
    let log_pos = log_similarity(&za, &zp, eta, c)?;
    let log_neg = log_similarity(&za, &zn, eta, c)?.reshape(&[n, 1])?;
    Ok(info_nce(&log_pos, &log_neg)?.mean())
}

/// Codes as a constant `[n, L]` var.
pub fn codes_var(codes: &[LatentCode]) -> Result<Var> {
    let l = codes.first().map(|c| c.values.len()).ok_or(Error::EmptyBatch("codes"))?;
    if let Some(c) = codes.iter().find(|c| c.values.len() != l) {
        return Err(Error::LengthMismatch(l, c.values.len()));
    }
    let data = codes.iter().flat_map(|c| c.values.iter().copied()).collect();
    Ok(Var::constant(Tensor::from_vec(&[codes.len(), l], data)?))
}
