use autograd::Var;

use super::{plane, PEARSON_EPS};
use crate::error::{Error, Result};
use crate::imaging::LuminanceMap;

/// Patch side of the structure term.
pub const STRUCTURE_PATCH: usize = 5;
/// Downsampling levels compared by the structure term.
pub const STRUCTURE_SCALES: u32 = 3;

fn spatial(v: &Var) -> Result<(usize, usize)> {
    let s = v.shape();
    if s.len() < 2 {
        return Err(Error::ShapeMismatch(format!("need at least 2 dims, got {s:?}")));
    }
    Ok((s[s.len() - 2], s[s.len() - 1]))
}

/// Mean patch correlation per plane: shape is the input shape without the two
/// trailing dims. Constant patches contribute 0.
pub fn pearson_corr(a: &Var, b: &Var, patch: usize, step: usize) -> Result<Var> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    let (h, w) = spatial(a)?;
    if h < patch || w < patch || patch == 0 || step == 0 {
        return Err(Error::TooSmall(format!("{h}x{w} plane for {patch}x{patch} patches")));
    }
    let r = a.patch_pearson(b, patch, step, PEARSON_EPS)?;
    let nd = r.shape().len();
    Ok(r.mean_axis(nd - 1, false)?.mean_axis(nd - 2, false)?)
}

/// Mean Pearson correlation over all `patch×patch` windows of two planes.
pub fn pearson_patch_corr(i1: &LuminanceMap, i2: &LuminanceMap, patch: usize, step: usize) -> Result<f64> {
    Ok(pearson_corr(&plane(i1)?, &plane(i2)?, patch, step)?.item())
}

/// `Σ_t Σ_k (1 − ρ_k,t)` for clips `[B, T, H, W]`, averaged over the batch.
///
/// Levels whose planes are smaller than the patch use a patch clipped to the
/// plane; levels with a side below 2 pixels are skipped.
pub fn structure_loss(yh: &Var, yo: &Var) -> Result<Var> {
    if yh.shape() != yo.shape() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", yh.shape(), yo.shape())));
    }
    let (b, t, _, _) = yh.value().dims4()?;
    let (mut a, mut o) = (yh.clone(), yo.clone());
    let mut total: Option<Var> = None;
    for k in 0..STRUCTURE_SCALES {
        if k > 0 {
            let (h, w) = spatial(&a)?;
            if h < 2 || w < 2 {
                break;
            }
            a = a.avg_pool2d(2)?;
            o = o.avg_pool2d(2)?;
        }
        let (h, w) = spatial(&a)?;
        if h.min(w) < 2 {
            break;
        }
        let rho = pearson_corr(&a, &o, STRUCTURE_PATCH.min(h).min(w), 1)?;
        let term = rho.neg().add_scalar(1.0);
        total = Some(match total {
            None => term,
            Some(acc) => acc.add(&term)?,
        });
    }
    let total = total.ok_or_else(|| Error::TooSmall("clip frames are smaller than 2x2".into()))?;
    debug_assert_eq!(total.shape(), [b, t]);
    Ok(total.sum_axis(1, false)?.mean())
}
