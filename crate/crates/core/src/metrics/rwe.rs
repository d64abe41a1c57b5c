use super::flow::{warp, FlowEstimator};
use crate::error::{Error, Result};
use crate::imaging::LuminanceMap;

/// Guard in the denominator of the relative warping error.
pub const RWE_EPS: f64 = 1e-6;

/// `(2/HW) Σ |prev − warped| / (prev + warped + ε)` for one frame pair.
pub fn rwe_pair(prev: &LuminanceMap, warped: &LuminanceMap) -> Result<f64> {
    if (prev.width(), prev.height()) != (warped.width(), warped.height()) {
        return Err(Error::ShapeMismatch("frame pair differs in size".into()));
    }
    let n = prev.values().len() as f64;
    let sum: f64 = prev
        .values()
        .iter()
        .zip(warped.values())
        .map(|(a, b)| (a - b).abs() / (a + b + RWE_EPS))
        .sum();
    Ok(2.0 * sum / n)
}

/// Relative warping error of a clip: frame `t` is warped onto frame `t−1`
/// with the estimated motion and the per-pair errors are averaged.
pub fn rwe(clip: &[LuminanceMap], flow: &dyn FlowEstimator) -> Result<f64> {
    if clip.len() < 2 {
        return Err(Error::TooFewFrames(clip.len()));
    }
    if clip.iter().flat_map(|f| f.values()).any(|&v| !(v >= 0.0)) {
        return Err(Error::InvalidArgument("warping error needs non-negative frames".into()));
    }
    let mut total = 0.0;
    for pair in clip.windows(2) {
        let field = flow.estimate(&pair[0], &pair[1])?;
        total += rwe_pair(&pair[0], &warp(&pair[1], &field)?)?;
    }
    Ok(total / (clip.len() - 1) as f64)
}
