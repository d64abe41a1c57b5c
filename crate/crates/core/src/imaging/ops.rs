use super::{Clip, LdrImage, LuminanceMap, RadianceImage};
use crate::error::{Error, Result};

/// BT.601 luma weights for R, G, B.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Guard added to the luminance denominator of the color ratio.
pub const COLOR_EPS: f64 = 1e-8;

/// Saturation exponent ν used for color reproduction unless overridden.
pub const DEFAULT_SATURATION: f64 = 0.5;

pub fn extract_luminance(img: &RadianceImage) -> LuminanceMap {
    let [wr, wg, wb] = LUMA_WEIGHTS;
    let values = img
        .data()
        .chunks_exact(3)
        .map(|p| wr * p[0] + wg * p[1] + wb * p[2])
        .collect();
    LuminanceMap::from_parts_unchecked(img.width(), img.height(), values, false)
}

/// Log-mean normalization fitted on one or more raw luminance planes.
///
/// `y' = (ln(1 + y/μ) − lo) / (hi − lo)` with `μ` the geometric mean of the
/// positive samples and `lo`/`hi` the extrema of the log-compressed values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Normalization {
    pub mu: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Normalization {
    pub fn fit<'a>(planes: impl IntoIterator<Item = &'a LuminanceMap>) -> Result<Self> {
        let planes: Vec<&LuminanceMap> = planes.into_iter().collect();
        if let Some(p) = planes.iter().find(|p| p.is_normalized()) {
            return Err(Error::InvalidArgument(format!(
                "normalize_hdr expects raw luminance, got a normalized {}x{} map",
                p.width(),
                p.height()
            )));
        }
        let (mut log_sum, mut count) = (0.0, 0usize);
        for v in planes.iter().flat_map(|p| p.values()) {
            if *v > 0.0 {
                log_sum += v.ln();
                count += 1;
            }
        }
        let mu = if count == 0 { 1.0 } else { (log_sum / count as f64).exp() };
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in planes.iter().flat_map(|p| p.values()) {
            let l = (v / mu).ln_1p();
            lo = lo.min(l);
            hi = hi.max(l);
        }
        Ok(Self { mu, lo, hi })
    }

    /// True when every sample compresses to the same value.
    pub fn is_degenerate(&self) -> bool {
        !(self.hi > self.lo)
    }

    pub fn apply(&self, y: &LuminanceMap) -> LuminanceMap {
        let values = if self.is_degenerate() {
            vec![0.5; y.values().len()]
        } else {
            let span = self.hi - self.lo;
            y.values()
                .iter()
                .map(|v| (((v / self.mu).ln_1p() - self.lo) / span).clamp(0.0, 1.0))
                .collect()
        };
        LuminanceMap::from_parts_unchecked(y.width(), y.height(), values, true)
    }
}

/// Maps raw luminance to the network range `[0, 1]`. A constant plane maps to
/// 0.5 everywhere and logs a warning.
pub fn normalize_hdr(y: &LuminanceMap) -> Result<LuminanceMap> {
    let n = Normalization::fit([y])?;
    if n.is_degenerate() {
        log::warn!("degenerate luminance range ({}x{}); using constant 0.5", y.width(), y.height());
    }
    Ok(n.apply(y))
}

/// Normalizes every frame with statistics shared across the clip, so that a
/// static scene stays static after normalization.
pub fn normalize_hdr_clip(clip: &Clip<LuminanceMap>) -> Result<Clip<LuminanceMap>> {
    let n = Normalization::fit(clip.frames())?;
    if n.is_degenerate() {
        log::warn!("degenerate luminance range over {} frames; using constant 0.5", clip.len());
    }
    let mut out = Clip::new(clip.frames().iter().map(|f| n.apply(f)).collect())?;
    out.fps = clip.fps;
    Ok(out)
}

/// Restores color from tone-mapped luminance: `clip((c/(Yh+ε))^ν · Yo, 0, 1)` per channel.
pub fn reproduce_color(
    hdr: &RadianceImage,
    yh: &LuminanceMap,
    yo: &LuminanceMap,
    nu: f64,
) -> Result<LdrImage> {
    let dims = (hdr.width(), hdr.height());
    for (what, m) in [("raw luminance", yh), ("output luminance", yo)] {
        if (m.width(), m.height()) != dims {
            return Err(Error::ShapeMismatch(format!(
                "{what} is {}x{}, image is {}x{}",
                m.width(),
                m.height(),
                dims.0,
                dims.1
            )));
        }
    }
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::InvalidArgument(format!("saturation must lie in (0, 1], got {nu}")));
    }
    let mut data = Vec::with_capacity(hdr.data().len());
    for ((px, &lh), &lo) in hdr.data().chunks_exact(3).zip(yh.values()).zip(yo.values()) {
        for &c in px {
            data.push(((c / (lh + COLOR_EPS)).powf(nu) * lo).clamp(0.0, 1.0));
        }
    }
    LdrImage::new(dims.0, dims.1, data)
}

/// Applies 2×2 average pooling `k` times; odd trailing rows/columns are dropped.
pub fn downsample(y: &LuminanceMap, k: u32) -> Result<LuminanceMap> {
    let f = 1usize << k;
    if y.width() < f || y.height() < f {
        return Err(Error::TooSmall(format!(
            "{}x{} cannot be downsampled {k} times",
            y.width(),
            y.height()
        )));
    }
    let (mut w, mut h, mut v) = (y.width(), y.height(), y.values().to_vec());
    for _ in 0..k {
        let (w2, h2) = (w / 2, h / 2);
        let mut next = Vec::with_capacity(w2 * h2);
        for r in 0..h2 {
            let (a, b) = (&v[2 * r * w..], &v[(2 * r + 1) * w..]);
            for c in 0..w2 {
                next.push(0.25 * (a[2 * c] + a[2 * c + 1] + b[2 * c] + b[2 * c + 1]));
            }
        }
        (w, h, v) = (w2, h2, next);
    }
    Ok(LuminanceMap::from_parts_unchecked(w, h, v, y.is_normalized()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rgb(w: usize, h: usize, f: impl Fn(usize) -> f64) -> RadianceImage {
        RadianceImage::new(w, h, (0..w * h * 3).map(f).collect()).unwrap()
    }

    #[test]
    fn luminance_of_gray_and_red() {
        let y = extract_luminance(&rgb(1, 1, |_| 0.37));
        assert!((y.values()[0] - 0.37).abs() < 1e-15);
        let y = extract_luminance(&RadianceImage::new(1, 1, vec![1.0, 0.0, 0.0]).unwrap());
        assert_eq!(y.values()[0], 0.299);
        assert!(!y.is_normalized());
    }

    #[test]
    fn constant_plane_normalizes_to_half() {
        let y = LuminanceMap::raw(4, 3, vec![2.5; 12]).unwrap();
        let n = normalize_hdr(&y).unwrap();
        assert!(n.values().iter().all(|&v| v == 0.5));
        assert!(n.is_normalized());
    }

    #[test]
    fn two_value_plane_hits_both_endpoints() {
        let y = LuminanceMap::raw(2, 1, vec![0.3, 40.0]).unwrap();
        let n = normalize_hdr(&y).unwrap();
        assert_eq!(n.values(), &[0.0, 1.0]);
    }

    #[test]
    fn rejects_normalized_input() {
        let y = LuminanceMap::normalized(2, 1, vec![0.3, 0.4]).unwrap();
        assert!(normalize_hdr(&y).is_err());
    }

    #[test]
    fn gray_color_reproduction_copies_output_luminance() {
        let hdr = rgb(2, 2, |i| 0.5 + (i / 3) as f64);
        let yh = extract_luminance(&hdr);
        let yo = LuminanceMap::normalized(2, 2, vec![0.1, 0.4, 0.7, 0.95]).unwrap();
        let out = reproduce_color(&hdr, &yh, &yo, DEFAULT_SATURATION).unwrap();
        for (px, &y) in out.data().chunks(3).zip(yo.values()) {
            for &c in px {
                assert!((c - y).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn downsample_block_mean() {
        let y = LuminanceMap::raw(2, 2, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        assert_eq!(downsample(&y, 0).unwrap(), y);
        assert_eq!(downsample(&y, 1).unwrap().values(), &[0.5]);
        assert!(matches!(downsample(&y, 2), Err(Error::TooSmall(_))));
    }

    #[test]
    fn downsample_drops_odd_edge() {
        let y = LuminanceMap::raw(5, 3, (0..15).map(|i| i as f64).collect()).unwrap();
        let d = downsample(&y, 1).unwrap();
        assert_eq!((d.width(), d.height()), (2, 1));
        assert_eq!(d.values(), &[3.0, 5.0]);
    }
}
