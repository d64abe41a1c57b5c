use super::{LdrImage, LuminanceMap, RadianceImage};
use crate::error::{Error, Result};

/// Interleaved raster with a fixed channel count.
pub trait Raster: Sized {
    const CHANNELS: usize;

    /// `(width, height)`.
    fn dims(&self) -> (usize, usize);

    fn samples(&self) -> &[f64];

    /// Same kind of raster with new geometry and samples. Samples produced by
    /// cropping or convex resampling keep every invariant of the source.
    fn rebuild(&self, width: usize, height: usize, samples: Vec<f64>) -> Self;
}

impl Raster for RadianceImage {
    const CHANNELS: usize = 3;

    fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn samples(&self) -> &[f64] {
        &self.data
    }

    fn rebuild(&self, width: usize, height: usize, samples: Vec<f64>) -> Self {
        Self { width, height, data: samples, meta: self.meta.clone() }
    }
}

impl Raster for LdrImage {
    const CHANNELS: usize = 3;

    fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn samples(&self) -> &[f64] {
        &self.data
    }

    fn rebuild(&self, width: usize, height: usize, samples: Vec<f64>) -> Self {
        Self { width, height, data: samples }
    }
}

impl Raster for LuminanceMap {
    const CHANNELS: usize = 1;

    fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn samples(&self) -> &[f64] {
        &self.values
    }

    fn rebuild(&self, width: usize, height: usize, samples: Vec<f64>) -> Self {
        Self::from_parts_unchecked(width, height, samples, self.normalized)
    }
}

/// Window `[x, x+w) × [y, y+h)`.
pub fn crop<R: Raster>(r: &R, x: usize, y: usize, w: usize, h: usize) -> Result<R> {
    let (sw, sh) = r.dims();
    if w == 0 || h == 0 || x + w > sw || y + h > sh {
        return Err(Error::InvalidArgument(format!(
            "crop {w}x{h}+{x}+{y} outside {sw}x{sh}"
        )));
    }
    let c = R::CHANNELS;
    let src = r.samples();
    let mut out = Vec::with_capacity(w * h * c);
    for row in y..y + h {
        let start = (row * sw + x) * c;
        out.extend_from_slice(&src[start..start + w * c]);
    }
    Ok(r.rebuild(w, h, out))
}

/// Coverage weights of source cells for each output cell along one axis.
fn area_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|o| {
            let (a, b) = (o as f64 * scale, (o + 1) as f64 * scale);
            let mut taps = Vec::new();
            let mut i = a.floor() as usize;
            while (i as f64) < b && i < src {
                let cover = (b.min(i as f64 + 1.0) - a.max(i as f64)).max(0.0);
                if cover > 0.0 {
                    taps.push((i, cover / scale));
                }
                i += 1;
            }
            taps
        })
        .collect()
}

fn bilinear_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|o| {
            let s = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(src - 1);
            let t = s - i0 as f64;
            if i1 == i0 || t == 0.0 {
                vec![(i0, 1.0)]
            } else {
                vec![(i0, 1.0 - t), (i1, t)]
            }
        })
        .collect()
}

fn separable<R: Raster>(
    r: &R,
    w: usize,
    h: usize,
    weights: fn(usize, usize) -> Vec<Vec<(usize, f64)>>,
) -> Result<R> {
    let (sw, sh) = r.dims();
    if w == 0 || h == 0 {
        return Err(Error::InvalidArgument(format!("cannot resize to {w}x{h}")));
    }
    if (w, h) == (sw, sh) {
        return Ok(r.rebuild(w, h, r.samples().to_vec()));
    }
    let c = R::CHANNELS;
    let (wx, wy) = (weights(sw, w), weights(sh, h));
    let src = r.samples();
    let mut tmp = vec![0.0; w * sh * c];
    for row in 0..sh {
        for (ox, taps) in wx.iter().enumerate() {
            for &(ix, wt) in taps {
                for ch in 0..c {
                    tmp[(row * w + ox) * c + ch] += wt * src[(row * sw + ix) * c + ch];
                }
            }
        }
    }
    let mut out = vec![0.0; w * h * c];
    for (oy, taps) in wy.iter().enumerate() {
        for &(iy, wt) in taps {
            let (dst, s) = (&mut out[oy * w * c..(oy + 1) * w * c], &tmp[iy * w * c..(iy + 1) * w * c]);
            for (d, v) in dst.iter_mut().zip(s) {
                *d += wt * v;
            }
        }
    }
    // Convex weights can overshoot [0, 1] by rounding; keep LDR/normalized invariants.
    let (lo, hi) = src.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    for v in &mut out {
        *v = v.clamp(lo, hi);
    }
    Ok(r.rebuild(w, h, out))
}

/// Area-averaging resize (box filter over exact source coverage).
pub fn resize_area<R: Raster>(r: &R, w: usize, h: usize) -> Result<R> {
    separable(r, w, h, area_weights)
}

/// Bilinear resize with pixel-center alignment.
pub fn resize_bilinear<R: Raster>(r: &R, w: usize, h: usize) -> Result<R> {
    separable(r, w, h, bilinear_weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crop_extracts_window() {
        let y = LuminanceMap::raw(4, 3, (0..12).map(|i| i as f64).collect()).unwrap();
        let c = crop(&y, 1, 1, 2, 2).unwrap();
        assert_eq!(c.values(), &[5.0, 6.0, 9.0, 10.0]);
        assert!(crop(&y, 3, 0, 2, 1).is_err());
    }

    #[test]
    fn integer_area_resize_is_block_mean() {
        let y = LuminanceMap::raw(4, 2, vec![1.0, 3.0, 5.0, 7.0, 1.0, 3.0, 5.0, 7.0]).unwrap();
        let r = resize_area(&y, 2, 1).unwrap();
        assert_eq!(r.values(), &[2.0, 6.0]);
    }

    #[test]
    fn fractional_area_resize_preserves_mean() {
        let y = LuminanceMap::raw(7, 5, (0..35).map(|i| (i * 13 % 7) as f64).collect()).unwrap();
        let r = resize_area(&y, 3, 2).unwrap();
        assert!((r.mean() - y.mean()).abs() < 1e-12);
    }

    #[test]
    fn bilinear_keeps_constants() {
        let img = RadianceImage::new(5, 3, vec![0.25; 45]).unwrap();
        let r = resize_bilinear(&img, 9, 4).unwrap();
        assert!(r.data().iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }
}
