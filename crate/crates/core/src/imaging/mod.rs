//! HDR/LDR frames, luminance handling and color reproduction.

mod io;
mod ops;
mod resample;

pub use io::{
    is_ldr_file, is_radiance_file, list_frame_files, load_clip_dir, load_ldr, load_radiance,
    write_ldr, write_ldr_luminance, write_radiance, ClipManifest, CLIP_MANIFEST,
};
pub use ops::{
    downsample, extract_luminance, normalize_hdr, normalize_hdr_clip, reproduce_color,
    Normalization, COLOR_EPS, DEFAULT_SATURATION, LUMA_WEIGHTS,
};
pub use resample::{crop, resize_area, resize_bilinear, Raster};

use std::path::PathBuf;

use crate::error::{Error, Result};

/// Provenance of a decoded frame.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ImageMeta {
    pub source: Option<PathBuf>,
    /// `(width, height)` as decoded.
    pub original_size: (usize, usize),
    /// Negative samples clamped to zero while loading.
    pub clamped_negatives: usize,
}

/// Linear, unbounded RGB radiance, interleaved row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RadianceImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
    pub meta: ImageMeta,
}

impl RadianceImage {
    /// Validates finiteness, non-negativity and that some pixel is positive.
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * 3 || width == 0 || height == 0 {
            return Err(Error::ShapeMismatch(format!(
                "{width}x{height} RGB needs {} samples, got {}",
                width * height * 3,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument("radiance must be finite and non-negative".into()));
        }
        if !data.iter().any(|&v| v > 0.0) {
            return Err(Error::AllZeroImage);
        }
        Ok(Self {
            width,
            height,
            data,
            meta: ImageMeta { original_size: (width, height), ..Default::default() },
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

/// One luminance plane. `normalized` marks network-range values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LuminanceMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    normalized: bool,
}

impl LuminanceMap {
    /// Raw (not normalized) luminance; values must be finite and non-negative.
    pub fn raw(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        Self::check(width, height, &values)?;
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument("luminance must be finite and non-negative".into()));
        }
        Ok(Self { width, height, values, normalized: false })
    }

    /// Normalized luminance; values must lie in `[0, 1]`.
    pub fn normalized(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        Self::check(width, height, &values)?;
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("normalized luminance must lie in [0, 1]".into()));
        }
        Ok(Self { width, height, values, normalized: true })
    }

    fn check(width: usize, height: usize, values: &[f64]) -> Result<()> {
        if values.len() != width * height || width == 0 || height == 0 {
            return Err(Error::ShapeMismatch(format!(
                "{width}x{height} plane needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Same plane with every value multiplied by `a ≥ 0`, keeping the raw/normalized tag
    /// only when the result is still a valid normalized map.
    pub fn scaled(&self, a: f64) -> Result<Self> {
        let values: Vec<f64> = self.values.iter().map(|v| v * a).collect();
        if self.normalized {
            Self::normalized(self.width, self.height, values)
        } else {
            Self::raw(self.width, self.height, values)
        }
    }

    pub(crate) fn from_parts_unchecked(width: usize, height: usize, values: Vec<f64>, normalized: bool) -> Self {
        debug_assert_eq!(values.len(), width * height);
        Self { width, height, values, normalized }
    }
}

/// Display-referred RGB in `[0, 1]`, interleaved row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct LdrImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl LdrImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * 3 || width == 0 || height == 0 {
            return Err(Error::ShapeMismatch(format!(
                "{width}x{height} RGB needs {} samples, got {}",
                width * height * 3,
                data.len()
            )));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("LDR samples must lie in [0, 1]".into()));
        }
        Ok(Self { width, height, data })
    }

    /// Gray image with all three channels equal to `y`.
    pub fn from_luminance(y: &LuminanceMap) -> Result<Self> {
        let data = y.values().iter().flat_map(|&v| [v, v, v]).collect();
        Self::new(y.width(), y.height(), data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Luminance of the encoded values, tagged normalized.
    pub fn luminance(&self) -> LuminanceMap {
        let [wr, wg, wb] = LUMA_WEIGHTS;
        let values = self
            .data
            .chunks_exact(3)
            .map(|p| (wr * p[0] + wg * p[1] + wb * p[2]).clamp(0.0, 1.0))
            .collect();
        LuminanceMap::from_parts_unchecked(self.width, self.height, values, true)
    }
}

/// A temporally ordered sequence of equally sized frames.
#[derive(Clone, Debug, PartialEq)]
pub struct Clip<F> {
    frames: Vec<F>,
    pub fps: Option<f64>,
}

impl<F: Raster> Clip<F> {
    pub fn new(frames: Vec<F>) -> Result<Self> {
        let first = frames.first().ok_or_else(|| Error::InvalidArgument("clip needs at least one frame".into()))?;
        let dims = first.dims();
        if frames.iter().any(|f| f.dims() != dims) {
            return Err(Error::ShapeMismatch("clip frames differ in resolution".into()));
        }
        Ok(Self { frames, fps: None })
    }

    pub fn frames(&self) -> &[F] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<F> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// `(width, height)` shared by every frame.
    pub fn dims(&self) -> (usize, usize) {
        self.frames[0].dims()
    }
}
