use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sampler::sample_gamma;
use crate::error::{Error, Result};
use crate::imaging::{
    crop, is_ldr_file, is_radiance_file, load_ldr, load_radiance, resize_area, write_ldr, write_radiance, Clip, Raster,
};

/// Largest downsampling ratio applied before cropping stills.
pub const MAX_GAMMA: f64 = 2.8;

/// How a still becomes a clip: downsample by `gamma`, then take `frames`
/// independent `crop × crop` windows.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticClipSpec {
    pub gamma: f64,
    pub frames: usize,
    pub crop: usize,
    pub seed: u64,
}

impl SyntheticClipSpec {
    pub fn validate(&self) -> Result<()> {
        if !(1.0..=MAX_GAMMA).contains(&self.gamma) {
            return Err(Error::InvalidArgument(format!("gamma must lie in [1, {MAX_GAMMA}], got {}", self.gamma)));
        }
        if self.frames == 0 || self.crop == 0 {
            return Err(Error::InvalidArgument("frames and crop must be positive".into()));
        }
        Ok(())
    }

    /// Size of a `width × height` source after downsampling.
    pub fn scaled_size(&self, width: usize, height: usize) -> (usize, usize) {
        ((width as f64 / self.gamma).floor() as usize, (height as f64 / self.gamma).floor() as usize)
    }
}

/// Top-left corners of the crops, drawn uniformly and independently per frame
/// from a generator seeded with `spec.seed`.
pub fn crop_offsets(spec: &SyntheticClipSpec, width: usize, height: usize) -> Result<Vec<(usize, usize)>> {
    if width < spec.crop || height < spec.crop {
        return Err(Error::SourceTooSmall { width, height, crop: spec.crop });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok((0..spec.frames)
        .map(|_| (rng.random_range(0..=width - spec.crop), rng.random_range(0..=height - spec.crop)))
        .collect())
}

/// Builds a pseudo-video from a still image.
pub fn synth_clip_from_image<R: Raster>(img: &R, spec: &SyntheticClipSpec) -> Result<Clip<R>> {
    spec.validate()?;
    let (w, h) = img.dims();
    let (sw, sh) = spec.scaled_size(w, h);
    if sw < spec.crop || sh < spec.crop {
        return Err(Error::SourceTooSmall { width: w, height: h, crop: spec.crop });
    }
    let scaled = resize_area(img, sw, sh)?;
    let frames = crop_offsets(spec, sw, sh)?
        .into_iter()
        .map(|(x, y)| crop(&scaled, x, y, spec.crop, spec.crop))
        .collect::<Result<Vec<_>>>()?;
    Clip::new(frames)
}

/// Options of [`synthesize_dir`].
#[derive(Clone, Debug, PartialEq)]
pub struct SynthOptions {
    pub frames: usize,
    pub crop: usize,
    /// Fixed ratio; drawn per still from `[1, min(MAX_GAMMA, fit)]` when absent.
    pub gamma: Option<f64>,
    pub seed: u64,
}

fn write_frames<R: Raster>(clip: &Clip<R>, dir: &Path, ext: &str, write: impl Fn(&R, &Path) -> Result<()>) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (t, f) in clip.frames().iter().enumerate() {
        write(f, &dir.join(format!("frame_{t:04}.{ext}")))?;
    }
    Ok(())
}

/// Turns every still in `src` (sorted by name) into a clip directory
/// `out/<stem>/frame_NNNN.*`. Radiance stills produce `.exr` frames, LDR stills `.png`.
pub fn synthesize_dir(src: &Path, out: &Path, opts: &SynthOptions) -> Result<Vec<PathBuf>> {
    if let Some(g) = opts.gamma {
        SyntheticClipSpec { gamma: g, frames: opts.frames, crop: opts.crop, seed: 0 }.validate()?;
    }
    let mut stills: Vec<PathBuf> = fs::read_dir(src)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && (is_radiance_file(p) || is_ldr_file(p)))
        .collect();
    stills.sort();
    if stills.is_empty() {
        return Err(Error::EmptyDataset(src.to_path_buf()));
    }
    let mut dirs = Vec::with_capacity(stills.len());
    for (i, path) in stills.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(i as u64);
        let (w, h) = image::image_dimensions(path)
            .map_err(|e| Error::CorruptFile { path: path.clone(), reason: e.to_string() })?;
        let fit = (w.min(h) as f64 / opts.crop as f64).min(MAX_GAMMA);
        if fit < 1.0 {
            return Err(Error::SourceTooSmall { width: w as usize, height: h as usize, crop: opts.crop });
        }
        let gamma = opts.gamma.unwrap_or_else(|| sample_gamma(&mut rng, fit));
        let spec = SyntheticClipSpec { gamma, frames: opts.frames, crop: opts.crop, seed: rng.random() };
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| format!("{i}"));
        let dir = out.join(stem);
        if is_radiance_file(path) {
            write_frames(&synth_clip_from_image(&load_radiance(path)?, &spec)?, &dir, "exr", write_radiance)?;
        } else {
            write_frames(&synth_clip_from_image(&load_ldr(path)?, &spec)?, &dir, "png", write_ldr)?;
        }
        log::info!("{}: gamma {gamma:.3}, {} frames -> {}", path.display(), opts.frames, dir.display());
        dirs.push(dir);
    }
    Ok(dirs)
}
