use std::collections::BTreeSet;

use autograd::Tensor;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::manifest::{DatasetManifest, Media};
use super::synth::{synth_clip_from_image, SyntheticClipSpec, MAX_GAMMA};
use super::{Mode, PoolKind};
use crate::error::{Error, Result};
use crate::imaging::{
    crop, extract_luminance, is_ldr_file, is_radiance_file, load_clip_dir, load_ldr, load_radiance,
    normalize_hdr_clip, resize_area, resize_bilinear, Clip, LuminanceMap, RadianceImage, Raster,
};

/// Draws a downsampling ratio uniformly from `[1, max]` (exactly 1 when `max <= 1`).
pub fn sample_gamma(rng: &mut impl Rng, max: f64) -> f64 {
    if max > 1.0 {
        rng.random_range(1.0..=max)
    } else {
        1.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    /// HDR clips and good-LDR clips per batch.
    pub batch_size: usize,
    /// Poor-LDR clips per batch, shared by every anchor.
    pub negatives: usize,
    /// Clip length in video mode; image mode always uses 1.
    pub frames: usize,
    pub mode: Mode,
    pub crop: usize,
    pub max_gamma: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { batch_size: 8, negatives: 16, frames: 3, mode: Mode::Video, crop: 256, max_gamma: MAX_GAMMA }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.negatives == 0 || self.frames == 0 || self.crop == 0 {
            return Err(Error::Config("batch_size, negatives, frames and crop must be positive".into()));
        }
        if !(1.0..=MAX_GAMMA).contains(&self.max_gamma) {
            return Err(Error::Config(format!("max_gamma must lie in [1, {MAX_GAMMA}], got {}", self.max_gamma)));
        }
        Ok(())
    }

    pub fn clip_len(&self) -> usize {
        match self.mode {
            Mode::Image => 1,
            Mode::Video => self.frames,
        }
    }
}

#[derive(Clone, Debug)]
enum Source<R> {
    Still(R),
    Video(Vec<R>),
}

/// Pool entries held in memory: manifest index plus content.
type Pool<R> = Vec<(usize, Source<R>)>;

/// HDR part of a batch; the three views describe the same crops.
#[derive(Clone, Debug, PartialEq)]
pub struct HdrBatch {
    pub raw: Vec<Clip<LuminanceMap>>,
    /// Network input, normalized with statistics shared across each clip.
    pub normalized: Vec<Clip<LuminanceMap>>,
    pub rgb: Vec<Clip<RadianceImage>>,
}

/// Manifest indices behind each field of a batch.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchSources {
    pub hdr: Vec<usize>,
    pub ldr_good: Vec<usize>,
    pub ldr_poor: Vec<usize>,
}

impl BatchSources {
    /// True when no source entry feeds two different fields.
    pub fn disjoint(&self) -> bool {
        let sets: Vec<BTreeSet<usize>> =
            [&self.hdr, &self.ldr_good, &self.ldr_poor].iter().map(|v| v.iter().copied().collect()).collect();
        sets[0].is_disjoint(&sets[1]) && sets[0].is_disjoint(&sets[2]) && sets[1].is_disjoint(&sets[2])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingBatch {
    pub hdr: HdrBatch,
    pub ldr_good: Vec<Clip<LuminanceMap>>,
    pub ldr_poor: Vec<Clip<LuminanceMap>>,
    pub sources: BatchSources,
}

/// Stacks equally shaped clips into `[B, T, H, W]`.
pub(crate) fn stack(clips: &[Clip<LuminanceMap>]) -> Result<Tensor> {
    let first = clips.first().ok_or(Error::EmptyBatch("clips"))?;
    let (w, h) = first.dims();
    let t = first.len();
    let mut data = Vec::with_capacity(clips.len() * t * w * h);
    for c in clips {
        if c.len() != t || c.dims() != (w, h) {
            return Err(Error::ShapeMismatch("clips in a batch differ in shape".into()));
        }
        for f in c.frames() {
            data.extend_from_slice(f.values());
        }
    }
    Ok(Tensor::from_vec(&[clips.len(), t, h, w], data)?)
}

impl TrainingBatch {
    pub fn frames(&self) -> usize {
        self.hdr.raw.first().map_or(0, |c| c.len())
    }

    pub fn hdr_input(&self) -> Result<Tensor> {
        stack(&self.hdr.normalized)
    }

    pub fn hdr_raw(&self) -> Result<Tensor> {
        stack(&self.hdr.raw)
    }

    pub fn good(&self) -> Result<Tensor> {
        stack(&self.ldr_good)
    }

    pub fn poor(&self) -> Result<Tensor> {
        stack(&self.ldr_poor)
    }
}

/// Seeded batch assembly over in-memory pools. Batch `step` depends only on
/// the manifest, the configuration, the seed and `step`.
pub struct Sampler {
    cfg: SamplerConfig,
    seed: u64,
    hdr: Pool<RadianceImage>,
    good: Pool<LuminanceMap>,
    poor: Pool<LuminanceMap>,
}

fn fit_height<R: Raster>(f: &R, crop: usize) -> Result<R> {
    let (w, h) = f.dims();
    if h == crop {
        return Ok(f.rebuild(w, h, f.samples().to_vec()));
    }
    let nw = ((w as f64 * crop as f64 / h as f64).round() as usize).max(1);
    if nw < crop {
        return Err(Error::SourceTooSmall { width: w, height: h, crop });
    }
    if h > crop {
        resize_area(f, nw, crop)
    } else {
        resize_bilinear(f, nw, crop)
    }
}

fn load_pool<R: Raster>(
    manifest: &DatasetManifest,
    kind: PoolKind,
    cfg: &SamplerConfig,
    still: impl Fn(&std::path::Path) -> Result<R>,
    accept: fn(&std::path::Path) -> bool,
) -> Result<Pool<R>> {
    let mut pool = Vec::new();
    for (i, e) in manifest.pool(kind) {
        let src = match e.media {
            Media::Image => {
                let img = still(&e.path)?;
                let (w, h) = img.dims();
                if w.min(h) < cfg.crop {
                    return Err(Error::SourceTooSmall { width: w, height: h, crop: cfg.crop });
                }
                Source::Still(img)
            }
            Media::Video => {
                let clip = load_clip_dir(&e.path, accept, &still, None)?;
                if clip.len() < cfg.clip_len() {
                    return Err(Error::InsufficientFrames { available: clip.len(), needed: cfg.clip_len() });
                }
                Source::Video(clip.frames().iter().map(|f| fit_height(f, cfg.crop)).collect::<Result<_>>()?)
            }
        };
        pool.push((i, src));
    }
    if pool.is_empty() {
        return Err(Error::EmptyPool(kind));
    }
    Ok(pool)
}

fn choose(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    if n >= k {
        index::sample(rng, n, k).into_vec()
    } else {
        (0..k).map(|_| rng.random_range(0..n)).collect()
    }
}

impl Sampler {
    pub fn new(manifest: &DatasetManifest, cfg: SamplerConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let ldr = |p: &std::path::Path| Ok(load_ldr(p)?.luminance());
        Ok(Self {
            hdr: load_pool(manifest, PoolKind::Hdr, &cfg, load_radiance, is_radiance_file)?,
            good: load_pool(manifest, PoolKind::LdrGood, &cfg, ldr, is_ldr_file)?,
            poor: load_pool(manifest, PoolKind::LdrPoor, &cfg, ldr, is_ldr_file)?,
            cfg,
            seed,
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.cfg
    }

    /// Number of entries in the HDR pool.
    pub fn hdr_len(&self) -> usize {
        self.hdr.len()
    }

    /// First frame of each of the first `n` HDR entries, at full resolution
    /// (videos after height fitting).
    pub fn validation_scenes(&self, n: usize) -> Vec<RadianceImage> {
        self.hdr
            .iter()
            .take(n)
            .map(|(_, s)| match s {
                Source::Still(img) => img.clone(),
                Source::Video(frames) => frames[0].clone(),
            })
            .collect()
    }

    fn clip<R: Raster + Clone>(&self, src: &Source<R>, rng: &mut ChaCha8Rng) -> Result<Clip<R>> {
        let (t, c) = (self.cfg.clip_len(), self.cfg.crop);
        match src {
            Source::Still(img) => {
                let (w, h) = img.dims();
                // Image mode alternates between a random crop and the whole image rescaled.
                if self.cfg.mode == Mode::Image && rng.random_bool(0.5) {
                    return Clip::new(vec![resize_area(img, c, c)?]);
                }
                let fit = (w.min(h) as f64 / c as f64).min(self.cfg.max_gamma);
                let gamma = sample_gamma(rng, fit);
                synth_clip_from_image(img, &SyntheticClipSpec { gamma, frames: t, crop: c, seed: rng.random() })
            }
            Source::Video(frames) => {
                let start = rng.random_range(0..=frames.len() - t);
                let (w, h) = frames[0].dims();
                let (x, y) = (rng.random_range(0..=w - c), rng.random_range(0..=h - c));
                Clip::new(frames[start..start + t].iter().map(|f| crop(f, x, y, c, c)).collect::<Result<_>>()?)
            }
        }
    }

    fn draw<R: Raster + Clone>(&self, pool: &Pool<R>, k: usize, rng: &mut ChaCha8Rng) -> Result<(Vec<Clip<R>>, Vec<usize>)> {
        let picks = choose(rng, pool.len(), k);
        let mut clips = Vec::with_capacity(k);
        for &p in &picks {
            clips.push(self.clip(&pool[p].1, rng)?);
        }
        Ok((clips, picks.iter().map(|&p| pool[p].0).collect()))
    }

    /// The batch of training step `step`.
    pub fn batch(&self, step: u64) -> Result<TrainingBatch> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(step);
        let (b, n) = (self.cfg.batch_size, self.cfg.negatives);
        let (rgb, hdr_ids) = self.draw(&self.hdr, b, &mut rng)?;
        let (ldr_good, good_ids) = self.draw(&self.good, b, &mut rng)?;
        let (ldr_poor, poor_ids) = self.draw(&self.poor, n, &mut rng)?;
        let raw: Vec<Clip<LuminanceMap>> = rgb
            .iter()
            .map(|c| Clip::new(c.frames().iter().map(extract_luminance).collect()))
            .collect::<Result<_>>()?;
        let normalized = raw.iter().map(normalize_hdr_clip).collect::<Result<_>>()?;
        Ok(TrainingBatch {
            hdr: HdrBatch { raw, normalized, rgb },
            ldr_good,
            ldr_poor,
            sources: BatchSources { hdr: hdr_ids, ldr_good: good_ids, ldr_poor: poor_ids },
        })
    }
}
