//! Procedural scenes for smoke tests and demos.
//!
//! HDR scenes span roughly five decades of luminance (shaded textured
//! surfaces plus small bright lights). Good LDR images sit in the mid-tones
//! with visible texture; poor ones are crushed towards black or white.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::imaging::{crop, write_ldr, write_radiance, LdrImage, RadianceImage};

/// Smooth random field in roughly `[-1, 1]`: a sum of a few oriented waves.
struct Field {
    waves: Vec<(f64, f64, f64, f64)>,
}

impl Field {
    fn new(rng: &mut impl Rng, n: usize, max_freq: f64) -> Self {
        let waves = (0..n)
            .map(|_| {
                let angle = rng.random_range(0.0..TAU);
                let f = rng.random_range(0.2 * max_freq..max_freq);
                (f * angle.cos(), f * angle.sin(), rng.random_range(0.0..TAU), rng.random_range(0.5..1.0))
            })
            .collect();
        Self { waves }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        let total: f64 = self.waves.iter().map(|(_, _, _, a)| a).sum();
        self.waves.iter().map(|(fx, fy, p, a)| a * (fx * x + fy * y + p).sin()).sum::<f64>() / total
    }
}

fn tint(rng: &mut impl Rng) -> [f64; 3] {
    let c = [rng.random_range(0.6..1.4), rng.random_range(0.6..1.4), rng.random_range(0.6..1.4)];
    let y = 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2];
    c.map(|v| v / y)
}

fn colorize(w: usize, h: usize, lum: impl Fn(f64, f64) -> f64, rng: &mut impl Rng) -> Vec<f64> {
    let (a, b) = (tint(rng), tint(rng));
    let blend = Field::new(rng, 2, 0.05);
    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let (xf, yf) = (x as f64, y as f64);
            let t = 0.5 + 0.5 * blend.at(xf, yf);
            let l = lum(xf, yf);
            for c in 0..3 {
                data.push(l * (a[c] * (1.0 - t) + b[c] * t));
            }
        }
    }
    data
}

/// A `w × h` radiance scene.
pub fn toy_hdr(rng: &mut impl Rng, w: usize, h: usize) -> RadianceImage {
    let shade = Field::new(rng, 3, 0.08);
    let texture = Field::new(rng, 4, 0.9);
    let (log_lo, log_hi) = (rng.random_range(-2.5..-1.5), rng.random_range(0.0..1.0));
    let lights: Vec<(f64, f64, f64, f64)> = (0..rng.random_range(1..=3))
        .map(|_| {
            (
                rng.random_range(0.0..w as f64),
                rng.random_range(0.0..h as f64),
                rng.random_range(1.5..(w.min(h) as f64 / 10.0).max(2.0)),
                10f64.powf(rng.random_range(2.0..3.5)),
            )
        })
        .collect();
    let lum = |x: f64, y: f64| {
        let s = 0.5 + 0.5 * shade.at(x, y);
        let base = 10f64.powf(log_lo + (log_hi - log_lo) * s);
        let tex = 1.0 + 0.35 * texture.at(x, y);
        let glow: f64 = lights
            .iter()
            .map(|(cx, cy, r, amp)| amp * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * r * r)).exp())
            .sum();
        base * tex + glow
    };
    let data = colorize(w, h, lum, rng);
    RadianceImage::new(w, h, data).expect("toy radiance is positive and finite")
}

fn ldr(rng: &mut impl Rng, w: usize, h: usize, mean: f64, shade_amp: f64, tex_amp: f64) -> LdrImage {
    let shade = Field::new(rng, 3, 0.08);
    let texture = Field::new(rng, 4, 0.9);
    let lum = |x: f64, y: f64| mean + shade_amp * shade.at(x, y) + tex_amp * texture.at(x, y);
    let data = colorize(w, h, lum, rng).into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
    LdrImage::new(w, h, data).expect("clamped samples")
}

/// A well-exposed image: mid-tone mean with clear contrast.
pub fn toy_ldr_good(rng: &mut impl Rng, w: usize, h: usize) -> LdrImage {
    let mean = rng.random_range(0.4..0.55);
    ldr(rng, w, h, mean, 0.2, 0.12)
}

/// An under- or over-exposed image with little usable contrast.
pub fn toy_ldr_poor(rng: &mut impl Rng, w: usize, h: usize) -> LdrImage {
    if rng.random_bool(0.5) {
        let mean = rng.random_range(0.03..0.08);
        ldr(rng, w, h, mean, 0.03, 0.02)
    } else {
        let mean = rng.random_range(0.92..0.97);
        ldr(rng, w, h, mean, 0.03, 0.02)
    }
}

/// A camera pan over one scene: frame `t` is the window shifted by `t·(dx, dy)`.
pub fn toy_hdr_video(rng: &mut impl Rng, w: usize, h: usize, frames: usize, dx: usize, dy: usize) -> Vec<RadianceImage> {
    let span = frames.saturating_sub(1);
    let scene = toy_hdr(rng, w + dx * span, h + dy * span);
    (0..frames).map(|t| crop(&scene, t * dx, t * dy, w, h).expect("window inside scene")).collect()
}

/// Sizes of a generated dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyDatasetSpec {
    pub hdr_images: usize,
    pub hdr_videos: usize,
    pub ldr_good: usize,
    pub ldr_poor: usize,
    pub size: usize,
    pub video_frames: usize,
    pub seed: u64,
}

impl Default for ToyDatasetSpec {
    fn default() -> Self {
        Self { hdr_images: 20, hdr_videos: 0, ldr_good: 20, ldr_poor: 20, size: 64, video_frames: 6, seed: 0 }
    }
}

/// Writes a dataset in the standard layout under `root`.
pub fn write_toy_dataset(root: &Path, spec: &ToyDatasetSpec) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let s = spec.size;
    let dir = |name: &str| -> Result<std::path::PathBuf> {
        let d = root.join(name);
        fs::create_dir_all(&d)?;
        Ok(d)
    };
    let d = dir("hdr_images")?;
    for i in 0..spec.hdr_images {
        write_radiance(&toy_hdr(&mut rng, s, s), &d.join(format!("scene_{i:03}.exr")))?;
    }
    if spec.hdr_videos > 0 {
        let d = dir("hdr_videos")?;
        for i in 0..spec.hdr_videos {
            let v = d.join(format!("video_{i:03}"));
            fs::create_dir_all(&v)?;
            for (t, f) in toy_hdr_video(&mut rng, s, s, spec.video_frames, 1, 0).iter().enumerate() {
                write_radiance(f, &v.join(format!("frame_{t:04}.exr")))?;
            }
        }
    }
    let d = dir("ldr_good")?;
    for i in 0..spec.ldr_good {
        write_ldr(&toy_ldr_good(&mut rng, s, s), &d.join(format!("good_{i:03}.png")))?;
    }
    let d = dir("ldr_poor")?;
    for i in 0..spec.ldr_poor {
        write_ldr(&toy_ldr_poor(&mut rng, s, s), &d.join(format!("poor_{i:03}.png")))?;
    }
    Ok(())
}
