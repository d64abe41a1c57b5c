use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::schedule::StageSchedule;
use crate::data::{Mode, SamplerConfig};
use crate::error::{Error, Result};
use crate::losses::{SIMILARITY_C, SIMILARITY_ETA};
use crate::model::{DiscriminatorConfig, GeneratorConfig};

/// Complete description of a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Dataset root with `hdr_videos/`, `hdr_images/`, `ldr_good/`, `ldr_poor/`.
    pub data: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub epochs: u64,
    /// Defaults to one pass over the HDR pool: `ceil(entries / batch_size)`.
    pub steps_per_epoch: Option<u64>,
    /// Stops early after this many steps in total.
    pub max_steps: Option<u64>,
    pub sampler: SamplerConfig,
    pub generator: GeneratorConfig,
    pub discriminator: DiscriminatorConfig,
    pub schedule: StageSchedule,
    pub grad_clip: f64,
    pub rank_downsample: u32,
    pub eta: f64,
    pub c: f64,
    /// Render the validation panel every this many steps (0 disables it).
    pub validation_every: u64,
    pub validation_scenes: usize,
    /// Consecutive non-finite steps tolerated before giving up.
    pub max_retries: u32,
    /// Refuse to start when the estimated activation memory exceeds this.
    pub memory_budget_mb: Option<u64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            data: PathBuf::from("data"),
            out: PathBuf::from("runs/default"),
            seed: 0,
            epochs: 20,
            steps_per_epoch: None,
            max_steps: None,
            sampler: SamplerConfig::default(),
            // Video sampling is the default, so the temporal module is on.
            generator: GeneratorConfig { tfr_enabled: true, ..GeneratorConfig::default() },
            discriminator: DiscriminatorConfig::default(),
            schedule: StageSchedule::staged(),
            grad_clip: 5.0,
            rank_downsample: 2,
            eta: SIMILARITY_ETA,
            c: SIMILARITY_C,
            validation_every: 200,
            validation_scenes: 4,
            max_retries: 3,
            memory_budget_mb: None,
        }
    }
}

impl TrainConfig {
    /// Small networks and 64×64 crops that train on a CPU in minutes.
    pub fn toy(mode: Mode) -> Self {
        let video = mode == Mode::Video;
        Self {
            epochs: 10,
            // 300 steps in total, whatever the dataset size.
            steps_per_epoch: Some(30),
            sampler: SamplerConfig { batch_size: 4, negatives: 4, frames: 3, mode, crop: 64, ..SamplerConfig::default() },
            generator: GeneratorConfig {
                base_channels: 8,
                num_scales: 3,
                tfr_enabled: video,
                tfr_beta: 1.0 / 8.0,
                sfe_knn: 4,
                ..GeneratorConfig::default()
            },
            discriminator: DiscriminatorConfig { widths: vec![8, 16, 32, 32] },
            schedule: StageSchedule { lr_g: 1e-3, lr_d: 1.5e-3, ..StageSchedule::staged() },
            rank_downsample: 1,
            validation_every: 0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        self.generator.validate()?;
        self.discriminator.validate()?;
        self.schedule.validate()?;
        let crop = self.sampler.crop;
        let d = self.generator.size_divisor();
        if crop % d != 0 {
            return Err(Error::Config(format!("crop {crop} is not a multiple of the generator divisor {d}")));
        }
        if crop % 2 != 0 {
            return Err(Error::Config(format!("crop {crop} must be even")));
        }
        if crop < self.discriminator.min_input() {
            return Err(Error::Config(format!(
                "crop {crop} is below the discriminator minimum {}",
                self.discriminator.min_input()
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if self.steps_per_epoch == Some(0) {
            return Err(Error::Config("steps_per_epoch must be positive".into()));
        }
        if !(self.grad_clip > 0.0) || !(self.eta > 0.0) || !(self.c >= 0.0) {
            return Err(Error::Config("grad_clip and eta must be positive, c non-negative".into()));
        }
        Ok(())
    }

    /// Rough upper bound on activation memory of one step, in bytes: every
    /// generator and discriminator activation of the batch kept for the
    /// backward pass, counted a few times over for intermediate results.
    pub fn estimated_step_memory(&self) -> u64 {
        let s = &self.sampler;
        let frames = (s.batch_size * s.clip_len()) as u64;
        let (h, w) = (s.crop as u64, s.crop as u64);
        let g = &self.generator;
        let mut per_frame = 0u64;
        for level in 0..g.num_scales {
            let px = (h >> level) * (w >> level);
            // Encoder and decoder blocks, concatenations and activations.
            per_frame += 8 * g.channels(level) as u64 * px;
        }
        let mut dpx = h * w;
        for &c in &self.discriminator.widths {
            dpx /= 4;
            per_frame += 4 * c as u64 * dpx;
        }
        let d_frames = frames * 2 + (s.negatives * s.clip_len()) as u64;
        8 * (per_frame * frames + per_frame / 2 * d_frames)
    }
}
