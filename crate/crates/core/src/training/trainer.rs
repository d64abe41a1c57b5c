use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::TrainConfig;
use super::optim::Adam;
use super::step::{train_step, Models, Optimizers, StepSettings};
use crate::data::{build_manifest, standard_roots, DatasetManifest, Sampler, MANIFEST_FILE};
use crate::error::{Error, Result};
use crate::imaging::{extract_luminance, normalize_hdr, reproduce_color, write_ldr, write_ldr_luminance, DEFAULT_SATURATION};
use crate::losses::LossReport;
use crate::metrics::{GeneratorMapper, ToneMapper};
use crate::model::{
    read_archive, strip_prefix, write_archive, Discriminator, Generator, ModelManifest, ParamStore, ARCHIVE_FILE,
    DISCRIMINATOR_PREFIX, FORMAT_VERSION, GENERATOR_PREFIX,
};

pub const LOG_FILE: &str = "train_log.jsonl";
pub const CONFIG_FILE: &str = "config.json";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const VALIDATION_DIR: &str = "validation";

const ADAM_PREFIX: &str = "adam.";

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub step: u64,
    pub epoch: u64,
    pub lrs: LearningRates,
    pub report: LossReport,
    /// Seconds since the trainer was created.
    pub wall_time: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningRates {
    pub g: f64,
    pub d: f64,
}

/// Resumable trainer state beyond the parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TrainerState {
    next_step: u64,
    adam_t_generator: u64,
    adam_t_discriminator: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainSummary {
    pub steps: u64,
    pub last_report: Option<LossReport>,
    pub checkpoints: Vec<PathBuf>,
}

/// Owns models, optimizers and the data sampler of one run.
pub struct Trainer {
    cfg: TrainConfig,
    sampler: Sampler,
    models: Models,
    opt: Optimizers,
    next_step: u64,
    started: Instant,
    log: Option<File>,
    checkpoints: Vec<PathBuf>,
}

fn adam_tensors<'a>(prefix: &'a str, a: &'a Adam) -> impl Iterator<Item = (String, &'a autograd::Tensor)> + 'a {
    a.m.iter()
        .map(move |(k, t)| (format!("{ADAM_PREFIX}{prefix}m.{k}"), t))
        .chain(a.v.iter().map(move |(k, t)| (format!("{ADAM_PREFIX}{prefix}v.{k}"), t)))
}

fn adam_from(all: &std::collections::BTreeMap<String, autograd::Tensor>, prefix: &str, t: u64) -> Adam {
    let moments = |which: &str| {
        strip_prefix(all, &format!("{ADAM_PREFIX}{prefix}{which}."))
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    };
    Adam { t, m: moments("m"), v: moments("v"), ..Adam::default() }
}

impl Trainer {
    /// Fresh models (seeded from `cfg.seed`) over an existing manifest.
    pub fn new(cfg: TrainConfig, manifest: &DatasetManifest) -> Result<Self> {
        cfg.validate()?;
        if let Some(mb) = cfg.memory_budget_mb {
            let (estimated, budget) = (cfg.estimated_step_memory(), mb * 1024 * 1024);
            if estimated > budget {
                return Err(Error::OomBudgetExceeded { estimated, budget });
            }
        }
        let sampler = Sampler::new(manifest, cfg.sampler.clone(), cfg.seed)?;
        let models = Models {
            generator: Generator::new(cfg.generator.clone(), cfg.seed)?,
            discriminator: Discriminator::new(cfg.discriminator.clone(), cfg.seed.wrapping_add(1))?,
        };
        Ok(Self {
            cfg,
            sampler,
            models,
            opt: Optimizers::default(),
            next_step: 0,
            started: Instant::now(),
            log: None,
            checkpoints: Vec::new(),
        })
    }

    /// Restores models, optimizer state and the step counter from a checkpoint.
    pub fn resume(cfg: TrainConfig, manifest: &DatasetManifest, dir: &Path) -> Result<Self> {
        let mut t = Self::new(cfg, manifest)?;
        let m = ModelManifest::read(dir)?;
        if m.generator != t.cfg.generator {
            return Err(Error::CheckpointMismatch(format!(
                "checkpoint generator {:?} differs from configured {:?}",
                m.generator, t.cfg.generator
            )));
        }
        if m.discriminator.as_ref() != Some(&t.cfg.discriminator) {
            return Err(Error::CheckpointMismatch("checkpoint has no matching discriminator".into()));
        }
        let state: TrainerState = serde_json::from_value(m.state.clone())
            .map_err(|e| Error::CheckpointMismatch(format!("trainer state: {e}")))?;
        let all = read_archive(&dir.join(ARCHIVE_FILE))?;
        t.models.generator.params_mut().load_from(&strip_prefix(&all, GENERATOR_PREFIX))?;
        t.models.discriminator.params_mut().load_from(&strip_prefix(&all, DISCRIMINATOR_PREFIX))?;
        t.opt.generator = adam_from(&all, "generator.", state.adam_t_generator);
        t.opt.discriminator = adam_from(&all, "discriminator.", state.adam_t_discriminator);
        t.next_step = state.next_step;
        Ok(t)
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn models(&self) -> &Models {
        &self.models
    }

    pub fn optimizers(&self) -> &Optimizers {
        &self.opt
    }

    pub fn generator(&self) -> &Generator {
        &self.models.generator
    }

    /// Index of the next step to run.
    pub fn next_step(&self) -> u64 {
        self.next_step
    }

    pub fn steps_per_epoch(&self) -> u64 {
        self.cfg
            .steps_per_epoch
            .unwrap_or_else(|| (self.sampler.hdr_len() as u64).div_ceil(self.cfg.sampler.batch_size as u64))
    }

    pub fn total_steps(&self) -> u64 {
        let all = self.cfg.epochs * self.steps_per_epoch();
        self.cfg.max_steps.map_or(all, |m| m.min(all))
    }

    pub fn epoch_of(&self, step: u64) -> u64 {
        step / self.steps_per_epoch()
    }

    pub fn settings(&self, step: u64) -> StepSettings {
        let epoch = self.epoch_of(step);
        let (lr_g, lr_d) = self.cfg.schedule.learning_rates(epoch);
        StepSettings {
            weights: self.cfg.schedule.weights(epoch),
            lr_g,
            lr_d,
            grad_clip: self.cfg.grad_clip,
            rank_downsample: self.cfg.rank_downsample,
            eta: self.cfg.eta,
            c: self.cfg.c,
            step,
        }
    }

    /// Sends log lines to `path` (appending).
    pub fn log_to(&mut self, path: &Path) -> Result<()> {
        self.log = Some(OpenOptions::new().create(true).append(true).open(path)?);
        Ok(())
    }

    /// Runs the next step; a step whose losses are not finite leaves the
    /// state untouched and returns the error.
    pub fn run_step(&mut self) -> Result<LossReport> {
        let step = self.next_step;
        let s = self.settings(step);
        let batch = self.sampler.batch(step)?;
        let report = train_step(&mut self.models, &mut self.opt, &batch, &s)?;
        self.next_step += 1;
        let epoch = self.epoch_of(step);
        if let Some(f) = &mut self.log {
            let rec = LogRecord {
                step,
                epoch,
                lrs: LearningRates { g: s.lr_g, d: s.lr_d },
                report,
                wall_time: self.started.elapsed().as_secs_f64(),
            };
            writeln!(f, "{}", serde_json::to_string(&rec)?)?;
        }
        Ok(report)
    }

    /// Skips the current step after a non-finite loss.
    fn skip_step(&mut self) {
        self.next_step += 1;
    }

    /// Writes parameters, optimizer moments and the step counter to `dir`.
    pub fn save_checkpoint(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let g = self.models.generator.params().iter().map(|(k, t)| (format!("{GENERATOR_PREFIX}{k}"), t));
        let d = self.models.discriminator.params().iter().map(|(k, t)| (format!("{DISCRIMINATOR_PREFIX}{k}"), t));
        let tensors = g
            .chain(d)
            .chain(adam_tensors("generator.", &self.opt.generator))
            .chain(adam_tensors("discriminator.", &self.opt.discriminator));
        write_archive(&dir.join(ARCHIVE_FILE), tensors)?;
        let state = TrainerState {
            next_step: self.next_step,
            adam_t_generator: self.opt.generator.t,
            adam_t_discriminator: self.opt.discriminator.t,
        };
        ModelManifest {
            format_version: FORMAT_VERSION,
            config: serde_json::to_value(&self.cfg)?,
            generator: self.cfg.generator.clone(),
            discriminator: Some(self.cfg.discriminator.clone()),
            epoch: self.epoch_of(self.next_step.saturating_sub(1)),
            step: self.next_step,
            parameter_count: self.models.generator.parameter_count(),
            state: serde_json::to_value(&state)?,
        }
        .write(dir)
    }

    /// Tone maps the first frames of the first HDR entries and writes
    /// normalized input, output luminance and color output as PNGs.
    pub fn render_validation(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mapper = GeneratorMapper { generator: self.models.generator.clone(), label: "validation".into() };
        for (i, img) in self.sampler.validation_scenes(self.cfg.validation_scenes).iter().enumerate() {
            let raw = extract_luminance(img);
            let input = normalize_hdr(&raw)?;
            let out = mapper.map_clip(std::slice::from_ref(&raw))?.remove(0);
            write_ldr_luminance(&input, &dir.join(format!("scene_{i}_input.png")))?;
            write_ldr_luminance(&out, &dir.join(format!("scene_{i}_output.png")))?;
            write_ldr(&reproduce_color(img, &raw, &out, DEFAULT_SATURATION)?, &dir.join(format!("scene_{i}_color.png")))?;
        }
        Ok(())
    }

    /// Runs until the configured number of steps, checkpointing at the end of
    /// every epoch into `<out>/checkpoints/epoch_NNNN`.
    pub fn run(&mut self) -> Result<TrainSummary> {
        let total = self.total_steps();
        let spe = self.steps_per_epoch();
        let out = self.cfg.out.clone();
        let mut last = None;
        let mut failures = 0;
        while self.next_step < total {
            let step = self.next_step;
            match self.run_step() {
                Ok(r) => {
                    failures = 0;
                    last = Some(r);
                }
                Err(e @ Error::NonFiniteLoss { .. }) => {
                    failures += 1;
                    if failures > self.cfg.max_retries {
                        return Err(e);
                    }
                    log::warn!("{e}; skipping step {step} (attempt {failures} of {})", self.cfg.max_retries);
                    self.skip_step();
                }
                Err(e) => return Err(e),
            }
            if self.cfg.validation_every > 0 && (step + 1) % self.cfg.validation_every == 0 {
                self.render_validation(&out.join(VALIDATION_DIR).join(format!("step_{:06}", step + 1)))?;
            }
            if (step + 1) % spe == 0 || step + 1 == total {
                let dir = out.join(CHECKPOINT_DIR).join(format!("epoch_{:04}", self.epoch_of(step)));
                self.save_checkpoint(&dir)?;
                log::info!("step {}: checkpoint {}", step + 1, dir.display());
                self.checkpoints.push(dir);
            }
        }
        Ok(TrainSummary { steps: self.next_step, last_report: last, checkpoints: self.checkpoints.clone() })
    }
}

/// Most recent checkpoint under `<out>/checkpoints`, if any.
pub fn latest_checkpoint(out: &Path) -> Option<PathBuf> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(out.join(CHECKPOINT_DIR))
        .ok()?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(ARCHIVE_FILE).is_file())
        .collect();
    dirs.sort();
    dirs.pop()
}

/// Full run: manifest over `cfg.data`, effective config and manifest echoed
/// into `cfg.out`, then training (optionally resumed from `resume`).
pub fn train(cfg: TrainConfig, resume: Option<&Path>) -> Result<TrainSummary> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out)?;
    fs::write(cfg.out.join(CONFIG_FILE), serde_json::to_string_pretty(&cfg)?)?;
    let manifest = build_manifest(&standard_roots(&cfg.data), cfg.seed)?;
    manifest.write(&cfg.out.join(MANIFEST_FILE))?;
    let out = cfg.out.clone();
    let mut trainer = match resume {
        Some(dir) => Trainer::resume(cfg, &manifest, dir)?,
        None => Trainer::new(cfg, &manifest)?,
    };
    trainer.log_to(&out.join(LOG_FILE))?;
    let summary = trainer.run()?;
    fs::write(
        out.join("summary.json"),
        serde_json::to_string_pretty(&json!({
            "steps": summary.steps,
            "last_report": summary.last_report,
            "checkpoints": summary.checkpoints,
        }))?,
    )?;
    Ok(summary)
}

/// Parameters of a checkpoint's generator, for inspection.
pub fn checkpoint_generator_params(dir: &Path) -> Result<ParamStore> {
    Ok(strip_prefix(&read_archive(&dir.join(ARCHIVE_FILE))?, GENERATOR_PREFIX))
}

