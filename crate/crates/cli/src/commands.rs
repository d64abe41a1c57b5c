use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use ivtm::data::{synthesize_dir, Mode, SynthOptions};
use ivtm::imaging::{
    extract_luminance, is_radiance_file, list_frame_files, load_radiance, reproduce_color, write_ldr,
    DEFAULT_SATURATION,
};
use ivtm::metrics::{
    evaluate_testset, flow_registry, mapper_registry, GeneratorMapper, ToneMapper, DEFAULT_FRAMES_PER_VIDEO,
};
use ivtm::model::Generator;
use ivtm::training::{latest_checkpoint, schedule_registry, train as run_training, TrainConfig};
use serde::Serialize;
use serde_json::json;

use crate::config::{default_out, echo, train_config};
use crate::{CliError, Global};

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Directory of stills.
    pub source: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub frames: usize,
    #[arg(long, default_value_t = 256)]
    pub crop: usize,
    /// Fixed downsampling ratio in [1, 2.8]; drawn per still when absent.
    #[arg(long)]
    pub gamma: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Default,
    /// Small networks on 64×64 crops.
    Toy,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset root with hdr_images/, hdr_videos/, ldr_good/ and ldr_poor/.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Preset::Default)]
    pub preset: Preset,
    #[arg(long)]
    pub epochs: Option<u64>,
    #[arg(long)]
    pub steps_per_epoch: Option<u64>,
    #[arg(long)]
    pub max_steps: Option<u64>,
    /// Loss-weight schedule: `staged` or `fixed`.
    #[arg(long)]
    pub schedule: Option<String>,
    /// Checkpoint directory to continue from, or `latest` for the newest one under the output directory.
    #[arg(long)]
    pub resume: Option<String>,
}

#[derive(Debug, Args)]
pub struct TonemapArgs {
    /// An HDR image (.hdr, .exr) or a directory of HDR frames.
    pub input: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Color saturation exponent in (0, 1].
    #[arg(long, default_value_t = DEFAULT_SATURATION)]
    pub saturation: f64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory with one subdirectory of HDR frames per video.
    pub testset: PathBuf,
    /// `identity`, `linear` or `checkpoint:<dir>`.
    #[arg(long, conflicts_with = "checkpoint")]
    pub mapper: Option<String>,
    /// Shorthand for `--mapper checkpoint:<dir>`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// `builtin`, `zero` or `external:<program>`.
    #[arg(long, default_value = "builtin")]
    pub flow: String,
    #[arg(long, default_value_t = DEFAULT_FRAMES_PER_VIDEO)]
    pub frames_per_video: usize,
}

#[derive(Serialize)]
struct SynthEffective<'a> {
    source: &'a Path,
    out: &'a Path,
    frames: usize,
    crop: usize,
    gamma: Option<f64>,
    seed: u64,
}

pub fn synth(g: &Global, a: SynthArgs) -> Result<(), CliError> {
    let out = g.out.clone().unwrap_or_else(|| default_out("synth"));
    let seed = g.seed.unwrap_or(0);
    let eff = SynthEffective { source: &a.source, out: &out, frames: a.frames, crop: a.crop, gamma: a.gamma, seed };
    echo("synth", &eff, Some(&out))?;
    if !a.source.is_dir() {
        return Err(CliError::Config(format!("source {} is not a directory", a.source.display())));
    }
    let opts = SynthOptions { frames: a.frames, crop: a.crop, gamma: a.gamma, seed };
    let dirs = synthesize_dir(&a.source, &out, &opts)?;
    let clips: Vec<String> =
        dirs.iter().map(|d| d.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()).collect();
    let manifest = json!({ "options": eff, "clips": clips });
    let path = out.join("synth_manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest).expect("manifest serializes"))
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    println!("synthesized {} clips of {} frames into {}", dirs.len(), a.frames, out.display());
    Ok(())
}

fn apply_mode(cfg: &mut TrainConfig, mode: Mode) {
    cfg.sampler.mode = mode;
    cfg.generator.tfr_enabled = mode == Mode::Video;
}

pub fn train(g: &Global, a: TrainArgs) -> Result<(), CliError> {
    let mut base = match a.preset {
        Preset::Default => TrainConfig::default(),
        Preset::Toy => TrainConfig::toy(g.mode.map_or(Mode::Video, Mode::from)),
    };
    base.out = default_out("train");
    let mut cfg = train_config(base, g.config.as_deref())?;
    if let Some(m) = g.mode {
        apply_mode(&mut cfg, m.into());
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(o) = &g.out {
        cfg.out = o.clone();
    }
    if let Some(d) = &a.data {
        cfg.data = d.clone();
    }
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if a.steps_per_epoch.is_some() {
        cfg.steps_per_epoch = a.steps_per_epoch;
    }
    if a.max_steps.is_some() {
        cfg.max_steps = a.max_steps;
    }
    if let Some(name) = &a.schedule {
        cfg.schedule.stages = schedule_registry().create(name)?.stages.clone();
    }
    echo("train", &cfg, None)?;
    cfg.validate()?;
    let resume = match a.resume.as_deref() {
        None => None,
        Some("latest") => Some(latest_checkpoint(&cfg.out).ok_or_else(|| {
            CliError::Config(format!("no checkpoint to resume from under {}", cfg.out.display()))
        })?),
        Some(dir) => Some(PathBuf::from(dir)),
    };
    let summary = run_training(cfg, resume.as_deref())?;
    println!("trained {} steps, {} checkpoints", summary.steps, summary.checkpoints.len());
    if let Some(last) = summary.checkpoints.last() {
        println!("latest checkpoint: {}", last.display());
    }
    Ok(())
}

/// Generator of a checkpoint, checked against the config file when one is
/// given, with the temporal module switched by `--mode`.
fn load_generator(g: &Global, checkpoint: &Path) -> Result<Generator, CliError> {
    let expect = match &g.config {
        Some(path) => Some(train_config(TrainConfig::default(), Some(path))?.generator),
        None => None,
    };
    let gen = Generator::load(checkpoint, expect.as_ref())?;
    Ok(match g.mode {
        Some(m) => gen.with_tfr(Mode::from(m) == Mode::Video)?,
        None => gen,
    })
}

pub fn tonemap(g: &Global, a: TonemapArgs) -> Result<(), CliError> {
    let is_dir = a.input.is_dir();
    let out = g.out.clone().unwrap_or_else(|| default_out("tonemap"));
    let generator = load_generator(g, &a.checkpoint)?;
    echo(
        "tonemap",
        &json!({
            "input": a.input,
            "checkpoint": a.checkpoint,
            "out": out,
            "saturation": a.saturation,
            "temporal": generator.config().tfr_enabled,
            "generator": generator.config(),
        }),
        (is_dir || out.extension().is_none()).then_some(out.as_path()),
    )?;
    let files = if is_dir {
        list_frame_files(&a.input, is_radiance_file)?.0
    } else if a.input.is_file() {
        vec![a.input.clone()]
    } else {
        return Err(CliError::Io(format!("{} does not exist", a.input.display())));
    };
    if files.is_empty() {
        return Err(ivtm::Error::EmptyDataset(a.input.clone()).into());
    }
    let images = files.iter().map(|p| load_radiance(p)).collect::<ivtm::Result<Vec<_>>>()?;
    let raw: Vec<_> = images.iter().map(extract_luminance).collect();
    let mapper = GeneratorMapper { generator, label: a.checkpoint.display().to_string() };
    let mapped = mapper.map_clip(&raw)?;

    let single_file = !is_dir && out.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"));
    let target_dir = if single_file { out.parent().map(Path::to_path_buf).unwrap_or_default() } else { out.clone() };
    if !target_dir.as_os_str().is_empty() {
        fs::create_dir_all(&target_dir).map_err(|e| CliError::Io(format!("{}: {e}", target_dir.display())))?;
    }
    for (((path, img), y), o) in files.iter().zip(&images).zip(&raw).zip(&mapped) {
        let color = reproduce_color(img, y, o, a.saturation)?;
        let dest = if single_file {
            out.clone()
        } else {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            out.join(format!("{stem}.png"))
        };
        write_ldr(&color, &dest)?;
    }
    println!("wrote {} frames to {}", files.len(), out.display());
    Ok(())
}

pub fn eval(g: &Global, a: EvalArgs) -> Result<(), CliError> {
    let out = g.out.clone().unwrap_or_else(|| default_out("eval"));
    let mapper: Box<dyn ToneMapper> = match (&a.checkpoint, &a.mapper) {
        (Some(dir), _) => Box::new(GeneratorMapper { generator: load_generator(g, dir)?, label: format!("checkpoint:{}", dir.display()) }),
        (None, Some(spec)) => match spec.strip_prefix("checkpoint:") {
            Some(dir) => {
                let dir = Path::new(dir);
                Box::new(GeneratorMapper { generator: load_generator(g, dir)?, label: spec.clone() })
            }
            None => mapper_registry().create(spec)?,
        },
        (None, None) => mapper_registry().create("linear")?,
    };
    let flow = flow_registry().create(&a.flow)?;
    echo(
        "eval",
        &json!({
            "testset": a.testset,
            "out": out,
            "mapper": mapper.name(),
            "flow": flow.name(),
            "frames_per_video": a.frames_per_video,
        }),
        Some(&out),
    )?;
    if !a.testset.is_dir() {
        return Err(ivtm::Error::EmptyDataset(a.testset.clone()).into());
    }
    let report = evaluate_testset(&a.testset, mapper.as_ref(), flow.as_ref(), a.frames_per_video)?;
    let (j, c) = report.write(&out)?;
    println!(
        "{} videos: mean TMQI {:.4}, mean RWE {:.4e} ({}, {})",
        report.videos.len(),
        report.mean.tmqi,
        report.mean.rwe,
        j.display(),
        c.display()
    );
    Ok(())
}
