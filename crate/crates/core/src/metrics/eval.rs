//! Test-set evaluation: per-video TMQI and relative warping error.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::flow::FlowEstimator;
use super::rwe::rwe;
use super::tmqi::tmqi;
use crate::error::{Error, Result};
use crate::imaging::{
    crop, extract_luminance, is_radiance_file, load_clip_dir, load_radiance, normalize_hdr_clip, Clip, LuminanceMap,
};
use crate::model::Generator;
use crate::registry::{no_argument, required_argument, Registry};

/// Frames evaluated from the start of each video unless overridden.
pub const DEFAULT_FRAMES_PER_VIDEO: usize = 6;

/// Turns the raw luminance frames of one video into tone-mapped frames in `[0, 1]`.
pub trait ToneMapper {
    fn name(&self) -> String;

    fn map_clip(&self, frames: &[LuminanceMap]) -> Result<Vec<LuminanceMap>>;
}

/// Output is the normalized network input.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityMapper;

impl ToneMapper for IdentityMapper {
    fn name(&self) -> String {
        "identity".into()
    }

    fn map_clip(&self, frames: &[LuminanceMap]) -> Result<Vec<LuminanceMap>> {
        Ok(normalize_hdr_clip(&Clip::new(frames.to_vec())?)?.into_frames())
    }
}

/// Min–max scaling of raw luminance with one range per video.
#[derive(Clone, Copy, Debug, Default)]
pub struct LinearMapper;

impl LinearMapper {
    pub fn map_one(y: &LuminanceMap) -> Result<LuminanceMap> {
        Ok(Self.map_clip(std::slice::from_ref(y))?.remove(0))
    }
}

impl ToneMapper for LinearMapper {
    fn name(&self) -> String {
        "linear".into()
    }

    fn map_clip(&self, frames: &[LuminanceMap]) -> Result<Vec<LuminanceMap>> {
        let lo = frames.iter().map(|f| f.min()).fold(f64::INFINITY, f64::min);
        let hi = frames.iter().map(|f| f.max()).fold(f64::NEG_INFINITY, f64::max);
        frames
            .iter()
            .map(|f| {
                let v = if hi > lo {
                    f.values().iter().map(|v| (v - lo) / (hi - lo)).collect()
                } else {
                    vec![0.5; f.values().len()]
                };
                LuminanceMap::normalized(f.width(), f.height(), v)
            })
            .collect()
    }
}

/// A trained generator. Frames share one normalization and, in video mode,
/// one temporal buffer; sizes that the network cannot take are padded by edge
/// replication and cropped back.
#[derive(Clone, Debug)]
pub struct GeneratorMapper {
    pub generator: Generator,
    pub label: String,
}

impl GeneratorMapper {
    pub fn load(dir: &Path) -> Result<Self> {
        Ok(Self { generator: Generator::load(dir, None)?, label: format!("checkpoint:{}", dir.display()) })
    }
}

/// Replicates the last row and column until the plane is `w × h`.
pub fn pad_edge(y: &LuminanceMap, w: usize, h: usize) -> Result<LuminanceMap> {
    if w < y.width() || h < y.height() {
        return Err(Error::InvalidArgument("padding cannot shrink a plane".into()));
    }
    let mut v = Vec::with_capacity(w * h);
    for r in 0..h {
        for c in 0..w {
            v.push(y.at(c.min(y.width() - 1), r.min(y.height() - 1)));
        }
    }
    if y.is_normalized() {
        LuminanceMap::normalized(w, h, v)
    } else {
        LuminanceMap::raw(w, h, v)
    }
}

impl ToneMapper for GeneratorMapper {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn map_clip(&self, frames: &[LuminanceMap]) -> Result<Vec<LuminanceMap>> {
        let clip = normalize_hdr_clip(&Clip::new(frames.to_vec())?)?;
        let (w, h) = clip.dims();
        let d = self.generator.config().size_divisor();
        let (pw, ph) = (w.div_ceil(d) * d, h.div_ceil(d) * d);
        let padded = clip.frames().iter().map(|f| pad_edge(f, pw, ph)).collect::<Result<Vec<_>>>()?;
        let mut buffer = self.generator.config().tfr_enabled.then(|| self.generator.new_buffer());
        self.generator
            .tonemap_frames(&padded, buffer.as_mut())?
            .iter()
            .map(|o| crop(o, 0, 0, w, h))
            .collect()
    }
}

/// Registry of tone mappers: `identity`, `linear`, `checkpoint:<dir>`.
pub fn mapper_registry() -> Registry<dyn ToneMapper> {
    let mut r: Registry<dyn ToneMapper> = Registry::new("tone mapper");
    r.register("identity", |arg| {
        no_argument("identity", arg)?;
        Ok(Box::new(IdentityMapper))
    })
    .register("linear", |arg| {
        no_argument("linear", arg)?;
        Ok(Box::new(LinearMapper))
    })
    .register("checkpoint", |arg| {
        Ok(Box::new(GeneratorMapper::load(Path::new(required_argument("checkpoint", arg)?))?))
    });
    r
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoScore {
    pub video: String,
    pub frames: usize,
    /// Mean over the evaluated frames.
    pub tmqi: f64,
    pub rwe: f64,
    /// Reserved; not computed.
    pub btmqi: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanScore {
    pub tmqi: f64,
    pub rwe: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub frames_per_video: usize,
    pub mapper: String,
    pub flow: String,
    pub videos: Vec<VideoScore>,
    pub mean: MeanScore,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    video: &'a str,
    frames: Option<usize>,
    tmqi: f64,
    rwe: f64,
    btmqi: Option<f64>,
}

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";

impl EvalReport {
    pub fn from_videos(frames_per_video: usize, mapper: String, flow: String, videos: Vec<VideoScore>) -> Self {
        let n = videos.len().max(1) as f64;
        let mean = MeanScore {
            tmqi: videos.iter().map(|v| v.tmqi).sum::<f64>() / n,
            rwe: videos.iter().map(|v| v.rwe).sum::<f64>() / n,
        };
        Self { frames_per_video, mapper, flow, videos, mean }
    }

    /// One row per video followed by a `mean` row.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for v in &self.videos {
            w.serialize(CsvRow { video: &v.video, frames: Some(v.frames), tmqi: v.tmqi, rwe: v.rwe, btmqi: v.btmqi })?;
        }
        w.serialize(CsvRow { video: "mean", frames: None, tmqi: self.mean.tmqi, rwe: self.mean.rwe, btmqi: None })?;
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    /// Writes `report.json` and `report.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir)?;
        let (j, c) = (dir.join(REPORT_JSON), dir.join(REPORT_CSV));
        fs::write(&j, serde_json::to_string_pretty(self)?)?;
        fs::write(&c, self.to_csv()?)?;
        Ok((j, c))
    }
}

/// Clip directories directly under `hdr_dir`, sorted by name.
pub fn list_videos(hdr_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(hdr_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::EmptyDataset(hdr_dir.to_path_buf()));
    }
    Ok(dirs)
}

/// Scores one video: the first `frames_per_video` frames, at full resolution.
pub fn evaluate_video(
    dir: &Path,
    mapper: &dyn ToneMapper,
    flow: &dyn FlowEstimator,
    frames_per_video: usize,
) -> Result<VideoScore> {
    let clip = load_clip_dir(dir, is_radiance_file, load_radiance, Some(frames_per_video))?;
    let raw: Vec<LuminanceMap> = clip.frames().iter().map(extract_luminance).collect();
    let out = mapper.map_clip(&raw)?;
    let mut q = 0.0;
    for (h, o) in raw.iter().zip(&out) {
        q += tmqi(h, o)?.q;
    }
    Ok(VideoScore {
        video: dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        frames: raw.len(),
        tmqi: q / raw.len() as f64,
        rwe: rwe(&out, flow)?,
        btmqi: None,
    })
}

/// Evaluates every clip directory under `hdr_dir`.
pub fn evaluate_testset(
    hdr_dir: &Path,
    mapper: &dyn ToneMapper,
    flow: &dyn FlowEstimator,
    frames_per_video: usize,
) -> Result<EvalReport> {
    if frames_per_video < 2 {
        return Err(Error::TooFewFrames(frames_per_video));
    }
    let videos = list_videos(hdr_dir)?
        .iter()
        .map(|d| {
            log::info!("evaluating {}", d.display());
            evaluate_video(d, mapper, flow, frames_per_video)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_videos(frames_per_video, mapper.name(), flow.name(), videos))
}
