use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageFormat, Rgb32FImage, RgbImage};
use serde::{Deserialize, Serialize};

use super::{Clip, LdrImage, LuminanceMap, Raster, RadianceImage};
use crate::error::{Error, Result};

const RADIANCE_EXTS: &[&str] = &["hdr", "exr"];
const LDR_EXTS: &[&str] = &["png", "jpg", "jpeg"];

/// Name of the optional per-clip sidecar inside a frame directory.
pub const CLIP_MANIFEST: &str = "clip.json";

/// Optional sidecar of a frame directory.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ClipManifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fps: Option<f64>,
    /// Explicit frame order, relative to the directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<Vec<String>>,
}

fn extension(path: &Path) -> Option<String> {
    path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase())
}

pub fn is_radiance_file(path: &Path) -> bool {
    extension(path).is_some_and(|e| RADIANCE_EXTS.contains(&e.as_str()))
}

pub fn is_ldr_file(path: &Path) -> bool {
    extension(path).is_some_and(|e| LDR_EXTS.contains(&e.as_str()))
}

fn decode(path: &Path, allowed: &[&str]) -> Result<DynamicImage> {
    match extension(path) {
        Some(e) if allowed.contains(&e.as_str()) => {}
        _ => return Err(Error::UnsupportedFormat(path.to_path_buf())),
    }
    let reader = image::ImageReader::open(path)?.with_guessed_format()?;
    reader.decode().map_err(|e| Error::CorruptFile { path: path.to_path_buf(), reason: e.to_string() })
}

/// Reads a Radiance `.hdr` or OpenEXR `.exr` file as linear RGB.
///
/// Negative samples are clamped to zero; the count is logged and kept in
/// [`RadianceImage::meta`].
pub fn load_radiance(path: &Path) -> Result<RadianceImage> {
    let img = decode(path, RADIANCE_EXTS)?.into_rgb32f();
    let (w, h) = img.dimensions();
    let mut clamped = 0;
    let mut data = Vec::with_capacity(img.as_raw().len());
    for &v in img.as_raw() {
        let v = v as f64;
        if !v.is_finite() {
            return Err(Error::CorruptFile { path: path.to_path_buf(), reason: "non-finite sample".into() });
        }
        if v < 0.0 {
            clamped += 1;
            data.push(0.0);
        } else {
            data.push(v);
        }
    }
    if clamped > 0 {
        log::warn!("{}: clamped {clamped} negative samples to 0", path.display());
    }
    let mut out = RadianceImage::new(w as usize, h as usize, data)?;
    out.meta.source = Some(path.to_path_buf());
    out.meta.clamped_negatives = clamped;
    Ok(out)
}

/// Writes radiance as `.exr` (32-bit float) or `.hdr` (RGBE).
pub fn write_radiance(img: &RadianceImage, path: &Path) -> Result<()> {
    let format = match extension(path).as_deref() {
        Some("exr") => ImageFormat::OpenExr,
        Some("hdr") => ImageFormat::Hdr,
        _ => return Err(Error::UnsupportedFormat(path.to_path_buf())),
    };
    let buf = Rgb32FImage::from_raw(
        img.width() as u32,
        img.height() as u32,
        img.data().iter().map(|&v| v as f32).collect(),
    )
    .expect("buffer size matches dimensions");
    DynamicImage::ImageRgb32F(buf).save_with_format(path, format)?;
    Ok(())
}

/// Reads an 8- or 16-bit PNG/JPEG as display-referred RGB in `[0, 1]`.
pub fn load_ldr(path: &Path) -> Result<LdrImage> {
    let img = decode(path, LDR_EXTS)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = match img {
        DynamicImage::ImageLuma16(_)
        | DynamicImage::ImageLumaA16(_)
        | DynamicImage::ImageRgb16(_)
        | DynamicImage::ImageRgba16(_) => {
            img.into_rgb16().as_raw().iter().map(|&v| v as f64 / 65535.0).collect()
        }
        _ => img.into_rgb8().as_raw().iter().map(|&v| v as f64 / 255.0).collect(),
    };
    LdrImage::new(w, h, data)
}

fn quantize(v: f64) -> u8 {
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Writes an 8-bit PNG, quantizing with round-half-up.
pub fn write_ldr(img: &LdrImage, path: &Path) -> Result<()> {
    let bytes = img.data().iter().map(|&v| quantize(v)).collect();
    let buf = RgbImage::from_raw(img.width() as u32, img.height() as u32, bytes)
        .expect("buffer size matches dimensions");
    buf.save_with_format(path, ImageFormat::Png)?;
    Ok(())
}

/// Writes a normalized luminance plane as a gray 8-bit PNG.
pub fn write_ldr_luminance(y: &LuminanceMap, path: &Path) -> Result<()> {
    let v: Vec<f64> = y.values().iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let m = LuminanceMap::from_parts_unchecked(y.width(), y.height(), v, true);
    write_ldr(&LdrImage::from_luminance(&m)?, path)
}

/// Trailing run of ASCII digits in the file stem, if any.
fn frame_index(path: &Path) -> Option<u64> {
    let stem = path.file_stem()?.to_str()?;
    let digits: String = stem.chars().rev().take_while(|c| c.is_ascii_digit()).collect();
    if digits.is_empty() {
        return None;
    }
    digits.chars().rev().collect::<String>().parse().ok()
}

/// Frame files of a clip directory in temporal order.
///
/// Order comes from the `frames` list of the sidecar when present, otherwise
/// from the numeric suffix of each file stem (ties and unnumbered files
/// fall back to lexicographic order).
pub fn list_frame_files(dir: &Path, accept: fn(&Path) -> bool) -> Result<(Vec<PathBuf>, ClipManifest)> {
    let manifest_path = dir.join(CLIP_MANIFEST);
    let manifest: ClipManifest = if manifest_path.is_file() {
        serde_json::from_str(&fs::read_to_string(&manifest_path)?)?
    } else {
        ClipManifest::default()
    };
    if let Some(frames) = &manifest.frames {
        return Ok((frames.iter().map(|f| dir.join(f)).collect(), manifest));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && accept(p))
        .collect();
    files.sort_by(|a, b| frame_index(a).cmp(&frame_index(b)).then_with(|| a.cmp(b)));
    Ok((files, manifest))
}

/// Loads every frame of a clip directory with `load`.
pub fn load_clip_dir<F: Raster>(
    dir: &Path,
    accept: fn(&Path) -> bool,
    load: impl Fn(&Path) -> Result<F>,
    max_frames: Option<usize>,
) -> Result<Clip<F>> {
    let (mut files, manifest) = list_frame_files(dir, accept)?;
    if files.is_empty() {
        return Err(Error::EmptyDataset(dir.to_path_buf()));
    }
    if let Some(m) = max_frames {
        files.truncate(m);
    }
    let frames = files.iter().map(|p| load(p)).collect::<Result<Vec<_>>>()?;
    let mut clip = Clip::new(frames)?;
    clip.fps = manifest.fps;
    Ok(clip)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantization_rounds_half_up() {
        assert_eq!(quantize(1.0), 255);
        assert_eq!(quantize(0.5), 128);
        assert_eq!(quantize(0.0), 0);
    }

    #[test]
    fn numeric_suffix_order() {
        assert_eq!(frame_index(Path::new("a/frame_0010.png")), Some(10));
        assert_eq!(frame_index(Path::new("a/cover.png")), None);
    }
}
