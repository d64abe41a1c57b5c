use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PoolKind;
use crate::error::{Error, Result};
use crate::imaging::{is_ldr_file, is_radiance_file, list_frame_files};

pub const MANIFEST_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

/// Sub-directories of a dataset root and the pool each one feeds.
pub const POOL_DIRS: [(&str, PoolKind); 4] = [
    ("hdr_videos", PoolKind::Hdr),
    ("hdr_images", PoolKind::Hdr),
    ("ldr_good", PoolKind::LdrGood),
    ("ldr_poor", PoolKind::LdrPoor),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Media {
    Image,
    Video,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    /// An image file, or a directory of frames for videos.
    pub path: PathBuf,
    pub kind: PoolKind,
    pub media: Media,
    /// `[width, height]` of the (first) frame.
    pub resolution: [usize; 2],
    pub frames: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub seed: u64,
    pub entries: Vec<ManifestEntry>,
}

/// A directory whose files and frame directories all belong to one pool.
#[derive(Clone, Debug, PartialEq)]
pub struct PoolRoot {
    pub dir: PathBuf,
    pub kind: PoolKind,
}

/// The pool directories of a dataset root (see [`POOL_DIRS`]).
pub fn standard_roots(root: &Path) -> Vec<PoolRoot> {
    POOL_DIRS.iter().map(|(d, kind)| PoolRoot { dir: root.join(d), kind: *kind }).collect()
}

fn accepts(kind: PoolKind) -> fn(&Path) -> bool {
    match kind {
        PoolKind::Hdr => is_radiance_file,
        PoolKind::LdrGood | PoolKind::LdrPoor => is_ldr_file,
    }
}

fn dimensions(path: &Path) -> Result<[usize; 2]> {
    let (w, h) = image::image_dimensions(path)
        .map_err(|e| Error::CorruptFile { path: path.to_path_buf(), reason: e.to_string() })?;
    Ok([w as usize, h as usize])
}

fn scan(root: &PoolRoot, out: &mut Vec<ManifestEntry>) -> Result<()> {
    let accept = accepts(root.kind);
    for item in fs::read_dir(&root.dir)? {
        let path = item?.path();
        if path.is_dir() {
            let (frames, _) = list_frame_files(&path, accept)?;
            match frames.first() {
                Some(first) => out.push(ManifestEntry {
                    resolution: dimensions(first)?,
                    frames: frames.len(),
                    path,
                    kind: root.kind,
                    media: Media::Video,
                }),
                None => log::warn!("{}: no frames, skipped", path.display()),
            }
        } else if accept(&path) {
            out.push(ManifestEntry { resolution: dimensions(&path)?, frames: 1, path, kind: root.kind, media: Media::Image });
        }
    }
    Ok(())
}

/// Scans pool directories into a manifest sorted by path. Missing
/// directories are skipped; every pool named by `roots` must end up nonempty.
pub fn build_manifest(roots: &[PoolRoot], seed: u64) -> Result<DatasetManifest> {
    let mut found = Vec::new();
    for root in roots {
        if root.dir.is_dir() {
            scan(root, &mut found)?;
        } else {
            log::debug!("{} does not exist, skipped", root.dir.display());
        }
    }
    let mut unique: BTreeMap<PathBuf, ManifestEntry> = BTreeMap::new();
    for e in found {
        if unique.contains_key(&e.path) {
            log::warn!("duplicate dataset entry {} dropped", e.path.display());
            continue;
        }
        unique.insert(e.path.clone(), e);
    }
    let manifest = DatasetManifest { format_version: MANIFEST_FORMAT_VERSION, seed, entries: unique.into_values().collect() };
    for kind in PoolKind::ALL {
        if roots.iter().any(|r| r.kind == kind) && manifest.pool(kind).next().is_none() {
            return Err(Error::EmptyPool(kind));
        }
    }
    Ok(manifest)
}

impl DatasetManifest {
    pub fn pool(&self, kind: PoolKind) -> impl Iterator<Item = (usize, &ManifestEntry)> {
        self.entries.iter().enumerate().filter(move |(_, e)| e.kind == kind)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        crate::model::write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let m: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        if m.format_version != MANIFEST_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "{}: manifest format {} (supported: {MANIFEST_FORMAT_VERSION})",
                path.display(),
                m.format_version
            )));
        }
        Ok(m)
    }
}
