//! Unpaired pools of HDR inputs, good LDR exemplars and poor LDR negatives.

mod manifest;
mod sampler;
mod synth;
pub mod toy;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use manifest::{
    build_manifest, standard_roots, DatasetManifest, ManifestEntry, Media, PoolRoot, MANIFEST_FILE,
    MANIFEST_FORMAT_VERSION, POOL_DIRS,
};
pub use sampler::{sample_gamma, BatchSources, HdrBatch, Sampler, SamplerConfig, TrainingBatch};
pub use synth::{crop_offsets, synth_clip_from_image, synthesize_dir, SynthOptions, SyntheticClipSpec, MAX_GAMMA};

/// Role of a dataset pool.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolKind {
    Hdr,
    LdrGood,
    LdrPoor,
}

impl PoolKind {
    pub const ALL: [PoolKind; 3] = [PoolKind::Hdr, PoolKind::LdrGood, PoolKind::LdrPoor];
}

impl fmt::Display for PoolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PoolKind::Hdr => "hdr",
            PoolKind::LdrGood => "ldr_good",
            PoolKind::LdrPoor => "ldr_poor",
        })
    }
}

/// Single-frame or clip training.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Image,
    #[default]
    Video,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Image => "image",
            Mode::Video => "video",
        })
    }
}
