//! Generator and discriminator networks.

mod checkpoint;
mod discriminator;
mod generator;
mod params;
mod sfe;
mod tfr;

pub use checkpoint::{
    read_archive, strip_prefix, write_archive, write_atomic, ModelManifest, ARCHIVE_FILE,
    DISCRIMINATOR_PREFIX, FORMAT_VERSION, GENERATOR_PREFIX, MANIFEST_FILE,
};
pub use discriminator::{Discriminator, DiscriminatorConfig};
pub use generator::{FrameOutput, Generator, GeneratorConfig};
pub use params::{Bound, ParamStore};
pub use sfe::knn_graph;
pub use tfr::{split_size, tfr_apply, TemporalBuffer};

/// Negative slope of every LeakyReLU in both networks.
pub const LEAKY_SLOPE: f64 = 0.2;
