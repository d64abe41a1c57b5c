use std::path::PathBuf;

use crate::data::PoolKind;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    // imaging
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(PathBuf),
    #[error("corrupt file {path}: {reason}")]
    CorruptFile { path: PathBuf, reason: String },
    #[error("image has no positive pixel")]
    AllZeroImage,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("input too small: {0}")]
    TooSmall(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    // model
    #[error("spatial size {height}x{width} is not divisible by {divisor}")]
    ShapeNotDivisible { height: usize, width: usize, divisor: usize },
    #[error("temporal buffer does not match the generator: {0}")]
    BufferShapeMismatch(String),
    #[error("split ratio {beta} selects no channel out of {channels}")]
    BetaTooSmall { beta: f64, channels: usize },
    #[error("graph needs at least {needed} nodes, got {nodes}")]
    TooFewNodes { nodes: usize, needed: usize },
    #[error("checkpoint incompatible: {0}")]
    CheckpointMismatch(String),

    // losses
    #[error("latent code lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty batch: {0}")]
    EmptyBatch(&'static str),
    #[error("batch of {0} is too small (need at least 3)")]
    BatchTooSmall(usize),
    #[error("frame dimensions {0}x{1} are not even")]
    OddDimensions(usize, usize),
    #[error("loss term `{0}` is not finite")]
    NonFiniteComponent(&'static str),

    // metrics
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("need at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("no clips found under {0}")]
    EmptyDataset(PathBuf),
    #[error("flow estimator failed: {0}")]
    Flow(String),

    // data
    #[error("dataset pool `{0}` is empty")]
    EmptyPool(PoolKind),
    #[error("source {width}x{height} too small for a {crop}x{crop} crop")]
    SourceTooSmall { width: usize, height: usize, crop: usize },
    #[error("video has {available} frames, clip needs {needed}")]
    InsufficientFrames { available: usize, needed: usize },

    // training
    #[error("non-finite loss at step {step}: {term}")]
    NonFiniteLoss { step: u64, term: String },
    #[error("estimated activation memory {estimated} bytes exceeds budget {budget}")]
    OomBudgetExceeded { estimated: u64, budget: u64 },

    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownStrategy { kind: &'static str, name: String, available: String },
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Tensor(#[from] autograd::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
    #[error("parameter archive: {0}")]
    Archive(String),
}

pub type Result<T> = std::result::Result<T, Error>;
