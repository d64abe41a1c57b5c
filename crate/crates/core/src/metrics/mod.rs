//! Tone-mapping quality (TMQI) and temporal stability (relative warping error).

pub mod constants;
mod eval;
mod flow;
mod rwe;
mod tmqi;

pub use eval::{
    evaluate_testset, evaluate_video, list_videos, mapper_registry, pad_edge, EvalReport, GeneratorMapper,
    IdentityMapper, LinearMapper, MeanScore, ToneMapper, VideoScore, DEFAULT_FRAMES_PER_VIDEO, REPORT_CSV, REPORT_JSON,
};
pub use flow::{flow_registry, warp, BuiltinFlow, ExternalFlow, FlowEstimator, FlowField, ZeroFlow};
pub use rwe::{rwe, rwe_pair, RWE_EPS};
pub use tmqi::{tmqi, tmqi_rgb, TmqiResult};
