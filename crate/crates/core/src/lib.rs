//! Unsupervised HDR image and video tone mapping.

pub mod data;
pub mod error;
pub mod imaging;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod registry;
pub mod training;

pub use error::{Error, Result};
