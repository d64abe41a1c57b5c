mod conv;
mod elementwise;
pub(crate) mod linalg;
pub(crate) mod reduce;
mod shape;
mod spatial;
