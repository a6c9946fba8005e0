//! Data-attribution toolkit: influence-function estimation over per-example
//! gradient dumps, backed by a hyperpower (Schulz) matrix-inverse iteration
//! on damped generalized Fisher information, with exact, Sherman-Morrison,
//! LiSSA and first-order baselines, plus reproducible benchmark harnesses.

pub mod error;
pub mod estimators;
pub mod fisher;
pub mod harness;
pub mod hyperpower;
pub mod io;
pub mod linalg;

pub use error::{Error, Result};
