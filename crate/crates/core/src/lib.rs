//! Entropy-guided residual vector quantization.

pub mod bitstream;
pub mod config;
pub mod entropy;
pub mod error;
pub mod eval;
pub mod frontend;
pub mod model;
pub mod rvq;
pub mod training;
pub mod wav;

pub use error::{Error, Result};
