//! Reconstruction quality metrics.

use crate::error::{Error, Result};
use crate::frontend::EmbeddingSequence;
use serde::Serialize;

/// Reported in place of an infinite SDR.
pub const SDR_CAP_DB: f64 = 100.0;

/// `10 log10(|ref|^2 / |ref - est|^2)` over the common prefix of both
/// signals, capped at [`SDR_CAP_DB`].
pub fn sdr_db(reference: &[f64], estimate: &[f64]) -> Result<f64> {
    let n = reference.len().min(estimate.len());
    let (r, e) = (&reference[..n], &estimate[..n]);
    let signal: f64 = r.iter().map(|x| x * x).sum();
    if signal == 0.0 {
        return Err(Error::ZeroReference);
    }
    let error: f64 = r.iter().zip(e).map(|(a, b)| (a - b) * (a - b)).sum();
    if error == 0.0 {
        return Ok(SDR_CAP_DB);
    }
    Ok((10.0 * (signal / error).log10()).min(SDR_CAP_DB))
}

/// Mean over frames of the squared frame distance.
pub fn embedding_mse(a: &EmbeddingSequence, b: &EmbeddingSequence) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    let frames = a.frames().min(b.frames());
    if frames == 0 {
        return Err(Error::Empty("embedding sequence"));
    }
    let total: f64 = (0..frames)
        .map(|t| crate::rvq::squared_distance(a.frame(t), b.frame(t)))
        .sum();
    Ok(total / frames as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub sdr_db: f64,
    pub embedding_mse: Option<f64>,
    /// Mean residual energy after each stage.
    pub residual_energy: Vec<f64>,
    pub bitrate_bps: Option<f64>,
    /// Empirical entropy of each index stream, bits.
    pub code_entropy: Vec<f64>,
}

impl EvalReport {
    pub fn new(sdr_db: f64) -> Self {
        Self {
            sdr_db,
            embedding_mse: None,
            residual_energy: Vec::new(),
            bitrate_bps: None,
            code_entropy: Vec::new(),
        }
    }
}
