//! Simulated enhancer operating directly on frame embeddings.

use super::EmbeddingSequence;
use crate::error::{Error, Result};
use std::fmt;
use std::str::FromStr;

/// Floor on the noise power in the oracle Wiener gain.
pub const WIENER_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnhanceMode {
    /// Per-coefficient Wiener gain computed from the true clean coefficient.
    OracleWiener,
    /// Moving average along time with width `2 * floor(strength) + 1`.
    TemporalSmooth,
}

impl fmt::Display for EnhanceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnhanceMode::OracleWiener => "oracle_wiener",
            EnhanceMode::TemporalSmooth => "temporal_smooth",
        })
    }
}

impl FromStr for EnhanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle_wiener" => Ok(EnhanceMode::OracleWiener),
            "temporal_smooth" => Ok(EnhanceMode::TemporalSmooth),
            other => Err(Error::Config(format!("unknown enhance mode '{other}'"))),
        }
    }
}

pub fn smoothing_width(strength: f64) -> Result<usize> {
    if !strength.is_finite() || strength < 0.0 {
        return Err(Error::Config(format!(
            "smoothing strength must be a finite non-negative number, got {strength}"
        )));
    }
    Ok(2 * strength.floor() as usize + 1)
}

pub fn enhance(
    noisy: &EmbeddingSequence,
    clean: Option<&EmbeddingSequence>,
    mode: EnhanceMode,
    strength: f64,
) -> Result<EmbeddingSequence> {
    match mode {
        EnhanceMode::OracleWiener => {
            let clean = clean.ok_or(Error::MissingReference)?;
            if !clean.same_shape(noisy) {
                return Err(Error::ShapeMismatch(format!(
                    "clean {}x{} vs noisy {}x{}",
                    clean.dim(),
                    clean.frames(),
                    noisy.dim(),
                    noisy.frames()
                )));
            }
            let data = noisy
                .as_slice()
                .iter()
                .zip(clean.as_slice())
                .map(|(&n, &c)| {
                    let signal = c * c;
                    let noise = (n - c) * (n - c);
                    n * signal / (signal + noise.max(WIENER_EPS))
                })
                .collect();
            EmbeddingSequence::new(data, noisy.dim(), noisy.frames(), noisy.hop())
        }
        EnhanceMode::TemporalSmooth => {
            let width = smoothing_width(strength)?;
            let frames = noisy.frames();
            if width > frames {
                return Err(Error::WidthExceedsFrames { width, frames });
            }
            let half = width / 2;
            let dim = noisy.dim();
            let mut out = EmbeddingSequence::zeros(dim, frames, noisy.hop());
            for t in 0..frames {
                let lo = t.saturating_sub(half);
                let hi = (t + half).min(frames - 1);
                let count = (hi - lo + 1) as f64;
                let dst = out.frame_mut(t);
                for s in lo..=hi {
                    for (d, v) in dst.iter_mut().zip(noisy.frame(s)) {
                        *d += v;
                    }
                }
                dst.iter_mut().for_each(|d| *d /= count);
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(dim: usize, values: Vec<f64>) -> EmbeddingSequence {
        let frames = values.len() / dim;
        EmbeddingSequence::new(values, dim, frames, 320).unwrap()
    }

    #[test]
    fn wiener_is_identity_when_clean_equals_noisy() {
        let x = seq(2, vec![0.5, -1.0, 2.0, 3.0, 0.25, -0.75]);
        let out = enhance(&x, Some(&x), EnhanceMode::OracleWiener, 0.0).unwrap();
        for (a, b) in out.as_slice().iter().zip(x.as_slice()) {
            assert!((a - b).abs() <= 1e-6 * b.abs());
        }
    }

    #[test]
    fn wiener_suppresses_dominant_noise() {
        let clean = seq(2, vec![1e-3, -1e-3, 2e-3, 1e-3]);
        let noisy = seq(2, vec![1e4, -1e4, 1e4, 1e4]);
        let out = enhance(&noisy, Some(&clean), EnhanceMode::OracleWiener, 0.0).unwrap();
        assert!(out.as_slice().iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn wiener_needs_reference() {
        let x = seq(1, vec![1.0, 2.0]);
        assert!(matches!(
            enhance(&x, None, EnhanceMode::OracleWiener, 0.0),
            Err(Error::MissingReference)
        ));
        let y = seq(2, vec![1.0, 2.0]);
        assert!(matches!(
            enhance(&x, Some(&y), EnhanceMode::OracleWiener, 0.0),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn smoothing_periodic_pattern() {
        let pattern: Vec<f64> = [0.0, 3.0, 0.0].iter().cycle().take(12).copied().collect();
        let out = enhance(&seq(1, pattern), None, EnhanceMode::TemporalSmooth, 1.0).unwrap();
        for t in 1..11 {
            assert!((out.get(0, t) - 1.0).abs() < 1e-12, "frame {t}");
        }
    }

    #[test]
    fn smoothing_width_bounded_by_frames() {
        let x = seq(1, vec![1.0, 2.0, 3.0]);
        assert!(matches!(
            enhance(&x, None, EnhanceMode::TemporalSmooth, 2.0),
            Err(Error::WidthExceedsFrames {
                width: 5,
                frames: 3
            })
        ));
        assert!(enhance(&x, None, EnhanceMode::TemporalSmooth, -1.0).is_err());
    }
}
