//! Fixed DCT filterbank front end.
//!
//! Waveforms are cut into windowed frames, each frame is transformed with an
//! orthonormal type-II DCT and the first `dim` coefficients become the frame
//! embedding. Synthesis inverts the truncated transform and recombines frames
//! with least-squares weighted overlap-add.

mod corpus;
mod enhance;
mod filterbank;

pub use corpus::{generate_corpus, measured_snr_db, CorpusSpec, NoisyPair};
pub use enhance::{enhance, EnhanceMode, WIENER_EPS};
pub use filterbank::{analyze, frame_count, interior_range, synthesize, Filterbank};

use crate::error::{Error, Result};
use std::fmt;
use std::str::FromStr;

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

/// Mono audio signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Config("sample_rate must be positive".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("waveform"));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn silence(len: usize, sample_rate: u32) -> Self {
        Self {
            samples: vec![0.0; len],
            sample_rate,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }
}

/// A `dim x frames` matrix of frame embeddings.
///
/// Stored frame-major: the coefficients of frame `t` are contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSequence {
    data: Vec<f64>,
    dim: usize,
    frames: usize,
    hop: usize,
}

impl EmbeddingSequence {
    pub fn new(data: Vec<f64>, dim: usize, frames: usize, hop: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dim must be positive".into()));
        }
        if data.len() != dim * frames {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {dim}x{frames} embeddings",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embeddings"));
        }
        Ok(Self {
            data,
            dim,
            frames,
            hop,
        })
    }

    /// Builds a sequence from per-frame columns.
    pub fn from_frames(columns: &[Vec<f64>], hop: usize) -> Result<Self> {
        let dim = columns
            .first()
            .map(|c| c.len())
            .ok_or(Error::Empty("frames"))?;
        let mut data = Vec::with_capacity(dim * columns.len());
        for c in columns {
            if c.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: c.len(),
                });
            }
            data.extend_from_slice(c);
        }
        Self::new(data, dim, columns.len(), hop)
    }

    pub fn zeros(dim: usize, frames: usize, hop: usize) -> Self {
        Self {
            data: vec![0.0; dim * frames],
            dim,
            frames,
            hop,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn iter_frames(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    /// Coefficient `d` of frame `t`.
    pub fn get(&self, d: usize, t: usize) -> f64 {
        self.data[t * self.dim + d]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.dim == other.dim && self.frames == other.frames
    }

    /// Mean over frames of the squared frame norm.
    pub fn mean_frame_energy(&self) -> f64 {
        if self.frames == 0 {
            return 0.0;
        }
        self.data.iter().map(|v| v * v).sum::<f64>() / self.frames as f64
    }
}

/// Analysis taper applied to every frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    /// Periodic Hann.
    Hann,
    Rectangular,
}

impl Window {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Hann => (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos())
                .collect(),
            Window::Rectangular => vec![1.0; len],
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Window::Hann => 0,
            Window::Rectangular => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Window::Hann),
            1 => Some(Window::Rectangular),
            _ => None,
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Window::Hann => "hann",
            Window::Rectangular => "rect",
        })
    }
}

impl FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hann" => Ok(Window::Hann),
            "rect" | "rectangular" => Ok(Window::Rectangular),
            other => Err(Error::Config(format!("unknown window '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrontendConfig {
    pub frame_len: usize,
    pub hop: usize,
    pub dim: usize,
    pub window: Window,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        Self {
            frame_len: 640,
            hop: 320,
            dim: 64,
            window: Window::Hann,
        }
    }
}

impl FrontendConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hop == 0 || self.hop > self.frame_len {
            return Err(Error::Config(format!(
                "hop must satisfy 0 < hop <= frame_len, got hop={} frame_len={}",
                self.hop, self.frame_len
            )));
        }
        if self.dim == 0 || self.dim > self.frame_len {
            return Err(Error::Config(format!(
                "dim must satisfy 0 < dim <= frame_len, got dim={} frame_len={}",
                self.dim, self.frame_len
            )));
        }
        Ok(())
    }
}
