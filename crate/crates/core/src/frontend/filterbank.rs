use super::{EmbeddingSequence, FrontendConfig, Waveform};
use crate::error::{Error, Result};
use std::f64::consts::PI;
use std::ops::Range;

/// Number of whole frames that fit in `len` samples.
pub fn frame_count(len: usize, frame_len: usize, hop: usize) -> usize {
    if len < frame_len || hop == 0 {
        0
    } else {
        (len - frame_len) / hop + 1
    }
}

/// Samples covered by the full `frame_len / hop` frame overlap after
/// synthesizing `frames` frames.
pub fn interior_range(frames: usize, cfg: &FrontendConfig) -> Range<usize> {
    let start = cfg.frame_len - cfg.hop;
    let end = frames * cfg.hop;
    start..end.max(start)
}

/// Precomputed truncated DCT-II basis and window for one configuration.
#[derive(Debug, Clone)]
pub struct Filterbank {
    cfg: FrontendConfig,
    window: Vec<f64>,
    // dim rows of frame_len samples
    basis: Vec<f64>,
    // smallest overlap-add weight sum over a fully overlapped hop
    norm_floor: f64,
}

impl Filterbank {
    pub fn new(cfg: FrontendConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.frame_len;
        let mut basis = Vec::with_capacity(cfg.dim * n);
        for k in 0..cfg.dim {
            let scale = if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            };
            basis.extend(
                (0..n).map(|i| scale * (PI * (i as f64 + 0.5) * k as f64 / n as f64).cos()),
            );
        }
        let window = cfg.window.coefficients(n);
        let norm_floor = (0..cfg.hop)
            .map(|i| {
                (i..n)
                    .step_by(cfg.hop)
                    .map(|j| window[j] * window[j])
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        Ok(Self {
            cfg,
            window,
            basis,
            norm_floor,
        })
    }

    pub fn config(&self) -> &FrontendConfig {
        &self.cfg
    }

    fn basis_row(&self, k: usize) -> &[f64] {
        let n = self.cfg.frame_len;
        &self.basis[k * n..(k + 1) * n]
    }

    pub fn analyze(&self, wave: &Waveform) -> Result<EmbeddingSequence> {
        let FrontendConfig {
            frame_len,
            hop,
            dim,
            ..
        } = self.cfg;
        let samples = wave.samples();
        if samples.len() < frame_len {
            return Err(Error::SignalTooShort {
                len: samples.len(),
                needed: frame_len,
            });
        }
        let frames = frame_count(samples.len(), frame_len, hop);
        let mut data = Vec::with_capacity(dim * frames);
        let mut windowed = vec![0.0; frame_len];
        for t in 0..frames {
            let seg = &samples[t * hop..t * hop + frame_len];
            for ((w, s), win) in windowed.iter_mut().zip(seg).zip(&self.window) {
                *w = s * win;
            }
            for k in 0..dim {
                data.push(dot(self.basis_row(k), &windowed));
            }
        }
        EmbeddingSequence::new(data, dim, frames, hop)
    }

    pub fn synthesize(&self, emb: &EmbeddingSequence, sample_rate: u32) -> Result<Waveform> {
        let FrontendConfig {
            frame_len,
            hop,
            dim,
            ..
        } = self.cfg;
        if emb.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: emb.dim(),
            });
        }
        let frames = emb.frames();
        if frames == 0 {
            return Waveform::new(Vec::new(), sample_rate);
        }
        let len = (frames - 1) * hop + frame_len;
        let mut out = vec![0.0; len];
        let mut norm = vec![0.0; len];
        let mut frame = vec![0.0; frame_len];
        for (t, coeffs) in emb.iter_frames().enumerate() {
            frame.iter_mut().for_each(|v| *v = 0.0);
            for (k, &c) in coeffs.iter().enumerate() {
                if c != 0.0 {
                    for (f, b) in frame.iter_mut().zip(self.basis_row(k)) {
                        *f += c * b;
                    }
                }
            }
            let offset = t * hop;
            for (i, (&f, &w)) in frame.iter().zip(&self.window).enumerate() {
                out[offset + i] += w * f;
                norm[offset + i] += w * w;
            }
        }
        // Near the ends fewer frames overlap and the weight sum tends to zero;
        // flooring it keeps coding errors there from being amplified.
        for (o, n) in out.iter_mut().zip(&norm) {
            let n = n.max(self.norm_floor);
            *o = if n > 1e-12 { *o / n } else { 0.0 };
        }
        Waveform::new(out, sample_rate)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `Enc`: waveform to frame embeddings.
pub fn analyze(wave: &Waveform, cfg: &FrontendConfig) -> Result<EmbeddingSequence> {
    Filterbank::new(*cfg)?.analyze(wave)
}

/// `Dec`: frame embeddings back to a waveform.
pub fn synthesize(
    emb: &EmbeddingSequence,
    cfg: &FrontendConfig,
    sample_rate: u32,
) -> Result<Waveform> {
    Filterbank::new(*cfg)?.synthesize(emb, sample_rate)
}
