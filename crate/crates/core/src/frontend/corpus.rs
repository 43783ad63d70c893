//! Synthetic clean/noisy speech-like corpus.
//!
//! Clean signals are harmonic tone complexes with a slow amplitude envelope.
//! Noise is an equal-energy mix of white and pink Gaussian noise scaled so
//! the pair realizes the drawn SNR.

use super::Waveform;
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

const CLEAN_RMS: f64 = 0.05;
const PEAK_LIMIT: f64 = 0.99;

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub n_utterances: usize,
    pub duration_s: f64,
    pub snr_low_db: f64,
    pub snr_high_db: f64,
    pub sample_rate: u32,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            n_utterances: 10,
            duration_s: 1.0,
            snr_low_db: -5.0,
            snr_high_db: 20.0,
            sample_rate: 16_000,
            seed: 0,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.snr_low_db.is_finite() && self.snr_high_db.is_finite()) {
            return Err(Error::Config("snr range must be finite".into()));
        }
        if self.snr_low_db > self.snr_high_db {
            return Err(Error::Config(format!(
                "snr range low {} exceeds high {}",
                self.snr_low_db, self.snr_high_db
            )));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::Config("duration_s must be positive".into()));
        }
        if self.sample_rate == 0 {
            return Err(Error::Config("sample_rate must be positive".into()));
        }
        Ok(())
    }

    pub fn samples_per_utterance(&self) -> usize {
        (self.duration_s * self.sample_rate as f64).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisyPair {
    pub clean: Waveform,
    pub noisy: Waveform,
    /// SNR drawn for this pair, in dB.
    pub snr_db: f64,
}

/// `10 log10(|clean|^2 / |noisy - clean|^2)`.
pub fn measured_snr_db(clean: &[f64], noisy: &[f64]) -> f64 {
    let signal: f64 = clean.iter().map(|c| c * c).sum();
    let noise: f64 = clean
        .iter()
        .zip(noisy)
        .map(|(c, n)| (n - c) * (n - c))
        .sum();
    10.0 * (signal / noise).log10()
}

pub fn generate_corpus(spec: &CorpusSpec) -> Result<Vec<NoisyPair>> {
    spec.validate()?;
    (0..spec.n_utterances)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(i as u64);
            generate_pair(spec, &mut rng)
        })
        .collect()
}

fn generate_pair(spec: &CorpusSpec, rng: &mut ChaCha8Rng) -> Result<NoisyPair> {
    let len = spec.samples_per_utterance();
    let sr = spec.sample_rate as f64;

    let f0: f64 = rng.random_range(80.0..=300.0);
    let n_harmonics: usize = rng.random_range(3..=8);
    let am_rate: f64 = rng.random_range(1.0..4.0);
    let am_depth: f64 = rng.random_range(0.3..0.8);
    let am_phase: f64 = rng.random_range(0.0..2.0 * PI);
    let partials: Vec<(f64, f64, f64)> = (1..=n_harmonics)
        .filter(|&k| (k as f64) * f0 < sr / 2.0)
        .map(|k| {
            let amp = rng.random_range(0.5..1.0) / k as f64;
            let phase = rng.random_range(0.0..2.0 * PI);
            (k as f64 * f0, amp, phase)
        })
        .collect();

    let mut clean: Vec<f64> = (0..len)
        .map(|n| {
            let t = n as f64 / sr;
            let env = 1.0 + am_depth * (2.0 * PI * am_rate * t + am_phase).sin();
            env * partials
                .iter()
                .map(|&(f, a, p)| a * (2.0 * PI * f * t + p).sin())
                .sum::<f64>()
        })
        .collect();
    let rms = (clean.iter().map(|c| c * c).sum::<f64>() / len.max(1) as f64).sqrt();
    if rms > 0.0 {
        clean.iter_mut().for_each(|c| *c *= CLEAN_RMS / rms);
    }

    let mut noise = white_plus_pink(len, rng);
    let snr_db = if spec.snr_low_db == spec.snr_high_db {
        spec.snr_low_db
    } else {
        rng.random_range(spec.snr_low_db..=spec.snr_high_db)
    };
    let clean_energy: f64 = clean.iter().map(|c| c * c).sum();
    let noise_energy: f64 = noise.iter().map(|v| v * v).sum();
    if noise_energy > 0.0 {
        let gain = (clean_energy / (noise_energy * 10f64.powf(snr_db / 10.0))).sqrt();
        noise.iter_mut().for_each(|v| *v *= gain);
    }

    let mut noisy: Vec<f64> = clean.iter().zip(&noise).map(|(c, v)| c + v).collect();
    let peak = noisy
        .iter()
        .chain(clean.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > PEAK_LIMIT {
        // common gain leaves the SNR untouched
        let g = PEAK_LIMIT / peak;
        clean.iter_mut().for_each(|v| *v *= g);
        noisy.iter_mut().for_each(|v| *v *= g);
    }

    Ok(NoisyPair {
        clean: Waveform::new(clean, spec.sample_rate)?,
        noisy: Waveform::new(noisy, spec.sample_rate)?,
        snr_db,
    })
}

/// Unit-variance white noise plus pink noise of equal energy.
fn white_plus_pink(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let white: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
    // Paul Kellet's refined pink filter
    let mut b = [0.0f64; 7];
    let mut pink: Vec<f64> = (0..len)
        .map(|_| {
            let w: f64 = rng.sample(StandardNormal);
            b[0] = 0.99886 * b[0] + w * 0.0555179;
            b[1] = 0.99332 * b[1] + w * 0.0750759;
            b[2] = 0.96900 * b[2] + w * 0.1538520;
            b[3] = 0.86650 * b[3] + w * 0.3104856;
            b[4] = 0.55000 * b[4] + w * 0.5329522;
            b[5] = -0.7616 * b[5] - w * 0.0168980;
            let out = b[0] + b[1] + b[2] + b[3] + b[4] + b[5] + b[6] + w * 0.5362;
            b[6] = w * 0.115926;
            out
        })
        .collect();
    let pink_energy: f64 = pink.iter().map(|v| v * v).sum();
    let white_energy: f64 = white.iter().map(|v| v * v).sum();
    if pink_energy > 0.0 {
        let g = (white_energy / pink_energy).sqrt();
        pink.iter_mut().for_each(|v| *v *= g);
    }
    white.iter().zip(&pink).map(|(w, p)| w + p).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, lo: f64, hi: f64, seed: u64) -> CorpusSpec {
        CorpusSpec {
            n_utterances: n,
            duration_s: 0.25,
            snr_low_db: lo,
            snr_high_db: hi,
            sample_rate: 16_000,
            seed,
        }
    }

    #[test]
    fn fixed_snr_is_realized() {
        for pair in generate_corpus(&spec(20, 10.0, 10.0, 4)).unwrap() {
            let snr = measured_snr_db(pair.clean.samples(), pair.noisy.samples());
            assert!((snr - 10.0).abs() <= 0.01, "snr {snr}");
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let a = generate_corpus(&spec(5, -5.0, 20.0, 9)).unwrap();
        let b = generate_corpus(&spec(5, -5.0, 20.0, 9)).unwrap();
        assert_eq!(a, b);
        let c = generate_corpus(&spec(5, -5.0, 20.0, 10)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn mean_snr_of_uniform_range() {
        let pairs = generate_corpus(&CorpusSpec {
            duration_s: 0.05,
            ..spec(1000, -5.0, 20.0, 2)
        })
        .unwrap();
        let mean = pairs
            .iter()
            .map(|p| measured_snr_db(p.clean.samples(), p.noisy.samples()))
            .sum::<f64>()
            / pairs.len() as f64;
        assert!((6.5..=8.5).contains(&mean), "mean snr {mean}");
    }

    #[test]
    fn samples_stay_in_range() {
        for pair in generate_corpus(&spec(30, -5.0, -5.0, 1)).unwrap() {
            assert!(pair.noisy.samples().iter().all(|v| v.abs() <= 1.0));
            assert!(pair.clean.samples().iter().all(|v| v.abs() <= 1.0));
        }
    }

    #[test]
    fn inverted_snr_range_is_rejected() {
        assert!(generate_corpus(&spec(1, 5.0, 0.0, 0)).is_err());
    }
}
