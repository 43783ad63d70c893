//! Perceptual entropy after Johnston's transform-coding model.
//!
//! Per frame: Hann-windowed FFT, critical-band energies, convolution with the
//! Schroeder spreading function, a tonality-weighted offset derived from the
//! spectral flatness measure, renormalization by the spreading gain, and a
//! floor at the absolute threshold of hearing. Each bin then costs
//! `log2(2 floor(|Re| / sqrt(6 t)) + 1) + log2(2 floor(|Im| / sqrt(6 t)) + 1)`
//! bits where `t` is the per-bin share of its band threshold.

use super::bark::band_layout;
use crate::error::{Error, Result};
use crate::frontend::{Waveform, Window};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

#[derive(Debug, Clone, PartialEq)]
pub struct PEConfig {
    pub fft_len: usize,
    pub hop: usize,
    pub window: Window,
    pub n_critical_bands: usize,
    /// Flatness (dB) at which a spectrum counts as fully tonal.
    pub sfm_max_db: f64,
    /// Tone-masking-noise offset is `tone_offset_db + band number`.
    pub tone_offset_db: f64,
    /// Noise-masking-tone offset.
    pub noise_offset_db: f64,
    /// Sound pressure level assigned to a full-scale sinusoid. `None`
    /// disables the absolute threshold.
    pub full_scale_spl_db: Option<f64>,
}

impl Default for PEConfig {
    fn default() -> Self {
        Self {
            fft_len: 2048,
            hop: 1024,
            window: Window::Hann,
            n_critical_bands: 25,
            sfm_max_db: -60.0,
            tone_offset_db: 14.5,
            noise_offset_db: 5.5,
            full_scale_spl_db: Some(96.0),
        }
    }
}

impl PEConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.fft_len.is_power_of_two() || self.fft_len < 4 {
            return Err(Error::Config(format!(
                "fft_len must be a power of two >= 4, got {}",
                self.fft_len
            )));
        }
        if self.hop == 0 || self.hop > self.fft_len {
            return Err(Error::Config(format!(
                "hop must satisfy 0 < hop <= fft_len, got {}",
                self.hop
            )));
        }
        if self.n_critical_bands == 0 || self.n_critical_bands > 25 {
            return Err(Error::Config(format!(
                "n_critical_bands must lie in 1..=25, got {}",
                self.n_critical_bands
            )));
        }
        if self.sfm_max_db.is_nan() || self.sfm_max_db >= 0.0 {
            return Err(Error::Config("sfm_max_db must be negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PEReport {
    pub pe_bits_per_sample: f64,
    pub pe_bits_per_second: f64,
    /// Bits per frame.
    pub frame_pe: Vec<f64>,
}

/// Threshold in quiet (Terhardt), dB SPL.
fn absolute_threshold_db(freq_hz: f64) -> f64 {
    let khz = freq_hz.max(20.0) / 1000.0;
    3.64 * khz.powf(-0.8) - 6.5 * (-0.6 * (khz - 3.3).powi(2)).exp() + 1e-3 * khz.powi(4)
}

fn spreading_db(delta_bark: f64) -> f64 {
    let x = delta_bark + 0.474;
    15.81 + 7.5 * x - 17.5 * (1.0 + x * x).sqrt()
}

pub fn perceptual_entropy(wave: &Waveform, cfg: &PEConfig) -> Result<PEReport> {
    cfg.validate()?;
    let n = cfg.fft_len;
    let samples = wave.samples();
    if samples.len() < n {
        return Err(Error::SignalTooShort {
            len: samples.len(),
            needed: n,
        });
    }
    let sr = wave.sample_rate();
    let bands = band_layout(n, sr, cfg.n_critical_bands);
    let window = cfg.window.coefficients(n);
    let bin_hz = sr as f64 / n as f64;

    // spreading matrix between present bands, indexed by band number
    let spread: Vec<Vec<f64>> = bands
        .iter()
        .map(|maskee| {
            bands
                .iter()
                .map(|masker| {
                    let d = maskee.number as f64 - masker.number as f64;
                    10f64.powf(spreading_db(d) / 10.0)
                })
                .collect()
        })
        .collect();
    let spread_gain: Vec<f64> = spread.iter().map(|row| row.iter().sum()).collect();

    let ath: Vec<f64> = match cfg.full_scale_spl_db {
        Some(spl) => {
            let full_scale = (window.iter().sum::<f64>() / 2.0).powi(2);
            (0..n / 2)
                .map(|k| {
                    full_scale * 10f64.powf((absolute_threshold_db(k as f64 * bin_hz) - spl) / 10.0)
                })
                .collect()
        }
        None => vec![0.0; n / 2],
    };

    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let frames = (samples.len() - n) / cfg.hop + 1;
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let mut frame_pe = Vec::with_capacity(frames);
    for f in 0..frames {
        let seg = &samples[f * cfg.hop..f * cfg.hop + n];
        for ((b, &s), &w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex::new(s * w, 0.0);
        }
        fft.process(&mut buf);
        let spectrum = &buf[..n / 2];
        let power: Vec<f64> = spectrum.iter().map(|c| c.norm_sqr()).collect();

        let band_energy: Vec<f64> = bands
            .iter()
            .map(|b| power[b.start..b.end].iter().sum())
            .collect();
        if band_energy.iter().all(|&e| e == 0.0) {
            frame_pe.push(0.0);
            continue;
        }

        let used = &power[..bands.last().map_or(0, |b| b.end)];
        let mean = used.iter().sum::<f64>() / used.len() as f64;
        let log_mean = used.iter().map(|p| (p + 1e-300).ln()).sum::<f64>() / used.len() as f64;
        let sfm_db = 10.0 * (log_mean.exp() / mean).log10();
        let tonality = (sfm_db / cfg.sfm_max_db).clamp(0.0, 1.0);

        let mut bits = 0.0;
        for (i, band) in bands.iter().enumerate() {
            let spread_energy: f64 = spread[i].iter().zip(&band_energy).map(|(s, e)| s * e).sum();
            let offset_db = tonality * (cfg.tone_offset_db + band.number as f64)
                + (1.0 - tonality) * cfg.noise_offset_db;
            let threshold = spread_energy * 10f64.powf(-offset_db / 10.0) / spread_gain[i];
            let per_bin = threshold / band.width() as f64;
            for k in band.start..band.end {
                let t = per_bin.max(ath[k]);
                if t <= 0.0 {
                    continue;
                }
                let step = (6.0 * t).sqrt();
                let c = spectrum[k];
                bits += (2.0 * (c.re.abs() / step).floor() + 1.0).log2();
                bits += (2.0 * (c.im.abs() / step).floor() + 1.0).log2();
            }
        }
        frame_pe.push(bits);
    }

    let per_sample = frame_pe.iter().sum::<f64>() / (frames * n) as f64;
    Ok(PEReport {
        pe_bits_per_sample: per_sample,
        pe_bits_per_second: per_sample * sr as f64,
        frame_pe,
    })
}

/// Percentage drop in bits per sample from `noisy` to `enhanced`.
pub fn pe_reduction(noisy: &Waveform, enhanced: &Waveform, cfg: &PEConfig) -> Result<f64> {
    if noisy.sample_rate() != enhanced.sample_rate() {
        return Err(Error::SampleRateMismatch(
            noisy.sample_rate(),
            enhanced.sample_rate(),
        ));
    }
    let pn = perceptual_entropy(noisy, cfg)?.pe_bits_per_sample;
    if pn == 0.0 {
        return Err(Error::ZeroEntropy);
    }
    let pe = perceptual_entropy(enhanced, cfg)?.pe_bits_per_sample;
    Ok(100.0 * (pn - pe) / pn)
}
