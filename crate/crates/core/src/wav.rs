//! Mono WAV reading and writing.

use crate::error::{Error, Result};
use crate::frontend::Waveform;
use hound::{SampleFormat, WavSpec, WavWriter};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavFormat {
    Int16,
    Float32,
}

/// Reads a mono 16-bit integer or 32-bit float file.
pub fn read_wav(path: &Path) -> Result<Waveform> {
    let reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::Malformed(format!(
            "{}: expected mono, found {} channels",
            path.display(),
            spec.channels
        )));
    }
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / 32768.0))
            .collect::<std::result::Result<_, _>>()?,
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        (format, bits) => {
            return Err(Error::Malformed(format!(
                "{}: unsupported sample format {format:?} with {bits} bits",
                path.display()
            )))
        }
    };
    Waveform::new(samples, spec.sample_rate)
}

/// Like [`read_wav`] but fails unless the file has `sample_rate`.
pub fn read_wav_at(path: &Path, sample_rate: u32) -> Result<Waveform> {
    let wave = read_wav(path)?;
    if wave.sample_rate() != sample_rate {
        return Err(Error::SampleRateMismatch(sample_rate, wave.sample_rate()));
    }
    Ok(wave)
}

pub fn write_wav(path: &Path, wave: &Waveform, format: WavFormat) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: wave.sample_rate(),
        bits_per_sample: match format {
            WavFormat::Int16 => 16,
            WavFormat::Float32 => 32,
        },
        sample_format: match format {
            WavFormat::Int16 => SampleFormat::Int,
            WavFormat::Float32 => SampleFormat::Float,
        },
    };
    let mut writer = WavWriter::create(path, spec)?;
    for &s in wave.samples() {
        match format {
            WavFormat::Int16 => {
                writer.write_sample((s * 32768.0).round().clamp(-32768.0, 32767.0) as i16)?
            }
            WavFormat::Float32 => writer.write_sample(s as f32)?,
        }
    }
    writer.finalize()?;
    Ok(())
}

/// Rounds every sample through `f32`, i.e. the values a float file stores.
pub fn as_stored_f32(wave: &Waveform) -> Waveform {
    let samples = wave
        .samples()
        .iter()
        .map(|&s| f64::from(s as f32))
        .collect();
    Waveform::new(samples, wave.sample_rate()).expect("finite samples stay finite")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> Waveform {
        Waveform::new((0..100).map(|i| (i as f64 - 50.0) / 64.0).collect(), 8000).unwrap()
    }

    #[test]
    fn float_round_trip_is_exact_in_f32() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        write_wav(&path, &ramp(), WavFormat::Float32).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back, as_stored_f32(&ramp()));
        assert_eq!(back.sample_rate(), 8000);
    }

    #[test]
    fn int16_round_trip_within_one_lsb() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        write_wav(&path, &ramp(), WavFormat::Int16).unwrap();
        let back = read_wav(&path).unwrap();
        for (a, b) in back.samples().iter().zip(ramp().samples()) {
            assert!((a - b).abs() <= 1.0 / 32768.0);
        }
    }

    #[test]
    fn rate_mismatch_and_stereo_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        write_wav(&path, &ramp(), WavFormat::Float32).unwrap();
        assert!(matches!(
            read_wav_at(&path, 16_000),
            Err(Error::SampleRateMismatch(16_000, 8000))
        ));

        let stereo = dir.path().join("s.wav");
        let spec = WavSpec {
            channels: 2,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&stereo, spec).unwrap();
        w.write_sample(0i16).unwrap();
        w.write_sample(0i16).unwrap();
        w.finalize().unwrap();
        assert!(matches!(read_wav(&stereo), Err(Error::Malformed(_))));
    }
}
