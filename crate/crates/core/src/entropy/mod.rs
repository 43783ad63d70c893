//! Entropy measurements: perceptual entropy of waveforms and empirical
//! entropy of code-index streams.

mod bark;
mod pe;

pub use bark::{CriticalBand, BARK_TABLE_VERSION, CRITICAL_BAND_UPPER_EDGES_HZ};
pub use pe::{pe_reduction, perceptual_entropy, PEConfig, PEReport};

use crate::error::{Error, Result};

/// Shannon entropy in bits of the empirical histogram of `indices`.
pub fn code_entropy(indices: &[u32], codebook_size: usize) -> Result<f64> {
    if indices.is_empty() {
        return Err(Error::Empty("index stream"));
    }
    let mut hist = vec![0u64; codebook_size];
    for &j in indices {
        let slot = hist.get_mut(j as usize).ok_or(Error::IndexOutOfRange {
            index: j,
            size: codebook_size,
        })?;
        *slot += 1;
    }
    histogram_entropy(&hist)
}

fn histogram_entropy(hist: &[u64]) -> Result<f64> {
    let total: u64 = hist.iter().sum();
    if hist.is_empty() || total == 0 {
        return Err(Error::Empty("usage histogram"));
    }
    let total = total as f64;
    let h: f64 = hist
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum();
    Ok(h.max(0.0))
}

/// `2^H` of the normalized usage histogram.
pub fn perplexity(usage: &[u64]) -> Result<f64> {
    Ok(histogram_entropy(usage)?.exp2())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_stream() {
        assert_eq!(code_entropy(&[3; 50], 8).unwrap(), 0.0);
    }

    #[test]
    fn uniform_stream() {
        let idx: Vec<u32> = (0..64).map(|i| i % 16).collect();
        assert!((code_entropy(&idx, 16).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn half_quarter_quarter() {
        assert!((code_entropy(&[0, 0, 1, 2], 4).unwrap() - 1.5).abs() < 1e-12);
        assert!((perplexity(&[2, 1, 1]).unwrap() - 2f64.powf(1.5)).abs() < 1e-12);
        assert!((perplexity(&[2, 1, 1]).unwrap() - 2.828).abs() < 1e-3);
    }

    #[test]
    fn perplexity_bounds() {
        assert_eq!(perplexity(&[0, 9, 0]).unwrap(), 1.0);
        assert!((perplexity(&[5; 32]).unwrap() - 32.0).abs() < 1e-9);
    }

    #[test]
    fn errors() {
        assert!(matches!(code_entropy(&[], 4), Err(Error::Empty(_))));
        assert!(matches!(
            code_entropy(&[4], 4),
            Err(Error::IndexOutOfRange { index: 4, size: 4 })
        ));
        assert!(perplexity(&[]).is_err());
        assert!(perplexity(&[0, 0]).is_err());
    }
}
