//! Exponential-moving-average codebook updates and dead-code reseeding.

use crate::error::{Error, Result};
use crate::rvq::Codebook;
use rand::Rng;
use rand_distr::StandardNormal;

pub const EMA_EPS: f64 = 1e-12;
pub const RESEED_NOISE: f64 = 1e-4;

/// Codebook plus the running cluster sizes and sums behind it.
///
/// State starts at a pseudo-count of one frame per entry located at the
/// entry itself. When `pinned` is set, that entry stays fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct EmaCodebook {
    codebook: Codebook,
    counts: Vec<f64>,
    sums: Vec<f64>,
    pinned: Option<usize>,
}

impl EmaCodebook {
    pub fn new(codebook: Codebook, pinned: Option<usize>) -> Self {
        let counts = vec![1.0; codebook.size()];
        let sums = codebook.as_slice().to_vec();
        Self {
            codebook,
            counts,
            sums,
            pinned,
        }
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn into_codebook(self) -> Codebook {
        self.codebook
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn pinned(&self) -> Option<usize> {
        self.pinned
    }

    /// One EMA step over `batch` (row-major frames) with their assignments.
    pub fn update(&mut self, batch: &[f64], assignments: &[u32], decay: f64) -> Result<()> {
        let dim = self.codebook.dim();
        let size = self.codebook.size();
        if batch.len() != assignments.len() * dim {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} assignments of dim {dim}",
                batch.len(),
                assignments.len()
            )));
        }
        let mut n = vec![0usize; size];
        let mut batch_sums = vec![0.0; size * dim];
        for (x, &j) in batch.chunks_exact(dim).zip(assignments) {
            let j = j as usize;
            if j >= size {
                return Err(Error::IndexOutOfRange {
                    index: j as u32,
                    size,
                });
            }
            n[j] += 1;
            for (s, v) in batch_sums[j * dim..(j + 1) * dim].iter_mut().zip(x) {
                *s += v;
            }
        }
        for j in 0..size {
            if self.pinned == Some(j) {
                continue;
            }
            self.counts[j] = decay * self.counts[j] + (1.0 - decay) * n[j] as f64;
            let sums = &mut self.sums[j * dim..(j + 1) * dim];
            for (s, b) in sums.iter_mut().zip(&batch_sums[j * dim..(j + 1) * dim]) {
                *s = decay * *s + (1.0 - decay) * b;
            }
            if n[j] > 0 {
                let count = self.counts[j].max(EMA_EPS);
                for (e, s) in self.codebook.entry_mut(j).iter_mut().zip(sums.iter()) {
                    *e = s / count;
                }
            }
        }
        Ok(())
    }

    /// Reseeds dead entries and resets their running state.
    pub fn reseed<R: Rng + ?Sized>(
        &mut self,
        usage: &[u64],
        data: &[f64],
        threshold: f64,
        rng: &mut R,
    ) -> Result<Vec<usize>> {
        let replaced =
            reseed_dead_codes(&mut self.codebook, usage, data, threshold, self.pinned, rng)?;
        let dim = self.codebook.dim();
        for &j in &replaced {
            self.counts[j] = 1.0;
            self.sums[j * dim..(j + 1) * dim].copy_from_slice(self.codebook.entry(j));
        }
        Ok(replaced)
    }
}

/// Replaces entries whose usage fraction is below `threshold` with random
/// rows of `data` plus small Gaussian noise. Returns the replaced indices.
///
/// A replacement is redrawn until it differs bit-wise from every other entry.
/// With no recorded usage nothing is replaced.
pub fn reseed_dead_codes<R: Rng + ?Sized>(
    codebook: &mut Codebook,
    usage: &[u64],
    data: &[f64],
    threshold: f64,
    pinned: Option<usize>,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let dim = codebook.dim();
    if usage.len() != codebook.size() {
        return Err(Error::ShapeMismatch(format!(
            "usage has {} bins for {} entries",
            usage.len(),
            codebook.size()
        )));
    }
    if data.is_empty() || !data.len().is_multiple_of(dim) {
        return Err(Error::ShapeMismatch(format!(
            "{} reseed values for dim {dim}",
            data.len()
        )));
    }
    let total: u64 = usage.iter().sum();
    if total == 0 {
        return Ok(Vec::new());
    }
    let rows = data.len() / dim;
    let mut replaced = Vec::new();
    for j in 0..codebook.size() {
        if pinned == Some(j) || (usage[j] as f64 / total as f64) >= threshold {
            continue;
        }
        let candidate = loop {
            let r = rng.random_range(0..rows);
            let cand: Vec<f64> = data[r * dim..(r + 1) * dim]
                .iter()
                .map(|v| v + RESEED_NOISE * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let clash = codebook
                .iter()
                .enumerate()
                .any(|(k, e)| k != j && e == &cand[..]);
            if !clash {
                break cand;
            }
        };
        codebook.entry_mut(j).copy_from_slice(&candidate);
        replaced.push(j);
    }
    Ok(replaced)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn converges_to_cluster_means() {
        let cb = Codebook::from_rows(&[vec![5.0, 5.0], vec![-5.0, 0.0], vec![0.0, 9.0]]).unwrap();
        let mut ema = EmaCodebook::new(cb, None);
        let batch = vec![1.0, 2.0, 3.0, 4.0, -1.0, -1.0, -3.0, 1.0, 0.5, 0.5];
        let assign = [0, 0, 1, 1, 1];
        for _ in 0..200 {
            ema.update(&batch, &assign, 0.9).unwrap();
        }
        let mean0 = [2.0, 3.0];
        let mean1 = [(-1.0 - 3.0 + 0.5) / 3.0, (-1.0 + 1.0 + 0.5) / 3.0];
        for (e, m) in ema.codebook().entry(0).iter().zip(mean0) {
            assert!((e - m).abs() <= 1e-6);
        }
        for (e, m) in ema.codebook().entry(1).iter().zip(mean1) {
            assert!((e - m).abs() <= 1e-6);
        }
        assert_eq!(ema.codebook().entry(2), &[0.0, 9.0]);
    }

    #[test]
    fn only_assigned_entry_moves() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64; 3]).collect();
        let cb = Codebook::from_rows(&rows).unwrap();
        let mut ema = EmaCodebook::new(cb.clone(), None);
        ema.update(&[10.0; 9], &[3, 3, 3], 0.5).unwrap();
        for j in 0..5 {
            if j == 3 {
                assert_ne!(ema.codebook().entry(j), cb.entry(j));
            } else {
                assert_eq!(ema.codebook().entry(j), cb.entry(j));
            }
        }
        // unassigned counts still decay
        assert_eq!(ema.counts()[0], 0.5);
    }

    #[test]
    fn slow_decay_barely_moves() {
        let cb = Codebook::from_rows(&[vec![0.0, 0.0]]).unwrap();
        let mut prev = f64::INFINITY;
        for decay in [0.9, 0.99, 0.999, 0.9999] {
            let mut ema = EmaCodebook::new(cb.clone(), None);
            ema.update(&[3.0, 4.0], &[0], decay).unwrap();
            let shift = ema
                .codebook()
                .entry(0)
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt();
            assert!(shift <= (1.0 - decay) * 5.0 / decay + 1e-12);
            assert!(shift < prev);
            prev = shift;
        }
    }

    #[test]
    fn pinned_entry_never_moves() {
        let cb = Codebook::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let mut ema = EmaCodebook::new(cb, Some(0));
        ema.update(&[0.5, 0.7], &[0, 1], 0.5).unwrap();
        assert_eq!(ema.codebook().entry(0), &[0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let replaced = ema.reseed(&[0, 10], &[3.0, 4.0], 0.5, &mut rng).unwrap();
        assert!(replaced.is_empty());
    }

    #[test]
    fn reseed_leaves_live_codes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64, 1.0]).collect();
        let mut cb = Codebook::from_rows(&rows).unwrap();
        let before = cb.clone();
        let out =
            reseed_dead_codes(&mut cb, &[5, 5, 5, 5], &[9.0, 9.0], 1e-3, None, &mut rng).unwrap();
        assert!(out.is_empty());
        assert_eq!(cb, before);

        let out =
            reseed_dead_codes(&mut cb, &[5, 0, 5, 5], &[9.0, 9.0], 1e-3, None, &mut rng).unwrap();
        assert_eq!(out, vec![1]);
        for j in [0, 2, 3] {
            assert_eq!(cb.entry(j), before.entry(j));
        }
        assert!(cb.entry(1).iter().all(|v| (v - 9.0).abs() < 1e-2));
    }

    #[test]
    fn reseeded_entries_are_distinct() {
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut cb = Codebook::zeros(8, 2);
            // one live entry; the same data row is the only reseed source
            cb.entry_mut(0).copy_from_slice(&[1.0, 1.0]);
            let mut usage = vec![0u64; 8];
            usage[0] = 100;
            reseed_dead_codes(&mut cb, &usage, &[1.0, 1.0], 1e-3, None, &mut rng).unwrap();
            for a in 0..8 {
                for b in a + 1..8 {
                    assert_ne!(cb.entry(a), cb.entry(b), "seed {seed}: {a} == {b}");
                }
            }
        }
    }
}
