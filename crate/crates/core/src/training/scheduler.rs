use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Decides per training batch whether stage 1 is anchored to the enhanced
/// embedding.
///
/// Before `delay_steps` the answer is always `false` and no randomness is
/// consumed. Afterwards every call draws one uniform and fires when it falls
/// below `p_enh`, so schedulers that differ only in `p_enh` see the same
/// uniform stream.
#[derive(Debug, Clone)]
pub struct EnhancementScheduler {
    p_enh: f64,
    delay_steps: usize,
    rng: ChaCha8Rng,
}

impl EnhancementScheduler {
    pub fn new(p_enh: f64, delay_steps: usize, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_enh) {
            return Err(Error::Config(format!(
                "p_enh must lie in [0, 1], got {p_enh}"
            )));
        }
        Ok(Self {
            p_enh,
            delay_steps,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn p_enh(&self) -> f64 {
        self.p_enh
    }

    pub fn delay_steps(&self) -> usize {
        self.delay_steps
    }

    pub fn should_use_enhanced(&mut self, step: usize) -> bool {
        if step < self.delay_steps {
            return false;
        }
        self.rng.random::<f64>() < self.p_enh
    }
}
