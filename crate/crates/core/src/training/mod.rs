//! Codebook learning for the quantizer stack.
//!
//! Training is stage-wise k-means initialization followed by EMA updates on
//! batches of frames drawn from the whole dataset. Each batch draws its
//! active stream count from the dropout levels and asks the
//! [`EnhancementScheduler`] whether stage 1 is anchored to the enhanced
//! embedding for that batch.

mod ema;
mod kmeans;
mod scheduler;

pub use ema::{reseed_dead_codes, EmaCodebook, EMA_EPS, RESEED_NOISE};
pub use kmeans::{kmeans_init, KMeans};
pub use scheduler::EnhancementScheduler;

use crate::entropy::perplexity;
use crate::error::{Error, Result};
use crate::frontend::EmbeddingSequence;
use crate::rvq::{
    apply_quantizer_dropout, nearest_code, quantize, quantize_pure, squared_distance, Codebook,
    QuantizationResult, QuantizerStack,
};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub stages: usize,
    pub codebook_size: usize,
    /// Commitment weight.
    pub beta: f64,
    pub ema_decay: f64,
    pub p_enh: f64,
    pub delay_steps: usize,
    pub kmeans_iters: usize,
    /// Minimum usage fraction below which an entry is reseeded.
    pub reseed_threshold: f64,
    /// Steps between reseeding passes.
    pub reseed_interval: usize,
    pub dropout_levels: Vec<usize>,
    pub steps: usize,
    pub batch_frames: usize,
    /// Upper bound on frames fed to k-means per stage.
    pub init_max_frames: usize,
    /// Reserve entry 0 of every stage after the first as a fixed zero vector.
    pub zero_augment: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::desk_scale()
    }
}

impl TrainConfig {
    /// L = 8, B = 64.
    pub fn desk_scale() -> Self {
        Self::with_geometry(8, 64)
    }

    /// L = 8, B = 1024.
    pub fn large_scale() -> Self {
        Self::with_geometry(8, 1024)
    }

    pub fn with_geometry(stages: usize, codebook_size: usize) -> Self {
        Self {
            stages,
            codebook_size,
            beta: 0.25,
            ema_decay: 0.99,
            p_enh: 0.5,
            delay_steps: 0,
            kmeans_iters: 20,
            reseed_threshold: 1e-3,
            reseed_interval: 50,
            dropout_levels: default_dropout_levels(stages),
            steps: 500,
            batch_frames: 256,
            init_max_frames: 20_000,
            zero_augment: true,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.stages == 0 {
            return fail("stages must be at least 1".into());
        }
        if self.codebook_size == 0 {
            return fail("codebook_size must be at least 1".into());
        }
        if self.zero_augment && self.stages > 1 && self.codebook_size < 2 {
            return fail("zero_augment needs codebook_size >= 2".into());
        }
        if !(0.0..=1.0).contains(&self.p_enh) {
            return fail(format!("p_enh must lie in [0, 1], got {}", self.p_enh));
        }
        if !(self.ema_decay > 0.0 && self.ema_decay < 1.0) {
            return fail(format!(
                "ema_decay must lie in (0, 1), got {}",
                self.ema_decay
            ));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return fail(format!("beta must be non-negative, got {}", self.beta));
        }
        if !(0.0..=1.0).contains(&self.reseed_threshold) {
            return fail(format!(
                "reseed_threshold must lie in [0, 1], got {}",
                self.reseed_threshold
            ));
        }
        if self.reseed_interval == 0 {
            return fail("reseed_interval must be positive".into());
        }
        if self.batch_frames == 0 {
            return fail("batch_frames must be positive".into());
        }
        if self.dropout_levels.is_empty() {
            return Err(Error::EmptyLevels);
        }
        if let Some(&bad) = self
            .dropout_levels
            .iter()
            .find(|&&l| l == 0 || l > self.stages)
        {
            return fail(format!("dropout level {bad} outside 1..={}", self.stages));
        }
        Ok(())
    }
}

/// Powers of two below `stages`, then `stages` itself.
pub fn default_dropout_levels(stages: usize) -> Vec<usize> {
    let mut levels: Vec<usize> = std::iter::successors(Some(1usize), |l| Some(l * 2))
        .take_while(|&l| l < stages)
        .collect();
    levels.push(stages.max(1));
    levels
}

/// Diagnostics for one training step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub streams_used: usize,
    pub anchored: bool,
    /// Commitment loss over all stages on this batch, before the update, with
    /// the batch quantized by plain RVQ whatever the anchor decision.
    pub commitment_loss: f64,
    /// Mean squared distance of the stage-1 output to the enhanced embedding.
    pub enhanced_distance: f64,
    /// Mean squared distance of the stage-1 output to the original embedding.
    pub original_distance: f64,
    pub perplexity: Vec<f64>,
    pub reseeded: Vec<usize>,
    #[serde(skip)]
    pub usage: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub steps: Vec<StepRecord>,
    /// k-means within-cluster sum-of-squares trace for each stage.
    pub init_wcss: Vec<Vec<f64>>,
}

impl TrainLog {
    pub fn anchor_fraction(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        self.steps.iter().filter(|s| s.anchored).count() as f64 / self.steps.len() as f64
    }

    /// Mean commitment loss over the first and last `fraction` of steps.
    pub fn loss_head_tail(&self, fraction: f64) -> (f64, f64) {
        let n = self.steps.len();
        let k = ((n as f64 * fraction).ceil() as usize).clamp(1, n.max(1));
        let mean = |s: &[StepRecord]| {
            s.iter().map(|r| r.commitment_loss).sum::<f64>() / s.len().max(1) as f64
        };
        (
            mean(&self.steps[..k.min(n)]),
            mean(&self.steps[n - k.min(n)..]),
        )
    }

    /// One JSON object per step.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            out.push_str(&serde_json::to_string(s).expect("step record serializes"));
            out.push('\n');
        }
        out
    }
}

/// `sum_l (1 + beta) * mean_t |q_t - M_t^l|^2` over the used stages.
///
/// With a fixed encoder the two stop-gradient terms have equal value.
pub fn commitment_loss(
    emb: &EmbeddingSequence,
    result: &QuantizationResult,
    stack: &QuantizerStack,
    beta: f64,
) -> Result<f64> {
    if emb.dim() != stack.dim() {
        return Err(Error::DimensionMismatch {
            expected: stack.dim(),
            actual: emb.dim(),
        });
    }
    if result.frames() != emb.frames() || result.streams_used > stack.num_stages() {
        return Err(Error::ShapeMismatch(
            "quantization result does not match embeddings".into(),
        ));
    }
    let frames = emb.frames();
    if frames == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    let mut partial = vec![0.0; emb.dim()];
    for t in 0..frames {
        partial.iter_mut().for_each(|p| *p = 0.0);
        for l in 0..result.streams_used {
            let code = stack.stage(l).entry(result.indices[l][t] as usize);
            for (p, c) in partial.iter_mut().zip(code) {
                *p += c;
            }
            total += squared_distance(emb.frame(t), &partial);
        }
    }
    Ok((1.0 + beta) * total / frames as f64)
}

fn check_dataset(dataset: &[(EmbeddingSequence, EmbeddingSequence)]) -> Result<usize> {
    let (first, _) = dataset.first().ok_or(Error::Empty("training dataset"))?;
    let dim = first.dim();
    for (i, (q, e)) in dataset.iter().enumerate() {
        if q.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: q.dim(),
            });
        }
        if !q.same_shape(e) {
            return Err(Error::ShapeMismatch(format!(
                "utterance {i}: embeddings {}x{} vs enhanced {}x{}",
                q.dim(),
                q.frames(),
                e.dim(),
                e.frames()
            )));
        }
    }
    Ok(dim)
}

/// Sequential k-means initialization of every stage.
///
/// Stage 1 clusters the anchor frames; stage `l` clusters the residuals
/// left by the already-initialized stages `1..l`.
fn init_stack(
    dataset: &[(EmbeddingSequence, EmbeddingSequence)],
    use_enhanced: &[bool],
    cfg: &TrainConfig,
    dim: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<Codebook>, Vec<Vec<f64>>)> {
    // (utterance, frame) pool, subsampled if large
    let mut pool: Vec<(usize, usize)> = dataset
        .iter()
        .enumerate()
        .flat_map(|(u, (q, _))| (0..q.frames()).map(move |t| (u, t)))
        .collect();
    if pool.len() > cfg.init_max_frames {
        let mut keep = index::sample(rng, pool.len(), cfg.init_max_frames).into_vec();
        keep.sort_unstable();
        pool = keep.into_iter().map(|i| pool[i]).collect();
    }

    let mut residual: Vec<f64> = Vec::with_capacity(pool.len() * dim);
    let mut anchors: Vec<f64> = Vec::with_capacity(pool.len() * dim);
    for &(u, t) in &pool {
        let (q, e) = &dataset[u];
        residual.extend_from_slice(q.frame(t));
        anchors.extend_from_slice(if use_enhanced[u] {
            e.frame(t)
        } else {
            q.frame(t)
        });
    }

    let mut stages = Vec::with_capacity(cfg.stages);
    let mut traces = Vec::with_capacity(cfg.stages);
    for l in 0..cfg.stages {
        let pinned = cfg.zero_augment && l > 0;
        let learned = if pinned {
            cfg.codebook_size - 1
        } else {
            cfg.codebook_size
        };
        let data = if l == 0 { &anchors } else { &residual };
        let km = kmeans_init(data, dim, learned, cfg.kmeans_iters, rng.random())?;
        let codebook = if pinned {
            let mut entries = vec![0.0; dim];
            entries.extend_from_slice(km.codebook.as_slice());
            Codebook::new(entries, dim)?
        } else {
            km.codebook
        };
        for (i, r) in residual.chunks_exact_mut(dim).enumerate() {
            let target = if l == 0 {
                &anchors[i * dim..(i + 1) * dim]
            } else {
                &r[..]
            };
            let (_, code) = nearest_code(target, &codebook)?;
            let code = code.to_vec();
            r.iter_mut().zip(&code).for_each(|(x, c)| *x -= c);
        }
        traces.push(km.wcss);
        stages.push(codebook);
    }
    Ok((stages, traces))
}

/// Collects the chosen `(utterance, frame)` pairs into one batch.
fn gather(
    dataset: &[(EmbeddingSequence, EmbeddingSequence)],
    frame_index: &[(usize, usize)],
    picks: impl Iterator<Item = usize>,
) -> Result<(EmbeddingSequence, EmbeddingSequence)> {
    let (first, _) = &dataset[0];
    let (dim, hop) = (first.dim(), first.hop());
    let mut q = Vec::new();
    let mut e = Vec::new();
    let mut frames = 0;
    for i in picks {
        let (u, t) = frame_index[i];
        q.extend_from_slice(dataset[u].0.frame(t));
        e.extend_from_slice(dataset[u].1.frame(t));
        frames += 1;
    }
    Ok((
        EmbeddingSequence::new(q, dim, frames, hop)?,
        EmbeddingSequence::new(e, dim, frames, hop)?,
    ))
}

/// Trains a quantizer stack on `(embedding, enhanced embedding)` pairs.
pub fn train_stack(
    dataset: &[(EmbeddingSequence, EmbeddingSequence)],
    cfg: &TrainConfig,
) -> Result<(QuantizerStack, TrainLog)> {
    cfg.validate()?;
    let dim = check_dataset(dataset)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut sched_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    sched_rng.set_stream(1);
    let mut scheduler = EnhancementScheduler::new(cfg.p_enh, cfg.delay_steps, sched_rng.random())?;

    // initialization is treated as step 0 of the schedule, one decision per utterance
    let init_anchor: Vec<bool> = dataset
        .iter()
        .map(|_| scheduler.should_use_enhanced(0))
        .collect();
    let (stages, init_wcss) = init_stack(dataset, &init_anchor, cfg, dim, &mut rng)?;
    let mut emas: Vec<EmaCodebook> = stages
        .into_iter()
        .enumerate()
        .map(|(l, cb)| EmaCodebook::new(cb, (cfg.zero_augment && l > 0).then_some(0)))
        .collect();

    let mut log = TrainLog {
        steps: Vec::with_capacity(cfg.steps),
        init_wcss,
    };
    let mut window_usage = vec![vec![0u64; cfg.codebook_size]; cfg.stages];

    let frame_index: Vec<(usize, usize)> = dataset
        .iter()
        .enumerate()
        .flat_map(|(u, (q, _))| (0..q.frames()).map(move |t| (u, t)))
        .collect();
    if frame_index.is_empty() {
        return Err(Error::Empty("training frames"));
    }
    let len = cfg.batch_frames.min(frame_index.len());

    for step in 0..cfg.steps {
        let picks = index::sample(&mut rng, frame_index.len(), len);
        let (q, e) = gather(dataset, &frame_index, picks.iter())?;
        let streams = apply_quantizer_dropout(&mut rng, &cfg.dropout_levels)?;
        let anchored = scheduler.should_use_enhanced(step);

        let stack = QuantizerStack::new(emas.iter().map(|m| m.codebook().clone()).collect())?;
        // full-depth chain; the first `streams` rows are the training assignments
        let result = if anchored {
            quantize_pure(&q, &e, &stack, cfg.stages)?
        } else {
            quantize(&q, &stack, cfg.stages)?
        };
        let loss = if anchored {
            commitment_loss(&q, &quantize(&q, &stack, cfg.stages)?, &stack, cfg.beta)?
        } else {
            commitment_loss(&q, &result, &stack, cfg.beta)?
        };

        let stage1 = stack.stage(0);
        let (mut enh_d, mut orig_d) = (0.0, 0.0);
        for (t, &j) in result.indices[0].iter().enumerate() {
            enh_d += squared_distance(stage1.entry(j as usize), e.frame(t));
            orig_d += squared_distance(stage1.entry(j as usize), q.frame(t));
        }

        let mut usage = Vec::with_capacity(streams);
        let mut perplexities = Vec::with_capacity(streams);
        let mut stage_input: Vec<f64> = if anchored {
            e.as_slice().to_vec()
        } else {
            q.as_slice().to_vec()
        };
        let mut residual = q.as_slice().to_vec();
        let mut inputs = Vec::with_capacity(streams);
        for l in 0..streams {
            if l > 0 {
                stage_input.copy_from_slice(&residual);
            }
            let assignments = &result.indices[l];
            let mut hist = vec![0u64; cfg.codebook_size];
            for (t, &j) in assignments.iter().enumerate() {
                hist[j as usize] += 1;
                let code = stack.stage(l).entry(j as usize);
                residual[t * dim..(t + 1) * dim]
                    .iter_mut()
                    .zip(code)
                    .for_each(|(r, c)| *r -= c);
            }
            for (w, h) in window_usage[l].iter_mut().zip(&hist) {
                *w += h;
            }
            perplexities.push(perplexity(&hist)?);
            usage.push(hist);
            inputs.push(stage_input.clone());
        }
        for (l, input) in inputs.iter().enumerate() {
            emas[l].update(input, &result.indices[l], cfg.ema_decay)?;
        }

        let mut reseeded = Vec::new();
        if (step + 1) % cfg.reseed_interval == 0 {
            for (l, ema) in emas.iter_mut().enumerate() {
                let data = match inputs.get(l) {
                    Some(d) => d,
                    None => continue,
                };
                let replaced =
                    ema.reseed(&window_usage[l], data, cfg.reseed_threshold, &mut rng)?;
                reseeded.extend(replaced.into_iter().map(|j| l * cfg.codebook_size + j));
            }
            window_usage
                .iter_mut()
                .for_each(|w| w.iter_mut().for_each(|c| *c = 0));
        }

        log.steps.push(StepRecord {
            step,
            streams_used: streams,
            anchored,
            commitment_loss: loss,
            enhanced_distance: enh_d / len as f64,
            original_distance: orig_d / len as f64,
            perplexity: perplexities,
            reseeded,
            usage,
        });
    }

    let stack = QuantizerStack::new(emas.into_iter().map(EmaCodebook::into_codebook).collect())?;
    Ok((stack, log))
}
