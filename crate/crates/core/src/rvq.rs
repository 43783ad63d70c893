//! Residual vector quantization.
//!
//! Plain RVQ picks, for every frame and stage, the codeword nearest to the
//! running residual and subtracts it. The anchored variant picks the first
//! stage codeword against an enhanced embedding but still subtracts it from
//! the original embedding, so later stages see `q - b` rather than `q~ - b`.
//!
//! Indices are 0-based here. Reports that need the 1-based convention add one.

use crate::error::{Error, Result};
use crate::frontend::EmbeddingSequence;
use rand::Rng;

/// `B` codewords of dimension `D`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    entries: Vec<f64>,
    dim: usize,
}

impl Codebook {
    pub fn new(entries: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("codebook dim must be positive".into()));
        }
        if entries.is_empty() {
            return Err(Error::EmptyCodebook);
        }
        if !entries.len().is_multiple_of(dim) {
            return Err(Error::ShapeMismatch(format!(
                "{} values is not a multiple of dim {dim}",
                entries.len()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("codebook"));
        }
        Ok(Self { entries, dim })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).ok_or(Error::EmptyCodebook)?;
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: bad.len(),
            });
        }
        Self::new(rows.concat(), dim)
    }

    pub fn zeros(size: usize, dim: usize) -> Self {
        Self {
            entries: vec![0.0; size * dim],
            dim,
        }
    }

    pub fn size(&self) -> usize {
        self.entries.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, j: usize) -> &[f64] {
        &self.entries[j * self.dim..(j + 1) * self.dim]
    }

    pub fn entry_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.entries[j * self.dim..(j + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.entries.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }
}

/// Ordered codebooks sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerStack {
    stages: Vec<Codebook>,
    dim: usize,
}

impl QuantizerStack {
    pub fn new(stages: Vec<Codebook>) -> Result<Self> {
        let dim = stages
            .first()
            .map(Codebook::dim)
            .ok_or_else(|| Error::Config("quantizer stack needs at least one stage".into()))?;
        if let Some(bad) = stages.iter().find(|s| s.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: bad.dim(),
            });
        }
        Ok(Self { stages, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_stages(&self) -> usize {
        self.stages.len()
    }

    pub fn stage(&self, l: usize) -> &Codebook {
        &self.stages[l]
    }

    pub fn stages(&self) -> &[Codebook] {
        &self.stages
    }

    pub fn stages_mut(&mut self) -> &mut [Codebook] {
        &mut self.stages
    }

    /// Codebook size when every stage has the same number of entries.
    pub fn uniform_size(&self) -> Option<usize> {
        let b = self.stages[0].size();
        self.stages.iter().all(|s| s.size() == b).then_some(b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizationResult {
    /// `indices[l][t]`, one row per used stage.
    pub indices: Vec<Vec<u32>>,
    pub streams_used: usize,
    /// Mean over frames of `|r_t^l|^2`, one value per used stage.
    pub residual_energy: Vec<f64>,
    /// `|r_t^l|^2` per stage and frame.
    pub frame_residual_energy: Vec<Vec<f64>>,
    /// Stage 1 was chosen against an enhanced anchor.
    pub anchored: bool,
}

impl QuantizationResult {
    pub fn frames(&self) -> usize {
        self.indices.first().map_or(0, Vec::len)
    }

    /// Keeps the first `streams` stages.
    pub fn truncated(&self, streams: usize) -> Result<Self> {
        if streams == 0 || streams > self.streams_used {
            return Err(Error::StreamsOutOfRange {
                requested: streams,
                available: self.streams_used,
            });
        }
        Ok(Self {
            indices: self.indices[..streams].to_vec(),
            streams_used: streams,
            residual_energy: self.residual_energy[..streams].to_vec(),
            frame_residual_energy: self.frame_residual_energy[..streams].to_vec(),
            anchored: self.anchored,
        })
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the codeword nearest to `residual`; ties go to the lowest index.
pub fn nearest_code<'a>(residual: &[f64], codebook: &'a Codebook) -> Result<(usize, &'a [f64])> {
    if codebook.size() == 0 {
        return Err(Error::EmptyCodebook);
    }
    if residual.len() != codebook.dim() {
        return Err(Error::DimensionMismatch {
            expected: codebook.dim(),
            actual: residual.len(),
        });
    }
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (j, entry) in codebook.iter().enumerate() {
        let d = squared_distance(residual, entry);
        if d < best_dist {
            best_dist = d;
            best = j;
        }
    }
    Ok((best, codebook.entry(best)))
}

fn check_streams(stack: &QuantizerStack, n_streams: usize) -> Result<()> {
    if n_streams == 0 || n_streams > stack.num_stages() {
        return Err(Error::StreamsOutOfRange {
            requested: n_streams,
            available: stack.num_stages(),
        });
    }
    Ok(())
}

fn check_dim(emb: &EmbeddingSequence, stack: &QuantizerStack) -> Result<()> {
    if emb.dim() != stack.dim() {
        return Err(Error::DimensionMismatch {
            expected: stack.dim(),
            actual: emb.dim(),
        });
    }
    Ok(())
}

/// Shared greedy chain. `anchor` supplies the stage-1 selection target.
fn run_chain(
    emb: &EmbeddingSequence,
    anchor: Option<&EmbeddingSequence>,
    stack: &QuantizerStack,
    n_streams: usize,
) -> Result<QuantizationResult> {
    let frames = emb.frames();
    let mut indices = vec![Vec::with_capacity(frames); n_streams];
    let mut frame_energy = vec![Vec::with_capacity(frames); n_streams];
    let mut residual = vec![0.0; emb.dim()];

    for t in 0..frames {
        residual.copy_from_slice(emb.frame(t));
        for l in 0..n_streams {
            let target = match (l, anchor) {
                (0, Some(a)) => a.frame(t),
                _ => &residual[..],
            };
            let (j, code) = nearest_code(target, stack.stage(l))?;
            for (r, c) in residual.iter_mut().zip(code) {
                *r -= c;
            }
            indices[l].push(j as u32);
            frame_energy[l].push(residual.iter().map(|r| r * r).sum());
        }
    }

    let residual_energy = frame_energy
        .iter()
        .map(|e| {
            if frames == 0 {
                0.0
            } else {
                e.iter().sum::<f64>() / frames as f64
            }
        })
        .collect();
    Ok(QuantizationResult {
        indices,
        streams_used: n_streams,
        residual_energy,
        frame_residual_energy: frame_energy,
        anchored: anchor.is_some(),
    })
}

/// Plain RVQ over the first `n_streams` stages.
pub fn quantize(
    emb: &EmbeddingSequence,
    stack: &QuantizerStack,
    n_streams: usize,
) -> Result<QuantizationResult> {
    check_streams(stack, n_streams)?;
    check_dim(emb, stack)?;
    run_chain(emb, None, stack, n_streams)
}

/// RVQ with stage 1 selected against `enhanced` and the residual taken
/// against `emb`.
pub fn quantize_pure(
    emb: &EmbeddingSequence,
    enhanced: &EmbeddingSequence,
    stack: &QuantizerStack,
    n_streams: usize,
) -> Result<QuantizationResult> {
    check_streams(stack, n_streams)?;
    check_dim(emb, stack)?;
    if !emb.same_shape(enhanced) {
        return Err(Error::ShapeMismatch(format!(
            "embeddings {}x{} vs enhanced {}x{}",
            emb.dim(),
            emb.frames(),
            enhanced.dim(),
            enhanced.frames()
        )));
    }
    run_chain(emb, Some(enhanced), stack, n_streams)
}

/// Sum of the selected codewords of stages `1..=upto` for every frame.
pub fn partial_reconstruct(
    result: &QuantizationResult,
    stack: &QuantizerStack,
    upto: usize,
    hop: usize,
) -> Result<EmbeddingSequence> {
    if upto == 0 || upto > result.streams_used || upto > stack.num_stages() {
        return Err(Error::StreamsOutOfRange {
            requested: upto,
            available: result.streams_used.min(stack.num_stages()),
        });
    }
    reconstruct(&result.indices[..upto], stack, hop)
}

/// Sum over the given index rows, row `l` addressing stage `l`.
pub fn reconstruct(
    indices: &[Vec<u32>],
    stack: &QuantizerStack,
    hop: usize,
) -> Result<EmbeddingSequence> {
    if indices.is_empty() || indices.len() > stack.num_stages() {
        return Err(Error::StreamsOutOfRange {
            requested: indices.len(),
            available: stack.num_stages(),
        });
    }
    let frames = indices[0].len();
    if indices.iter().any(|row| row.len() != frames) {
        return Err(Error::ShapeMismatch("ragged index rows".into()));
    }
    let mut out = EmbeddingSequence::zeros(stack.dim(), frames, hop);
    for (l, row) in indices.iter().enumerate() {
        let codebook = stack.stage(l);
        for (t, &j) in row.iter().enumerate() {
            let j = j as usize;
            if j >= codebook.size() {
                return Err(Error::IndexOutOfRange {
                    index: j as u32,
                    size: codebook.size(),
                });
            }
            for (o, c) in out.frame_mut(t).iter_mut().zip(codebook.entry(j)) {
                *o += c;
            }
        }
    }
    Ok(out)
}

/// Draws the number of active streams for one utterance.
pub fn apply_quantizer_dropout<R: Rng + ?Sized>(rng: &mut R, levels: &[usize]) -> Result<usize> {
    if levels.is_empty() {
        return Err(Error::EmptyLevels);
    }
    Ok(levels[rng.random_range(0..levels.len())])
}
