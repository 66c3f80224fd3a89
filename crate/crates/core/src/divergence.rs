//! Pairwise cosine similarity among an item's reasoning-trace embeddings and
//! the per-item aggregates (mean similarity, minimum similarity, divergence).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::EmbeddingVector;

#[derive(Debug, Error)]
pub enum DivergenceError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("zero-norm vector (providers must emit unit vectors)")]
    ZeroNorm,
    #[error("need at least 2 vectors to summarize, got {0}")]
    TooFewVectors(usize),
}

/// Per-item similarity structure.
///
/// `pair_sims_upper` holds the strict upper triangle of the symmetric N x N
/// pairwise matrix, flattened in (i, j) lexicographic order with i < j; the
/// diagonal is 1 by definition. `divergence` is exactly `1 - s_mean`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilaritySummary {
    pub item_id: String,
    pub n_traces: usize,
    pub pair_sims_upper: Vec<f64>,
    pub s_mean: f64,
    pub s_min: f64,
    pub divergence: f64,
}

impl SimilaritySummary {
    /// Similarity between traces `i` and `j` (symmetric, unit diagonal).
    pub fn pair(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 1.0;
        }
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        let n = self.n_traces;
        let idx = lo * (2 * n - lo - 1) / 2 + (hi - lo - 1);
        self.pair_sims_upper[idx]
    }

    pub fn n_pairs(&self) -> usize {
        self.n_traces * (self.n_traces - 1) / 2
    }
}

/// Cosine similarity, clamped into [-1, 1] against rounding overshoot.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, DivergenceError> {
    if a.values.len() != b.values.len() {
        return Err(DivergenceError::DimensionMismatch {
            left: a.values.len(),
            right: b.values.len(),
        });
    }
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.values.iter().zip(b.values.iter()) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(DivergenceError::ZeroNorm);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// Summarize a panel's trace vectors into the per-item similarity aggregates.
///
/// Pairs are visited in fixed (i, j) lexicographic order so stored results
/// replay bit-for-bit across runs and thread counts.
pub fn summarize(
    item_id: &str,
    vectors: &[EmbeddingVector],
) -> Result<SimilaritySummary, DivergenceError> {
    let n = vectors.len();
    if n < 2 {
        return Err(DivergenceError::TooFewVectors(n));
    }
    let mut upper = Vec::with_capacity(n * (n - 1) / 2);
    let mut sum = 0.0;
    let mut min = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            let s = cosine(&vectors[i], &vectors[j])?;
            upper.push(s);
            sum += s;
            if s < min {
                min = s;
            }
        }
    }
    let s_mean = sum / upper.len() as f64;
    Ok(SimilaritySummary {
        item_id: item_id.to_string(),
        n_traces: n,
        pair_sims_upper: upper,
        s_mean,
        s_min: min,
        divergence: 1.0 - s_mean,
    })
}
