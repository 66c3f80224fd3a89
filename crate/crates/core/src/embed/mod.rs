//! Trace embedding behind a pluggable provider, with a persistent cache.
//!
//! Providers normalize every vector to unit norm on output, so downstream
//! cosine similarity reduces to a dot product and thresholds never see
//! out-of-range values. Degenerate (zero-norm) outputs are repaired to the
//! unit basis vector at index 0 rather than aborting a batch; each repair is
//! logged.

mod cache;
mod hash;
mod remote;

pub use cache::EmbeddingCache;
pub use hash::{hash_embed, HashProvider};
pub use remote::RemoteProvider;

use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hashing::text_hash;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dimension must be >= 2, got {0}")]
    InvalidDimension(usize),
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("cache miss for provider {provider_id}, text hash {text_hash:#018x} (stored provider has no backing model)")]
    CacheMiss { provider_id: String, text_hash: u64 },
    #[error("api key environment variable {0} is not set")]
    MissingApiKey(String),
    #[error("embedding transport failure: {0}")]
    Transport(String),
    #[error("invalid embedding response: {0}")]
    InvalidResponse(String),
    #[error("embedding cache io: {0}")]
    Io(#[from] std::io::Error),
    #[error("embedding cache parse: {0}")]
    Parse(String),
}

/// A unit-norm embedding of one text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub provider_id: String,
    pub text_hash: u64,
}

/// Backing model for the embedder. `embed_batch` returns one raw vector per
/// input text; normalization happens in [`Embedder`].
pub trait EmbeddingProvider: Send + Sync {
    fn id(&self) -> &str;
    fn dimension(&self) -> usize;
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError>;
}

/// Cache-only provider used when vectors were precomputed (synthetic runs).
/// Any cache miss is fatal.
pub struct StoredProvider {
    id: String,
    dimension: usize,
}

impl StoredProvider {
    pub fn new(dimension: usize) -> Result<Self, EmbedError> {
        if dimension < 2 {
            return Err(EmbedError::InvalidDimension(dimension));
        }
        Ok(Self {
            id: Self::provider_id(dimension),
            dimension,
        })
    }

    pub fn provider_id(dimension: usize) -> String {
        format!("stored/v1/d={dimension}")
    }
}

impl EmbeddingProvider for StoredProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        Err(EmbedError::CacheMiss {
            provider_id: self.id.clone(),
            text_hash: texts.first().map(|t| text_hash(t)).unwrap_or(0),
        })
    }
}

/// Rescale to unit norm; a zero vector becomes the basis vector at index 0.
/// Returns true when the zero-vector repair fired.
pub(crate) fn normalize_or_basis(values: &mut [f64]) -> bool {
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in values.iter_mut() {
            *v /= norm;
        }
        false
    } else {
        for v in values.iter_mut() {
            *v = 0.0;
        }
        values[0] = 1.0;
        true
    }
}

/// Provider plus cache. Lookups are keyed by `(provider_id, text_hash)`;
/// values are deterministic per provider, so a last-write-wins cache is safe.
pub struct Embedder {
    provider: Box<dyn EmbeddingProvider>,
    cache: Mutex<EmbeddingCache>,
    batch_size: usize,
}

impl Embedder {
    pub fn new(
        provider: Box<dyn EmbeddingProvider>,
        cache: EmbeddingCache,
        batch_size: usize,
    ) -> Result<Self, EmbedError> {
        cache.check_dimension(provider.id(), provider.dimension())?;
        Ok(Self {
            provider,
            cache: Mutex::new(cache),
            batch_size: batch_size.max(1),
        })
    }

    pub fn provider_id(&self) -> String {
        self.provider.id().to_string()
    }

    pub fn dimension(&self) -> usize {
        self.provider.dimension()
    }

    /// Embed one text (cached).
    pub fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        Ok(self.embed_all(&[text])?.pop().expect("one input, one output"))
    }

    /// Embed many texts, deduplicating repeats and batching cache misses.
    /// Output order matches input order.
    pub fn embed_all(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        if texts.iter().any(|t| t.is_empty()) {
            return Err(EmbedError::EmptyText);
        }
        let provider_id = self.provider.id().to_string();
        let dim = self.provider.dimension();

        // First-occurrence order for misses keeps cache appends deterministic.
        let mut misses: Vec<&str> = Vec::new();
        {
            let cache = self.cache.lock().expect("cache lock");
            let mut seen = std::collections::BTreeSet::new();
            for &t in texts {
                let h = text_hash(t);
                if cache.get(&provider_id, h).is_none() && seen.insert(h) {
                    misses.push(t);
                }
            }
        }

        for chunk in misses.chunks(self.batch_size) {
            let raw = self.provider.embed_batch(chunk)?;
            if raw.len() != chunk.len() {
                return Err(EmbedError::InvalidResponse(format!(
                    "provider returned {} vectors for {} texts",
                    raw.len(),
                    chunk.len()
                )));
            }
            let mut cache = self.cache.lock().expect("cache lock");
            for (&text, mut values) in chunk.iter().zip(raw.into_iter()) {
                if values.len() != dim {
                    return Err(EmbedError::DimensionMismatch {
                        expected: dim,
                        got: values.len(),
                    });
                }
                if normalize_or_basis(&mut values) {
                    log::warn!(
                        "zero-norm embedding repaired to basis vector (text hash {:#018x})",
                        text_hash(text)
                    );
                }
                cache.insert(&provider_id, text_hash(text), values)?;
            }
        }

        let cache = self.cache.lock().expect("cache lock");
        texts
            .iter()
            .map(|&t| {
                let h = text_hash(t);
                let values = cache.get(&provider_id, h).ok_or(EmbedError::CacheMiss {
                    provider_id: provider_id.clone(),
                    text_hash: h,
                })?;
                if values.len() != dim {
                    return Err(EmbedError::DimensionMismatch {
                        expected: dim,
                        got: values.len(),
                    });
                }
                Ok(EmbeddingVector {
                    values: values.to_vec(),
                    provider_id: provider_id.clone(),
                    text_hash: h,
                })
            })
            .collect()
    }
}
