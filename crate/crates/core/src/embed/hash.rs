//! Deterministic signed bag-of-tokens hashing embedder.
//!
//! The offline test provider: no model, no network, bit-identical across
//! platforms. Texts are lowercased and split into maximal alphanumeric runs;
//! each token hashes to a coordinate in [0, d) and a sign, signed counts
//! accumulate, and the result is L2-normalized.

use super::{normalize_or_basis, EmbedError, EmbeddingProvider, EmbeddingVector};
use crate::hashing::{fnv1a64, text_hash};

pub struct HashProvider {
    id: String,
    dimension: usize,
}

impl HashProvider {
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
        format!("hash/v1/d={dimension}")
    }
}

impl EmbeddingProvider for HashProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        Ok(texts
            .iter()
            .map(|t| hash_embed(t, self.dimension).values)
            .collect())
    }
}

/// Embed a text into `d` dimensions by signed token hashing.
///
/// Requires `d >= 2`. A text with no alphanumeric tokens (or exact sign
/// cancellation) yields the unit basis vector at index 0.
pub fn hash_embed(text: &str, d: usize) -> EmbeddingVector {
    assert!(d >= 2, "hash_embed requires d >= 2");
    let mut values = vec![0.0f64; d];
    let lowered = text.to_lowercase();
    for token in lowered.split(|c: char| !c.is_alphanumeric()) {
        if token.is_empty() {
            continue;
        }
        let h = fnv1a64(token.as_bytes());
        let idx = (h % d as u64) as usize;
        let sign = if h & (1 << 63) == 0 { 1.0 } else { -1.0 };
        values[idx] += sign;
    }
    normalize_or_basis(&mut values);
    EmbeddingVector {
        values,
        provider_id: HashProvider::provider_id(d),
        text_hash: text_hash(text),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::cosine;

    #[test]
    fn deterministic_across_calls() {
        let a = hash_embed("remove this post", 8);
        let b = hash_embed("remove this post", 8);
        assert_eq!(a, b);
    }

    #[test]
    fn unit_norm_within_tolerance() {
        for text in ["a", "some longer text with many tokens", "x y z x y z"] {
            let v = hash_embed(text, 16);
            let norm = v.values.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-9, "norm {norm} for {text:?}");
        }
    }

    #[test]
    fn case_insensitive() {
        assert_eq!(
            hash_embed("Remove This POST", 32).values,
            hash_embed("remove this post", 32).values
        );
    }

    #[test]
    fn punctuation_only_falls_back_to_basis() {
        let v = hash_embed("!!!", 8);
        let mut expected = vec![0.0; 8];
        expected[0] = 1.0;
        assert_eq!(v.values, expected);
    }

    #[test]
    fn token_order_invariant() {
        let a = hash_embed("alpha beta gamma", 64);
        let b = hash_embed("gamma alpha beta", 64);
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn doubling_counts_preserves_direction() {
        let t = "remove this post";
        let doubled = format!("{t} {t}");
        let a = hash_embed(t, 8);
        let b = hash_embed(&doubled, 8);
        assert!((cosine(&a, &b).unwrap() - 1.0).abs() < 1e-9);
    }
}
