//! JSONL embedding cache: one `(provider_id, text_hash, values)` row per
//! line, appended as vectors are computed. Remote embeddings are the
//! costliest pipeline step, so the cache persists beside the run store.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::EmbedError;

#[derive(Debug, Serialize, Deserialize)]
struct CacheRow {
    provider_id: String,
    text_hash: u64,
    values: Vec<f64>,
}

pub struct EmbeddingCache {
    path: PathBuf,
    entries: BTreeMap<(String, u64), Vec<f64>>,
}

impl EmbeddingCache {
    /// Open (or create) a cache file and load all rows. Later rows win on
    /// duplicate keys; values are deterministic per provider so this is safe.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, EmbedError> {
        let path = path.as_ref().to_path_buf();
        let mut entries = BTreeMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            for (lineno, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let row: CacheRow = serde_json::from_str(&line).map_err(|e| {
                    EmbedError::Parse(format!("{}:{}: {e}", path.display(), lineno + 1))
                })?;
                entries.insert((row.provider_id, row.text_hash), row.values);
            }
        }
        Ok(Self { path, entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, provider_id: &str, text_hash: u64) -> Option<&[f64]> {
        self.entries
            .get(&(provider_id.to_string(), text_hash))
            .map(|v| v.as_slice())
    }

    /// Insert a vector and append it to the cache file immediately.
    pub fn insert(
        &mut self,
        provider_id: &str,
        text_hash: u64,
        values: Vec<f64>,
    ) -> Result<(), EmbedError> {
        let row = CacheRow {
            provider_id: provider_id.to_string(),
            text_hash,
            values: values.clone(),
        };
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)?;
        let line = serde_json::to_string(&row)
            .map_err(|e| EmbedError::Parse(format!("serialize cache row: {e}")))?;
        writeln!(file, "{line}")?;
        self.entries
            .insert((provider_id.to_string(), text_hash), values);
        Ok(())
    }

    /// Fail when any cached entry for this provider has the wrong dimension:
    /// a run must never mix vector sizes.
    pub fn check_dimension(&self, provider_id: &str, dimension: usize) -> Result<(), EmbedError> {
        for ((pid, _), values) in &self.entries {
            if pid == provider_id && values.len() != dimension {
                return Err(EmbedError::DimensionMismatch {
                    expected: dimension,
                    got: values.len(),
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        {
            let mut cache = EmbeddingCache::open(&path).unwrap();
            cache.insert("p", 42, vec![1.0, 0.0]).unwrap();
            cache.insert("p", 43, vec![0.0, 1.0]).unwrap();
        }
        let cache = EmbeddingCache::open(&path).unwrap();
        assert_eq!(cache.len(), 2);
        assert_eq!(cache.get("p", 42), Some(&[1.0, 0.0][..]));
        assert_eq!(cache.get("q", 42), None);
    }
}
