//! HTTP embedding provider speaking the common embeddings wire format:
//! POST a batch of texts, receive one float vector per text.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{EmbedError, EmbeddingProvider};

pub struct RemoteProvider {
    id: String,
    endpoint: String,
    model: String,
    dimension: usize,
    api_key: String,
    client: reqwest::blocking::Client,
    max_attempts: u32,
    backoff: Duration,
}

#[derive(Deserialize)]
struct EmbeddingsResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    index: usize,
    embedding: Vec<f64>,
}

impl RemoteProvider {
    pub fn new(
        endpoint: &str,
        model: &str,
        dimension: usize,
        api_key_env: &str,
        timeout: Duration,
    ) -> Result<Self, EmbedError> {
        if dimension < 2 {
            return Err(EmbedError::InvalidDimension(dimension));
        }
        let api_key = std::env::var(api_key_env)
            .map_err(|_| EmbedError::MissingApiKey(api_key_env.to_string()))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| EmbedError::Transport(e.to_string()))?;
        Ok(Self {
            id: format!("remote/{model}"),
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            dimension,
            api_key,
            client,
            max_attempts: 3,
            backoff: Duration::from_millis(500),
        })
    }

    fn request(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let body = json!({ "model": self.model, "input": texts });
        let resp = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| EmbedError::Transport(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(EmbedError::Transport(format!("{status}: {text}")));
        }
        let parsed: EmbeddingsResponse = resp
            .json()
            .map_err(|e| EmbedError::InvalidResponse(e.to_string()))?;
        if parsed.data.len() != texts.len() {
            return Err(EmbedError::InvalidResponse(format!(
                "{} vectors for {} inputs",
                parsed.data.len(),
                texts.len()
            )));
        }
        let mut ordered = parsed.data;
        ordered.sort_by_key(|d| d.index);
        Ok(ordered.into_iter().map(|d| d.embedding).collect())
    }
}

impl EmbeddingProvider for RemoteProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let mut last_err = None;
        for attempt in 0..self.max_attempts {
            match self.request(texts) {
                Ok(vectors) => return Ok(vectors),
                Err(EmbedError::Transport(msg)) => {
                    log::warn!(
                        "embedding request failed (attempt {}/{}): {msg}",
                        attempt + 1,
                        self.max_attempts
                    );
                    last_err = Some(EmbedError::Transport(msg));
                    std::thread::sleep(self.backoff * 2u32.pow(attempt));
                }
                Err(other) => return Err(other),
            }
        }
        Err(last_err.unwrap_or_else(|| EmbedError::Transport("no attempts made".into())))
    }
}
