//! Text embeddings and cosine similarity.
//!
//! The default backend is a hashed bag-of-words: deterministic, offline, and
//! platform-independent, which keeps candidate scoring, clustering, and
//! methodology selection reproducible bit-for-bit. A remote backend slot
//! talks to an embedding endpoint for higher-fidelity runs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default dimensionality of the hashed bag-of-words backend.
pub const DEFAULT_DIM: usize = 256;

/// A fixed-length, L2-normalized vector. The all-zero vector (empty text) is
/// the one exception to unit norm; its similarity to anything is 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    /// Normalize raw values to unit norm (zero vectors pass through).
    pub fn new(raw: Vec<f64>) -> Self {
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return EmbeddingVector { values: raw };
        }
        EmbeddingVector {
            values: raw.iter().map(|v| v / norm).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }
}

/// Cosine similarity of two vectors, in `[-1, 1]`; 0 if either is all-zero.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    if a.is_zero() || b.is_zero() {
        return Ok(0.0);
    }
    let dot: f64 = a
        .values
        .iter()
        .zip(b.values.iter())
        .map(|(x, y)| x * y)
        .sum();
    Ok(dot.clamp(-1.0, 1.0))
}

/// A text embedding backend.
pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Result<EmbeddingVector>;
}

/// Deterministic hashed bag-of-words embedder: lowercase, split on
/// non-alphanumerics, sign-hash each token into `dim` buckets weighted by
/// occurrence count, then L2-normalize.
#[derive(Debug, Clone)]
pub struct HashedBowEmbedder {
    dim: usize,
}

impl HashedBowEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashedBowEmbedder { dim }
    }
}

impl Default for HashedBowEmbedder {
    fn default() -> Self {
        HashedBowEmbedder::new(DEFAULT_DIM)
    }
}

impl Embedder for HashedBowEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        let mut raw = vec![0.0f64; self.dim];
        let lowered = text.to_lowercase();
        for token in lowered.split(|c: char| !c.is_alphanumeric()) {
            if token.is_empty() {
                continue;
            }
            let h = fnv1a64(token.as_bytes());
            let bucket = (h % self.dim as u64) as usize;
            let sign = if h & (1 << 63) != 0 { -1.0 } else { 1.0 };
            raw[bucket] += sign;
        }
        Ok(EmbeddingVector::new(raw))
    }
}

// FNV-1a, fixed constants: stable across runs, platforms, and toolchains.
fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = OFFSET;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(PRIME);
    }
    hash
}

/// Configuration for a remote embedding endpoint.
#[derive(Debug, Clone)]
pub struct RemoteEmbedderConfig {
    /// Full URL of the embedding endpoint.
    pub url: String,
    /// Model identifier sent in the request body.
    pub model: String,
    /// Environment variable holding the bearer token, if any.
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
    pub retries: usize,
}

/// Remote embedding backend: POSTs `{model, input}` and normalizes the
/// returned numeric array. Transient failures retry with linear backoff.
pub struct RemoteEmbedder {
    config: RemoteEmbedderConfig,
    client: reqwest::blocking::Client,
}

impl RemoteEmbedder {
    pub fn new(config: RemoteEmbedderConfig) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| Error::EmbeddingBackend {
                attempts: 0,
                message: e.to_string(),
            })?;
        Ok(RemoteEmbedder { config, client })
    }

    fn bearer_token(&self) -> Option<String> {
        self.config
            .api_key_env
            .as_deref()
            .and_then(|var| std::env::var(var).ok())
    }
}

/// Request body for the remote embedding call.
pub fn embedding_payload(model: &str, input: &str) -> serde_json::Value {
    serde_json::json!({ "model": model, "input": input })
}

/// Accepts a bare array, `{"embedding": [...]}`, or the
/// `{"data": [{"embedding": [...]}]}` wire shape.
pub fn parse_embedding_response(body: &serde_json::Value) -> Option<Vec<f64>> {
    let as_floats = |v: &serde_json::Value| -> Option<Vec<f64>> {
        v.as_array()?
            .iter()
            .map(|x| x.as_f64())
            .collect::<Option<Vec<f64>>>()
    };
    if let Some(values) = as_floats(body) {
        return Some(values);
    }
    if let Some(values) = body.get("embedding").and_then(&as_floats) {
        return Some(values);
    }
    body.get("data")?
        .as_array()?
        .first()?
        .get("embedding")
        .and_then(as_floats)
}

impl Embedder for RemoteEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        let payload = embedding_payload(&self.config.model, text);
        let attempts_allowed = self.config.retries + 1;
        let mut last_error = String::new();
        for attempt in 1..=attempts_allowed {
            let mut request = self.client.post(&self.config.url).json(&payload);
            if let Some(token) = self.bearer_token() {
                request = request.bearer_auth(token);
            }
            match request.send() {
                Ok(response) if response.status().is_success() => {
                    let body: serde_json::Value =
                        response.json().map_err(|e| Error::EmbeddingBackend {
                            attempts: attempt,
                            message: format!("bad response body: {e}"),
                        })?;
                    let values =
                        parse_embedding_response(&body).ok_or(Error::EmbeddingBackend {
                            attempts: attempt,
                            message: "response carries no numeric embedding".into(),
                        })?;
                    return Ok(EmbeddingVector::new(values));
                }
                Ok(response) => {
                    last_error = format!("HTTP {}", response.status());
                }
                Err(e) => {
                    last_error = e.to_string();
                }
            }
            if attempt < attempts_allowed {
                std::thread::sleep(std::time::Duration::from_millis(100 * attempt as u64));
            }
        }
        Err(Error::EmbeddingBackend {
            attempts: attempts_allowed,
            message: last_error,
        })
    }
}
