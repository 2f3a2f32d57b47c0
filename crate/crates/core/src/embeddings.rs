//! Sentence-embedding providers: a precomputed JSONL file store, an HTTP
//! service, and an in-memory cache wrapping either.
//!
//! Texts are keyed by their NFC-normalized exact string.
//!
//! HTTP contract: `POST <base>/embed` with `{"texts": [...]}`, answered by
//! `{"model_id": "...", "vectors": [[...], ...]}`; any non-200 status is
//! [`EmbedError::ServiceUnavailable`].

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{cosine_similarity, MetricError};
use crate::text::nfc;

pub const EMBED_URI_ENV: &str = "PARAQA_EMBED_URI";

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("no stored embedding for {0:?}")]
    MissingEmbedding(String),
    #[error("embedding service unavailable: {0}")]
    ServiceUnavailable(String),
    #[error("malformed embedding service response: {0}")]
    MalformedResponse(String),
    #[error("malformed embedding store {path} line {line}: {reason}")]
    MalformedStore { path: PathBuf, line: usize, reason: String },
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid provider uri {0:?}: expected file:<path> or http:<url>")]
    InvalidUri(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub model_id: String,
}

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

pub trait EmbeddingProvider: Send + Sync {
    /// One vector per input text, in input order.
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError>;
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Box<P> {
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        (**self).embed_batch(texts)
    }
}

/// Cosine similarity between the embeddings of a candidate and its source.
pub fn similarity_cs(candidate: &str, source: &str, provider: &dyn EmbeddingProvider) -> Result<f64, EmbedError> {
    let vs = provider.embed_batch(&[candidate, source])?;
    Ok(cosine_similarity(&vs[0].values, &vs[1].values)?)
}

// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize, Serialize)]
struct StoreRow {
    text: String,
    vector: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    model_id: Option<String>,
}

/// Precomputed vectors read from JSONL rows `{"text", "vector", "model_id"?}`.
#[derive(Debug, Clone, Default)]
pub struct FileStore {
    vectors: HashMap<String, EmbeddingVector>,
    model_id: String,
    dim: usize,
}

impl FileStore {
    pub fn load(path: &Path) -> Result<Self, EmbedError> {
        let text = fs::read_to_string(path).map_err(|source| EmbedError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, EmbedError> {
        let bad = |line: usize, reason: String| EmbedError::MalformedStore {
            path: path.to_path_buf(),
            line,
            reason,
        };
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: StoreRow = serde_json::from_str(line).map_err(|e| bad(i + 1, e.to_string()))?;
            rows.push((i + 1, row));
        }
        let model_id = rows.iter().find_map(|(_, r)| r.model_id.clone()).unwrap_or_else(|| {
            path.file_stem()
                .map_or_else(|| "unknown".to_owned(), |s| s.to_string_lossy().into_owned())
        });
        let mut store = FileStore {
            vectors: HashMap::with_capacity(rows.len()),
            model_id: model_id.clone(),
            dim: 0,
        };
        for (line, row) in rows {
            if row.vector.is_empty() {
                return Err(bad(line, "empty vector".into()));
            }
            if row.vector.iter().any(|v| !v.is_finite()) {
                return Err(bad(line, "non-finite component".into()));
            }
            if store.dim == 0 {
                store.dim = row.vector.len();
            } else if row.vector.len() != store.dim {
                return Err(bad(
                    line,
                    format!("dimension {} differs from {}", row.vector.len(), store.dim),
                ));
            }
            if row.model_id.as_ref().is_some_and(|m| *m != model_id) {
                return Err(bad(line, "model_id differs from earlier rows".into()));
            }
            let key = nfc(&row.text);
            let vector = EmbeddingVector {
                values: row.vector,
                model_id: model_id.clone(),
            };
            if let Some(prev) = store.vectors.get(&key) {
                if *prev != vector {
                    return Err(bad(line, format!("conflicting duplicate for {:?}", row.text)));
                }
            }
            store.vectors.insert(key, vector);
        }
        Ok(store)
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

impl EmbeddingProvider for FileStore {
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        texts
            .iter()
            .map(|t| {
                self.vectors
                    .get(&nfc(t))
                    .cloned()
                    .ok_or_else(|| EmbedError::MissingEmbedding((*t).to_owned()))
            })
            .collect()
    }
}

/// Memoizes another provider. Only cache misses reach the inner provider,
/// each distinct text once per batch.
pub struct CachedProvider<P> {
    inner: P,
    cache: Mutex<HashMap<String, EmbeddingVector>>,
}

impl<P: EmbeddingProvider> CachedProvider<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn cached_len(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for CachedProvider<P> {
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let keys: Vec<String> = texts.iter().map(|t| nfc(t)).collect();
        let mut misses: Vec<&str> = {
            let cache = self.cache.lock().expect("cache lock");
            keys.iter()
                .filter(|k| !cache.contains_key(*k))
                .map(String::as_str)
                .collect()
        };
        misses.sort_unstable();
        misses.dedup();
        if !misses.is_empty() {
            let fetched = self.inner.embed_batch(&misses)?;
            let mut cache = self.cache.lock().expect("cache lock");
            for (k, v) in misses.iter().zip(fetched) {
                cache.entry((*k).to_owned()).or_insert(v);
            }
        }
        let cache = self.cache.lock().expect("cache lock");
        Ok(keys.iter().map(|k| cache[k].clone()).collect())
    }
}

// ---------------------------------------------------------------------------

#[cfg(feature = "net")]
pub use http::HttpProvider;

#[cfg(feature = "net")]
mod http {
    use super::*;

    #[derive(Serialize)]
    struct EmbedRequest<'a> {
        texts: &'a [&'a str],
    }

    #[derive(Deserialize)]
    struct EmbedResponse {
        model_id: String,
        vectors: Vec<Vec<f64>>,
    }

    /// Client for the `/embed` contract.
    pub struct HttpProvider {
        base: String,
        agent: ureq::Agent,
    }

    impl HttpProvider {
        pub fn new(base_url: &str) -> Self {
            let agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
            Self {
                base: base_url.trim_end_matches('/').to_owned(),
                agent,
            }
        }
    }

    impl EmbeddingProvider for HttpProvider {
        fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
            if texts.is_empty() {
                return Ok(Vec::new());
            }
            let normalized: Vec<String> = texts.iter().map(|t| nfc(t)).collect();
            let refs: Vec<&str> = normalized.iter().map(String::as_str).collect();
            let mut resp = self
                .agent
                .post(&format!("{}/embed", self.base))
                .send_json(&EmbedRequest { texts: &refs })
                .map_err(|e| EmbedError::ServiceUnavailable(e.to_string()))?;
            if resp.status() != 200 {
                return Err(EmbedError::ServiceUnavailable(format!("status {}", resp.status())));
            }
            let body: EmbedResponse = resp
                .body_mut()
                .read_json()
                .map_err(|e| EmbedError::MalformedResponse(e.to_string()))?;
            if body.vectors.len() != texts.len() {
                return Err(EmbedError::MalformedResponse(format!(
                    "{} vectors for {} texts",
                    body.vectors.len(),
                    texts.len()
                )));
            }
            let dim = body.vectors[0].len();
            if dim == 0
                || body
                    .vectors
                    .iter()
                    .any(|v| v.len() != dim || v.iter().any(|x| !x.is_finite()))
            {
                return Err(EmbedError::MalformedResponse(
                    "empty, ragged or non-finite vectors".into(),
                ));
            }
            Ok(body
                .vectors
                .into_iter()
                .map(|values| EmbeddingVector {
                    values,
                    model_id: body.model_id.clone(),
                })
                .collect())
        }
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderKind {
    FileStore,
    HttpService,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub location: String,
    pub cache: bool,
}

impl ProviderConfig {
    /// `file:<path>`, `http:<url>`, or a bare `http(s)://` URL.
    pub fn parse(uri: &str) -> Result<Self, EmbedError> {
        let (kind, location) = if let Some(path) = uri.strip_prefix("file:") {
            (ProviderKind::FileStore, path.to_owned())
        } else if uri.starts_with("http://") || uri.starts_with("https://") {
            (ProviderKind::HttpService, uri.to_owned())
        } else if let Some(url) = uri.strip_prefix("http:") {
            (ProviderKind::HttpService, url.to_owned())
        } else {
            return Err(EmbedError::InvalidUri(uri.to_owned()));
        };
        if location.is_empty() {
            return Err(EmbedError::InvalidUri(uri.to_owned()));
        }
        Ok(Self {
            kind,
            location,
            cache: true,
        })
    }

    /// Config from [`EMBED_URI_ENV`], if set.
    pub fn from_env() -> Option<Result<Self, EmbedError>> {
        std::env::var(EMBED_URI_ENV).ok().map(|u| Self::parse(&u))
    }

    pub fn build(&self) -> Result<Box<dyn EmbeddingProvider>, EmbedError> {
        let inner: Box<dyn EmbeddingProvider> = match self.kind {
            ProviderKind::FileStore => Box::new(FileStore::load(Path::new(&self.location))?),
            #[cfg(feature = "net")]
            ProviderKind::HttpService => Box::new(HttpProvider::new(&self.location)),
            #[cfg(not(feature = "net"))]
            ProviderKind::HttpService => {
                return Err(EmbedError::ServiceUnavailable("built without the `net` feature".into()))
            }
        };
        Ok(if self.cache {
            Box::new(CachedProvider::new(inner))
        } else {
            inner
        })
    }
}
