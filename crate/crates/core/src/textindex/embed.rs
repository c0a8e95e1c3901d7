//! Sentence-embedding providers. Every provider is deterministic per
//! (provider id, text).

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::tokenize::normalize;
use super::vector::{cosine_dense, DimensionMismatch};

pub const DEFAULT_EMBEDDING_DIM: usize = 256;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("no embedding stored for {0:?}")]
    MissingText(String),
    #[error("provider returned {got} vectors of dimension {dim:?}, expected {expected} of dimension {want}")]
    BadResponse { got: usize, expected: usize, dim: Option<usize>, want: usize },
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
}

/// Dense vector with unit L2 norm, or all zeros for empty input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    /// Scales `raw` to unit norm; a zero vector stays zero.
    pub fn normalized(mut raw: Vec<f64>) -> Self {
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in &mut raw {
                *x /= norm;
            }
        }
        EmbeddingVector(raw)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn cosine(&self, other: &EmbeddingVector) -> Result<f64, DimensionMismatch> {
        cosine_dense(&self.0, &other.0)
    }
}

pub trait EmbeddingProvider: Send + Sync {
    /// Name plus model version; embeddings are reproducible per id.
    fn id(&self) -> String;

    fn dim(&self) -> usize;

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError>;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        texts.iter().map(|t| self.embed(t)).collect()
    }
}

pub fn embed_sentence(provider: &dyn EmbeddingProvider, text: &str) -> Result<EmbeddingVector, EmbedError> {
    provider.embed(text)
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes.iter().fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

/// Character trigrams of NFC-lowercased text with whitespace runs collapsed
/// to one space. Text shorter than three characters yields itself.
pub fn char_trigrams(text: &str) -> Vec<String> {
    let collapsed = normalize(text, true).split_whitespace().collect::<Vec<_>>().join(" ");
    let chars: Vec<char> = collapsed.chars().collect();
    match chars.len() {
        0 => Vec::new(),
        1 | 2 => vec![collapsed],
        n => (0..n - 2).map(|i| chars[i..i + 3].iter().collect()).collect(),
    }
}

/// Default provider: each character trigram adds 1 to bucket
/// `fnv1a64(utf8(trigram)) mod dim`; the count vector is L2-normalized.
/// All components are nonnegative, so cosines fall in [0, 1]. Texts with
/// disjoint trigram sets score 0 unless two of their trigrams share a bucket.
#[derive(Debug, Clone)]
pub struct HashedTrigramProvider {
    dim: usize,
}

impl HashedTrigramProvider {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashedTrigramProvider { dim }
    }

    pub fn bucket(&self, trigram: &str) -> usize {
        (fnv1a64(trigram.as_bytes()) % self.dim as u64) as usize
    }
}

impl Default for HashedTrigramProvider {
    fn default() -> Self {
        Self::new(DEFAULT_EMBEDDING_DIM)
    }
}

impl EmbeddingProvider for HashedTrigramProvider {
    fn id(&self) -> String {
        format!("hashed-trigram/fnv1a64/{}", self.dim)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let mut counts = vec![0.0; self.dim];
        for gram in char_trigrams(text) {
            counts[self.bucket(&gram)] += 1.0;
        }
        Ok(EmbeddingVector::normalized(counts))
    }
}

/// Precomputed embeddings looked up by exact text.
#[derive(Debug, Clone)]
pub struct TableProvider {
    name: String,
    dim: usize,
    table: HashMap<String, EmbeddingVector>,
}

impl TableProvider {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        TableProvider { name: name.into(), dim, table: HashMap::new() }
    }

    /// Stores `raw` (normalized) for `text`.
    pub fn insert(&mut self, text: impl Into<String>, raw: Vec<f64>) -> Result<(), DimensionMismatch> {
        if raw.len() != self.dim {
            return Err(DimensionMismatch { left: self.dim, right: raw.len() });
        }
        self.table.insert(text.into(), EmbeddingVector::normalized(raw));
        Ok(())
    }

    pub fn from_json(name: impl Into<String>, json: &str) -> Result<Self, EmbedError> {
        let raw: HashMap<String, Vec<f64>> =
            serde_json::from_str(json).map_err(|e| EmbedError::ProviderUnavailable(e.to_string()))?;
        let dim = raw.values().next().map_or(0, Vec::len);
        let mut provider = TableProvider::new(name, dim);
        for (text, v) in raw {
            provider.insert(text, v)?;
        }
        Ok(provider)
    }
}

impl EmbeddingProvider for TableProvider {
    fn id(&self) -> String {
        format!("table/{}", self.name)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        self.table.get(text).cloned().ok_or_else(|| EmbedError::MissingText(text.to_owned()))
    }
}

/// Client for `POST {url}/embed {"texts": [...]} → {"vectors": [[...]]}`.
/// Returned vectors are re-normalized.
#[derive(Debug, Clone)]
pub struct RemoteProvider {
    url: String,
    model: String,
    dim: usize,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

impl RemoteProvider {
    pub fn new(url: impl Into<String>, model: impl Into<String>, dim: usize) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs(30)).build();
        RemoteProvider { url: url.into().trim_end_matches('/').to_owned(), model: model.into(), dim, agent }
    }
}

impl EmbeddingProvider for RemoteProvider {
    fn id(&self) -> String {
        format!("remote/{}", self.model)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let mut v = self.embed_batch(&[text])?;
        Ok(v.remove(0))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let response: EmbedResponse = self
            .agent
            .post(&format!("{}/embed", self.url))
            .send_json(EmbedRequest { texts })
            .map_err(|e| EmbedError::ProviderUnavailable(e.to_string()))?
            .into_json()
            .map_err(|e| EmbedError::ProviderUnavailable(e.to_string()))?;
        let bad_dim = response.vectors.iter().find(|v| v.len() != self.dim).map(Vec::len);
        if response.vectors.len() != texts.len() || bad_dim.is_some() {
            return Err(EmbedError::BadResponse {
                got: response.vectors.len(),
                expected: texts.len(),
                dim: bad_dim,
                want: self.dim,
            });
        }
        Ok(response.vectors.into_iter().map(EmbeddingVector::normalized).collect())
    }
}

/// Provider selection as written in the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "provider", rename_all = "snake_case")]
pub enum ProviderSpec {
    HashedTrigram {
        #[serde(default = "default_dim")]
        dim: usize,
    },
    Remote {
        url: String,
        model: String,
        dim: usize,
    },
    Table {
        path: std::path::PathBuf,
    },
}

fn default_dim() -> usize {
    DEFAULT_EMBEDDING_DIM
}

impl Default for ProviderSpec {
    fn default() -> Self {
        ProviderSpec::HashedTrigram { dim: DEFAULT_EMBEDDING_DIM }
    }
}

impl ProviderSpec {
    pub fn build(&self) -> Result<Arc<dyn EmbeddingProvider>, EmbedError> {
        Ok(match self {
            ProviderSpec::HashedTrigram { dim } => Arc::new(HashedTrigramProvider::new(*dim)),
            ProviderSpec::Remote { url, model, dim } => Arc::new(RemoteProvider::new(url, model, *dim)),
            ProviderSpec::Table { path } => {
                let json = std::fs::read_to_string(path).map_err(|e| EmbedError::ProviderUnavailable(format!("{}: {e}", path.display())))?;
                let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("table").to_owned();
                Arc::new(TableProvider::from_json(name, &json)?)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn deterministic_and_unit_norm() {
        let p = HashedTrigramProvider::default();
        let a = p.embed("Newton's first law of motion").unwrap();
        let b = p.embed("Newton's first law of motion").unwrap();
        assert_eq!(a, b);
        assert!((a.norm() - 1.0).abs() < 1e-9);
        assert_eq!(a.dim(), 256);
        assert_eq!(p.embed("").unwrap().norm(), 0.0);
        assert!((p.embed("x").unwrap().norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn disjoint_trigrams_give_zero_cosine() {
        let p = HashedTrigramProvider::default();
        let (left, right) = ("kinetic", "oxygen");
        // Independent trigram extraction over raw chars.
        let grams = |s: &str| -> BTreeSet<String> {
            let c: Vec<char> = s.chars().collect();
            c.windows(3).map(|w| w.iter().collect()).collect()
        };
        assert!(grams(left).is_disjoint(&grams(right)));
        let buckets = |s: &str| -> BTreeSet<usize> { grams(s).iter().map(|g| p.bucket(g)).collect() };
        assert!(buckets(left).is_disjoint(&buckets(right)));
        let c = p.embed(left).unwrap().cosine(&p.embed(right).unwrap()).unwrap();
        assert_eq!(c, 0.0);
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn table_provider_normalizes_and_reports_missing() {
        let mut p = TableProvider::new("toy", 2);
        p.insert("a", vec![3.0, 4.0]).unwrap();
        assert_eq!(p.embed("a").unwrap().as_slice(), &[0.6, 0.8]);
        assert!(matches!(p.embed("b"), Err(EmbedError::MissingText(_))));
        assert!(p.insert("c", vec![1.0]).is_err());
    }

    #[test]
    fn unreachable_remote_is_unavailable() {
        let p = RemoteProvider::new("http://127.0.0.1:9", "m1", 4);
        assert!(matches!(p.embed("x"), Err(EmbedError::ProviderUnavailable(_))));
    }

    #[test]
    fn spec_parses_from_toml() {
        let spec: ProviderSpec = toml::from_str("provider = \"hashed_trigram\"").unwrap();
        assert_eq!(spec, ProviderSpec::HashedTrigram { dim: 256 });
        let spec: ProviderSpec = toml::from_str("provider = \"remote\"\nurl = \"http://h\"\nmodel = \"sbert-v1\"\ndim = 768").unwrap();
        assert!(matches!(spec, ProviderSpec::Remote { dim: 768, .. }));
    }
}
