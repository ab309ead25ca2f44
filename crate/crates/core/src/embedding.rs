//! Fixed-dimension embeddings: file-backed store, remote provider, and the
//! similarity and concatenation math used by retrieval and clustering.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::jsonl::{self, JsonlError};
use crate::remote::{self, HttpTransport, RemoteConfig, RemoteError, Transport};

#[derive(Debug, thiserror::Error)]
pub enum EmbeddingError {
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error("line {line}: vector has dimension {found}, expected {expected}")]
    DimensionDrift {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: vector for {id:?} is empty or has non-finite entries")]
    BadVector { line: usize, id: String },
    #[error("duplicate embedding id {0:?}")]
    DuplicateId(String),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("similarity is undefined for a zero vector")]
    ZeroVector,
    #[error("no embedding for {0:?}")]
    Missing(String),
    #[error(transparent)]
    Remote(#[from] RemoteError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(pub Vec<f64>);

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    fn is_valid(&self) -> bool {
        !self.0.is_empty() && self.0.iter().all(|v| v.is_finite())
    }
}

impl From<Vec<f64>> for EmbeddingVector {
    fn from(v: Vec<f64>) -> Self {
        EmbeddingVector(v)
    }
}

fn check_dims(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<(), EmbeddingError> {
    if a.dim() != b.dim() {
        return Err(EmbeddingError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(())
}

/// `a·b / (‖a‖‖b‖)`, clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    check_dims(a, b)?;
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(EmbeddingError::ZeroVector);
    }
    Ok((a.dot(b) / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Similarity {
    #[default]
    Cosine,
    Dot,
}

impl Similarity {
    pub fn score(self, a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbeddingError> {
        match self {
            Similarity::Cosine => cosine_similarity(a, b),
            Similarity::Dot => {
                check_dims(a, b)?;
                Ok(a.dot(b))
            }
        }
    }
}

/// `[context ; trigger]`, context first.
pub fn joint_representation(
    context: &EmbeddingVector,
    trigger: &EmbeddingVector,
) -> Result<EmbeddingVector, EmbeddingError> {
    check_dims(context, trigger)?;
    let mut v = Vec::with_capacity(context.dim() * 2);
    v.extend_from_slice(&context.0);
    v.extend_from_slice(&trigger.0);
    Ok(EmbeddingVector(v))
}

/// Which text stands for an instance when it is embedded for retrieval.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryMode {
    /// `question [sep] context`
    #[default]
    Joint,
    ContextOnly,
}

pub fn query_text(question: &str, context: &str, mode: QueryMode) -> String {
    match mode {
        QueryMode::Joint => format!("{question} [sep] {context}"),
        QueryMode::ContextOnly => context.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub id: String,
    pub vector: EmbeddingVector,
}

/// Id-keyed vectors of one dimension, with an optional second table of
/// trigger-text vectors of the same dimension.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    vectors: BTreeMap<String, EmbeddingVector>,
    triggers: BTreeMap<String, EmbeddingVector>,
}

impl EmbeddingStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Dimension shared by every vector; 0 while the store is empty.
    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    fn admit(&mut self, line: usize, id: &str, v: &EmbeddingVector) -> Result<(), EmbeddingError> {
        if !v.is_valid() {
            return Err(EmbeddingError::BadVector {
                line,
                id: id.to_string(),
            });
        }
        if self.dim == 0 {
            self.dim = v.dim();
        } else if v.dim() != self.dim {
            return Err(EmbeddingError::DimensionDrift {
                line,
                expected: self.dim,
                found: v.dim(),
            });
        }
        Ok(())
    }

    pub fn insert(
        &mut self,
        id: impl Into<String>,
        v: EmbeddingVector,
    ) -> Result<(), EmbeddingError> {
        let id = id.into();
        self.admit(self.vectors.len() + 1, &id, &v)?;
        if self.vectors.contains_key(&id) {
            return Err(EmbeddingError::DuplicateId(id));
        }
        self.vectors.insert(id, v);
        Ok(())
    }

    pub fn insert_trigger(
        &mut self,
        id: impl Into<String>,
        v: EmbeddingVector,
    ) -> Result<(), EmbeddingError> {
        let id = id.into();
        self.admit(self.triggers.len() + 1, &id, &v)?;
        if self.triggers.contains_key(&id) {
            return Err(EmbeddingError::DuplicateId(id));
        }
        self.triggers.insert(id, v);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&EmbeddingVector> {
        self.vectors.get(id)
    }

    pub fn require(&self, id: &str) -> Result<&EmbeddingVector, EmbeddingError> {
        self.get(id)
            .ok_or_else(|| EmbeddingError::Missing(id.to_string()))
    }

    pub fn trigger(&self, id: &str) -> Option<&EmbeddingVector> {
        self.triggers.get(id)
    }

    pub fn has_triggers(&self) -> bool {
        !self.triggers.is_empty()
    }

    /// `[context ; trigger]` for `id`.
    pub fn joint(&self, id: &str) -> Result<EmbeddingVector, EmbeddingError> {
        let trigger = self
            .trigger(id)
            .ok_or_else(|| EmbeddingError::Missing(format!("{id} (trigger)")))?;
        joint_representation(self.require(id)?, trigger)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &EmbeddingVector)> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn records(&self) -> Vec<EmbeddingRecord> {
        self.iter()
            .map(|(id, v)| EmbeddingRecord {
                id: id.to_string(),
                vector: v.clone(),
            })
            .collect()
    }

    pub fn trigger_records(&self) -> Vec<EmbeddingRecord> {
        self.triggers
            .iter()
            .map(|(id, v)| EmbeddingRecord {
                id: id.clone(),
                vector: v.clone(),
            })
            .collect()
    }
}

fn read_records(path: &Path) -> Result<Vec<(usize, EmbeddingRecord)>, EmbeddingError> {
    Ok(jsonl::read(path)?)
}

/// Loads `{id, vector}` lines. The dimension is taken from the first line.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingStore, EmbeddingError> {
    let mut store = EmbeddingStore::new();
    for (line, rec) in read_records(path.as_ref())? {
        store.admit(line, &rec.id, &rec.vector)?;
        if store.vectors.contains_key(&rec.id) {
            return Err(EmbeddingError::DuplicateId(rec.id));
        }
        store.vectors.insert(rec.id, rec.vector);
    }
    Ok(store)
}

/// Adds trigger-text vectors from a second `{id, vector}` file.
pub fn load_trigger_embeddings(
    store: &mut EmbeddingStore,
    path: impl AsRef<Path>,
) -> Result<(), EmbeddingError> {
    for (line, rec) in read_records(path.as_ref())? {
        store.admit(line, &rec.id, &rec.vector)?;
        if store.triggers.contains_key(&rec.id) {
            return Err(EmbeddingError::DuplicateId(rec.id));
        }
        store.triggers.insert(rec.id, rec.vector);
    }
    Ok(())
}

pub fn write_embeddings(
    path: impl AsRef<Path>,
    records: &[EmbeddingRecord],
) -> Result<(), EmbeddingError> {
    Ok(jsonl::write(path, records)?)
}

/// Anything that turns texts into vectors, one per text, in order.
pub trait EmbeddingProvider {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError>;
}

/// Sentence-encoder service speaking `{texts: [..]} → {vectors: [[..]]}`.
pub struct RemoteEmbedder {
    config: RemoteConfig,
    transport: Box<dyn Transport>,
}

impl RemoteEmbedder {
    pub fn new(config: RemoteConfig) -> Self {
        let transport = Box::new(HttpTransport::from_config(&config));
        RemoteEmbedder { config, transport }
    }

    pub fn with_transport(config: RemoteConfig, transport: Box<dyn Transport>) -> Self {
        RemoteEmbedder { config, transport }
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        fetch_embeddings(texts, &self.config, self.transport.as_ref())
    }
}

/// Embeds `texts` through the remote service, preserving order. An empty
/// input sends no request.
pub fn fetch_embeddings(
    texts: &[String],
    config: &RemoteConfig,
    transport: &dyn Transport,
) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
    let vectors = remote::post_batched(
        transport,
        config,
        texts,
        |batch| json!({ "texts": batch }),
        |reply, _| {
            remote::reply_array(reply, "vectors")?
                .into_iter()
                .map(|v: Value| {
                    serde_json::from_value::<EmbeddingVector>(v)
                        .map_err(|e| RemoteError::Protocol(format!("bad vector: {e}")))
                })
                .collect()
        },
    )?;
    if let Some(first) = vectors.first() {
        for (i, v) in vectors.iter().enumerate() {
            if !v.is_valid() || v.dim() != first.dim() {
                return Err(RemoteError::Protocol(format!("vector {i} is malformed")).into());
            }
        }
    }
    Ok(vectors)
}
