//! The demonstration store: annotated instances that can be retrieved by
//! embedding similarity and prepended to a new input.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::RoleInstance;
use crate::embedding::{EmbeddingError, EmbeddingStore, EmbeddingVector, Similarity};
use crate::jsonl::{self, JsonlError};
use crate::prompt::SpecialTokens;

/// Similarity above which a retrieved demonstration is labelled analogous.
pub const DEFAULT_ANALOGY_THRESHOLD: f64 = 0.7;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("duplicate demonstration id {0:?}")]
    DuplicateId(String),
    #[error("demonstration {id:?}: answer contains reserved token {token:?}")]
    ControlToken { id: String, token: String },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub id: String,
    pub question: String,
    pub context: String,
    #[serde(default)]
    pub answers: Vec<String>,
    pub event_type: String,
    pub role: String,
}

impl Demonstration {
    pub fn from_instance(instance: &RoleInstance) -> Self {
        Demonstration {
            id: instance.id.clone(),
            question: instance.question.clone(),
            context: instance.context.clone(),
            answers: instance.gold_args.iter().map(|s| s.text.clone()).collect(),
            event_type: instance.event_type.clone(),
            role: instance.role.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DemoStore {
    demos: Vec<Demonstration>,
    index: HashMap<String, usize>,
}

impl DemoStore {
    pub fn from_demonstrations(
        demos: Vec<Demonstration>,
        tokens: &SpecialTokens,
    ) -> Result<Self, StoreError> {
        let mut index = HashMap::with_capacity(demos.len());
        for (i, d) in demos.iter().enumerate() {
            if index.insert(d.id.clone(), i).is_some() {
                return Err(StoreError::DuplicateId(d.id.clone()));
            }
            for a in &d.answers {
                if let Some(token) = tokens.find_in(a) {
                    return Err(StoreError::ControlToken {
                        id: d.id.clone(),
                        token: token.to_string(),
                    });
                }
            }
        }
        Ok(DemoStore { demos, index })
    }

    pub fn len(&self) -> usize {
        self.demos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demos.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Demonstration> {
        self.index.get(id).map(|&i| &self.demos[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Demonstration> {
        self.demos.iter()
    }
}

/// One demonstration per instance, empty answers included.
pub fn build_store(
    instances: &[RoleInstance],
    tokens: &SpecialTokens,
) -> Result<DemoStore, StoreError> {
    DemoStore::from_demonstrations(
        instances.iter().map(Demonstration::from_instance).collect(),
        tokens,
    )
}

pub fn load_store(path: impl AsRef<Path>, tokens: &SpecialTokens) -> Result<DemoStore, StoreError> {
    DemoStore::from_demonstrations(jsonl::read_records(path)?, tokens)
}

pub fn write_store(path: impl AsRef<Path>, store: &DemoStore) -> Result<(), StoreError> {
    Ok(jsonl::write(path, &store.demos)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    pub demo: Demonstration,
    pub score: f64,
}

/// Descending score, then ascending id.
fn rank(a: &(f64, &str), b: &(f64, &str)) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1))
}

/// Exhaustive-scan retriever over a store whose vectors are resolved once.
pub struct Retriever<'a> {
    store: &'a DemoStore,
    vectors: Vec<&'a EmbeddingVector>,
    similarity: Similarity,
}

impl<'a> Retriever<'a> {
    pub fn new(
        store: &'a DemoStore,
        embeddings: &'a EmbeddingStore,
        similarity: Similarity,
    ) -> Result<Self, StoreError> {
        let vectors = store
            .iter()
            .map(|d| embeddings.require(&d.id))
            .collect::<Result<_, _>>()?;
        Ok(Retriever {
            store,
            vectors,
            similarity,
        })
    }

    /// Up to `k` demonstrations by descending similarity, ties by ascending
    /// id. With `exclude_self` the demonstration whose id equals `query_id`
    /// is skipped.
    pub fn top(
        &self,
        query_id: &str,
        query: &EmbeddingVector,
        k: usize,
        exclude_self: bool,
    ) -> Result<Vec<RetrievalResult>, StoreError> {
        let mut scored: Vec<(f64, &str, usize)> = Vec::with_capacity(self.vectors.len());
        for (i, (demo, v)) in self.store.demos.iter().zip(&self.vectors).enumerate() {
            if exclude_self && demo.id == query_id {
                continue;
            }
            scored.push((self.similarity.score(query, v)?, demo.id.as_str(), i));
        }
        let cmp = |a: &(f64, &str, usize), b: &(f64, &str, usize)| rank(&(a.0, a.1), &(b.0, b.1));
        if k < scored.len() {
            if k == 0 {
                return Ok(Vec::new());
            }
            scored.select_nth_unstable_by(k - 1, cmp);
            scored.truncate(k);
        }
        scored.sort_by(cmp);
        Ok(scored
            .into_iter()
            .map(|(score, _, i)| RetrievalResult {
                demo: self.store.demos[i].clone(),
                score,
            })
            .collect())
    }

    /// Runs [`Retriever::top`] for many queries in parallel; output order
    /// follows `queries`.
    pub fn top_many(
        &self,
        queries: &[(&str, &EmbeddingVector)],
        k: usize,
        exclude: SelfExclusion,
    ) -> Result<Vec<Vec<RetrievalResult>>, StoreError> {
        queries
            .par_iter()
            .map(|(id, v)| self.top(id, v, k, exclude.applies(self.store, id)))
            .collect()
    }
}

pub fn retrieve_top(
    query_id: &str,
    query: &EmbeddingVector,
    store: &DemoStore,
    embeddings: &EmbeddingStore,
    k: usize,
    exclude_self: bool,
) -> Result<Vec<RetrievalResult>, StoreError> {
    Retriever::new(store, embeddings, Similarity::Cosine)?.top(query_id, query, k, exclude_self)
}

/// When to drop the query's own entry from retrieval results.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelfExclusion {
    /// Exclude when the query id is present in the store.
    #[default]
    Auto,
    Always,
    Never,
}

impl SelfExclusion {
    pub fn applies(self, store: &DemoStore, query_id: &str) -> bool {
        match self {
            SelfExclusion::Auto => store.contains(query_id),
            SelfExclusion::Always => true,
            SelfExclusion::Never => false,
        }
    }
}

/// 1 iff `score > threshold` and both answers are non-empty.
pub fn analogy_label(
    score: f64,
    threshold: f64,
    demo_nonempty: bool,
    current_nonempty: bool,
) -> u8 {
    u8::from(score > threshold && demo_nonempty && current_nonempty)
}

/// One retrieval hit as written to the trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalTrace {
    pub query_id: String,
    pub demo_id: Option<String>,
    pub score: Option<f64>,
    pub label: u8,
}

pub fn write_trace(path: impl AsRef<Path>, trace: &[RetrievalTrace]) -> Result<(), StoreError> {
    Ok(jsonl::write(path, trace)?)
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<Vec<RetrievalTrace>, StoreError> {
    Ok(jsonl::read_records(path)?)
}
