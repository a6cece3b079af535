//! Flat inner-product search over tool-summary embeddings.
//!
//! Catalogs stay small enough (<= 10k tools) that an exact scan beats
//! any approximate index, and exactness is what makes golden rankings
//! possible. Ties break by insertion order, earlier first. Vectors are
//! recomputed from summaries on load, never persisted.
//!
//! Concurrency: reads may run in parallel; `add_tools` must exclude
//! readers (wrap the store in `RwLock` when sharing).

use std::collections::HashSet;

use thiserror::Error;

use crate::catalog::ToolSummary;
use crate::embed::{EmbedError, EmbeddingVector, Encoder};

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("tool {0:?} is already indexed")]
    DuplicateTool(String),
    #[error("dimension mismatch: store is {expected}, vector is {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

/// In-memory vector store keyed by tool id.
pub struct VectorStore {
    dim: usize,
    entries: Vec<(String, EmbeddingVector)>,
    ids: HashSet<String>,
}

impl VectorStore {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
            ids: HashSet::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, tool_id: &str) -> bool {
        self.ids.contains(tool_id)
    }

    /// Iterate `(tool_id, embedding)` in insertion order. Exposed so
    /// exhaustive rescoring (oracles, sweeps) shares the stored vectors.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &EmbeddingVector)> {
        self.entries.iter().map(|(id, v)| (id.as_str(), v))
    }

    /// Encode and append summaries. The whole batch is validated before
    /// any entry lands, so a failed call leaves the store unchanged.
    pub fn add_tools(
        &mut self,
        summaries: &[ToolSummary],
        encoder: &Encoder,
    ) -> Result<(), IndexError> {
        if summaries.is_empty() {
            return Ok(());
        }
        if encoder.dim() != self.dim {
            return Err(IndexError::DimensionMismatch {
                expected: self.dim,
                actual: encoder.dim(),
            });
        }
        let mut batch_ids = HashSet::new();
        for s in summaries {
            if self.ids.contains(&s.tool_id) || !batch_ids.insert(s.tool_id.clone()) {
                return Err(IndexError::DuplicateTool(s.tool_id.clone()));
            }
        }
        let mut encoded = Vec::with_capacity(summaries.len());
        for s in summaries {
            encoded.push((s.tool_id.clone(), encoder.encode(&s.text)?));
        }
        for (id, vector) in encoded {
            self.ids.insert(id.clone());
            self.entries.push((id, vector));
        }
        Ok(())
    }

    /// Top `k` entries by inner product, descending, ties by insertion
    /// order. Empty store yields an empty slate.
    pub fn search(
        &self,
        query: &EmbeddingVector,
        k: usize,
    ) -> Result<Vec<(String, f64)>, IndexError> {
        assert!(k >= 1, "search needs k >= 1");
        if self.entries.is_empty() {
            return Ok(Vec::new());
        }
        if query.dim() != self.dim {
            return Err(IndexError::DimensionMismatch {
                expected: self.dim,
                actual: query.dim(),
            });
        }
        let mut scored: Vec<(usize, f64)> = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, (_, v))| (i, query.dot(v)))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        scored.truncate(k.min(self.entries.len()));
        Ok(scored
            .into_iter()
            .map(|(i, score)| (self.entries[i].0.clone(), score))
            .collect())
    }
}
