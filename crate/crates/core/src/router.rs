//! Thresholded, state-gated top-k routing from a query to tool ids.
//!
//! A routing pass embeds the query, over-fetches a candidate slate from
//! the vector store, keeps candidates whose score clears the threshold
//! (inclusive) and whose precondition set the current state satisfies,
//! and returns at most `top_k` results in store order. If gating drains
//! a truncated slate, the fetch widens until the slate covers the store,
//! so the output always equals an exhaustive score-filter-sort pass.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::embed::{EmbedError, Encoder};
use crate::index::{IndexError, VectorStore};
use crate::state::{preconditions_satisfied, AgentState, Precondition};

#[derive(Debug, Error)]
pub enum RouteError {
    #[error("routing unavailable: {0}")]
    RoutingUnavailable(String),
}

impl From<EmbedError> for RouteError {
    fn from(e: EmbedError) -> Self {
        Self::RoutingUnavailable(e.to_string())
    }
}

impl From<IndexError> for RouteError {
    fn from(e: IndexError) -> Self {
        Self::RoutingUnavailable(e.to_string())
    }
}

/// Router thresholds. Defaults match the calibrated deployment settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RouterConfig {
    /// Inclusive score threshold.
    pub threshold: f64,
    /// Maximum size of the active set.
    pub top_k: usize,
    /// Slate over-fetch multiple (with a floor of 20 candidates), since
    /// gating consumes candidates.
    pub overfetch_factor: usize,
}

impl Default for RouterConfig {
    fn default() -> Self {
        Self {
            threshold: 0.28,
            top_k: 10,
            overfetch_factor: 4,
        }
    }
}

impl RouterConfig {
    pub fn new(threshold: f64, top_k: usize) -> Self {
        assert!(
            (-1.0..=1.0).contains(&threshold),
            "threshold outside [-1, 1]"
        );
        assert!(top_k >= 1, "top_k must be at least 1");
        Self {
            threshold,
            top_k,
            ..Self::default()
        }
    }

    fn slate_size(&self) -> usize {
        (self.top_k * self.overfetch_factor).max(20)
    }
}

/// One admitted tool with its score.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RoutingResult {
    pub tool_id: String,
    pub score: f64,
}

/// The gating indicator: 1 iff the score clears the threshold
/// (inclusive) and the precondition check passed.
pub fn gate(score: f64, threshold: f64, preconditions_ok: bool) -> u8 {
    u8::from(score >= threshold && preconditions_ok)
}

/// Per-turn routing diagnostics alongside the admitted results.
#[derive(Debug, Clone, Default)]
pub struct RouteTrace {
    /// The over-fetched slate, store order.
    pub candidates: Vec<String>,
    /// Scores aligned with `candidates`.
    pub scores: Vec<f64>,
    /// Candidates that cleared the threshold but failed preconditions.
    pub gated_out_by_state: Vec<String>,
    /// 64-bit content hash of the query embedding.
    pub query_embedding_hash: u64,
}

/// Route with diagnostics. Tools absent from `preconditions` are treated
/// as unconditional.
pub fn route_traced(
    query: &str,
    state: &AgentState,
    store: &VectorStore,
    preconditions: &BTreeMap<String, Vec<Precondition>>,
    cfg: &RouterConfig,
    encoder: &Encoder,
) -> Result<(Vec<RoutingResult>, RouteTrace), RouteError> {
    let query_vec = encoder.encode(query)?;
    let mut trace = RouteTrace {
        query_embedding_hash: embedding_hash(query_vec.values()),
        ..RouteTrace::default()
    };
    if store.is_empty() {
        return Ok((Vec::new(), trace));
    }

    let mut fetch = cfg.slate_size();
    loop {
        let slate = store.search(&query_vec, fetch)?;
        let slate_exhausts_store = slate.len() >= store.len();

        trace.candidates = slate.iter().map(|(id, _)| id.clone()).collect();
        trace.scores = slate.iter().map(|(_, s)| *s).collect();
        trace.gated_out_by_state.clear();

        let mut admitted = Vec::with_capacity(cfg.top_k);
        for (tool_id, score) in &slate {
            if *score < cfg.threshold {
                // Slate is score-ordered; nothing below clears the gate.
                break;
            }
            let pre_ok = preconditions
                .get(tool_id)
                .is_none_or(|set| preconditions_satisfied(set, state));
            if gate(*score, cfg.threshold, pre_ok) == 1 {
                admitted.push(RoutingResult {
                    tool_id: tool_id.clone(),
                    score: *score,
                });
                if admitted.len() == cfg.top_k {
                    break;
                }
            } else {
                trace.gated_out_by_state.push(tool_id.clone());
            }
        }

        // State gating can drain a truncated slate below k while eligible
        // tools still sit past the fetch horizon; widen and retry so the
        // result matches the exhaustive pass.
        if admitted.len() < cfg.top_k && !slate_exhausts_store {
            let last_clears = slate
                .last()
                .map(|(_, s)| *s >= cfg.threshold)
                .unwrap_or(false);
            if last_clears {
                fetch = (fetch * 2).min(store.len());
                continue;
            }
        }
        return Ok((admitted, trace));
    }
}

/// Route a query against the store: the gated, thresholded top-k.
pub fn route(
    query: &str,
    state: &AgentState,
    store: &VectorStore,
    preconditions: &BTreeMap<String, Vec<Precondition>>,
    cfg: &RouterConfig,
    encoder: &Encoder,
) -> Result<Vec<RoutingResult>, RouteError> {
    route_traced(query, state, store, preconditions, cfg, encoder).map(|(results, _)| results)
}

fn embedding_hash(values: &[f64]) -> u64 {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    crate::hash::fnv1a(&bytes)
}
