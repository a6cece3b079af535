//! Semantic gating middleware for LLM tool catalogs.
//!
//! Hosts that speak the Model Context Protocol re-serialize every tool
//! schema on every turn, so a 120-tool catalog costs tens of thousands of
//! prompt tokens before the user says a word. This crate keeps a compact,
//! always-resident summary pool in the prompt (Phase 1) and promotes full
//! JSON schemas on demand for the small set of tools whose summaries
//! cosine-match the current query and whose preconditions hold against the
//! agent state (Phase 2).
//!
//! The pieces compose bottom-up:
//!
//! - [`catalog`] — tool definitions, the calibrated synthetic testbed
//!   generator, and the on-disk schema registry.
//! - [`tokens`] — token counters plus the recurring-cost and
//!   context-utilization formulas the benchmark reports.
//! - [`embed`] — the deterministic hashed n-gram encoder and the
//!   intent/summary overlap score.
//! - [`index`] — exact flat inner-product search over summary embeddings.
//! - [`state`] — agent execution state and the precondition predicates
//!   that gate tools deterministically.
//! - [`router`] — thresholded, state-gated top-k routing.
//! - [`loader`] — LRU-cached on-demand schema fetching (disk or remote).
//! - [`attention`] — the per-turn orchestrator: routing, schema promotion,
//!   two-phase prompt rendering, the post-model rejection gate, and
//!   structured turn events.
//! - [`gateway`] — a JSON-RPC 2.0 service exposing the mechanism behind
//!   MCP-style `tools/list` / `tools/call` methods.
//! - [`mod@bench`] — the measurement harness: task generation,
//!   baselines, threshold sweep, ablations, scaling, and the
//!   poisoned-description exclusion suite.

pub mod adapter;
pub mod attention;
pub mod bench;
pub mod catalog;
pub mod embed;
pub mod gateway;
pub mod hash;
pub mod index;
pub mod loader;
pub mod router;
pub mod state;
pub mod tokens;

pub use attention::{AttentionResult, RenderedPrompt, ToolAttention, TurnEvent};
pub use catalog::{Catalog, ServerSpec, TokenBreakdown, ToolDefinition, ToolSummary};
pub use embed::{EmbeddingVector, Encoder};
pub use index::VectorStore;
pub use router::{RouterConfig, RoutingResult};
pub use state::{AgentState, Precondition};
pub use tokens::{ContextBudget, TokenCounter, UtilizationMode};
