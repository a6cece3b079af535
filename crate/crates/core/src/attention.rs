//! The per-turn orchestrator: route, promote, render, gate, observe.
//!
//! `before_model` runs the full pass for one turn: routes the query,
//! lazily loads full definitions for the active set only, renders the
//! two-phase prompt (summary pool in the stable prefix, promoted schemas
//! immediately before the user message), accounts Phase-1/Phase-2
//! tokens, and emits one structured event. `after_model` is the
//! deterministic rejection gate for calls outside the active set.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::catalog::{canonical_json, token_breakdown, Catalog, ToolDefinition};
use crate::embed::Encoder;
use crate::hash::content_hash;
use crate::index::VectorStore;
use crate::loader::{LoadError, SchemaCache};
use crate::router::{route_traced, RouteError, RouterConfig, RoutingResult};
use crate::state::AgentState;
use crate::tokens::{TokenCounter, TokenError};

pub const SUMMARY_SECTION_HEADER: &str = "## AVAILABLE TOOLS (summaries)";
pub const SCHEMA_SECTION_HEADER: &str = "## ACTIVE TOOL SCHEMAS";
pub const USER_SECTION_HEADER: &str = "## USER";

const SYSTEM_TEXT: &str = "# SYSTEM\nYou can call external tools. Compact summaries of every \
available tool follow; full schemas are injected per turn for the active tools only. If a tool \
you need is not active, ask for it or rephrase.\n";

#[derive(Debug, Error)]
pub enum AttentionError {
    #[error(transparent)]
    Route(#[from] RouteError),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Token(#[from] TokenError),
}

/// Outcome of one routing-and-promotion pass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttentionResult {
    /// The active set, score order.
    pub active: Vec<RoutingResult>,
    /// The whole always-resident summary pool, tool id to summary text.
    pub summary_pool: BTreeMap<String, String>,
    /// Full definitions promoted this turn; keys equal the active ids.
    pub promoted_schemas: BTreeMap<String, Value>,
    pub phase1_tokens: usize,
    pub phase2_tokens: usize,
}

impl AttentionResult {
    pub fn total_tokens(&self) -> usize {
        self.phase1_tokens + self.phase2_tokens
    }

    pub fn active_ids(&self) -> Vec<String> {
        self.active.iter().map(|r| r.tool_id.clone()).collect()
    }
}

/// A prompt split at the cache segment boundary the layout chooses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedPrompt {
    /// System text plus the Phase-1 summary pool in canonical catalog
    /// order; byte-identical across turns while the catalog is unchanged.
    pub stable_prefix: String,
    /// Promoted schemas, history tail, and the user message.
    pub volatile_suffix: String,
    pub prefix_hash: u64,
}

impl RenderedPrompt {
    pub fn new(stable_prefix: String, volatile_suffix: String) -> Self {
        let prefix_hash = content_hash(&stable_prefix);
        Self {
            stable_prefix,
            volatile_suffix,
            prefix_hash,
        }
    }

    pub fn full_text(&self) -> String {
        format!("{}{}", self.stable_prefix, self.volatile_suffix)
    }
}

/// One structured routing event, serialized as a single JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnEvent {
    pub turn_id: u64,
    pub query_embedding_hash: u64,
    pub candidates: Vec<String>,
    pub scores: Vec<f64>,
    pub gated_out_by_state: Vec<String>,
    pub active_set: Vec<String>,
    pub phase1_tokens: usize,
    pub phase2_tokens: usize,
    pub p50_latency_ms: f64,
    /// Active-set tools dropped because their schema went missing during
    /// promotion (degraded turn).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dropped_missing_schema: Vec<String>,
}

impl TurnEvent {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("event serializes")
    }
}

/// Where turn events go.
pub enum EventSink {
    /// Drop events (library default; the returned `TurnEvent` still
    /// carries everything).
    Null,
    Stderr,
    File(Mutex<std::fs::File>),
    Memory(Mutex<Vec<TurnEvent>>),
}

impl EventSink {
    pub fn memory() -> Arc<Self> {
        Arc::new(Self::Memory(Mutex::new(Vec::new())))
    }

    pub fn file(path: &std::path::Path) -> std::io::Result<Arc<Self>> {
        Ok(Arc::new(Self::File(Mutex::new(std::fs::File::create(
            path,
        )?))))
    }

    pub fn emit(&self, event: &TurnEvent) {
        match self {
            Self::Null => {}
            Self::Stderr => {
                let _ = writeln!(std::io::stderr(), "{}", event.to_json_line());
            }
            Self::File(f) => {
                let mut f = f.lock().expect("event file lock");
                let _ = writeln!(f, "{}", event.to_json_line());
            }
            Self::Memory(events) => {
                events
                    .lock()
                    .expect("event memory lock")
                    .push(event.clone());
            }
        }
    }

    /// Recorded events (memory sink only).
    pub fn recorded(&self) -> Vec<TurnEvent> {
        match self {
            Self::Memory(events) => events.lock().expect("event memory lock").clone(),
            _ => Vec::new(),
        }
    }
}

type QueryAugmenter = dyn Fn(&str) -> String + Send + Sync;

/// The orchestrator. One instance serves many sessions; per-session
/// state travels in the `AgentState` argument.
pub struct ToolAttention {
    catalog: Arc<Catalog>,
    store: Arc<VectorStore>,
    loader: Arc<SchemaCache>,
    encoder: Arc<Encoder>,
    counter: Arc<TokenCounter>,
    config: RouterConfig,
    sink: Arc<EventSink>,
    augmenter: Option<Arc<QueryAugmenter>>,
}

impl ToolAttention {
    pub fn new(
        catalog: Arc<Catalog>,
        store: Arc<VectorStore>,
        loader: Arc<SchemaCache>,
        encoder: Arc<Encoder>,
        counter: Arc<TokenCounter>,
    ) -> Self {
        Self {
            catalog,
            store,
            loader,
            encoder,
            counter,
            config: RouterConfig::default(),
            sink: Arc::new(EventSink::Null),
            augmenter: None,
        }
    }

    pub fn with_config(mut self, config: RouterConfig) -> Self {
        self.config = config;
        self
    }

    pub fn with_event_sink(mut self, sink: Arc<EventSink>) -> Self {
        self.sink = sink;
        self
    }

    /// Hook for concatenating rolling context onto the query before
    /// embedding. No summarizer ships; callers bring their own.
    pub fn with_query_augmenter(mut self, augmenter: Arc<QueryAugmenter>) -> Self {
        self.augmenter = Some(augmenter);
        self
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn config(&self) -> &RouterConfig {
        &self.config
    }

    /// Token cost of the always-resident summary pool.
    pub fn phase1_pool_tokens(&self) -> Result<usize, TokenError> {
        let mut total = 0;
        for summary in self.catalog.summaries.values() {
            total += self.counter.count(&summary.text)?;
        }
        Ok(total)
    }

    /// Run the full pass for one turn.
    pub fn before_model(
        &self,
        query: &str,
        state: &AgentState,
    ) -> Result<(AttentionResult, RenderedPrompt, TurnEvent), AttentionError> {
        let started = Instant::now();
        let effective_query = match &self.augmenter {
            Some(augment) => augment(query),
            None => query.to_string(),
        };

        let (routed, trace) = route_traced(
            &effective_query,
            state,
            &self.store,
            &self.catalog.preconditions,
            &self.config,
            &self.encoder,
        )?;

        // Promote schemas for the active set. A missing schema degrades
        // the turn (drop and record); transient fetch failures are real
        // errors.
        let mut promoted_schemas = BTreeMap::new();
        let mut dropped_missing_schema = Vec::new();
        let mut active = Vec::with_capacity(routed.len());
        for result in routed {
            match self.loader.get(&result.tool_id) {
                Ok(doc) => {
                    promoted_schemas.insert(result.tool_id.clone(), doc);
                    active.push(result);
                }
                Err(LoadError::MissingSchema(id)) => dropped_missing_schema.push(id),
                Err(e) => return Err(e.into()),
            }
        }
        let mut phase2_tokens = 0usize;
        for doc in promoted_schemas.values() {
            phase2_tokens += self.promoted_tokens(doc)?;
        }

        let phase1_tokens = self.phase1_pool_tokens()?;
        let prompt = self.render_prompt(&active, &promoted_schemas, query);

        let summary_pool: BTreeMap<String, String> = self
            .catalog
            .summaries
            .iter()
            .map(|(id, s)| (id.clone(), s.text.clone()))
            .collect();

        let result = AttentionResult {
            active: active.clone(),
            summary_pool,
            promoted_schemas,
            phase1_tokens,
            phase2_tokens,
        };
        let event = TurnEvent {
            turn_id: state.turn,
            query_embedding_hash: trace.query_embedding_hash,
            candidates: trace.candidates,
            scores: trace.scores,
            gated_out_by_state: trace.gated_out_by_state,
            active_set: result.active_ids(),
            phase1_tokens,
            phase2_tokens,
            p50_latency_ms: started.elapsed().as_secs_f64() * 1e3,
            dropped_missing_schema,
        };
        self.sink.emit(&event);
        Ok((result, prompt, event))
    }

    /// Token cost of one promoted definition, part-by-part when the
    /// document parses as a definition, whole-document otherwise.
    fn promoted_tokens(&self, doc: &Value) -> Result<usize, TokenError> {
        match serde_json::from_value::<ToolDefinition>(doc.clone()) {
            Ok(def) => match token_breakdown(&def, &self.counter) {
                Ok(bd) => Ok(bd.total),
                Err(crate::catalog::CatalogError::Token(e)) => Err(e),
                Err(e) => Err(TokenError::CounterUnavailable(e.to_string())),
            },
            Err(_) => self.counter.count(&canonical_json(doc)),
        }
    }

    fn render_prompt(
        &self,
        active: &[RoutingResult],
        promoted: &BTreeMap<String, Value>,
        user_query: &str,
    ) -> RenderedPrompt {
        let mut prefix = String::new();
        prefix.push_str(SYSTEM_TEXT);
        prefix.push('\n');
        prefix.push_str(SUMMARY_SECTION_HEADER);
        prefix.push('\n');
        for summary in self.catalog.summaries_in_order() {
            prefix.push_str("- ");
            prefix.push_str(&summary.tool_id);
            prefix.push_str(": ");
            prefix.push_str(&summary.text);
            prefix.push('\n');
        }
        prefix.push('\n');

        let mut suffix = String::new();
        if !active.is_empty() {
            suffix.push_str(SCHEMA_SECTION_HEADER);
            suffix.push('\n');
            for result in active {
                if let Some(doc) = promoted.get(&result.tool_id) {
                    suffix.push_str("### ");
                    suffix.push_str(&result.tool_id);
                    suffix.push('\n');
                    suffix.push_str(&canonical_json(doc));
                    suffix.push('\n');
                }
            }
            suffix.push('\n');
        }
        suffix.push_str(USER_SECTION_HEADER);
        suffix.push('\n');
        suffix.push_str(user_query);
        suffix.push('\n');

        RenderedPrompt::new(prefix, suffix)
    }
}

/// The rejection document for a call outside the active set.
pub fn rejection_document(active_ids: &[String]) -> Value {
    serde_json::json!({
        "error": "tool_not_available",
        "available": active_ids,
    })
}

/// The post-model hallucination gate: pass through calls into the active
/// set (or no call at all), reject everything else with the structured
/// error document.
pub fn after_model(active_ids: &[String], requested_tool: Option<&str>) -> Option<Value> {
    match requested_tool {
        None => None,
        Some(tool) if active_ids.iter().any(|id| id == tool) => None,
        Some(_) => Some(rejection_document(active_ids)),
    }
}

/// Prefix-cache accounting over a session's rendered prompts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CacheHitReport {
    pub turns: usize,
    pub prefix_hits: usize,
    /// `prefix_hits / (turns - 1)`.
    pub hit_rate: f64,
    /// Token volume served from cache (stable prefixes of hit turns).
    pub cached_tokens: usize,
    /// Token volume paid uncached.
    pub uncached_tokens: usize,
}

/// A turn is a prefix hit iff its prefix hash equals the previous
/// turn's. The first turn is always uncached.
pub fn cache_hit_accounting(
    session: &[RenderedPrompt],
    counter: &TokenCounter,
) -> Result<CacheHitReport, TokenError> {
    assert!(
        session.len() >= 2,
        "cache accounting needs at least two prompts"
    );
    let mut hits = 0usize;
    let mut cached = 0usize;
    let mut uncached = counter.count(&session[0].full_text())?;
    for pair in session.windows(2) {
        let (prev, turn) = (&pair[0], &pair[1]);
        if turn.prefix_hash == prev.prefix_hash {
            hits += 1;
            cached += counter.count(&turn.stable_prefix)?;
            uncached += counter.count(&turn.volatile_suffix)?;
        } else {
            uncached += counter.count(&turn.full_text())?;
        }
    }
    Ok(CacheHitReport {
        turns: session.len(),
        prefix_hits: hits,
        hit_rate: hits as f64 / (session.len() - 1) as f64,
        cached_tokens: cached,
        uncached_tokens: uncached,
    })
}
