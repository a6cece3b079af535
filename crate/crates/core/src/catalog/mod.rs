//! Tool definitions, summaries, the calibrated synthetic testbed, and
//! the on-disk schema registry.
//!
//! A tool is the quadruple (name, description, JSON schema, output shape)
//! plus its owning server. Token accounting decomposes per part, so the
//! calibrated catalog total is reproducible to the token by recounting.
//! All serialization goes through canonical JSON (lexicographic keys) so
//! registries are byte-reproducible.

mod testbed;

pub use testbed::{default_specs, generate_testbed, scale_specs, DEFAULT_TARGET_TOKENS};

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state::Precondition;
use crate::tokens::{TokenCounter, TokenError};

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("calibration failed for server {server:?}: {reason}")]
    CalibrationFailure { server: String, reason: String },
    #[error("no schema for {0:?}")]
    MissingSchema(String),
    #[error("duplicate tool id {0:?}")]
    DuplicateToolId(String),
    #[error("invalid server spec: {0}")]
    InvalidSpec(String),
    #[error("invalid catalog: {0}")]
    InvalidCatalog(String),
    #[error(transparent)]
    Token(#[from] TokenError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One tool as exposed by a server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolDefinition {
    pub id: String,
    pub name: String,
    pub desc: String,
    /// JSON-Schema object: object root with a `properties` map.
    pub schema: serde_json::Value,
    /// Free-text description of the output shape.
    pub output: String,
    pub server: String,
}

impl ToolDefinition {
    /// Canonical serialization of the whole definition, the bytes the
    /// registry stores and prompts embed.
    pub fn canonical_json(&self) -> String {
        canonical_json(self)
    }
}

/// Per-part token counts of one serialized definition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenBreakdown {
    pub name_tokens: usize,
    pub desc_tokens: usize,
    pub schema_tokens: usize,
    pub output_tokens: usize,
    pub total: usize,
}

/// Count one tool's parts with `counter`. `total` is the exact sum of
/// the four parts; the schema part counts its canonical JSON.
pub fn token_breakdown(
    tool: &ToolDefinition,
    counter: &TokenCounter,
) -> Result<TokenBreakdown, CatalogError> {
    let name_tokens = counter.count(&tool.name)?;
    let desc_tokens = counter.count(&tool.desc)?;
    let schema_tokens = counter.count(&canonical_json(&tool.schema))?;
    let output_tokens = counter.count(&tool.output)?;
    Ok(TokenBreakdown {
        name_tokens,
        desc_tokens,
        schema_tokens,
        output_tokens,
        total: name_tokens + desc_tokens + schema_tokens + output_tokens,
    })
}

/// The compact always-resident summary of one tool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSummary {
    pub tool_id: String,
    pub text: String,
    pub token_count: usize,
}

/// Shape of one synthetic server in the testbed generator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerSpec {
    pub name: String,
    pub tool_count: usize,
    /// Mean tokens per serialized tool definition for this server.
    pub avg_schema_tokens: usize,
    pub domain: String,
}

impl ServerSpec {
    pub fn new(name: &str, tool_count: usize, avg_schema_tokens: usize, domain: &str) -> Self {
        Self {
            name: name.to_string(),
            tool_count,
            avg_schema_tokens,
            domain: domain.to_string(),
        }
    }

    fn validate(&self) -> Result<(), CatalogError> {
        if self.tool_count < 1 {
            return Err(CatalogError::InvalidSpec(format!(
                "server {:?} needs at least one tool",
                self.name
            )));
        }
        if self.avg_schema_tokens < 20 {
            return Err(CatalogError::InvalidSpec(format!(
                "server {:?} average below 20 tokens",
                self.name
            )));
        }
        Ok(())
    }
}

/// An ordered tool catalog with summaries, token breakdowns, and
/// precondition sets. Immutable after construction; share read-only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub tools: Vec<ToolDefinition>,
    pub summaries: BTreeMap<String, ToolSummary>,
    pub breakdowns: BTreeMap<String, TokenBreakdown>,
    /// Conjunct precondition sets; absent means `always`.
    pub preconditions: BTreeMap<String, Vec<Precondition>>,
    pub seed: u64,
    pub counter_name: String,
}

impl Catalog {
    pub fn tool(&self, tool_id: &str) -> Option<&ToolDefinition> {
        self.tools.iter().find(|t| t.id == tool_id)
    }

    pub fn tool_ids(&self) -> impl Iterator<Item = &str> {
        self.tools.iter().map(|t| t.id.as_str())
    }

    /// Sum of calibrated per-tool totals.
    pub fn total_tokens(&self) -> usize {
        self.breakdowns.values().map(|b| b.total).sum()
    }

    /// Distinct server names, in first-appearance order.
    pub fn servers(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for t in &self.tools {
            if seen.insert(t.server.clone()) {
                out.push(t.server.clone());
            }
        }
        out
    }

    /// Summaries in catalog order, the canonical Phase-1 pool layout.
    pub fn summaries_in_order(&self) -> Vec<&ToolSummary> {
        self.tools
            .iter()
            .filter_map(|t| self.summaries.get(&t.id))
            .collect()
    }

    /// Structural invariants: unique non-empty ids, schema shape, and
    /// summary/tool agreement.
    pub fn validate(&self) -> Result<(), CatalogError> {
        let mut ids = BTreeSet::new();
        for t in &self.tools {
            if t.name.is_empty() || t.id.is_empty() {
                return Err(CatalogError::InvalidCatalog(format!(
                    "tool with empty id or name near {:?}",
                    t.id
                )));
            }
            if !ids.insert(t.id.clone()) {
                return Err(CatalogError::DuplicateToolId(t.id.clone()));
            }
            let valid_schema =
                t.schema.is_object() && t.schema.get("properties").is_some_and(|p| p.is_object());
            if !valid_schema {
                return Err(CatalogError::InvalidCatalog(format!(
                    "tool {:?} schema is not an object with properties",
                    t.id
                )));
            }
        }
        for id in self.summaries.keys() {
            if !ids.contains(id) {
                return Err(CatalogError::InvalidCatalog(format!(
                    "summary for unknown tool {id:?}"
                )));
            }
        }
        for t in &self.tools {
            if !self.summaries.contains_key(&t.id) {
                return Err(CatalogError::InvalidCatalog(format!(
                    "tool {:?} has no summary",
                    t.id
                )));
            }
        }
        Ok(())
    }
}

/// Serialize any value with lexicographically ordered object keys.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    // serde_json's default Map is a BTreeMap, so a Value round-trip
    // sorts every object.
    let v = serde_json::to_value(value).expect("serializable value");
    serde_json::to_string(&v).expect("canonical json")
}

fn canonical_json_pretty<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("serializable value");
    serde_json::to_string_pretty(&v).expect("canonical json")
}

/// Compact summary: tool name (underscores as spaces) plus the first
/// sentence of the description, truncated at word boundaries to fit
/// `max_tokens`. Never empty.
pub fn summarize_tool(
    tool: &ToolDefinition,
    max_tokens: usize,
    counter: &TokenCounter,
) -> Result<ToolSummary, CatalogError> {
    assert!(
        max_tokens >= 8,
        "summaries need a budget of at least 8 tokens"
    );
    let name_words = tool.name.replace('_', " ");
    let first_sentence = match tool.desc.find('.') {
        Some(i) => tool.desc[..=i].trim(),
        None => tool.desc.trim(),
    };
    let full = if first_sentence.is_empty() {
        name_words.clone()
    } else {
        format!("{name_words} — {first_sentence}")
    };

    let mut text = full.clone();
    while counter.count(&text)? > max_tokens {
        match text.rfind(char::is_whitespace) {
            Some(i) => text.truncate(i),
            None => {
                // A single oversized word: hard-cut rather than emit an
                // empty summary.
                let budget_chars = max_tokens * 4;
                let cut = text
                    .char_indices()
                    .take(budget_chars)
                    .last()
                    .map(|(i, c)| i + c.len_utf8())
                    .unwrap_or(0);
                text.truncate(cut.max(1).min(text.len()));
                break;
            }
        }
        let trimmed = text.trim_end();
        text.truncate(trimmed.len());
        if text.is_empty() {
            text = name_words
                .split_whitespace()
                .next()
                .unwrap_or("tool")
                .to_string();
            break;
        }
    }
    let token_count = counter.count(&text)?;
    Ok(ToolSummary {
        tool_id: tool.id.clone(),
        text,
        token_count,
    })
}

/// Index document written to `catalog.json`.
#[derive(Serialize, Deserialize)]
struct RegistryIndex {
    counter_name: String,
    seed: u64,
    tool_ids: Vec<String>,
    summaries: BTreeMap<String, ToolSummary>,
    breakdowns: BTreeMap<String, TokenBreakdown>,
    preconditions: BTreeMap<String, Vec<Precondition>>,
}

/// Write `catalog.json` plus one `<tool_id>.json` per tool.
pub fn save_registry(catalog: &Catalog, directory: &Path) -> Result<(), CatalogError> {
    std::fs::create_dir_all(directory)?;
    let index = RegistryIndex {
        counter_name: catalog.counter_name.clone(),
        seed: catalog.seed,
        tool_ids: catalog.tools.iter().map(|t| t.id.clone()).collect(),
        summaries: catalog.summaries.clone(),
        breakdowns: catalog.breakdowns.clone(),
        preconditions: catalog.preconditions.clone(),
    };
    std::fs::write(
        directory.join("catalog.json"),
        canonical_json_pretty(&index) + "\n",
    )?;
    for tool in &catalog.tools {
        std::fs::write(
            directory.join(format!("{}.json", tool.id)),
            canonical_json_pretty(tool) + "\n",
        )?;
    }
    Ok(())
}

/// Exact inverse of [`save_registry`]. A tool listed in the index whose
/// file is absent is a missing-schema error naming the id.
pub fn load_registry(directory: &Path) -> Result<Catalog, CatalogError> {
    let index: RegistryIndex =
        serde_json::from_str(&std::fs::read_to_string(directory.join("catalog.json"))?)?;
    let mut tools = Vec::with_capacity(index.tool_ids.len());
    for id in &index.tool_ids {
        let path = directory.join(format!("{id}.json"));
        if !path.exists() {
            return Err(CatalogError::MissingSchema(id.clone()));
        }
        let tool: ToolDefinition = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        tools.push(tool);
    }
    let catalog = Catalog {
        tools,
        summaries: index.summaries,
        breakdowns: index.breakdowns,
        preconditions: index.preconditions,
        seed: index.seed,
        counter_name: index.counter_name,
    };
    catalog.validate()?;
    Ok(catalog)
}
