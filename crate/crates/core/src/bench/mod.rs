//! The measurement harness: baselines, token accounting, utilization,
//! retrieval scoring, and the derived suites (threshold sweep, ablation,
//! scaling, adversarial exclusion).
//!
//! Every method constructs the exact per-turn tool payload it would
//! inject and is charged by the same per-tool token breakdowns, so the
//! full-schema baseline reproduces the calibrated catalog total to the
//! token. Success percentages, latency, and cost are deliberately not
//! computed: they are projections, not measurements, and the harness
//! only reports what it measures.

mod suites;
mod tasks;

pub use suites::{
    ablation_grid, adversarial_suite, scaling_curve, sweep_threshold, AblationRow, AblationTable,
    AdversarialReport, ScalingRow, ScalingTable, SweepPoint, ThresholdSweep,
};
pub use tasks::{
    bindable_tools, default_bench_state, generate_calibration_pairs, generate_tasks,
    paraphrase_poisons, unrelated_poisons, CalibrationPair, Horizon, PoisonFixture, Task,
};

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::attention::{after_model, AttentionError, EventSink, ToolAttention};
use crate::catalog::{Catalog, CatalogError};
use crate::embed::{EmbedError, Encoder};
use crate::index::{IndexError, VectorStore};
use crate::loader::{Fetcher, LoadError, SchemaCache};
use crate::router::RouterConfig;
use crate::tokens::{
    effective_utilization, ContextBudget, TokenCounter, TokenError, UtilizationMode,
};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Token(#[from] TokenError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Route(#[from] crate::router::RouteError),
    #[error(transparent)]
    Attention(#[from] AttentionError),
}

/// A method under test.
#[derive(Debug, Clone, PartialEq)]
pub enum MethodSpec {
    /// Every definition injected every turn.
    B1FullSchema,
    /// A fixed curated subset injected every turn (seeded sample
    /// stratified across servers, `subset_size` tools in total).
    B2StaticPruning { subset_size: usize },
    /// Cosine top-k over full definitions, no gate, no lazy loading.
    B3SimpleRetrieval { top_k: usize },
    /// CLI-style discovery: a fixed prompt of `prompt_tokens` tokens,
    /// no schemas in context.
    B4CliLazy { prompt_tokens: usize },
    /// The full mechanism.
    ToolAttention { config: RouterConfig },
}

impl MethodSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::B1FullSchema => "B1_full_schema",
            Self::B2StaticPruning { .. } => "B2_static_pruning",
            Self::B3SimpleRetrieval { .. } => "B3_simple_retrieval",
            Self::B4CliLazy { .. } => "B4_cli_lazy",
            Self::ToolAttention { .. } => "tool_attention",
        }
    }
}

/// The standard five-method lineup.
pub fn default_methods() -> Vec<MethodSpec> {
    vec![
        MethodSpec::B1FullSchema,
        MethodSpec::B2StaticPruning { subset_size: 30 },
        MethodSpec::B3SimpleRetrieval { top_k: 10 },
        MethodSpec::B4CliLazy { prompt_tokens: 480 },
        MethodSpec::ToolAttention {
            config: RouterConfig::default(),
        },
    ]
}

/// Prebuilt stores and loader shared across methods and suites.
pub struct HarnessContext {
    pub catalog: Arc<Catalog>,
    pub counter: Arc<TokenCounter>,
    pub encoder: Arc<Encoder>,
    summary_store: Arc<VectorStore>,
    fulldef_store: Arc<VectorStore>,
    loader_fetcher: Fetcher,
}

/// Fetcher serving definitions straight from an in-memory catalog.
pub fn catalog_fetcher(catalog: &Catalog) -> Fetcher {
    let map: HashMap<String, serde_json::Value> = catalog
        .tools
        .iter()
        .map(|t| {
            (
                t.id.clone(),
                serde_json::to_value(t).expect("tool serializes"),
            )
        })
        .collect();
    Arc::new(move |tool_id: &str| {
        map.get(tool_id)
            .cloned()
            .ok_or_else(|| LoadError::MissingSchema(tool_id.to_string()))
    })
}

impl HarnessContext {
    pub fn build(
        catalog: Arc<Catalog>,
        counter: Arc<TokenCounter>,
        encoder: Arc<Encoder>,
    ) -> Result<Self, BenchError> {
        let mut summary_store = VectorStore::new(encoder.dim());
        let ordered: Vec<_> = catalog.summaries_in_order().into_iter().cloned().collect();
        summary_store.add_tools(&ordered, &encoder)?;

        // The simple-retrieval baseline embeds full serialized
        // definitions instead of summaries.
        let mut fulldef_store = VectorStore::new(encoder.dim());
        let full_docs: Vec<crate::catalog::ToolSummary> = catalog
            .tools
            .iter()
            .map(|t| crate::catalog::ToolSummary {
                tool_id: t.id.clone(),
                text: t.canonical_json(),
                token_count: 0,
            })
            .collect();
        fulldef_store.add_tools(&full_docs, &encoder)?;

        let loader_fetcher = catalog_fetcher(&catalog);
        Ok(Self {
            catalog,
            counter,
            encoder,
            summary_store: Arc::new(summary_store),
            fulldef_store: Arc::new(fulldef_store),
            loader_fetcher,
        })
    }

    /// A fresh orchestrator over this context's catalog and stores.
    pub fn orchestrator(&self, config: RouterConfig) -> ToolAttention {
        ToolAttention::new(
            Arc::clone(&self.catalog),
            Arc::clone(&self.summary_store),
            Arc::new(SchemaCache::with_default_capacity(Arc::clone(
                &self.loader_fetcher,
            ))),
            Arc::clone(&self.encoder),
            Arc::clone(&self.counter),
        )
        .with_config(config)
        .with_event_sink(Arc::new(EventSink::Null))
    }

    /// An orchestrator whose routing ignores preconditions.
    pub fn orchestrator_without_preconditions(&self, config: RouterConfig) -> ToolAttention {
        let mut stripped = (*self.catalog).clone();
        stripped.preconditions.clear();
        ToolAttention::new(
            Arc::new(stripped),
            Arc::clone(&self.summary_store),
            Arc::new(SchemaCache::with_default_capacity(Arc::clone(
                &self.loader_fetcher,
            ))),
            Arc::clone(&self.encoder),
            Arc::clone(&self.counter),
        )
        .with_config(config)
        .with_event_sink(Arc::new(EventSink::Null))
    }

    /// An orchestrator over a different encoder (rebuilds the summary
    /// index with it).
    pub fn orchestrator_with_encoder(
        &self,
        encoder: Arc<Encoder>,
        config: RouterConfig,
    ) -> Result<ToolAttention, BenchError> {
        let mut store = VectorStore::new(encoder.dim());
        let ordered: Vec<_> = self
            .catalog
            .summaries_in_order()
            .into_iter()
            .cloned()
            .collect();
        store.add_tools(&ordered, &encoder)?;
        Ok(ToolAttention::new(
            Arc::clone(&self.catalog),
            Arc::new(store),
            Arc::new(SchemaCache::with_default_capacity(Arc::clone(
                &self.loader_fetcher,
            ))),
            encoder,
            Arc::clone(&self.counter),
        )
        .with_config(config)
        .with_event_sink(Arc::new(EventSink::Null)))
    }

    pub fn summary_store(&self) -> &VectorStore {
        &self.summary_store
    }

    pub fn fulldef_store(&self) -> &VectorStore {
        &self.fulldef_store
    }

    fn breakdown_total(&self, tool_id: &str) -> usize {
        self.catalog
            .breakdowns
            .get(tool_id)
            .map(|b| b.total)
            .unwrap_or(0)
    }
}

/// Per-task raw measurements for one method.
#[derive(Debug, Clone, Default)]
pub struct TaskMeasure {
    pub turns: usize,
    pub tokens_sum: f64,
    pub phase1_sum: f64,
    pub phase2_sum: f64,
    pub marginal_sum: f64,
    pub retrieved: BTreeSet<String>,
    pub gate_triggers: usize,
}

impl TaskMeasure {
    pub fn mean_tokens(&self) -> f64 {
        self.tokens_sum / self.turns as f64
    }
}

/// Measure one method over one task.
pub fn measure_task(
    ctx: &HarnessContext,
    method: &MethodSpec,
    task: &Task,
    run_seed: u64,
) -> Result<TaskMeasure, BenchError> {
    match method {
        MethodSpec::B1FullSchema => {
            let per_turn = ctx.catalog.total_tokens() as f64;
            Ok(TaskMeasure {
                turns: task.turns(),
                tokens_sum: per_turn * task.turns() as f64,
                retrieved: ctx.catalog.tool_ids().map(str::to_string).collect(),
                ..TaskMeasure::default()
            })
        }
        MethodSpec::B2StaticPruning { subset_size } => {
            let subset = static_subset(&ctx.catalog, *subset_size, run_seed);
            let per_turn: usize = subset.iter().map(|id| ctx.breakdown_total(id)).sum();
            Ok(TaskMeasure {
                turns: task.turns(),
                tokens_sum: (per_turn * task.turns()) as f64,
                retrieved: subset.into_iter().collect(),
                ..TaskMeasure::default()
            })
        }
        MethodSpec::B3SimpleRetrieval { top_k } => {
            let mut measure = TaskMeasure {
                turns: task.turns(),
                ..TaskMeasure::default()
            };
            for query in &task.queries {
                let query_vec = ctx.encoder.encode(query)?;
                let hits = ctx.fulldef_store.search(&query_vec, *top_k)?;
                let tokens: usize = hits.iter().map(|(id, _)| ctx.breakdown_total(id)).sum();
                measure.tokens_sum += tokens as f64;
                measure.retrieved.extend(hits.into_iter().map(|(id, _)| id));
            }
            Ok(measure)
        }
        MethodSpec::B4CliLazy { prompt_tokens } => {
            let per_turn = ctx.counter.count(&cli_discovery_prompt(*prompt_tokens))? as f64;
            Ok(TaskMeasure {
                turns: task.turns(),
                tokens_sum: per_turn * task.turns() as f64,
                ..TaskMeasure::default()
            })
        }
        MethodSpec::ToolAttention { config } => {
            let orchestrator = ctx.orchestrator(config.clone());
            measure_attention_task(ctx, &orchestrator, task)
        }
    }
}

/// Run the orchestrator over a task's turns, charging marginal tokens
/// (Phase 2 plus any prefix delta under a warm prefix cache).
pub fn measure_attention_task(
    ctx: &HarnessContext,
    orchestrator: &ToolAttention,
    task: &Task,
) -> Result<TaskMeasure, BenchError> {
    let mut measure = TaskMeasure {
        turns: task.turns(),
        ..TaskMeasure::default()
    };
    let mut state = default_bench_state(&ctx.catalog);
    let mut prev_prefix_hash: Option<u64> = None;
    for (query, target) in task.queries.iter().zip(&task.turn_targets) {
        let (result, prompt, _event) = orchestrator.before_model(query, &state)?;
        let prefix_delta = match prev_prefix_hash {
            Some(prev) if prev != prompt.prefix_hash => ctx.counter.count(&prompt.stable_prefix)?,
            _ => 0,
        };
        prev_prefix_hash = Some(prompt.prefix_hash);

        let marginal = result.phase2_tokens + prefix_delta;
        measure.tokens_sum += marginal as f64;
        measure.marginal_sum += marginal as f64;
        measure.phase1_sum += result.phase1_tokens as f64;
        measure.phase2_sum += result.phase2_tokens as f64;
        let active_ids = result.active_ids();
        measure.retrieved.extend(active_ids.iter().cloned());

        // Deterministic call simulation: the turn's bound tool is what a
        // correct model would request; the gate triggers when routing
        // missed it.
        let rejected = after_model(&active_ids, Some(target)).is_some();
        if rejected {
            measure.gate_triggers += 1;
        } else {
            state = state.record_tool_result(target, true);
        }
        state = state.next_turn();
    }
    Ok(measure)
}

/// The curated subset: `subset_size` tools total, stratified across
/// servers (seeded picks, spread as evenly as the server count allows).
pub fn static_subset(catalog: &Catalog, subset_size: usize, seed: u64) -> Vec<String> {
    let servers = catalog.servers();
    let per_server = subset_size.div_ceil(servers.len()).max(1);
    let mut subset = Vec::new();
    for server in servers {
        if subset.len() >= subset_size {
            break;
        }
        let ids: Vec<&str> = catalog
            .tools
            .iter()
            .filter(|t| t.server == server)
            .map(|t| t.id.as_str())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(crate::hash::fnv1a_seeded(
            seed,
            format!("subset/{server}").as_bytes(),
        ));
        let mut indices: Vec<usize> = (0..ids.len()).collect();
        for i in (1..indices.len()).rev() {
            indices.swap(i, rng.gen_range(0..=i));
        }
        let take = per_server.min(subset_size - subset.len());
        let mut picked: Vec<usize> = indices.into_iter().take(take).collect();
        picked.sort_unstable();
        subset.extend(picked.into_iter().map(|i| ids[i].to_string()));
    }
    subset
}

/// Naive full-schema prompt layout: every definition re-serialized
/// after the conversation history, the way stateless hosts inject
/// catalogs today. The cacheable prefix spans everything before the
/// user message, so it breaks as soon as history grows.
pub fn render_b1_prompt(
    catalog: &Catalog,
    history: &str,
    user_query: &str,
) -> crate::attention::RenderedPrompt {
    let mut prefix = String::from("# SYSTEM\nYou can call external tools.\n\n## HISTORY\n");
    prefix.push_str(history);
    prefix.push_str("\n\n## TOOLS\n");
    for tool in &catalog.tools {
        prefix.push_str(&tool.canonical_json());
        prefix.push('\n');
    }
    let suffix = format!("\n## USER\n{user_query}\n");
    crate::attention::RenderedPrompt::new(prefix, suffix)
}

/// The fixed CLI-style discovery prompt, sized to `prompt_tokens`
/// under the chars/4 heuristic (the benchmark default is 480).
pub fn cli_discovery_prompt(prompt_tokens: usize) -> String {
    let base = "# TOOL DISCOVERY\nTools are exposed as a command line. Run `tools --list` to \
enumerate command names grouped by server, `tools <name> --help` to print one command's \
arguments, types, and defaults, and `tools <name> --json '<args>'` to invoke it. Never guess \
flags: always read --help before the first invocation of a command. Output is JSON on stdout; \
errors carry a nonzero exit code and a message on stderr. Re-run --list after any mention of \
newly connected servers. Prefer narrow, parameterized invocations over broad dumps, paginate \
with --cursor when offered, and quote string arguments. ";
    let filler = "Discovery is cheap and cached for the session, so list early, read help often, \
and keep every invocation explicit. ";
    let budget_chars = prompt_tokens * 4;
    let mut text = base.to_string();
    while text.len() < budget_chars {
        text.push_str(filler);
    }
    text.truncate(budget_chars);
    text
}

/// Mean with a bootstrap confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Aggregated measurements for one method.
#[derive(Debug, Clone, Serialize)]
pub struct MethodReport {
    pub name: String,
    /// Headline per-turn tool tokens (marginal for the gated mechanism).
    pub tokens_per_turn: Stat,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase1_tokens: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase2_tokens: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub marginal_tokens: Option<f64>,
    /// Effective context utilization at the configured horizon turn.
    pub rho_t30: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gate_trigger_rate: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunMeta {
    pub seeds: Vec<u64>,
    pub counter: String,
    pub encoder: String,
    pub task_count: usize,
    pub catalog_tools: usize,
    pub catalog_total_tokens: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_k: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub run: RunMeta,
    pub methods: Vec<MethodReport>,
}

impl BenchReport {
    pub fn method(&self, name: &str) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Markdown table mirroring the main results layout.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str("| Method | Tokens/turn | rho_T30 | Retrieval F1 | Gate triggers |\n");
        out.push_str("|---|---|---|---|---|\n");
        for m in &self.methods {
            let half = (m.tokens_per_turn.ci_high - m.tokens_per_turn.ci_low) / 2.0;
            out.push_str(&format!(
                "| {} | {:.0} ± {:.0} | {:.2} | {} | {} |\n",
                m.name,
                m.tokens_per_turn.mean,
                half,
                m.rho_t30,
                m.f1.map_or("—".to_string(), |v| format!("{v:.3}")),
                m.gate_trigger_rate
                    .map_or("—".to_string(), |v| format!("{:.1}%", v * 100.0)),
            ));
        }
        out
    }
}

/// Benchmark configuration: utilization budget, bootstrap seeds, and
/// the horizon turn for utilization.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub budget: ContextBudget,
    pub seeds: Vec<u64>,
    pub rho_turn: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            budget: ContextBudget::default(),
            seeds: vec![42, 43, 44],
            rho_turn: 30,
        }
    }
}

/// Run every method over every task and aggregate.
pub fn run_benchmark(
    ctx: &HarnessContext,
    tasks: &[Task],
    methods: &[MethodSpec],
    config: &BenchConfig,
) -> Result<BenchReport, BenchError> {
    assert!(!methods.is_empty(), "need at least one method");
    assert!(!config.seeds.is_empty(), "need at least one seed");
    let mut reports = Vec::with_capacity(methods.len());
    let run_seed = config.seeds[0];

    for method in methods {
        let mut measures = Vec::with_capacity(tasks.len());
        for task in tasks {
            measures.push(measure_task(ctx, method, task, run_seed)?);
        }
        reports.push(aggregate(method, tasks, &measures, config)?);
    }

    let ta = methods.iter().find_map(|m| match m {
        MethodSpec::ToolAttention { config } => Some(config.clone()),
        _ => None,
    });
    Ok(BenchReport {
        run: RunMeta {
            seeds: config.seeds.clone(),
            counter: ctx.counter.name().to_string(),
            encoder: ctx.encoder.name().to_string(),
            task_count: tasks.len(),
            catalog_tools: ctx.catalog.tools.len(),
            catalog_total_tokens: ctx.catalog.total_tokens(),
            theta: ta.as_ref().map(|c| c.threshold),
            top_k: ta.as_ref().map(|c| c.top_k),
        },
        methods: reports,
    })
}

fn aggregate(
    method: &MethodSpec,
    tasks: &[Task],
    measures: &[TaskMeasure],
    config: &BenchConfig,
) -> Result<MethodReport, BenchError> {
    let total_turns: usize = measures.iter().map(|m| m.turns).sum();
    let mean = measures.iter().map(|m| m.tokens_sum).sum::<f64>() / total_turns as f64;
    let stat = bootstrap_stat(measures, &config.seeds, mean);

    let is_attention = matches!(method, MethodSpec::ToolAttention { .. });
    let scores_retrieval = matches!(
        method,
        MethodSpec::B2StaticPruning { .. }
            | MethodSpec::B3SimpleRetrieval { .. }
            | MethodSpec::ToolAttention { .. }
    );

    let (precision, recall, f1) = if scores_retrieval {
        let mut p_sum = 0.0;
        let mut r_sum = 0.0;
        let mut f_sum = 0.0;
        for (task, measure) in tasks.iter().zip(measures) {
            let (p, r, f) = retrieval_scores(&task.ground_truth_tools, &measure.retrieved);
            p_sum += p;
            r_sum += r;
            f_sum += f;
        }
        let n = tasks.len() as f64;
        (Some(p_sum / n), Some(r_sum / n), Some(f_sum / n))
    } else {
        (None, None, None)
    };

    let rho_tokens = mean.round().max(0.0) as usize;
    let rho = effective_utilization(
        &config.budget,
        rho_tokens,
        config.rho_turn,
        UtilizationMode::PerTurn,
    )?;

    Ok(MethodReport {
        name: method.name().to_string(),
        tokens_per_turn: stat,
        phase1_tokens: is_attention
            .then(|| measures.iter().map(|m| m.phase1_sum).sum::<f64>() / total_turns as f64),
        phase2_tokens: is_attention
            .then(|| measures.iter().map(|m| m.phase2_sum).sum::<f64>() / total_turns as f64),
        marginal_tokens: is_attention
            .then(|| measures.iter().map(|m| m.marginal_sum).sum::<f64>() / total_turns as f64),
        rho_t30: rho,
        precision,
        recall,
        f1,
        gate_trigger_rate: is_attention.then(|| {
            measures.iter().map(|m| m.gate_triggers).sum::<usize>() as f64 / total_turns as f64
        }),
    })
}

/// Precision, recall, F1 of a retrieved set against ground truth.
pub fn retrieval_scores(
    ground_truth: &BTreeSet<String>,
    retrieved: &BTreeSet<String>,
) -> (f64, f64, f64) {
    if retrieved.is_empty() || ground_truth.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let tp = ground_truth.intersection(retrieved).count() as f64;
    let precision = tp / retrieved.len() as f64;
    let recall = tp / ground_truth.len() as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    (precision, recall, f1)
}

/// One bootstrap replicate per seed: resample tasks with replacement and
/// take the turn-weighted mean; the CI is mean ± 1.96 sd over replicates.
fn bootstrap_stat(measures: &[TaskMeasure], seeds: &[u64], point_mean: f64) -> Stat {
    let mut replicates = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tokens = 0.0;
        let mut turns = 0usize;
        for _ in 0..measures.len() {
            let pick = &measures[rng.gen_range(0..measures.len())];
            tokens += pick.tokens_sum;
            turns += pick.turns;
        }
        replicates.push(tokens / turns as f64);
    }
    let n = replicates.len() as f64;
    let mean_rep = replicates.iter().sum::<f64>() / n;
    let var = replicates
        .iter()
        .map(|r| (r - mean_rep).powi(2))
        .sum::<f64>()
        / n;
    let half = 1.96 * var.sqrt();
    Stat {
        mean: point_mean,
        ci_low: point_mean - half,
        ci_high: point_mean + half,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::cache_hit_accounting;
    use crate::catalog::{default_specs, generate_testbed, ServerSpec, DEFAULT_TARGET_TOKENS};

    fn testbed_ctx() -> HarnessContext {
        let counter = TokenCounter::heuristic();
        let catalog = Arc::new(
            generate_testbed(&default_specs(), DEFAULT_TARGET_TOKENS, 42, &counter).unwrap(),
        );
        HarnessContext::build(catalog, counter, Encoder::hashed_ngram(384, 42)).unwrap()
    }

    #[test]
    fn discovery_prompt_matches_its_token_budget() {
        let counter = TokenCounter::heuristic();
        assert_eq!(counter.count(&cli_discovery_prompt(480)).unwrap(), 480);
        assert_eq!(counter.count(&cli_discovery_prompt(600)).unwrap(), 600);
    }

    #[test]
    fn b1_charges_the_exact_catalog_total_every_turn() {
        let ctx = testbed_ctx();
        let tasks = tasks::generate_tasks(&ctx.catalog, 10, 1);
        for task in &tasks {
            let m = measure_task(&ctx, &MethodSpec::B1FullSchema, task, 42).unwrap();
            assert_eq!(m.mean_tokens(), ctx.catalog.total_tokens() as f64);
        }
    }

    #[test]
    fn curated_subset_is_thirty_tools_stratified() {
        let ctx = testbed_ctx();
        let subset = static_subset(&ctx.catalog, 30, 42);
        assert_eq!(subset.len(), 30);
        for server in ctx.catalog.servers() {
            let from_server = subset
                .iter()
                .filter(|id| ctx.catalog.tool(id).unwrap().server == server)
                .count();
            assert_eq!(from_server, 5, "server {server} not stratified");
        }
        assert_eq!(subset, static_subset(&ctx.catalog, 30, 42));
        assert_ne!(subset, static_subset(&ctx.catalog, 30, 43));
    }

    #[test]
    fn testbed_store_indexes_every_tool() {
        let ctx = testbed_ctx();
        assert_eq!(ctx.summary_store().len(), 120);
        assert_eq!(ctx.fulldef_store().len(), 120);
    }

    #[test]
    fn naive_layout_never_earns_prefix_hits() {
        let ctx = testbed_ctx();
        let counter = TokenCounter::heuristic();
        let mut history = String::new();
        let mut prompts = Vec::new();
        for i in 0..30 {
            let query = format!("turn {i} question");
            prompts.push(render_b1_prompt(&ctx.catalog, &history, &query));
            history.push_str(&format!("user: {query}\nassistant: done\n"));
        }
        let report = cache_hit_accounting(&prompts, &counter).unwrap();
        assert_eq!(report.prefix_hits, 0);
        assert_eq!(report.hit_rate, 0.0);
        assert_eq!(report.cached_tokens, 0);
    }

    #[test]
    fn retrieval_scores_edges() {
        let gt: BTreeSet<String> = ["a".to_string(), "b".to_string()].into();
        let got: BTreeSet<String> = ["a".to_string(), "c".to_string()].into();
        let (p, r, f1) = retrieval_scores(&gt, &got);
        assert!((p - 0.5).abs() < 1e-12);
        assert!((r - 0.5).abs() < 1e-12);
        assert!((f1 - 0.5).abs() < 1e-12);
        assert_eq!(retrieval_scores(&gt, &BTreeSet::new()), (0.0, 0.0, 0.0));
    }

    #[test]
    fn single_pair_sweep_still_returns_an_argmax() {
        let counter = TokenCounter::heuristic();
        let catalog = Arc::new(
            generate_testbed(
                &[ServerSpec::new("GitHub", 6, 250, "repo")],
                1500,
                5,
                &counter,
            )
            .unwrap(),
        );
        let ctx = HarnessContext::build(catalog, counter, Encoder::hashed_ngram(384, 42)).unwrap();
        let pairs = tasks::generate_calibration_pairs(&ctx.catalog, 1, 9);
        let sweep = suites::sweep_threshold(&ctx, &pairs, 10).unwrap();
        assert_eq!(sweep.points.len(), 21);
        assert!(suites::threshold_grid().contains(&sweep.best_theta));
        for point in &sweep.points {
            assert!((0.0..=1.0).contains(&point.f1));
        }
    }

    #[test]
    fn report_serializes_deterministically() {
        let ctx = testbed_ctx();
        let tasks = tasks::generate_tasks(&ctx.catalog, 20, 3);
        let config = BenchConfig::default();
        let one = run_benchmark(&ctx, &tasks, &default_methods(), &config).unwrap();
        let two = run_benchmark(&ctx, &tasks, &default_methods(), &config).unwrap();
        assert_eq!(one.to_json(), two.to_json());
        let markdown = one.to_markdown();
        for method in default_methods() {
            assert!(markdown.contains(method.name()));
        }
    }
}
