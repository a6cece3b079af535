//! Derived experiment suites on top of the harness: threshold sweep,
//! component ablation, catalog-size scaling, and the poisoned-description
//! exclusion suite.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use crate::catalog::{generate_testbed, summarize_tool, ServerSpec};
use crate::embed::Encoder;
use crate::index::VectorStore;
use crate::router::{route, RouterConfig};
use crate::tokens::TokenCounter;

use super::tasks::{
    default_bench_state, generate_tasks, paraphrase_poisons, unrelated_poisons, CalibrationPair,
    Task,
};
use super::{
    default_methods, measure_attention_task, run_benchmark, BenchConfig, BenchError, HarnessContext,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub theta: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdSweep {
    pub best_theta: f64,
    pub points: Vec<SweepPoint>,
}

/// The calibration grid: 21 points over [0.10, 0.50] in steps of 0.02.
pub fn threshold_grid() -> Vec<f64> {
    (0..21).map(|i| (10 + 2 * i) as f64 / 100.0).collect()
}

/// Sweep the threshold over the grid, scoring F1 of the routed set
/// against each pair's singleton ground truth. Ties go to the smaller
/// threshold.
pub fn sweep_threshold(
    ctx: &HarnessContext,
    pairs: &[CalibrationPair],
    top_k: usize,
) -> Result<ThresholdSweep, BenchError> {
    // Calibration wants 100-200 pairs; degenerate inputs still sweep.
    assert!(
        !pairs.is_empty(),
        "sweep needs at least one calibration pair"
    );
    let state = default_bench_state(&ctx.catalog);
    let mut points = Vec::with_capacity(21);
    let mut best = SweepPoint {
        theta: 0.0,
        f1: f64::NEG_INFINITY,
    };
    for theta in threshold_grid() {
        let cfg = RouterConfig {
            threshold: theta,
            top_k,
            ..RouterConfig::default()
        };
        let mut f1_sum = 0.0;
        for pair in pairs {
            let results = route(
                &pair.query,
                &state,
                ctx.summary_store(),
                &ctx.catalog.preconditions,
                &cfg,
                &ctx.encoder,
            )?;
            let hit = results.iter().any(|r| r.tool_id == pair.tool_id);
            let f1 = if hit && !results.is_empty() {
                let precision = 1.0 / results.len() as f64;
                2.0 * precision / (precision + 1.0)
            } else {
                0.0
            };
            f1_sum += f1;
        }
        let point = SweepPoint {
            theta,
            f1: f1_sum / pairs.len() as f64,
        };
        if point.f1 > best.f1 {
            best = point;
        }
        points.push(point);
    }
    Ok(ThresholdSweep {
        best_theta: best.theta,
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub variant: String,
    pub phase1_tokens: f64,
    pub phase2_tokens: f64,
    pub marginal_tokens: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, variant: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str("| Variant | Phase 1 | Phase 2 | Marginal |\n|---|---|---|---|\n");
        for r in &self.rows {
            out.push_str(&format!(
                "| {} | {:.0} | {:.0} | {:.0} |\n",
                r.variant, r.phase1_tokens, r.phase2_tokens, r.marginal_tokens
            ));
        }
        out
    }
}

/// Token-column ablation over mechanism components and settings.
pub fn ablation_grid(ctx: &HarnessContext, tasks: &[Task]) -> Result<AblationTable, BenchError> {
    let pool_tokens = {
        let mut total = 0usize;
        for s in ctx.catalog.summaries.values() {
            total += ctx.counter.count(&s.text)?;
        }
        total as f64
    };

    let mut rows = Vec::new();
    let run_variant = |name: &str,
                       orchestrator: &crate::attention::ToolAttention|
     -> Result<AblationRow, BenchError> {
        let mut turns = 0usize;
        let mut phase1 = 0.0;
        let mut phase2 = 0.0;
        let mut marginal = 0.0;
        for task in tasks {
            let m = measure_attention_task(ctx, orchestrator, task)?;
            turns += m.turns;
            phase1 += m.phase1_sum;
            phase2 += m.phase2_sum;
            marginal += m.marginal_sum;
        }
        Ok(AblationRow {
            variant: name.to_string(),
            phase1_tokens: phase1 / turns as f64,
            phase2_tokens: phase2 / turns as f64,
            marginal_tokens: marginal / turns as f64,
        })
    };

    let full = RouterConfig::default();
    rows.push(run_variant("full", &ctx.orchestrator(full.clone()))?);
    // The rejection gate runs after the model and never changes what was
    // injected; its ablation shares the full system's token columns.
    {
        let mut row = rows[0].clone();
        row.variant = "no_hallucination_gate".to_string();
        rows.push(row);
    }
    rows.push(run_variant(
        "no_preconditions",
        &ctx.orchestrator_without_preconditions(full.clone()),
    )?);
    // Lazy loading off: nothing is ever promoted, so Phase 2 is zero by
    // construction and only the resident pool remains.
    rows.push(AblationRow {
        variant: "no_lazy_p2_skipped".to_string(),
        phase1_tokens: pool_tokens,
        phase2_tokens: 0.0,
        marginal_tokens: 0.0,
    });
    rows.push(AblationRow {
        variant: "phase1_only_k0".to_string(),
        phase1_tokens: pool_tokens,
        phase2_tokens: 0.0,
        marginal_tokens: 0.0,
    });
    for (name, k) in [("k5", 5), ("k20", 20)] {
        rows.push(run_variant(
            name,
            &ctx.orchestrator(RouterConfig {
                top_k: k,
                ..full.clone()
            }),
        )?);
    }
    for (name, theta) in [("theta_0_15", 0.15), ("theta_0_40", 0.40)] {
        rows.push(run_variant(
            name,
            &ctx.orchestrator(RouterConfig {
                threshold: theta,
                ..full.clone()
            }),
        )?);
    }
    let lexical = Encoder::lexical(ctx.encoder.dim(), ctx.catalog.seed);
    rows.push(run_variant(
        "encoder_lexical",
        &ctx.orchestrator_with_encoder(lexical, full)?,
    )?);

    Ok(AblationTable { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub tools: usize,
    /// Method name to utilization at the horizon turn.
    pub rho: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingTable {
    pub rows: Vec<ScalingRow>,
}

impl ScalingTable {
    pub fn rho_series(&self, method: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter_map(|r| r.rho.get(method).copied())
            .collect()
    }

    pub fn to_markdown(&self) -> String {
        let methods: Vec<&String> = self
            .rows
            .first()
            .map(|r| r.rho.keys().collect())
            .unwrap_or_default();
        let mut out = String::from("| Tools |");
        for m in &methods {
            out.push_str(&format!(" {m} |"));
        }
        out.push('\n');
        out.push_str("|---|");
        out.push_str(&"---|".repeat(methods.len()));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!("| {} |", row.tools));
            for m in &methods {
                out.push_str(&format!(" {:.3} |", row.rho[*m]));
            }
            out.push('\n');
        }
        out
    }
}

/// Regenerate catalogs at each size and measure utilization per method.
pub fn scaling_curve(
    template: &[ServerSpec],
    sizes: &[usize],
    tasks_per_size: usize,
    config: &BenchConfig,
    counter: Arc<TokenCounter>,
    encoder: Arc<Encoder>,
    seed: u64,
) -> Result<ScalingTable, BenchError> {
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let specs = crate::catalog::scale_specs(template, n);
        let target: usize = specs
            .iter()
            .map(|s| s.tool_count * s.avg_schema_tokens)
            .sum();
        let catalog = Arc::new(generate_testbed(&specs, target, seed, &counter)?);
        let ctx = HarnessContext::build(catalog, Arc::clone(&counter), Arc::clone(&encoder))?;
        let tasks = generate_tasks(&ctx.catalog, tasks_per_size, seed);
        let report = run_benchmark(&ctx, &tasks, &default_methods(), config)?;
        let rho = report
            .methods
            .iter()
            .map(|m| (m.name.clone(), m.rho_t30))
            .collect();
        rows.push(ScalingRow { tools: n, rho });
    }
    Ok(ScalingTable { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdversarialReport {
    pub unrelated_total: usize,
    pub unrelated_excluded: usize,
    pub unrelated_exclusion_rate: f64,
    /// Unrelated poisons that slipped into the active set.
    pub unrelated_included_ids: Vec<String>,
    pub paraphrase_total: usize,
    pub paraphrase_included: usize,
    pub paraphrase_inclusion_rate: f64,
}

/// Inject poisoned descriptions and measure whether routing keeps them
/// out of the active set for their paired benign queries. The
/// paraphrase subset demonstrates the documented limit: a summary
/// byte-identical to the query cannot be excluded by similarity.
pub fn adversarial_suite(
    ctx: &HarnessContext,
    n_poisoned: usize,
    seed: u64,
    config: &RouterConfig,
) -> Result<AdversarialReport, BenchError> {
    let state = default_bench_state(&ctx.catalog);

    // All poisons land in the catalog at once; each is judged against
    // its own paired query.
    let unrelated = unrelated_poisons(&ctx.catalog, n_poisoned, seed);
    let unrelated_store = poisoned_store(ctx, &unrelated)?;
    let mut excluded = 0usize;
    let mut included_ids = Vec::new();
    for fixture in &unrelated {
        let active = route(
            &fixture.paired_query,
            &state,
            &unrelated_store,
            &ctx.catalog.preconditions,
            config,
            &ctx.encoder,
        )?;
        if active.iter().any(|r| r.tool_id == fixture.tool.id) {
            included_ids.push(fixture.tool.id.clone());
        } else {
            excluded += 1;
        }
    }

    let paraphrase = paraphrase_poisons(&ctx.catalog, n_poisoned, seed);
    let paraphrase_store = poisoned_store(ctx, &paraphrase)?;
    let mut included = 0usize;
    for fixture in &paraphrase {
        let active = route(
            &fixture.paired_query,
            &state,
            &paraphrase_store,
            &ctx.catalog.preconditions,
            config,
            &ctx.encoder,
        )?;
        if active.iter().any(|r| r.tool_id == fixture.tool.id) {
            included += 1;
        }
    }

    Ok(AdversarialReport {
        unrelated_total: unrelated.len(),
        unrelated_excluded: excluded,
        unrelated_exclusion_rate: excluded as f64 / unrelated.len() as f64,
        unrelated_included_ids: included_ids,
        paraphrase_total: paraphrase.len(),
        paraphrase_included: included,
        paraphrase_inclusion_rate: included as f64 / paraphrase.len() as f64,
    })
}

/// The catalog's summary index extended with poisoned summaries.
fn poisoned_store(
    ctx: &HarnessContext,
    fixtures: &[super::tasks::PoisonFixture],
) -> Result<VectorStore, BenchError> {
    let mut store = VectorStore::new(ctx.encoder.dim());
    let mut summaries: Vec<_> = ctx
        .catalog
        .summaries_in_order()
        .into_iter()
        .cloned()
        .collect();
    for fixture in fixtures {
        summaries.push(summarize_tool(&fixture.tool, 60, &ctx.counter)?);
    }
    store.add_tools(&summaries, &ctx.encoder)?;
    Ok(store)
}
