//! `toolattn`: build calibrated tool catalogs, run the token benchmark
//! suites, route single queries, and serve the gateway.
//!
//! Machine output (reports, routing results) goes to stdout or `--out`;
//! logs and events go to stderr. Every run banner-logs its resolved
//! configuration so results are attributable.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use tool_attention::attention::EventSink;
use tool_attention::bench::{
    ablation_grid, adversarial_suite, default_methods, generate_calibration_pairs, generate_tasks,
    run_benchmark, scaling_curve, sweep_threshold, BenchConfig, HarnessContext,
};
use tool_attention::catalog::{
    default_specs, generate_testbed, load_registry, save_registry, Catalog, DEFAULT_TARGET_TOKENS,
};
use tool_attention::gateway::{serve_stdio, spawn_tcp, Gateway};
use tool_attention::{Encoder, RouterConfig, TokenCounter};

#[derive(Parser)]
#[command(
    name = "toolattn",
    version,
    about = "Semantic tool gating: calibrated catalogs, token benchmarks, and a JSON-RPC gateway"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Master seed for generation and bootstrap.
    #[arg(long, default_value_t = 42, global = true)]
    seed: u64,
    /// Registry directory to load; omitted means the built-in testbed is
    /// generated in memory.
    #[arg(long, global = true)]
    registry: Option<PathBuf>,
    /// Token counter: `heuristic` or `external:CMD`.
    #[arg(long, default_value = "heuristic", global = true)]
    counter: String,
    /// Encoder: `builtin` or `external:CMD`.
    #[arg(long, default_value = "builtin", global = true)]
    encoder: String,
    /// Embedding dimension (external encoders must match).
    #[arg(long, default_value_t = 384, global = true)]
    encoder_dim: usize,
    /// Routing threshold.
    #[arg(long, default_value_t = 0.28, global = true)]
    theta: f64,
    /// Active-set size cap.
    #[arg(long, default_value_t = 10, global = true)]
    top_k: usize,
    /// Write machine output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Machine output format.
    #[arg(long, default_value = "json", value_parser = ["json", "markdown"], global = true)]
    format: String,
    /// Turn event sink: `none`, `stderr`, or a file path.
    #[arg(long, default_value = "none", global = true)]
    events: String,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a calibrated synthetic registry on disk.
    BuildCatalog {
        #[command(flatten)]
        common: CommonArgs,
        /// Output directory for the registry.
        #[arg(long, default_value = "./registry")]
        out_dir: PathBuf,
        /// Catalog size; 120 reproduces the reference testbed.
        #[arg(long, default_value_t = 120)]
        tools: usize,
    },
    /// Run the five-method token benchmark.
    Bench {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 500)]
        tasks: usize,
    },
    /// Sweep the routing threshold over the calibration grid.
    SweepTheta {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 150)]
        pairs: usize,
    },
    /// Token-column ablation over mechanism components.
    Ablate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 500)]
        tasks: usize,
    },
    /// Utilization versus catalog size.
    Scale {
        #[command(flatten)]
        common: CommonArgs,
        /// Catalog sizes to generate.
        #[arg(long, value_delimiter = ',', default_values_t = vec![60, 120, 250, 500, 1000])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 120)]
        tasks_per_size: usize,
    },
    /// Poisoned-description exclusion suite.
    Adversarial {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 50)]
        poisoned: usize,
    },
    /// Route one query and print the attention result.
    Route {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        query: String,
    },
    /// Serve the registry as a JSON-RPC gateway.
    Serve {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value = "stdio", value_parser = ["stdio", "tcp"])]
        transport: String,
        #[arg(long, default_value_t = 7331)]
        port: u16,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn build_counter(common: &CommonArgs) -> Result<Arc<TokenCounter>> {
    match common.counter.as_str() {
        "heuristic" => Ok(TokenCounter::heuristic()),
        other => match other.strip_prefix("external:") {
            Some(cmd) => {
                let adapter = tool_attention::adapter::ChildProcessAdapter::spawn(cmd)
                    .with_context(|| format!("starting counter adapter {cmd:?}"))?;
                Ok(TokenCounter::external(
                    &format!("external:{cmd}"),
                    Box::new(adapter),
                ))
            }
            None => bail!("unknown counter {other:?} (use heuristic or external:CMD)"),
        },
    }
}

fn build_encoder(common: &CommonArgs) -> Result<Arc<Encoder>> {
    match common.encoder.as_str() {
        "builtin" => Ok(Encoder::hashed_ngram(common.encoder_dim, common.seed)),
        other => match other.strip_prefix("external:") {
            Some(cmd) => {
                let adapter = tool_attention::adapter::ChildProcessAdapter::spawn(cmd)
                    .with_context(|| format!("starting encoder adapter {cmd:?}"))?;
                Ok(Encoder::external(
                    &format!("external:{cmd}"),
                    common.encoder_dim,
                    Box::new(adapter),
                ))
            }
            None => bail!("unknown encoder {other:?} (use builtin or external:CMD)"),
        },
    }
}

fn build_sink(common: &CommonArgs) -> Result<Arc<EventSink>> {
    match common.events.as_str() {
        "none" => Ok(Arc::new(EventSink::Null)),
        "stderr" => Ok(Arc::new(EventSink::Stderr)),
        path => EventSink::file(std::path::Path::new(path))
            .with_context(|| format!("opening event sink {path:?}")),
    }
}

fn router_config(common: &CommonArgs) -> RouterConfig {
    RouterConfig::new(common.theta, common.top_k)
}

/// Load the registry, or generate the reference testbed when none is
/// given.
fn load_catalog(common: &CommonArgs, counter: &TokenCounter) -> Result<Arc<Catalog>> {
    match &common.registry {
        Some(dir) => {
            Ok(Arc::new(load_registry(dir).with_context(|| {
                format!("loading registry {}", dir.display())
            })?))
        }
        None => Ok(Arc::new(generate_testbed(
            &default_specs(),
            DEFAULT_TARGET_TOKENS,
            common.seed,
            counter,
        )?)),
    }
}

fn banner(common: &CommonArgs, subcommand: &str, extra: &str) {
    eprintln!(
        "[toolattn] {subcommand} seed={} counter={} encoder={} theta={} top_k={} registry={}{}",
        common.seed,
        common.counter,
        common.encoder,
        common.theta,
        common.top_k,
        common
            .registry
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "<built-in testbed>".to_string()),
        extra,
    );
}

fn emit(common: &CommonArgs, text: &str) -> Result<()> {
    match &common.out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn bench_config(common: &CommonArgs) -> BenchConfig {
    BenchConfig {
        seeds: vec![common.seed, common.seed + 1, common.seed + 2],
        ..BenchConfig::default()
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::BuildCatalog {
            common,
            out_dir,
            tools,
        } => {
            banner(
                &common,
                "build-catalog",
                &format!(" tools={tools} out={}", out_dir.display()),
            );
            let counter = build_counter(&common)?;
            let specs = if tools == 120 {
                default_specs()
            } else {
                tool_attention::catalog::scale_specs(&default_specs(), tools)
            };
            let target: usize = if tools == 120 {
                DEFAULT_TARGET_TOKENS
            } else {
                specs
                    .iter()
                    .map(|s| s.tool_count * s.avg_schema_tokens)
                    .sum()
            };
            let catalog = generate_testbed(&specs, target, common.seed, &counter)?;
            save_registry(&catalog, &out_dir)?;
            eprintln!(
                "[toolattn] wrote {} tools ({} tokens) to {}",
                catalog.tools.len(),
                catalog.total_tokens(),
                out_dir.display()
            );
            Ok(())
        }
        Command::Bench { common, tasks } => {
            banner(&common, "bench", &format!(" tasks={tasks}"));
            let counter = build_counter(&common)?;
            let encoder = build_encoder(&common)?;
            let catalog = load_catalog(&common, &counter)?;
            let ctx = HarnessContext::build(catalog, counter, encoder)?;
            let task_set = generate_tasks(&ctx.catalog, tasks, common.seed);
            let mut methods = default_methods();
            for m in &mut methods {
                if let tool_attention::bench::MethodSpec::ToolAttention { config } = m {
                    *config = router_config(&common);
                }
            }
            let report = run_benchmark(&ctx, &task_set, &methods, &bench_config(&common))?;
            let text = if common.format == "markdown" {
                report.to_markdown()
            } else {
                report.to_json()
            };
            emit(&common, &text)
        }
        Command::SweepTheta { common, pairs } => {
            banner(&common, "sweep-theta", &format!(" pairs={pairs}"));
            let counter = build_counter(&common)?;
            let encoder = build_encoder(&common)?;
            let catalog = load_catalog(&common, &counter)?;
            let ctx = HarnessContext::build(catalog, counter, encoder)?;
            let pair_set = generate_calibration_pairs(&ctx.catalog, pairs, common.seed);
            let sweep = sweep_threshold(&ctx, &pair_set, common.top_k)?;
            let text = if common.format == "markdown" {
                let mut out = String::from("| theta | F1 |\n|---|---|\n");
                for p in &sweep.points {
                    out.push_str(&format!("| {:.2} | {:.4} |\n", p.theta, p.f1));
                }
                out.push_str(&format!("\nbest theta: {:.2}\n", sweep.best_theta));
                out
            } else {
                serde_json::to_string_pretty(&sweep)?
            };
            emit(&common, &text)
        }
        Command::Ablate { common, tasks } => {
            banner(&common, "ablate", &format!(" tasks={tasks}"));
            let counter = build_counter(&common)?;
            let encoder = build_encoder(&common)?;
            let catalog = load_catalog(&common, &counter)?;
            let ctx = HarnessContext::build(catalog, counter, encoder)?;
            let task_set = generate_tasks(&ctx.catalog, tasks, common.seed);
            let table = ablation_grid(&ctx, &task_set)?;
            let text = if common.format == "markdown" {
                table.to_markdown()
            } else {
                serde_json::to_string_pretty(&table)?
            };
            emit(&common, &text)
        }
        Command::Scale {
            common,
            sizes,
            tasks_per_size,
        } => {
            banner(&common, "scale", &format!(" sizes={sizes:?}"));
            let counter = build_counter(&common)?;
            let encoder = build_encoder(&common)?;
            let table = scaling_curve(
                &default_specs(),
                &sizes,
                tasks_per_size,
                &bench_config(&common),
                counter,
                encoder,
                common.seed,
            )?;
            let text = if common.format == "markdown" {
                table.to_markdown()
            } else {
                serde_json::to_string_pretty(&table)?
            };
            emit(&common, &text)
        }
        Command::Adversarial { common, poisoned } => {
            banner(&common, "adversarial", &format!(" poisoned={poisoned}"));
            let counter = build_counter(&common)?;
            let encoder = build_encoder(&common)?;
            let catalog = load_catalog(&common, &counter)?;
            let ctx = HarnessContext::build(catalog, counter, encoder)?;
            let report = adversarial_suite(&ctx, poisoned, common.seed, &router_config(&common))?;
            emit(&common, &serde_json::to_string_pretty(&report)?)
        }
        Command::Route { common, query } => {
            banner(&common, "route", "");
            let counter = build_counter(&common)?;
            let encoder = build_encoder(&common)?;
            let catalog = load_catalog(&common, &counter)?;
            let ctx = HarnessContext::build(catalog, counter, encoder)?;
            let orchestrator = ctx
                .orchestrator(router_config(&common))
                .with_event_sink(build_sink(&common)?);
            let state = tool_attention::bench::default_bench_state(&ctx.catalog);
            let (result, _prompt, _event) = orchestrator.before_model(&query, &state)?;
            emit(&common, &serde_json::to_string_pretty(&result)?)
        }
        Command::Serve {
            common,
            transport,
            port,
        } => {
            banner(
                &common,
                "serve",
                &format!(" transport={transport} port={port}"),
            );
            let registry = common
                .registry
                .clone()
                .context("serve needs --registry DIR (build one with build-catalog)")?;
            let counter = build_counter(&common)?;
            let encoder = build_encoder(&common)?;
            let sink = build_sink(&common)?;
            let gateway =
                Gateway::from_registry(&registry, router_config(&common), counter, encoder, sink)?;
            match transport.as_str() {
                "stdio" => serve_stdio(&gateway)?,
                "tcp" => {
                    let addr = spawn_tcp(Arc::new(gateway), &format!("127.0.0.1:{port}"))?;
                    eprintln!("[toolattn] listening on {addr}");
                    loop {
                        std::thread::park();
                    }
                }
                other => bail!("unknown transport {other:?}"),
            }
            Ok(())
        }
    }
}
