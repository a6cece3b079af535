//! Seeded synthetic testbed generation with token calibration.
//!
//! Tools are assembled from per-domain vocabulary (verb + object +
//! qualifier name compounds, typed parameter pools, combinatorial
//! capability tails) so retrieval has real signal, then each serialized
//! definition is padded or trimmed until its token total hits an exact
//! per-tool target. Server totals are apportioned from the catalog
//! target by largest remainder, so the calibrated catalog total lands
//! on the target to the token.
//!
//! Word pools are stem-disjoint within a domain: when name components
//! and summary tails reuse stems, whole tool families ride over the
//! routing threshold for any query aimed at one of them.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;
use std::collections::HashSet;

use crate::hash::fnv1a_seeded;
use crate::state::Precondition;
use crate::tokens::TokenCounter;

use super::{
    summarize_tool, token_breakdown, Catalog, CatalogError, ServerSpec, TokenBreakdown,
    ToolDefinition,
};

/// Catalog token target matching the six-server reference deployment.
pub const DEFAULT_TARGET_TOKENS: usize = 47_312;

/// The six-server reference testbed layout.
pub fn default_specs() -> Vec<ServerSpec> {
    vec![
        ServerSpec::new("GitHub", 30, 520, "repo, issue, PR operations"),
        ServerSpec::new("Filesystem", 10, 180, "read/write/search files"),
        ServerSpec::new("Database", 20, 410, "query, schema, write"),
        ServerSpec::new("Slack", 15, 290, "message, channel, search"),
        ServerSpec::new("Web", 10, 220, "search, fetch, extract"),
        ServerSpec::new("Jira", 35, 470, "issue CRUD, workflow"),
    ]
}

/// Rescale a spec template to `total_tools`. Catalogs grow the way real
/// deployments do, by connecting more servers: whole copies of the
/// template are appended (numbered names, same per-server shape) and
/// any remainder becomes one proportionally scaled partial copy. Below
/// one template's worth of tools, the copy itself shrinks
/// proportionally.
pub fn scale_specs(template: &[ServerSpec], total_tools: usize) -> Vec<ServerSpec> {
    assert!(!template.is_empty(), "need a template server");
    let template_total: usize = template.iter().map(|s| s.tool_count).sum();
    let weights: Vec<f64> = template.iter().map(|s| s.tool_count as f64).collect();

    let mut specs = Vec::new();
    let mut copy = 0usize;
    let mut remaining = total_tools;
    while remaining > 0 {
        copy += 1;
        let take = remaining.min(template_total);
        let counts = if take == template_total {
            template.iter().map(|s| s.tool_count).collect()
        } else {
            apportion(take, &weights)
        };
        for (spec, count) in template.iter().zip(counts) {
            if count == 0 {
                continue;
            }
            let name = if copy == 1 {
                spec.name.clone()
            } else {
                format!("{}{copy}", spec.name)
            };
            specs.push(ServerSpec::new(
                &name,
                count,
                spec.avg_schema_tokens,
                &spec.domain,
            ));
        }
        remaining -= take;
    }
    specs
}

/// Split `total` into integer shares proportional to `weights`
/// (largest-remainder method; shares sum to `total` exactly).
pub fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let weight_sum: f64 = weights.iter().sum();
    if weight_sum <= 0.0 || weights.is_empty() {
        return vec![0; weights.len()];
    }
    let mut shares: Vec<usize> = Vec::with_capacity(weights.len());
    let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(weights.len());
    let mut allocated = 0usize;
    for (i, w) in weights.iter().enumerate() {
        let exact = total as f64 * w / weight_sum;
        let floor = exact.floor() as usize;
        shares.push(floor);
        allocated += floor;
        remainders.push((i, exact - floor as f64));
    }
    remainders.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    for (i, _) in remainders.iter().take(total - allocated) {
        shares[*i] += 1;
    }
    shares
}

struct ParamSpec {
    name: &'static str,
    kind: ParamKind,
    desc: &'static str,
}

enum ParamKind {
    Str,
    Int,
    Bool,
    Enum(&'static [&'static str]),
}

struct DomainVocab {
    read_verbs: &'static [&'static str],
    write_verbs: &'static [&'static str],
    objects: &'static [&'static str],
    qualifiers: &'static [&'static str],
    /// Capability-tail word pools. Tails are sampled combinatorially
    /// (gerund + aspect + facet, twice) so two tools in one domain
    /// rarely share tail vocabulary; shared tails would flatten the
    /// retrieval signal across the whole server.
    /// Second qualifier segment composed onto the base qualifier, so
    /// qualifier collision density stays flat as catalogs scale.
    modifiers: &'static [&'static str],
    gerunds: &'static [&'static str],
    aspects: &'static [&'static str],
    facets: &'static [&'static str],
    anchors: &'static [ParamSpec],
    extras: &'static [ParamSpec],
    result_noun: &'static str,
}

const GITHUB: DomainVocab = DomainVocab {
    read_verbs: &["search", "list", "get", "compare", "count"],
    write_verbs: &[
        "create",
        "update",
        "close",
        "merge",
        "tag",
        "reopen",
        "approve",
        "comment_on",
        "rebase",
    ],
    objects: &[
        "issues",
        "pull_requests",
        "repositories",
        "branches",
        "commits",
        "releases",
        "action_runs",
        "reviews",
        "collaborators",
        "gists",
        "forks",
        "deployments",
    ],
    qualifiers: &[
        "by_label",
        "by_assignee",
        "by_author",
        "by_state",
        "by_milestone",
        "by_date_range",
        "by_keyword",
        "by_team",
        "across_orgs",
        "by_head_sha",
        "awaiting_ci",
        "by_patch_size",
        "by_conflict_state",
        "by_runtime_secs",
        "by_semver_range",
        "by_ping_count",
    ],
    modifiers: &[
        "within_org",
        "since_freeze",
        "for_dashboards",
        "on_mainline",
        "during_rollout",
        "at_tip",
        "for_oncall",
        "in_monorepos",
        "per_codeowner",
        "after_cutover",
        "under_embargo",
        "with_backrefs",
    ],
    gerunds: &[
        "filtering",
        "grouping",
        "batching",
        "stitching",
        "chunking",
        "bundling",
        "triaging",
        "squashing",
    ],
    aspects: &[
        "stale",
        "protected",
        "verified",
        "signed",
        "locked",
        "upstream",
        "vendored",
        "frozen",
    ],
    facets: &[
        "badges",
        "annotations",
        "stargazers",
        "submodules",
        "hooks",
        "artifacts",
        "checklists",
        "changelogs",
    ],
    anchors: &[
        ParamSpec {
            name: "owner",
            kind: ParamKind::Str,
            desc: "Repository owner login or organization name.",
        },
        ParamSpec {
            name: "repo",
            kind: ParamKind::Str,
            desc: "Repository name without the owner prefix.",
        },
    ],
    extras: &[
        ParamSpec {
            name: "label",
            kind: ParamKind::Str,
            desc: "Label name to filter by.",
        },
        ParamSpec {
            name: "assignee",
            kind: ParamKind::Str,
            desc: "Assignee login to filter by.",
        },
        ParamSpec {
            name: "state",
            kind: ParamKind::Enum(&["open", "closed", "all"]),
            desc: "Lifecycle state filter.",
        },
        ParamSpec {
            name: "per_page",
            kind: ParamKind::Int,
            desc: "Results per page, up to 100.",
        },
        ParamSpec {
            name: "page",
            kind: ParamKind::Int,
            desc: "One-based page number.",
        },
        ParamSpec {
            name: "since",
            kind: ParamKind::Str,
            desc: "Only items updated after this ISO timestamp.",
        },
        ParamSpec {
            name: "sort",
            kind: ParamKind::Enum(&["created", "updated", "comments"]),
            desc: "Sort key for the result list.",
        },
        ParamSpec {
            name: "direction",
            kind: ParamKind::Enum(&["asc", "desc"]),
            desc: "Sort direction.",
        },
        ParamSpec {
            name: "milestone",
            kind: ParamKind::Str,
            desc: "Milestone title or number.",
        },
        ParamSpec {
            name: "branch",
            kind: ParamKind::Str,
            desc: "Branch name to scope the operation.",
        },
        ParamSpec {
            name: "sha",
            kind: ParamKind::Str,
            desc: "Commit SHA to anchor the lookup.",
        },
        ParamSpec {
            name: "title",
            kind: ParamKind::Str,
            desc: "Title text for created or updated items.",
        },
        ParamSpec {
            name: "body",
            kind: ParamKind::Str,
            desc: "Markdown body content.",
        },
        ParamSpec {
            name: "draft",
            kind: ParamKind::Bool,
            desc: "Whether to include draft entries.",
        },
        ParamSpec {
            name: "reviewer",
            kind: ParamKind::Str,
            desc: "Requested reviewer login.",
        },
        ParamSpec {
            name: "team_slug",
            kind: ParamKind::Str,
            desc: "Team slug for team scoped queries.",
        },
        ParamSpec {
            name: "keyword",
            kind: ParamKind::Str,
            desc: "Free text keyword to match.",
        },
        ParamSpec {
            name: "include_archived",
            kind: ParamKind::Bool,
            desc: "Include archived repositories.",
        },
    ],
    result_noun: "matching repository items",
};

const FILESYSTEM: DomainVocab = DomainVocab {
    read_verbs: &["read", "list", "search", "stat", "watch", "diff"],
    write_verbs: &[
        "write", "move", "copy", "delete", "create", "append", "rename", "compress",
    ],
    objects: &[
        "files",
        "directories",
        "paths",
        "symlinks",
        "tarballs",
        "metadata",
        "permissions",
        "contents",
        "inodes",
        "volumes",
    ],
    qualifiers: &[
        "by_glob",
        "by_extension",
        "by_modified_time",
        "by_size_range",
        "recursively",
        "with_hidden",
        "by_owner",
        "by_depth",
        "newest_first",
        "by_mime_type",
    ],
    modifiers: &[
        "under_home",
        "inside_workspace",
        "on_tmpfs",
        "past_watermark",
        "per_device",
        "with_acls",
        "mid_transfer",
        "for_handoffs",
        "on_ssd",
        "in_scratch",
        "at_root",
        "behind_ignore",
    ],
    gerunds: &[
        "scanning",
        "hashing",
        "streaming",
        "mirroring",
        "pruning",
        "indexing",
        "deduplicating",
        "journaling",
    ],
    aspects: &[
        "nested",
        "oversized",
        "sparse",
        "dangling",
        "executable",
        "readonly",
        "temporary",
        "detached",
    ],
    facets: &[
        "trees",
        "blobs",
        "manifests",
        "checksums",
        "mounts",
        "quotas",
        "buffers",
        "offsets",
    ],
    anchors: &[ParamSpec {
        name: "path",
        kind: ParamKind::Str,
        desc: "Absolute or workspace relative path.",
    }],
    extras: &[
        ParamSpec {
            name: "glob",
            kind: ParamKind::Str,
            desc: "Glob pattern to match entries.",
        },
        ParamSpec {
            name: "extension",
            kind: ParamKind::Str,
            desc: "File extension filter without the dot.",
        },
        ParamSpec {
            name: "recursive",
            kind: ParamKind::Bool,
            desc: "Descend into subdirectories.",
        },
        ParamSpec {
            name: "max_depth",
            kind: ParamKind::Int,
            desc: "Maximum traversal depth.",
        },
        ParamSpec {
            name: "include_hidden",
            kind: ParamKind::Bool,
            desc: "Include dot entries.",
        },
        ParamSpec {
            name: "encoding",
            kind: ParamKind::Enum(&["utf-8", "latin-1", "binary"]),
            desc: "Content encoding for reads and writes.",
        },
        ParamSpec {
            name: "follow_symlinks",
            kind: ParamKind::Bool,
            desc: "Resolve symbolic links.",
        },
        ParamSpec {
            name: "newer_than",
            kind: ParamKind::Str,
            desc: "Only entries modified after this timestamp.",
        },
        ParamSpec {
            name: "min_size",
            kind: ParamKind::Int,
            desc: "Minimum size in bytes.",
        },
        ParamSpec {
            name: "destination",
            kind: ParamKind::Str,
            desc: "Destination path for move and copy.",
        },
        ParamSpec {
            name: "overwrite",
            kind: ParamKind::Bool,
            desc: "Replace existing destination entries.",
        },
        ParamSpec {
            name: "content",
            kind: ParamKind::Str,
            desc: "Content payload for write operations.",
        },
    ],
    result_noun: "matching filesystem entries",
};

const DATABASE: DomainVocab = DomainVocab {
    read_verbs: &["query", "select", "describe", "count", "sample", "explain"],
    write_verbs: &[
        "insert", "update", "delete", "upsert", "truncate", "migrate", "restore",
    ],
    objects: &[
        "tables",
        "rows",
        "records",
        "schemas",
        "sequences",
        "views",
        "transactions",
        "columns",
        "backups",
        "partitions",
    ],
    qualifiers: &[
        "by_primary_key",
        "by_filter",
        "by_date_range",
        "with_joins",
        "with_limit",
        "by_tenant",
        "in_bulk",
        "atomically",
        "by_foreign_key",
        "across_shards",
        "with_cardinality",
        "by_created_at",
        "under_advisory_lock",
        "by_fingerprint",
    ],
    modifiers: &[
        "per_region",
        "under_load",
        "at_standby",
        "during_failover",
        "with_hints",
        "off_peak",
        "in_sandbox",
        "per_workload",
        "behind_proxy",
        "at_scale",
        "with_quorum",
        "for_reporting",
    ],
    gerunds: &[
        "vacuuming",
        "caching",
        "compacting",
        "auditing",
        "profiling",
        "staging",
        "throttling",
        "rewinding",
    ],
    aspects: &[
        "durable",
        "clustered",
        "denormalized",
        "dormant",
        "cold",
        "encrypted",
        "replicated",
        "materialized",
    ],
    facets: &[
        "cursors",
        "tablespaces",
        "constraints",
        "statistics",
        "grants",
        "snapshots",
        "ledgers",
        "checkpoints",
    ],
    anchors: &[
        ParamSpec {
            name: "database",
            kind: ParamKind::Str,
            desc: "Logical database name.",
        },
        ParamSpec {
            name: "table",
            kind: ParamKind::Str,
            desc: "Target table name.",
        },
    ],
    extras: &[
        ParamSpec {
            name: "filter",
            kind: ParamKind::Str,
            desc: "Boolean filter expression.",
        },
        ParamSpec {
            name: "limit",
            kind: ParamKind::Int,
            desc: "Maximum rows to return.",
        },
        ParamSpec {
            name: "offset",
            kind: ParamKind::Int,
            desc: "Rows to skip before returning.",
        },
        ParamSpec {
            name: "columns",
            kind: ParamKind::Str,
            desc: "Comma separated projection list.",
        },
        ParamSpec {
            name: "order_by",
            kind: ParamKind::Str,
            desc: "Sort column name.",
        },
        ParamSpec {
            name: "ascending",
            kind: ParamKind::Bool,
            desc: "Sort ascending when true.",
        },
        ParamSpec {
            name: "batch_size",
            kind: ParamKind::Int,
            desc: "Rows per write batch.",
        },
        ParamSpec {
            name: "timeout_ms",
            kind: ParamKind::Int,
            desc: "Statement timeout in milliseconds.",
        },
        ParamSpec {
            name: "isolation",
            kind: ParamKind::Enum(&["read_committed", "repeatable_read", "serializable"]),
            desc: "Transaction isolation level.",
        },
        ParamSpec {
            name: "values",
            kind: ParamKind::Str,
            desc: "JSON encoded row values.",
        },
        ParamSpec {
            name: "key",
            kind: ParamKind::Str,
            desc: "Primary key value for point lookups.",
        },
        ParamSpec {
            name: "schema_name",
            kind: ParamKind::Str,
            desc: "Schema namespace.",
        },
        ParamSpec {
            name: "dry_run",
            kind: ParamKind::Bool,
            desc: "Validate without applying changes.",
        },
    ],
    result_noun: "result rows",
};

const SLACK: DomainVocab = DomainVocab {
    read_verbs: &["search", "list", "get", "read", "fetch"],
    write_verbs: &[
        "post",
        "send",
        "schedule",
        "pin",
        "react_to",
        "retitle",
        "invite_to",
        "mute",
    ],
    objects: &[
        "messages",
        "channels",
        "threads",
        "members",
        "emoji",
        "reminders",
        "uploads",
        "statuses",
        "bookmarks",
        "canvases",
    ],
    qualifiers: &[
        "by_sender",
        "by_date_range",
        "by_keyword",
        "with_attachments",
        "by_mention",
        "from_bots",
        "with_unread_only",
        "across_workspaces",
        "by_star_count",
        "before_cutoff",
    ],
    modifiers: &[
        "at_midnight",
        "per_cohort",
        "during_incidents",
        "with_gifs",
        "for_briefings",
        "in_dms",
        "at_quiet_hours",
        "after_kickoff",
        "with_polls",
        "per_locale",
        "for_vips",
        "before_demo",
    ],
    gerunds: &[
        "relaying",
        "snoozing",
        "forwarding",
        "transcribing",
        "translating",
        "silencing",
        "bridging",
        "expiring",
    ],
    aspects: &[
        "ephemeral",
        "external",
        "guest",
        "urgent",
        "automated",
        "imported",
        "spam",
        "inactive",
    ],
    facets: &[
        "huddles",
        "digests",
        "handles",
        "rosters",
        "broadcasts",
        "integrations",
        "presences",
        "shortcuts",
    ],
    anchors: &[ParamSpec {
        name: "channel",
        kind: ParamKind::Str,
        desc: "Channel name or identifier.",
    }],
    extras: &[
        ParamSpec {
            name: "user",
            kind: ParamKind::Str,
            desc: "User handle to filter by.",
        },
        ParamSpec {
            name: "keyword",
            kind: ParamKind::Str,
            desc: "Keyword to match in message text.",
        },
        ParamSpec {
            name: "oldest",
            kind: ParamKind::Str,
            desc: "Oldest timestamp in the window.",
        },
        ParamSpec {
            name: "latest",
            kind: ParamKind::Str,
            desc: "Latest timestamp in the window.",
        },
        ParamSpec {
            name: "limit",
            kind: ParamKind::Int,
            desc: "Maximum entries to return.",
        },
        ParamSpec {
            name: "cursor",
            kind: ParamKind::Str,
            desc: "Opaque pagination cursor.",
        },
        ParamSpec {
            name: "text",
            kind: ParamKind::Str,
            desc: "Message text to post.",
        },
        ParamSpec {
            name: "thread_ts",
            kind: ParamKind::Str,
            desc: "Parent thread timestamp.",
        },
        ParamSpec {
            name: "emoji_name",
            kind: ParamKind::Str,
            desc: "Emoji short name.",
        },
        ParamSpec {
            name: "include_archived",
            kind: ParamKind::Bool,
            desc: "Include archived channels.",
        },
        ParamSpec {
            name: "schedule_at",
            kind: ParamKind::Str,
            desc: "Future delivery timestamp.",
        },
    ],
    result_noun: "matching workspace items",
};

const WEB: DomainVocab = DomainVocab {
    read_verbs: &["search", "fetch", "extract", "crawl", "snapshot", "monitor"],
    write_verbs: &[],
    objects: &[
        "pages", "urls", "articles", "results", "feeds", "sitemaps", "favicons", "embeds",
    ],
    qualifiers: &[
        "by_domain",
        "by_language",
        "by_recency",
        "with_citations",
        "as_markdown",
        "by_selector",
        "with_headers",
        "by_content_type",
    ],
    modifiers: &[
        "via_relay",
        "with_js",
        "per_geo",
        "within_two_hops",
        "from_rss",
        "in_amp_mode",
        "for_wayback",
        "behind_consent",
        "with_og_tags",
        "per_host",
        "during_sweeps",
        "at_edge",
    ],
    gerunds: &[
        "rendering",
        "parsing",
        "ranking",
        "debouncing",
        "sanitizing",
        "inlining",
        "minifying",
        "prefetching",
    ],
    aspects: &[
        "paywalled",
        "localized",
        "offline",
        "structured",
        "syndicated",
        "trending",
        "malformed",
        "responsive",
    ],
    facets: &[
        "excerpts",
        "headlines",
        "anchors",
        "breadcrumbs",
        "thumbnails",
        "captions",
        "outlines",
        "footnotes",
    ],
    anchors: &[ParamSpec {
        name: "url",
        kind: ParamKind::Str,
        desc: "Fully qualified URL to operate on.",
    }],
    extras: &[
        ParamSpec {
            name: "query",
            kind: ParamKind::Str,
            desc: "Search query text.",
        },
        ParamSpec {
            name: "max_results",
            kind: ParamKind::Int,
            desc: "Maximum results to return.",
        },
        ParamSpec {
            name: "language",
            kind: ParamKind::Str,
            desc: "BCP 47 language filter.",
        },
        ParamSpec {
            name: "freshness",
            kind: ParamKind::Enum(&["day", "week", "month", "any"]),
            desc: "Recency window for results.",
        },
        ParamSpec {
            name: "selector",
            kind: ParamKind::Str,
            desc: "CSS selector for extraction.",
        },
        ParamSpec {
            name: "timeout_ms",
            kind: ParamKind::Int,
            desc: "Fetch timeout in milliseconds.",
        },
        ParamSpec {
            name: "render_js",
            kind: ParamKind::Bool,
            desc: "Render scripts before extraction.",
        },
        ParamSpec {
            name: "depth",
            kind: ParamKind::Int,
            desc: "Crawl depth limit.",
        },
        ParamSpec {
            name: "include_images",
            kind: ParamKind::Bool,
            desc: "Include image references.",
        },
        ParamSpec {
            name: "user_agent",
            kind: ParamKind::Str,
            desc: "Override user agent string.",
        },
    ],
    result_noun: "extracted web content",
};

const JIRA: DomainVocab = DomainVocab {
    read_verbs: &["search", "list", "get", "count", "export"],
    write_verbs: &[
        "create",
        "update",
        "transition",
        "delegate",
        "comment_on",
        "link",
        "resolve",
        "reopen",
        "rank",
        "log_work_on",
    ],
    objects: &[
        "tickets",
        "iterations",
        "boards",
        "epics",
        "discussions",
        "timesheets",
        "components",
        "roadmaps",
        "workflows",
        "blockers",
    ],
    qualifiers: &[
        "by_jql",
        "by_status",
        "by_assignee",
        "by_sprint",
        "by_priority",
        "by_label",
        "by_parent_key",
        "by_fix_version",
        "by_reporter",
        "with_subtasks",
        "by_squad",
        "by_due_date",
        "by_story_points",
        "in_active_sprint",
        "by_watcher_count",
        "overdue_only",
    ],
    modifiers: &[
        "per_quarter",
        "at_intake",
        "for_execs",
        "during_hardening",
        "with_slas",
        "in_kanban",
        "per_initiative",
        "after_signoff",
        "under_scrutiny",
        "with_heatmaps",
        "for_roadshows",
        "at_eod",
    ],
    gerunds: &[
        "grooming",
        "forecasting",
        "splitting",
        "renumbering",
        "rebalancing",
        "deferring",
        "consolidating",
        "expediting",
    ],
    aspects: &[
        "stalled",
        "flagged",
        "orphaned",
        "settled",
        "duplicated",
        "regressed",
        "downgraded",
        "churned",
    ],
    facets: &[
        "swimlanes",
        "burndowns",
        "rollups",
        "dependencies",
        "estimates",
        "backlogs",
        "retrospectives",
        "standups",
    ],
    anchors: &[ParamSpec {
        name: "project_key",
        kind: ParamKind::Str,
        desc: "Project key, for example OPS.",
    }],
    extras: &[
        ParamSpec {
            name: "jql",
            kind: ParamKind::Str,
            desc: "JQL expression fragment.",
        },
        ParamSpec {
            name: "status",
            kind: ParamKind::Enum(&["todo", "in_progress", "done"]),
            desc: "Workflow status filter.",
        },
        ParamSpec {
            name: "assignee",
            kind: ParamKind::Str,
            desc: "Assignee account id.",
        },
        ParamSpec {
            name: "sprint_id",
            kind: ParamKind::Int,
            desc: "Numeric sprint identifier.",
        },
        ParamSpec {
            name: "priority",
            kind: ParamKind::Enum(&["low", "medium", "high", "critical"]),
            desc: "Priority level.",
        },
        ParamSpec {
            name: "label",
            kind: ParamKind::Str,
            desc: "Issue label to filter by.",
        },
        ParamSpec {
            name: "epic_key",
            kind: ParamKind::Str,
            desc: "Parent epic key.",
        },
        ParamSpec {
            name: "fix_version",
            kind: ParamKind::Str,
            desc: "Fix version name.",
        },
        ParamSpec {
            name: "reporter",
            kind: ParamKind::Str,
            desc: "Reporter account id.",
        },
        ParamSpec {
            name: "max_results",
            kind: ParamKind::Int,
            desc: "Maximum issues to return.",
        },
        ParamSpec {
            name: "start_at",
            kind: ParamKind::Int,
            desc: "Zero based result offset.",
        },
        ParamSpec {
            name: "fields",
            kind: ParamKind::Str,
            desc: "Comma separated field list.",
        },
        ParamSpec {
            name: "transition_name",
            kind: ParamKind::Str,
            desc: "Target workflow transition.",
        },
        ParamSpec {
            name: "comment_body",
            kind: ParamKind::Str,
            desc: "Comment text in markdown.",
        },
    ],
    result_noun: "matching tracker issues",
};

const GENERIC: DomainVocab = DomainVocab {
    read_verbs: &["search", "list", "get", "count"],
    write_verbs: &["create", "update", "delete"],
    objects: &[
        "records",
        "entries",
        "items",
        "documents",
        "events",
        "reports",
    ],
    qualifiers: &[
        "by_key",
        "by_name",
        "by_date",
        "by_status",
        "by_owner",
        "in_bulk",
    ],
    modifiers: &[
        "per_batch",
        "at_night",
        "for_admins",
        "during_import",
        "with_notes",
        "off_hours",
    ],
    gerunds: &[
        "sorting",
        "paging",
        "tallying",
        "rotating",
        "exporting",
        "syncing",
    ],
    aspects: &[
        "fresh", "legacy", "internal", "public", "pending", "flagged",
    ],
    facets: &["totals", "margins", "widgets", "footers", "queues", "stubs"],
    anchors: &[ParamSpec {
        name: "key",
        kind: ParamKind::Str,
        desc: "Primary lookup key.",
    }],
    extras: &[
        ParamSpec {
            name: "name",
            kind: ParamKind::Str,
            desc: "Entry name filter.",
        },
        ParamSpec {
            name: "status",
            kind: ParamKind::Enum(&["active", "inactive"]),
            desc: "Status filter.",
        },
        ParamSpec {
            name: "limit",
            kind: ParamKind::Int,
            desc: "Maximum entries to return.",
        },
        ParamSpec {
            name: "offset",
            kind: ParamKind::Int,
            desc: "Entries to skip.",
        },
        ParamSpec {
            name: "owner",
            kind: ParamKind::Str,
            desc: "Owner identifier.",
        },
        ParamSpec {
            name: "since",
            kind: ParamKind::Str,
            desc: "Lower bound timestamp.",
        },
        ParamSpec {
            name: "until",
            kind: ParamKind::Str,
            desc: "Upper bound timestamp.",
        },
        ParamSpec {
            name: "fields",
            kind: ParamKind::Str,
            desc: "Projection field list.",
        },
    ],
    result_noun: "matching records",
};

fn vocab_for(server_name: &str) -> &'static DomainVocab {
    // Numbered replicas ("GitHub3") share their template's vocabulary.
    let lower = server_name.to_lowercase();
    match lower.trim_end_matches(|c: char| c.is_ascii_digit()) {
        "github" => &GITHUB,
        "filesystem" => &FILESYSTEM,
        "database" => &DATABASE,
        "slack" => &SLACK,
        "web" => &WEB,
        "jira" => &JIRA,
        _ => &GENERIC,
    }
}

const PAD_SENTENCES: &[&str] = &[
    "Supports idempotent retries with exponential backoff.",
    "Validates arguments against the declared schema before dispatch.",
    "Emits structured audit events for each invocation.",
    "Honors server side rate limits with jittered backoff.",
    "Caches immutable responses for the remainder of the session.",
    "Propagates trace identifiers for end to end observability.",
    "Sanitizes user supplied fields before execution.",
    "Falls back to conservative defaults when optional fields are omitted.",
    "Supports dry run validation for mutating operations.",
    "Paginates transparently across large result windows.",
];

const CALIBRATION_ITERATION_CAP: usize = 10_000;

/// Generate a calibrated catalog. Deterministic for a fixed
/// `(specs, target_total_tokens, seed, counter)`.
pub fn generate_testbed(
    specs: &[ServerSpec],
    target_total_tokens: usize,
    seed: u64,
    counter: &TokenCounter,
) -> Result<Catalog, CatalogError> {
    if specs.is_empty() {
        return Err(CatalogError::InvalidSpec("no server specs given".into()));
    }
    for spec in specs {
        spec.validate()?;
    }
    let floor: usize = specs.iter().map(|s| s.tool_count * 20).sum();
    if target_total_tokens <= floor {
        return Err(CatalogError::InvalidSpec(format!(
            "target {target_total_tokens} does not exceed the {floor}-token floor"
        )));
    }

    let weights: Vec<f64> = specs
        .iter()
        .map(|s| (s.tool_count * s.avg_schema_tokens) as f64)
        .collect();
    let server_totals = apportion(target_total_tokens, &weights);

    let mut tools = Vec::new();
    let mut summaries = BTreeMap::new();
    let mut breakdowns = BTreeMap::new();
    let mut preconditions = BTreeMap::new();
    let mut used_ids: HashSet<String> = HashSet::new();

    for (spec, server_total) in specs.iter().zip(server_totals) {
        let vocab = vocab_for(&spec.name);
        let tool_targets = apportion(server_total, &vec![1.0; spec.tool_count]);
        for (idx, target) in tool_targets.iter().enumerate() {
            let stream = fnv1a_seeded(seed, format!("{}/{}", spec.name, idx).as_bytes());
            let mut rng = ChaCha8Rng::seed_from_u64(stream);
            // Large servers carry one dense variant family (same verb,
            // object, and base qualifier, modifiers varying), the way
            // real catalogs accumulate near-duplicate search tools.
            let family = (spec.tool_count >= 25 && idx < 12).then_some(idx);
            let mut tool = build_tool(spec, vocab, *target, &mut rng, &mut used_ids, family);
            let breakdown = calibrate(&mut tool, *target, counter, &mut rng, &spec.name)?;
            let summary = summarize_tool(&tool, 60, counter)?;
            if let Some(set) = precondition_set(&tool, vocab, &spec.name, &mut rng) {
                preconditions.insert(tool.id.clone(), set);
            }
            summaries.insert(tool.id.clone(), summary);
            breakdowns.insert(tool.id.clone(), breakdown);
            tools.push(tool);
        }
    }

    let catalog = Catalog {
        tools,
        summaries,
        breakdowns,
        preconditions,
        seed,
        counter_name: counter.name().to_string(),
    };
    catalog.validate()?;
    Ok(catalog)
}

fn is_write_verb(vocab: &DomainVocab, verb: &str) -> bool {
    vocab.write_verbs.contains(&verb)
}

fn precondition_set(
    tool: &ToolDefinition,
    vocab: &DomainVocab,
    server: &str,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<Precondition>> {
    let verb = tool.name.split('_').next().unwrap_or("");
    let server_lower = server.to_lowercase();
    let mut set = Vec::new();
    if is_write_verb(vocab, verb)
        || tool.name.starts_with("comment_on")
        || tool.name.starts_with("log_work_on")
        || tool.name.starts_with("react_to")
        || tool.name.starts_with("invite_to")
    {
        set.push(Precondition::requires_auth(&format!(
            "{server_lower}:write"
        )));
    }
    // Mutating follow-up verbs only make sense after a usable lookup.
    if matches!(
        verb,
        "merge" | "resolve" | "close" | "transition" | "reopen"
    ) {
        set.push(Precondition::has_prior_tool_output(&format!(
            "search_{server_lower}"
        )));
    }
    // A small slice of the catalog is milestone gated.
    if rng.gen_bool(0.08) {
        set.push(Precondition::milestone_reached("plan_confirmed"));
    }
    if set.is_empty() {
        None
    } else {
        Some(set)
    }
}

fn human(words: &str) -> String {
    words.replace('_', " ")
}

fn capitalized(words: &str) -> String {
    let mut chars = words.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

fn build_tool(
    spec: &ServerSpec,
    vocab: &DomainVocab,
    target: usize,
    rng: &mut ChaCha8Rng,
    used_ids: &mut HashSet<String>,
    family: Option<usize>,
) -> ToolDefinition {
    let server_lower = spec.name.to_lowercase();
    let all_verbs: Vec<&str> = vocab
        .read_verbs
        .iter()
        .chain(vocab.write_verbs.iter())
        .copied()
        .collect();

    let mut name = String::new();
    let mut verb = "";
    let mut object = "";
    let mut base = "";
    let mut modifier = "";
    for attempt in 0..64 {
        match family {
            Some(member) => {
                verb = vocab.read_verbs[0];
                object = vocab.objects[0];
                base = vocab.qualifiers[0];
                modifier = vocab.modifiers[member % vocab.modifiers.len()];
            }
            None => {
                verb = all_verbs[rng.gen_range(0..all_verbs.len())];
                object = vocab.objects[rng.gen_range(0..vocab.objects.len())];
                base = vocab.qualifiers[rng.gen_range(0..vocab.qualifiers.len())];
                modifier = vocab.modifiers[rng.gen_range(0..vocab.modifiers.len())];
            }
        }
        let candidate = format!("{verb}_{server_lower}_{object}_{base}_{modifier}");
        if !used_ids.contains(&candidate) {
            name = candidate;
            break;
        }
        if attempt == 63 {
            name = format!("{candidate}_{}", used_ids.len());
        }
    }
    used_ids.insert(name.clone());

    // The first sentence (what the summary embeds alongside the name)
    // deliberately restates nothing from the name: name components
    // repeat across a server's tools, and double-weighting any of them
    // drags whole tool families above the gate for any one query. The
    // query-shaped restatement lives in the second sentence, which only
    // the full description carries.
    let mut tail = || {
        format!(
            "{} {} {}",
            vocab.gerunds[rng.gen_range(0..vocab.gerunds.len())],
            vocab.aspects[rng.gen_range(0..vocab.aspects.len())],
            vocab.facets[rng.gen_range(0..vocab.facets.len())],
        )
    };
    let (tail_a, tail_b, tail_c) = (tail(), tail(), tail());
    let first_sentence = format!("Covers {tail_a}, {tail_c}, plus {tail_b} workloads.");
    let desc = if target >= 160 {
        format!(
            "{first_sentence} {} {} {} {} with saved filters and pagination. \
             Returns {} with identifiers, timestamps, and status metadata.",
            capitalized(&human(verb)),
            human(object),
            human(base),
            human(modifier),
            vocab.result_noun
        )
    } else {
        first_sentence
    };

    let param_budget = (target / 65).clamp(vocab.anchors.len() + 1, 12);
    let mut properties = Map::new();
    let mut required = Vec::new();
    for anchor in vocab.anchors {
        properties.insert(anchor.name.to_string(), param_value(anchor));
        required.push(Value::String(anchor.name.to_string()));
    }
    let mut extra_indices: Vec<usize> = (0..vocab.extras.len()).collect();
    extra_indices.shuffle(rng);
    for &i in extra_indices
        .iter()
        .take(param_budget.saturating_sub(vocab.anchors.len()))
    {
        let p = &vocab.extras[i];
        properties.insert(p.name.to_string(), param_value(p));
        if rng.gen_bool(0.35) {
            required.push(Value::String(p.name.to_string()));
        }
    }
    let schema = json!({
        "type": "object",
        "properties": Value::Object(properties),
        "required": required,
    });

    let output = format!(
        "A JSON document of {} with paging cursors and per item status fields.",
        vocab.result_noun
    );

    ToolDefinition {
        id: name.clone(),
        name,
        desc,
        schema,
        output,
        server: spec.name.clone(),
    }
}

fn remove_last_optional_param(schema: &mut Value, anchors: &HashSet<&str>) -> bool {
    let key = match schema.get("properties").and_then(Value::as_object) {
        Some(props) => match props.keys().rfind(|k| !anchors.contains(k.as_str())) {
            Some(k) => k.clone(),
            None => return false,
        },
        None => return false,
    };
    if let Some(props) = schema.get_mut("properties").and_then(Value::as_object_mut) {
        props.remove(&key);
    }
    if let Some(req) = schema.get_mut("required").and_then(Value::as_array_mut) {
        req.retain(|v| v.as_str() != Some(key.as_str()));
    }
    true
}

fn param_value(p: &ParamSpec) -> Value {
    match &p.kind {
        ParamKind::Str => json!({"type": "string", "description": p.desc}),
        ParamKind::Int => json!({"type": "integer", "description": p.desc, "minimum": 0}),
        ParamKind::Bool => json!({"type": "boolean", "description": p.desc}),
        ParamKind::Enum(values) => {
            json!({"type": "string", "description": p.desc, "enum": values})
        }
    }
}

/// Pad or trim the description until the four-part token total lands on
/// `target` with the given counter. The base description is never
/// shaved; when even the padless definition is too large, trailing
/// non-anchor parameters are dropped before giving up.
fn calibrate(
    tool: &mut ToolDefinition,
    target: usize,
    counter: &TokenCounter,
    rng: &mut ChaCha8Rng,
    server: &str,
) -> Result<TokenBreakdown, CatalogError> {
    let base_len = tool.desc.len();
    let mut pad_source = String::new();
    let mut pad_offset = rng.gen_range(0..PAD_SENTENCES.len());
    let mut last_diff = isize::MAX;

    for _ in 0..CALIBRATION_ITERATION_CAP {
        let bd = token_breakdown(tool, counter)?;
        let diff = bd.total as isize - target as isize;
        if diff == 0 {
            return Ok(bd);
        }
        if diff < 0 {
            // Grow: append just under the estimated character deficit so
            // a single pass cannot overshoot.
            let deficit = (-diff) as usize;
            let grow = (deficit * 4).saturating_sub(3).max(1);
            while pad_source.len() < grow {
                pad_source.push(' ');
                pad_source.push_str(PAD_SENTENCES[pad_offset % PAD_SENTENCES.len()]);
                pad_offset += 1;
            }
            tool.desc.push_str(&pad_source[..grow]);
            pad_source.drain(..grow);
        } else {
            let excess = diff as usize;
            let pad_available = tool.desc.len() - base_len;
            if pad_available > 0 {
                let cut = ((excess * 4).saturating_sub(3).max(1)).min(pad_available);
                let new_len = tool.desc.len() - cut;
                tool.desc.truncate(new_len);
            } else {
                // Oversized even without padding: drop the last optional
                // parameter (never an anchor).
                let vocab = vocab_for(server);
                let anchors: HashSet<&str> = vocab.anchors.iter().map(|a| a.name).collect();
                if !remove_last_optional_param(&mut tool.schema, &anchors) {
                    return Err(CatalogError::CalibrationFailure {
                        server: server.to_string(),
                        reason: format!(
                            "minimal definition for {:?} is {excess} tokens over the {target}-token target",
                            tool.id
                        ),
                    });
                }
            }
        }
        last_diff = diff;
    }

    Err(CatalogError::CalibrationFailure {
        server: server.to_string(),
        reason: format!(
            "no convergence for {:?} after {CALIBRATION_ITERATION_CAP} iterations (last diff {last_diff})",
            tool.id
        ),
    })
}
