//! Agent execution state and deterministic precondition predicates.
//!
//! Preconditions are a closed DSL, not arbitrary code: they read only
//! structured state (scopes, prior call outcomes, milestones), never free
//! text, so an adversarial description cannot influence them. A tool's
//! precondition set is a conjunction; an empty set always passes.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

/// Immutable snapshot of what the agent has done and may do. Updates
/// return new values.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AgentState {
    pub auth_scopes: BTreeSet<String>,
    /// `(tool_id, success)` in call order.
    pub prior_tool_calls: Vec<(String, bool)>,
    pub milestones: BTreeSet<String>,
    pub turn: u64,
}

impl AgentState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_scopes<I: IntoIterator<Item = S>, S: Into<String>>(mut self, scopes: I) -> Self {
        self.auth_scopes.extend(scopes.into_iter().map(Into::into));
        self
    }

    pub fn with_milestones<I: IntoIterator<Item = S>, S: Into<String>>(
        mut self,
        milestones: I,
    ) -> Self {
        self.milestones
            .extend(milestones.into_iter().map(Into::into));
        self
    }

    /// Append a completed tool call, leaving `self` untouched.
    pub fn record_tool_result(&self, tool_id: &str, success: bool) -> Self {
        let mut next = self.clone();
        next.prior_tool_calls.push((tool_id.to_string(), success));
        next
    }

    /// Advance to the next turn.
    pub fn next_turn(&self) -> Self {
        let mut next = self.clone();
        next.turn += 1;
        next
    }
}

/// One predicate of the closed precondition DSL.
///
/// Serializes as `{"kind": "...", "arg": "..."}` (no `arg` for `always`)
/// so registries can round-trip precondition sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Precondition {
    /// Scope string present in `auth_scopes`.
    RequiresAuth {
        arg: String,
    },
    /// Some successful prior call whose tool id starts with the prefix.
    /// Failed calls never satisfy this.
    HasPriorToolOutput {
        arg: String,
    },
    /// Milestone string present in `milestones`.
    MilestoneReached {
        arg: String,
    },
    Always,
}

impl Precondition {
    pub fn requires_auth(scope: &str) -> Self {
        Self::RequiresAuth {
            arg: scope.to_string(),
        }
    }

    pub fn has_prior_tool_output(prefix: &str) -> Self {
        Self::HasPriorToolOutput {
            arg: prefix.to_string(),
        }
    }

    pub fn milestone_reached(name: &str) -> Self {
        Self::MilestoneReached {
            arg: name.to_string(),
        }
    }

    pub fn evaluate(&self, state: &AgentState) -> bool {
        match self {
            Self::RequiresAuth { arg } => state.auth_scopes.contains(arg),
            Self::HasPriorToolOutput { arg } => state
                .prior_tool_calls
                .iter()
                .any(|(id, ok)| *ok && id.starts_with(arg.as_str())),
            Self::MilestoneReached { arg } => state.milestones.contains(arg),
            Self::Always => true,
        }
    }
}

/// Conjunction over a tool's precondition set.
pub fn preconditions_satisfied(set: &[Precondition], state: &AgentState) -> bool {
    set.iter().all(|p| p.evaluate(state))
}
