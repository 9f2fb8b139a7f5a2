//! Types shared by both agents.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::insight::{Insight, ViewSet};
use crate::llmlink::{LlmError, TranscriptEntry, Usage};
use crate::protocol::AggregationDirective;
use crate::queryengine::QueryPlan;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(#[from] LlmError),
    #[error("no aggregation directives found and raw scanning is off")]
    NoDirectivesFound,
    #[error("input table is empty")]
    EmptyTable,
    #[error("invalid agent config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Explorer,
    Aggregator,
}

impl AgentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::Explorer => "explorer",
            AgentKind::Aggregator => "aggregator",
        }
    }
}

impl std::fmt::Display for AgentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AgentKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "explorer" => Ok(AgentKind::Explorer),
            "aggregator" => Ok(AgentKind::Aggregator),
            other => Err(format!("unknown agent `{other}` (expected explorer or aggregator)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarningRecord {
    pub stage: String,
    pub message: String,
}

impl WarningRecord {
    pub fn new(stage: &str, message: impl Into<String>) -> Self {
        Self {
            stage: stage.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewRecord {
    pub id: String,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directive: Option<AggregationDirective>,
    pub rows: usize,
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub round: usize,
    pub index: usize,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<QueryPlan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skip_reason: Option<String>,
    /// View id of the result table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub view: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result_rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result_digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rendered_result: Option<String>,
    pub attempts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub round: usize,
    pub index: usize,
    pub question: String,
    pub reason: String,
}

/// Everything one agent run produced.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub agent: AgentKind,
    /// `ok`, or `no-insights` when nothing survived to be ranked.
    pub status: String,
    /// Final order, most interesting first.
    pub ranked: Vec<Insight>,
    pub views: Vec<ViewRecord>,
    pub view_set: ViewSet,
    pub answers: Vec<Answer>,
    pub skips: Vec<SkipRecord>,
    pub warnings: Vec<WarningRecord>,
    pub calls: u64,
    pub usage: Usage,
    pub transcript: Vec<TranscriptEntry>,
}

/// Moves insights that failed verification behind the rest, keeping
/// relative order within both groups.
pub fn demote_failed(insights: Vec<Insight>) -> Vec<Insight> {
    use crate::insight::VerificationStatus::{Failed, Partial};
    let (bad, good): (Vec<Insight>, Vec<Insight>) = insights
        .into_iter()
        .partition(|i| matches!(i.status(), Some(Failed) | Some(Partial)));
    good.into_iter().chain(bad).collect()
}
