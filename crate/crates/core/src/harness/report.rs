//! Deterministic run summaries and their markdown rendering.
//!
//! The markdown is built from [`RunReport`] alone, so every number it shows
//! can be found in `report.json`.

use std::collections::BTreeSet;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::agent::{AgentKind, RunResult};
use crate::insight::{Provenance, VerificationStatus};
use crate::llmlink::Usage;
use crate::tabular::Table;
use crate::verify::CaptureReport;

/// Unflagged insights listed per run under "Other".
const OTHER_PER_RUN: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportedInsight {
    pub rank: usize,
    pub id: String,
    pub text: String,
    pub aggregation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
    pub values: String,
    pub score: u8,
    pub explanation: String,
    pub status: Option<VerificationStatus>,
    pub flags: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub agent: AgentKind,
    pub status: String,
    pub dataset_digest: String,
    pub dataset_rows: usize,
    pub calls: u64,
    pub usage: Usage,
    pub views: usize,
    pub skipped_questions: usize,
    pub warnings: usize,
    pub lenient: CaptureReport,
    pub strict: CaptureReport,
    pub insights: Vec<ReportedInsight>,
}

impl RunReport {
    pub fn new(result: &RunResult, table: &Table, lenient: CaptureReport, strict: CaptureReport) -> Self {
        let insights = result
            .ranked
            .iter()
            .zip(&lenient.insights)
            .map(|(ins, outcome)| ReportedInsight {
                rank: outcome.rank,
                id: ins.id.clone(),
                text: ins.text.clone(),
                aggregation: ins.aggregation.clone(),
                question: match &ins.provenance {
                    Provenance::Question { question, .. } => Some(question.clone()),
                    Provenance::Window { .. } => None,
                },
                values: ins.values_text(),
                score: ins.score,
                explanation: ins.explanation.clone(),
                status: ins.status(),
                flags: outcome.flags.clone(),
            })
            .collect();
        Self {
            agent: result.agent,
            status: result.status.clone(),
            dataset_digest: table.digest(),
            dataset_rows: table.num_rows(),
            calls: result.calls,
            usage: result.usage,
            views: result.views.len(),
            skipped_questions: result.skips.len(),
            warnings: result.warnings.len(),
            lenient,
            strict,
            insights,
        }
    }
}

fn cell(s: &str) -> String {
    s.replace('|', "\\|").replace(['\n', '\r'], " ").trim().to_string()
}

fn context_header(agent: AgentKind) -> &'static str {
    match agent {
        AgentKind::Explorer => "Question",
        AgentKind::Aggregator => "Aggregation",
    }
}

fn context_of(i: &ReportedInsight) -> &str {
    i.question.as_deref().unwrap_or(&i.aggregation)
}

fn table_header(out: &mut String, agent: AgentKind) {
    let _ = writeln!(out, "| Rank | Insight | {} | Value | Explanation |", context_header(agent));
    out.push_str("|---|---|---|---|---|\n");
}

fn row(out: &mut String, i: &ReportedInsight, value: &str) {
    let _ = writeln!(
        out,
        "| {} | {} | {} | {} | {} |",
        i.rank,
        cell(&i.text),
        cell(context_of(i)),
        cell(value),
        cell(&i.explanation)
    );
}

/// One markdown document for any number of runs: a summary table, a section
/// per planted flag, then the best unflagged insights.
pub fn render_markdown(runs: &[RunReport]) -> String {
    let mut out = String::from("# Capture report\n\n");
    out.push_str("| Run | Agent | Status | Insights | Calls | Tokens | Captured @1 | Captured @5 | Captured | Strict |\n");
    out.push_str("|---|---|---|---|---|---|---|---|---|---|\n");
    for (n, r) in runs.iter().enumerate() {
        let l = &r.lenient;
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {}/{} | {}/{} | {}/{} | {}/{} |",
            n + 1,
            r.agent,
            r.status,
            r.insights.len(),
            r.calls,
            r.usage.prompt_tokens + r.usage.completion_tokens,
            l.captured_at_1,
            l.total_flags,
            l.captured_at_5,
            l.total_flags,
            l.captured,
            l.total_flags,
            r.strict.captured,
            r.strict.total_flags
        );
    }

    let flag_ids: BTreeSet<u32> = runs.iter().flat_map(|r| r.lenient.flags.iter().map(|f| f.flag_id)).collect();
    for id in flag_ids {
        let mut heading = false;
        for (n, r) in runs.iter().enumerate() {
            let Some(fc) = r.lenient.flags.iter().find(|f| f.flag_id == id) else {
                continue;
            };
            if !heading {
                let _ = writeln!(out, "\n## Flag {id}: {}\n", cell(&fc.description));
                heading = true;
            }
            let _ = writeln!(out, "Run {} ({})\n", n + 1, r.agent);
            table_header(&mut out, r.agent);
            let hit = fc.rank.and_then(|rank| r.insights.get(rank - 1));
            match hit {
                Some(i) => {
                    let value = fc
                        .detail
                        .as_ref()
                        .and_then(|d| d.cited_value.clone())
                        .unwrap_or_else(|| i.values.clone());
                    row(&mut out, i, &value);
                }
                None => out.push_str("| - | Agent failed to capture the flag | | | |\n"),
            }
            out.push('\n');
        }
    }

    out.push_str("\n## Other\n\n");
    for (n, r) in runs.iter().enumerate() {
        let _ = writeln!(out, "Run {} ({})\n", n + 1, r.agent);
        if r.insights.is_empty() {
            let _ = writeln!(out, "No insights were produced (status: {}).\n", r.status);
            continue;
        }
        table_header(&mut out, r.agent);
        for i in r.insights.iter().filter(|i| i.flags.is_empty()).take(OTHER_PER_RUN) {
            row(&mut out, i, &i.values);
        }
        out.push('\n');
    }
    out
}
