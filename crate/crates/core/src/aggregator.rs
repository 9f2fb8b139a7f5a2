//! Bottom-up agent: propose aggregation views, scan each in fixed windows,
//! verify what the model cites, then rank.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{demote_failed, AgentError, AgentKind, RunResult, ViewRecord, WarningRecord};
use crate::insight::{Citation, Insight, Provenance, View, ViewSet};
use crate::llmlink::{LlmClient, DEFAULT_MODEL, DEFAULT_RANK_MODEL};
use crate::protocol::{
    aggregator_ranking_csv, apply_ranking, parse_aggregations, parse_insights, parse_literal, parse_ranked, render_prompt,
    AggregationDirective, RawInsight, TemplateId,
};
use crate::queryengine::group_aggregate;
use crate::tabular::{render_window, summary_stats, Table};
use crate::verify::annotate;

pub const SALES_ANALYST_GOAL: &str =
    "You are a sales expert analyst who is interested in understanding the operations of\nthe store sales across the USA.";

pub const RAW_VIEW_ID: &str = "raw";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatorConfig {
    pub n_aggregations: usize,
    pub window: usize,
    pub insights_per_window: usize,
    pub scan_raw: bool,
    pub general_goal: String,
    pub extract_model: String,
    pub rank_model: String,
}

impl Default for AggregatorConfig {
    fn default() -> Self {
        Self {
            n_aggregations: 20,
            window: 50,
            insights_per_window: 5,
            scan_raw: true,
            general_goal: SALES_ANALYST_GOAL.to_string(),
            extract_model: DEFAULT_MODEL.to_string(),
            rank_model: DEFAULT_RANK_MODEL.to_string(),
        }
    }
}

impl AggregatorConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        if self.window == 0 {
            return Err(AgentError::InvalidConfig("window must be at least 1".into()));
        }
        if self.n_aggregations == 0 {
            return Err(AgentError::InvalidConfig("n_aggregations must be at least 1".into()));
        }
        Ok(())
    }
}

/// Window start offsets for a view of `rows` rows: stride equals size.
pub fn window_starts(rows: usize, window: usize) -> Vec<usize> {
    (0..rows).step_by(window.max(1)).collect()
}

/// Asks for all aggregations in one call and materializes the usable ones.
pub fn propose_views(
    table: &Table,
    config: &AggregatorConfig,
    client: &LlmClient,
    warnings: &mut Vec<WarningRecord>,
) -> Result<Vec<View>, AgentError> {
    let columns = table.schema().names().collect::<Vec<_>>().join(",");
    let stats = summary_stats(table).map(|s| s.to_text()).unwrap_or_default();
    let prompt = render_prompt(
        TemplateId::AggregatorViews,
        &[
            ("generalGoal", &config.general_goal),
            ("dataColumns", &columns),
            ("dataStats", stats.trim_end()),
        ],
    )
    .expect("all view slots supplied");
    let reply = client.ask("agg/views", &config.extract_model, &prompt)?;

    let mut views = Vec::new();
    match parse_aggregations(&reply) {
        Ok(parsed) => {
            warnings.extend(parsed.warnings.into_iter().map(|w| WarningRecord::new("agg/views", w)));
            let mut seen: HashSet<AggregationDirective> = HashSet::new();
            for d in parsed.items {
                if views.len() == config.n_aggregations {
                    warnings.push(WarningRecord::new("agg/views", format!("dropped surplus directive {}", d.describe())));
                    continue;
                }
                if !seen.insert(d.clone()) {
                    warnings.push(WarningRecord::new("agg/views", format!("dropped duplicate directive {}", d.describe())));
                    continue;
                }
                let Some(func) = d.function() else {
                    warnings.push(WarningRecord::new("agg/views", format!("unknown function `{}`", d.func)));
                    continue;
                };
                match group_aggregate(table, &d.group_by, &d.target, &func) {
                    Ok(out) => views.push(View {
                        id: format!("v{:02}", views.len()),
                        description: d.describe(),
                        directive: Some(d),
                        table: out.table,
                        lineage: out.lineage,
                    }),
                    Err(e) => warnings.push(WarningRecord::new("agg/views", format!("dropped {}: {e}", d.describe()))),
                }
            }
        }
        Err(e) => {
            if !config.scan_raw {
                return Err(AgentError::NoDirectivesFound);
            }
            warnings.push(WarningRecord::new("agg/views", e.to_string()));
        }
    }
    if config.scan_raw {
        views.push(View::raw(RAW_VIEW_ID, table.clone()));
    }
    Ok(views)
}

fn lift(raw: RawInsight, view: &View, window: usize, k: usize) -> Insight {
    Insight {
        id: format!("{}-w{window:03}-{k}", view.id),
        citations: raw
            .values
            .iter()
            .map(|(column, value)| Citation {
                view: view.id.clone(),
                row: raw.row,
                column: column.clone(),
                claimed: parse_literal(value),
                raw: value.clone(),
                source_rows: Vec::new(),
            })
            .collect(),
        text: raw.text,
        explanation: raw.explanation,
        score: raw.score,
        provenance: Provenance::Window {
            view: view.id.clone(),
            window,
        },
        aggregation: view.description.clone(),
        verification: None,
    }
}

/// Scans one window of one view.
fn scan_window(
    view: &View,
    window: usize,
    start: usize,
    config: &AggregatorConfig,
    client: &LlmClient,
) -> Result<(Vec<Insight>, Vec<WarningRecord>), AgentError> {
    let tag = format!("agg/scan/{}/w{window:04}", view.id);
    let text = render_window(&view.table, start, config.window).expect("window start is in range");
    let prompt = render_prompt(
        TemplateId::AggregatorExtract,
        &[("generalGoal", &config.general_goal), ("aggregatedDataWindow", text.trim_end())],
    )
    .expect("all extract slots supplied");
    let reply = client.ask(&tag, &config.extract_model, &prompt)?;
    let mut warnings = Vec::new();
    let insights = match parse_insights(&reply) {
        Ok(parsed) => {
            warnings.extend(parsed.warnings.into_iter().map(|w| WarningRecord::new(&tag, w)));
            let n = parsed.items.len();
            if n > config.insights_per_window {
                warnings.push(WarningRecord::new(
                    &tag,
                    format!("kept {} of {n} insights", config.insights_per_window),
                ));
            }
            parsed
                .items
                .into_iter()
                .take(config.insights_per_window)
                .enumerate()
                .map(|(k, raw)| lift(raw, view, window, k))
                .collect()
        }
        Err(e) => {
            warnings.push(WarningRecord::new(&tag, e.to_string()));
            Vec::new()
        }
    };
    Ok((insights, warnings))
}

/// Scans every window of a view, in order.
pub fn scan_view(view: &View, config: &AggregatorConfig, client: &LlmClient) -> Result<(Vec<Insight>, Vec<WarningRecord>), AgentError> {
    let results: Vec<_> = window_starts(view.table.num_rows(), config.window)
        .into_par_iter()
        .enumerate()
        .map(|(w, start)| scan_window(view, w, start, config, client))
        .collect();
    let mut insights = Vec::new();
    let mut warnings = Vec::new();
    for r in results {
        let (i, w) = r?;
        insights.extend(i);
        warnings.extend(w);
    }
    Ok((insights, warnings))
}

pub fn run_aggregator(table: &Table, config: &AggregatorConfig, client: &LlmClient) -> Result<RunResult, AgentError> {
    config.validate()?;
    if table.num_rows() == 0 {
        return Err(AgentError::EmptyTable);
    }
    let mut warnings = Vec::new();
    let views = propose_views(table, config, client, &mut warnings)?;

    let scans: Vec<_> = views.par_iter().map(|v| scan_view(v, config, client)).collect();
    let mut insights = Vec::new();
    for s in scans {
        let (i, w) = s?;
        insights.extend(i);
        warnings.extend(w);
    }

    let view_set: ViewSet = views.iter().cloned().collect();
    for ins in &mut insights {
        annotate(ins, &view_set).expect("citations name scanned views");
    }

    let (status, ranked) = if insights.is_empty() {
        ("no-insights".to_string(), Vec::new())
    } else {
        let ordered = demote_failed(insights);
        let csv = aggregator_ranking_csv(&ordered);
        let prompt = render_prompt(TemplateId::AggregatorRank, &[("insights", csv.trim_end())]).expect("rank slot supplied");
        let reply = client.ask("agg/rank", &config.rank_model, &prompt)?;
        let order = match parse_ranked(&reply) {
            Ok(parsed) => {
                warnings.extend(parsed.warnings.into_iter().map(|w| WarningRecord::new("agg/rank", w)));
                let (order, w) = apply_ranking(&parsed.items, ordered.len());
                warnings.extend(w.into_iter().map(|w| WarningRecord::new("agg/rank", w)));
                order
            }
            Err(e) => {
                warnings.push(WarningRecord::new("agg/rank", e.to_string()));
                (0..ordered.len()).collect()
            }
        };
        let mut slots: Vec<Option<Insight>> = ordered.into_iter().map(Some).collect();
        let ranked: Vec<Insight> = order.into_iter().filter_map(|i| slots[i].take()).collect();
        ("ok".to_string(), demote_failed(ranked))
    };

    Ok(RunResult {
        agent: AgentKind::Aggregator,
        status,
        ranked,
        views: views
            .iter()
            .map(|v| ViewRecord {
                id: v.id.clone(),
                description: v.description.clone(),
                directive: v.directive.clone(),
                rows: v.table.num_rows(),
                digest: v.table.digest(),
            })
            .collect(),
        view_set,
        answers: Vec::new(),
        skips: Vec::new(),
        warnings,
        calls: client.calls(),
        usage: client.usage(),
        transcript: client.transcript(),
    })
}
