//! Rule-based stand-in for a chat model, plus the prompt readers rulebooks
//! use to find the data a prompt carries.

use crate::llmlink::{ChatRequest, Role, Rulebook};
use crate::protocol::{format_directives, format_insight_blocks, format_ranked_blocks, AggregationDirective, RankedItem, RawInsight};
use crate::queryengine::{AggregationFn, QueryPlan};
use crate::tabular::ColumnType;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptKind {
    Questions,
    Plan,
    Views,
    Extract,
    RankInsights,
    RankAnswers,
    Unknown,
}

pub fn prompt_kind(prompt: &str) -> PromptKind {
    if prompt.contains("must be enclosed in <question></question> tags") {
        PromptKind::Questions
    } else if prompt.contains("Reply with the JSON plan only.") {
        PromptKind::Plan
    } else if prompt.contains("useful aggregations to the data") {
        PromptKind::Views
    } else if prompt.contains("surprising, interesting insights from the csv below") {
        PromptKind::Extract
    } else if prompt.contains("Rank the insights from the csv below") {
        PromptKind::RankInsights
    } else if prompt.contains("Rank the answers and justification") {
        PromptKind::RankAnswers
    } else {
        PromptKind::Unknown
    }
}

/// The first user message: the task prompt even in a retry conversation.
pub fn task_prompt(request: &ChatRequest) -> &str {
    request
        .messages
        .iter()
        .find(|m| m.role == Role::User)
        .map(|m| m.content.as_str())
        .unwrap_or("")
}

pub fn between<'a>(text: &'a str, open: &str, close: &str) -> Option<&'a str> {
    let start = text.find(open)? + open.len();
    let end = text[start..].find(close)? + start;
    Some(&text[start..end])
}

/// `column: type` lines from a `<schema>` block.
pub fn schema_columns(prompt: &str) -> Vec<(String, ColumnType)> {
    let Some(block) = between(prompt, "<schema>", "</schema>") else {
        return Vec::new();
    };
    block
        .lines()
        .filter_map(|l| {
            let (name, ty) = l.rsplit_once(": ")?;
            Some((name.trim().to_string(), ty.trim().parse().ok()?))
        })
        .collect()
}

/// Lines of the `<insights>` block of a question prompt.
pub fn prior_insights(prompt: &str) -> Vec<String> {
    between(prompt, "<insights>", "</insights>")
        .map(|b| b.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string).collect())
        .unwrap_or_default()
}

pub fn question_of(prompt: &str) -> Option<&str> {
    between(prompt, "<question>", "</question>").map(str::trim)
}

pub fn max_questions(prompt: &str) -> usize {
    between(prompt, "at most ", " questions")
        .and_then(|n| n.trim().parse().ok())
        .unwrap_or(10)
}

/// Column names and numeric (stats) columns of a views prompt, plus the
/// number of aggregations asked for.
pub fn views_request(prompt: &str) -> (usize, Vec<String>, Vec<String>) {
    let n = between(prompt, "what are ", " useful")
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(20);
    let split = |s: &str| -> Vec<String> { s.split(',').map(|c| c.trim().to_string()).filter(|c| !c.is_empty()).collect() };
    let columns = between(prompt, "CSV Columns:\n=======\n", "\n").map(split).unwrap_or_default();
    let numeric = between(prompt, "Stats\n=====\n", "\n").map(split).unwrap_or_default();
    (n, columns, numeric)
}

/// A CSV window as header plus rows of cells; the first field of each row
/// is the absolute row index.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowData {
    pub header: Vec<String>,
    pub rows: Vec<(usize, Vec<String>)>,
}

impl WindowData {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn number(&self, row: usize, col: usize) -> Option<f64> {
        match crate::protocol::parse_literal(&self.rows[row].1[col]) {
            crate::insight::Claimed::Number(x) => Some(x),
            crate::insight::Claimed::Text(_) => None,
        }
    }

    /// Columns whose every non-empty cell reads as a number.
    pub fn numeric_columns(&self) -> Vec<usize> {
        (0..self.header.len())
            .filter(|&c| {
                let mut any = false;
                for r in 0..self.rows.len() {
                    if self.rows[r].1[c].is_empty() {
                        continue;
                    }
                    if self.number(r, c).is_none() {
                        return false;
                    }
                    any = true;
                }
                any
            })
            .collect()
    }
}

pub fn parse_window_csv(csv_text: &str) -> Option<WindowData> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(csv_text.as_bytes());
    let header: Vec<String> = reader.headers().ok()?.iter().skip(1).map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.ok()?;
        let idx: usize = rec.get(0)?.trim().parse().ok()?;
        rows.push((idx, rec.iter().skip(1).map(str::to_string).collect()));
    }
    Some(WindowData { header, rows })
}

/// The `CSV Data` window of an extraction prompt.
pub fn extract_window(prompt: &str) -> Option<WindowData> {
    parse_window_csv(between(prompt, "CSV Data\n=======\n", "\n\n\n### Response:")?)
}

/// Rows of the ranking CSV embedded at the end of a ranking prompt.
pub fn ranking_rows(prompt: &str) -> Option<WindowData> {
    let start = prompt.rfind("\n,Insight,").or_else(|| prompt.rfind("\n,Question,"))? + 1;
    parse_window_csv(&prompt[start..])
}

/// The rulebook used by `--backend scripted`: it asks grouped-total
/// questions, answers them with matching plans, nominates the largest
/// values of each window, and ranks by score.
#[derive(Debug, Clone, Default)]
pub struct DefaultRulebook;

/// Identifier columns are numeric but summing them says nothing.
fn is_identifier(name: &str) -> bool {
    name.ends_with(" ID") || name == "ID"
}

fn scripted_questions(prompt: &str) -> String {
    let cols = schema_columns(prompt);
    let groups: Vec<&str> = cols
        .iter()
        .filter(|(_, t)| *t == ColumnType::Text)
        .map(|(n, _)| n.as_str())
        .collect();
    let targets: Vec<&str> = cols
        .iter()
        .filter(|(n, t)| t.is_numeric() && !is_identifier(n))
        .map(|(n, _)| n.as_str())
        .collect();
    let n = max_questions(prompt);
    let offset = prior_insights(prompt).len();
    let mut out = String::new();
    if groups.is_empty() || targets.is_empty() {
        for i in 0..n {
            out.push_str(&format!("<question>How many rows are there (check {})?</question>\n", offset + i + 1));
        }
        return out;
    }
    for i in 0..n {
        let k = offset + i;
        let group = groups[k % groups.len()];
        let target = targets[(k / groups.len()) % targets.len()];
        let stat = if (k / (groups.len() * targets.len())).is_multiple_of(2) { "total" } else { "average" };
        out.push_str(&format!("<question>What is the {stat} {target} by {group}?</question>\n"));
    }
    out
}

fn scripted_plan(prompt: &str) -> String {
    let question = question_of(prompt).unwrap_or("");
    let parsed = question
        .strip_prefix("What is the ")
        .and_then(|q| q.strip_suffix('?'))
        .and_then(|q| {
            let (stat, rest) = q.split_once(' ')?;
            let (target, group) = rest.rsplit_once(" by ")?;
            let func = if stat == "average" { AggregationFn::Mean } else { AggregationFn::Sum };
            Some((target.to_string(), group.to_string(), func))
        });
    let plan = match parsed {
        Some((target, group, func)) => {
            let agg = crate::queryengine::Aggregation::new(&target, func);
            QueryPlan {
                group_by: vec![group],
                sort: Some(crate::queryengine::SortSpec {
                    column: agg.name.clone(),
                    order: crate::queryengine::SortOrder::Desc,
                }),
                aggregations: vec![agg],
                limit: Some(10),
                ..QueryPlan::default()
            }
        }
        None => QueryPlan {
            limit: Some(10),
            ..QueryPlan::default()
        },
    };
    format!("```json\n{}\n```", plan.to_json())
}

fn scripted_views(prompt: &str) -> String {
    let (n, columns, numeric) = views_request(prompt);
    let groups: Vec<&String> = columns.iter().filter(|c| !numeric.contains(c)).collect();
    let numeric: Vec<String> = numeric.into_iter().filter(|c| !is_identifier(c)).collect();
    let mut out = Vec::new();
    if groups.is_empty() || numeric.is_empty() {
        return String::from("No aggregations apply.");
    }
    let fns = [AggregationFn::Sum, AggregationFn::Mean];
    let total = groups.len() * numeric.len() * fns.len();
    for i in 0..n.min(total) {
        let func = &fns[i % fns.len()];
        let group = groups[(i / fns.len()) % groups.len()];
        let target = &numeric[(i / (fns.len() * groups.len())) % numeric.len()];
        out.push(AggregationDirective::new(group, target, func));
    }
    format_directives(&out)
}

fn scripted_extract(prompt: &str) -> String {
    let Some(w) = extract_window(prompt) else {
        return "No insights.".into();
    };
    if w.rows.is_empty() {
        return "No insights.".into();
    }
    let numeric = w.numeric_columns();
    let label_col = (0..w.header.len()).find(|c| !numeric.contains(c));
    let Some(&value_col) = numeric.last() else {
        return "No insights.".into();
    };
    let mut order: Vec<usize> = (0..w.rows.len()).filter(|&r| w.number(r, value_col).is_some()).collect();
    order.sort_by(|&a, &b| {
        w.number(b, value_col)
            .unwrap_or(f64::MIN)
            .total_cmp(&w.number(a, value_col).unwrap_or(f64::MIN))
    });
    let col = &w.header[value_col];
    let items: Vec<RawInsight> = order
        .iter()
        .take(5)
        .enumerate()
        .map(|(k, &r)| {
            let (idx, cells) = &w.rows[r];
            let label = label_col.map(|c| cells[c].clone()).unwrap_or_else(|| format!("Row {idx}"));
            let mut values = Vec::new();
            if let Some(c) = label_col {
                values.push((w.header[c].clone(), cells[c].clone()));
            }
            values.push((col.clone(), cells[value_col].clone()));
            RawInsight {
                row: *idx,
                text: if k == 0 {
                    format!("{label} has the highest {col}")
                } else {
                    format!("{label} ranks {} on {col}", k + 1)
                },
                values,
                score: 5 - k as u8,
                explanation: format!("Position {} of {} rows in this window by {col}.", k + 1, w.rows.len()),
            }
        })
        .collect();
    format_insight_blocks(&items)
}

fn scripted_rank(prompt: &str) -> String {
    let Some(w) = ranking_rows(prompt) else {
        return "Nothing to rank.".into();
    };
    let insight_col = w.column("Insight");
    let score_col = w.column("Score");
    let mut rows: Vec<&(usize, Vec<String>)> = w.rows.iter().collect();
    rows.sort_by_key(|(_, cells)| {
        let s: i64 = score_col.and_then(|c| cells[c].trim().parse().ok()).unwrap_or(0);
        -s
    });
    let items: Vec<RankedItem> = rows
        .into_iter()
        .map(|(idx, cells)| RankedItem {
            row: Some(*idx),
            insight: insight_col.map(|c| cells[c].clone()).unwrap_or_default(),
            explanation: "Ordered by surprise score.".into(),
        })
        .collect();
    format_ranked_blocks(&items)
}

impl Rulebook for DefaultRulebook {
    fn respond(&self, request: &ChatRequest) -> String {
        let prompt = task_prompt(request);
        match prompt_kind(prompt) {
            PromptKind::Questions => scripted_questions(prompt),
            PromptKind::Plan => scripted_plan(prompt),
            PromptKind::Views => scripted_views(prompt),
            PromptKind::Extract => scripted_extract(prompt),
            PromptKind::RankInsights | PromptKind::RankAnswers => scripted_rank(prompt),
            PromptKind::Unknown => "I do not recognise this request.".into(),
        }
    }
}
