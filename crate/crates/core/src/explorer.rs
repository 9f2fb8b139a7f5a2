//! Top-down agent: ask questions about the data, answer each with a query
//! plan, extract insights from the results, and repeat with what was
//! learned.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{demote_failed, AgentError, AgentKind, Answer, RunResult, SkipRecord, ViewRecord, WarningRecord};
use crate::insight::{Citation, Insight, Provenance, View, ViewSet};
use crate::llmlink::{ChatMessage, LlmClient, DEFAULT_MODEL};
use crate::protocol::{
    apply_ranking, explorer_ranking_csv, parse_insights, parse_literal, parse_query_plan, parse_questions, parse_ranked,
    render_prompt, TemplateId,
};
use crate::queryengine::{execute_plan_traced, PlanOutput, QueryPlan, PLAN_GRAMMAR};
use crate::tabular::{render_window, summary_stats, Table};
use crate::verify::annotate;

pub const OVERVIEW_GOAL: &str = "I want a general overview of the sales for 2021.";
pub const SALES_CONTEXT: &str = "This is a dataset of sales transactions";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplorerConfig {
    pub n_rounds: usize,
    pub questions_per_round: usize,
    pub general_goal: String,
    pub data_context: String,
    pub plan_retries: usize,
    pub result_cap: usize,
    pub insights_per_answer: usize,
    pub question_model: String,
    pub plan_model: String,
    pub extract_model: String,
    pub rank_model: String,
}

impl Default for ExplorerConfig {
    fn default() -> Self {
        Self {
            n_rounds: 3,
            questions_per_round: 10,
            general_goal: OVERVIEW_GOAL.to_string(),
            data_context: SALES_CONTEXT.to_string(),
            plan_retries: 2,
            result_cap: 30,
            insights_per_answer: 5,
            question_model: DEFAULT_MODEL.to_string(),
            plan_model: DEFAULT_MODEL.to_string(),
            extract_model: DEFAULT_MODEL.to_string(),
            rank_model: DEFAULT_MODEL.to_string(),
        }
    }
}

impl ExplorerConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        if self.n_rounds == 0 || self.questions_per_round == 0 {
            return Err(AgentError::InvalidConfig("rounds and questions per round must be at least 1".into()));
        }
        if self.result_cap == 0 {
            return Err(AgentError::InvalidConfig("result cap must be at least 1".into()));
        }
        Ok(())
    }

    /// Upper bound on model calls for one run.
    pub fn call_budget(&self) -> usize {
        self.n_rounds * (1 + self.questions_per_round * (1 + self.plan_retries + 1)) + 1
    }
}

/// Column types followed by the summary statistics block.
pub fn data_schema(table: &Table) -> String {
    let mut s = table.schema().describe();
    if let Ok(stats) = summary_stats(table) {
        s.push_str("\n\n");
        s.push_str(stats.to_text().trim_end());
    }
    s
}

pub fn question_prompt(schema: &str, insights: &[String], config: &ExplorerConfig) -> String {
    let insight_text = insights.join("\n");
    let max = config.questions_per_round.to_string();
    render_prompt(
        TemplateId::ExplorerQuestions,
        &[
            ("dataContext", &config.data_context),
            ("generalGoal", &config.general_goal),
            ("dataSchema", schema),
            ("insights", &insight_text),
            ("max_questions", &max),
        ],
    )
    .expect("all question slots supplied")
}

/// Asks for the next round of questions.
pub fn generate_questions(
    schema: &str,
    insights: &[String],
    config: &ExplorerConfig,
    client: &LlmClient,
    tag: &str,
) -> Result<Result<Vec<String>, String>, AgentError> {
    let prompt = question_prompt(schema, insights, config);
    let reply = client.ask(tag, &config.question_model, &prompt)?;
    Ok(parse_questions(&reply).map_err(|e| e.to_string()))
}

/// Result of answering one question.
pub struct Answered {
    pub plan: Option<QueryPlan>,
    pub output: Option<PlanOutput>,
    pub skip_reason: Option<String>,
    pub attempts: usize,
}

/// Requests a plan, executes it, and re-prompts with the error when the
/// plan cannot be parsed or run.
pub fn answer_question(
    question: &str,
    table: &Table,
    schema: &str,
    config: &ExplorerConfig,
    client: &LlmClient,
    tag: &str,
) -> Result<Answered, AgentError> {
    let prompt = render_prompt(
        TemplateId::ExplorerPlan,
        &[
            ("dataContext", &config.data_context),
            ("dataSchema", schema),
            ("question", question),
            ("planGrammar", PLAN_GRAMMAR),
        ],
    )
    .expect("all plan slots supplied");
    let mut messages = vec![ChatMessage::user(prompt)];
    let mut last_error = String::new();
    for attempt in 0..=config.plan_retries {
        let req = client.request(&config.plan_model, messages.clone());
        let reply = client.complete(&format!("{tag}/plan{attempt}"), req)?.content;
        let outcome = parse_query_plan(&reply)
            .map_err(|e| e.to_string())
            .and_then(|plan| execute_plan_traced(&plan, table).map(|out| (plan, out)).map_err(|e| e.to_string()));
        match outcome {
            Ok((plan, out)) => {
                return Ok(Answered {
                    plan: Some(plan),
                    output: Some(out),
                    skip_reason: None,
                    attempts: attempt + 1,
                });
            }
            Err(e) => {
                last_error = e;
                messages.push(ChatMessage::assistant(reply));
                messages.push(ChatMessage::user(format!(
                    "That plan could not be used: {last_error}\nReply with a corrected JSON plan only."
                )));
            }
        }
    }
    Ok(Answered {
        plan: None,
        output: None,
        skip_reason: Some(last_error),
        attempts: config.plan_retries + 1,
    })
}

fn render_result(table: &Table, cap: usize) -> String {
    if table.num_rows() == 0 {
        let header: Vec<&str> = std::iter::once("").chain(table.schema().names()).collect();
        return header.join(",");
    }
    render_window(table, 0, cap).expect("non-empty result").trim_end().to_string()
}

struct QuestionOutcome {
    answer: Answer,
    view: Option<View>,
    insights: Vec<Insight>,
    warnings: Vec<WarningRecord>,
}

fn explore_question(
    round: usize,
    index: usize,
    question: &str,
    table: &Table,
    schema: &str,
    config: &ExplorerConfig,
    client: &LlmClient,
) -> Result<QuestionOutcome, AgentError> {
    let tag = format!("exp/r{round}/q{index:02}");
    let answered = answer_question(question, table, schema, config, client, &tag)?;
    let mut warnings = Vec::new();
    let Some(output) = answered.output else {
        return Ok(QuestionOutcome {
            answer: Answer {
                round,
                index,
                question: question.to_string(),
                plan: None,
                skip_reason: answered.skip_reason,
                view: None,
                result_rows: None,
                result_digest: None,
                rendered_result: None,
                attempts: answered.attempts,
            },
            view: None,
            insights: Vec::new(),
            warnings,
        });
    };
    let view_id = format!("r{round}q{index:02}");
    let rendered = render_result(&output.table, config.result_cap);
    let view = View {
        id: view_id.clone(),
        directive: None,
        description: format!("Question: {question}"),
        table: output.table,
        lineage: output.lineage,
    };
    let mut insights = Vec::new();
    if view.table.num_rows() > 0 {
        let goal = format!("{}\nQuestion: {question}", config.general_goal);
        let prompt = render_prompt(
            TemplateId::AggregatorExtract,
            &[("generalGoal", &goal), ("aggregatedDataWindow", &rendered)],
        )
        .expect("all extract slots supplied");
        let etag = format!("{tag}/extract");
        let reply = client.ask(&etag, &config.extract_model, &prompt)?;
        match parse_insights(&reply) {
            Ok(parsed) => {
                warnings.extend(parsed.warnings.into_iter().map(|w| WarningRecord::new(&etag, w)));
                for (k, raw) in parsed.items.into_iter().take(config.insights_per_answer).enumerate() {
                    insights.push(Insight {
                        id: format!("{view_id}-{k}"),
                        citations: raw
                            .values
                            .iter()
                            .map(|(column, value)| Citation {
                                view: view_id.clone(),
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
                        provenance: Provenance::Question {
                            round,
                            index,
                            question: question.to_string(),
                            view: view_id.clone(),
                        },
                        aggregation: view.description.clone(),
                        verification: None,
                    });
                }
            }
            Err(e) => warnings.push(WarningRecord::new(&etag, e.to_string())),
        }
    }
    Ok(QuestionOutcome {
        answer: Answer {
            round,
            index,
            question: question.to_string(),
            plan: answered.plan,
            skip_reason: None,
            view: Some(view_id),
            result_rows: Some(view.table.num_rows()),
            result_digest: Some(view.table.digest()),
            rendered_result: Some(rendered),
            attempts: answered.attempts,
        },
        view: Some(view),
        insights,
        warnings,
    })
}

pub fn run_explorer(table: &Table, config: &ExplorerConfig, client: &LlmClient) -> Result<RunResult, AgentError> {
    config.validate()?;
    if table.num_rows() == 0 {
        return Err(AgentError::EmptyTable);
    }
    let schema = data_schema(table);
    let mut insights: Vec<Insight> = Vec::new();
    let mut view_set = ViewSet::new();
    let mut views = Vec::new();
    let mut answers = Vec::new();
    let mut skips = Vec::new();
    let mut warnings = Vec::new();

    for round in 1..=config.n_rounds {
        let known: Vec<String> = insights.iter().map(|i| i.text.clone()).collect();
        let tag = format!("exp/r{round}/questions");
        let mut questions = match generate_questions(&schema, &known, config, client, &tag)? {
            Ok(q) => q,
            Err(e) => {
                warnings.push(WarningRecord::new(&tag, format!("round {round} failed: {e}")));
                continue;
            }
        };
        if questions.len() > config.questions_per_round {
            warnings.push(WarningRecord::new(
                &tag,
                format!("kept {} of {} questions", config.questions_per_round, questions.len()),
            ));
            questions.truncate(config.questions_per_round);
        }
        let outcomes: Vec<_> = questions
            .par_iter()
            .enumerate()
            .map(|(i, q)| explore_question(round, i + 1, q, table, &schema, config, client))
            .collect();
        for outcome in outcomes {
            let mut o = outcome?;
            if let Some(reason) = &o.answer.skip_reason {
                skips.push(SkipRecord {
                    round,
                    index: o.answer.index,
                    question: o.answer.question.clone(),
                    reason: reason.clone(),
                });
            }
            if let Some(view) = o.view {
                views.push(ViewRecord {
                    id: view.id.clone(),
                    description: view.description.clone(),
                    directive: None,
                    rows: view.table.num_rows(),
                    digest: view.table.digest(),
                });
                view_set.insert(view);
            }
            for ins in &mut o.insights {
                annotate(ins, &view_set).expect("citations name answered views");
            }
            insights.extend(o.insights);
            warnings.extend(o.warnings);
            answers.push(o.answer);
        }
    }

    let (status, ranked) = if insights.is_empty() {
        ("no-insights".to_string(), Vec::new())
    } else {
        let ordered = demote_failed(insights);
        let csv = explorer_ranking_csv(&ordered);
        let prompt = render_prompt(TemplateId::ExplorerRank, &[("insights", csv.trim_end())]).expect("rank slot supplied");
        let reply = client.ask("exp/rank", &config.rank_model, &prompt)?;
        let order = match parse_ranked(&reply) {
            Ok(parsed) => {
                warnings.extend(parsed.warnings.into_iter().map(|w| WarningRecord::new("exp/rank", w)));
                let (order, w) = apply_ranking(&parsed.items, ordered.len());
                warnings.extend(w.into_iter().map(|w| WarningRecord::new("exp/rank", w)));
                order
            }
            Err(e) => {
                warnings.push(WarningRecord::new("exp/rank", e.to_string()));
                (0..ordered.len()).collect()
            }
        };
        let mut slots: Vec<Option<Insight>> = ordered.into_iter().map(Some).collect();
        let ranked: Vec<Insight> = order.into_iter().filter_map(|i| slots[i].take()).collect();
        ("ok".to_string(), demote_failed(ranked))
    };

    Ok(RunResult {
        agent: AgentKind::Explorer,
        status,
        ranked,
        views,
        view_set,
        answers,
        skips,
        warnings,
        calls: client.calls(),
        usage: client.usage(),
        transcript: client.transcript(),
    })
}
