//! Runs one experiment end to end and persists everything it produced.
//!
//! A run directory holds:
//!
//! | file | contents |
//! |---|---|
//! | `config.txt` | effective settings |
//! | `truth.json` | planted flags |
//! | `transcripts.jsonl` | every model exchange, sorted by tag |
//! | `views.jsonl`, `answers.jsonl`, `skips.jsonl`, `warnings.jsonl` | agent records |
//! | `insights.jsonl` | ranked insights with verification |
//! | `report.json`, `report.md` | scores; deterministic for a fixed transcript |
//! | `run.json` | timings and backend, the only non-deterministic file |
//! | `error.txt` | present when a stage failed |

mod config;
mod report;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentError, AgentKind, Answer, RunResult, ViewRecord};
use crate::aggregator::run_aggregator;
use crate::explorer::run_explorer;
use crate::flagforge::{builtin_flag, plant_flag, GroundTruth};
use crate::insight::{Insight, VerificationStatus, View, ViewSet};
use crate::llmlink::{write_transcript, ChatBackend, LiveBackend, LlmClient, RecordBackend, ReplayBackend, ScriptedBackend};
use crate::queryengine::{execute_plan_traced, group_aggregate};
use crate::scripted::DefaultRulebook;
use crate::tabular::{load_csv, sales_schema, subsample_balanced, Table, FOCUS_STATES};
use crate::verify::{score_run, verify_citations, CaptureReport, MatchMode};

pub use config::{parse_flat, BackendSpec, RunConfig};
pub use report::{render_markdown, ReportedInsight, RunReport};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{stage}: {message}")]
    Stage { stage: String, message: String },
    #[error("io error on {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl HarnessError {
    /// Process exit code: 2 for bad configuration, 3 for a failed stage.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 3,
        }
    }

    fn stage(stage: &str, message: impl ToString) -> Self {
        HarnessError::Stage {
            stage: stage.to_string(),
            message: message.to_string(),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |e| HarnessError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    fs::write(path, contents).map_err(io_err(path))
}

pub fn read_file(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(io_err(path))
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    items
        .iter()
        .map(|i| serde_json::to_string(i).expect("records serialize") + "\n")
        .collect()
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, HarnessError> {
    read_file(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| HarnessError::Config(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

fn pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("records serialize") + "\n"
}

/// Loads a CSV, applying the sales schema when the header matches it exactly.
pub fn load_dataset(path: &Path) -> Result<Table, HarnessError> {
    let text = fs::read_to_string(path)
        .map_err(|e| HarnessError::Config(format!("cannot read dataset {}: {e}", path.display())))?;
    let schema = sales_schema();
    let header = csv::Reader::from_reader(text.as_bytes())
        .headers()
        .map(|h| h.iter().map(str::to_string).collect::<Vec<_>>())
        .unwrap_or_default();
    let hint = header.iter().map(String::as_str).eq(schema.names()).then_some(&schema);
    load_csv(text.as_bytes(), hint).map_err(|e| HarnessError::stage("load", e))
}

/// Reads a `truth.json`: an array of ground truths, or a single one.
pub fn load_truth(path: &Path) -> Result<Vec<GroundTruth>, HarnessError> {
    let text = fs::read_to_string(path)
        .map_err(|e| HarnessError::Config(format!("cannot read truth {}: {e}", path.display())))?;
    serde_json::from_str::<Vec<GroundTruth>>(&text)
        .or_else(|_| serde_json::from_str::<GroundTruth>(&text).map(|t| vec![t]))
        .map_err(|e| HarnessError::Config(format!("invalid truth file {}: {e}", path.display())))
}

/// Plants builtin flags one after another on the same table.
pub fn plant_builtin(table: &Table, ids: &[u32]) -> Result<(Table, Vec<GroundTruth>), HarnessError> {
    let mut current = table.clone();
    let mut truths = Vec::new();
    for &id in ids {
        let spec = builtin_flag(id).ok_or_else(|| HarnessError::Config(format!("no builtin flag {id}")))?;
        let (next, truth) = plant_flag(&current, &spec).map_err(|e| HarnessError::stage("plant", e))?;
        current = next;
        truths.push(truth);
    }
    Ok((current, truths))
}

pub fn build_client(config: &RunConfig) -> Result<LlmClient, HarnessError> {
    let backend: Box<dyn ChatBackend> = match &config.backend {
        BackendSpec::Scripted => Box::new(ScriptedBackend::new(Box::new(DefaultRulebook))),
        BackendSpec::Live => Box::new(live(config)?),
        BackendSpec::Record(path) => Box::new(
            RecordBackend::new(Box::new(live(config)?), path).map_err(|e| HarnessError::Config(e.to_string()))?,
        ),
        BackendSpec::Replay(path) => {
            Box::new(ReplayBackend::from_jsonl(path).map_err(|e| HarnessError::Config(e.to_string()))?)
        }
    };
    let mut client = LlmClient::new(backend);
    client.temperature = config.temperature;
    client.max_tokens = config.max_tokens;
    Ok(client)
}

fn live(config: &RunConfig) -> Result<LiveBackend, HarnessError> {
    LiveBackend::from_env(&config.base_url).map_err(|e| HarnessError::Config(e.to_string()))
}

/// Creates `dir`, refusing one that already has files in it.
pub fn prepare_run_dir(dir: &Path) -> Result<(), HarnessError> {
    if dir.exists() {
        let mut entries = fs::read_dir(dir).map_err(io_err(dir))?;
        if entries.next().is_some() {
            return Err(HarnessError::Config(format!("run directory {} is not empty", dir.display())));
        }
    }
    fs::create_dir_all(dir).map_err(io_err(dir))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunInfo {
    pub agent: AgentKind,
    pub backend: String,
    pub data: String,
    pub dataset_digest: String,
    pub started_unix: f64,
    pub wall_seconds: f64,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub result: RunResult,
    pub truths: Vec<GroundTruth>,
    pub report: RunReport,
}

fn agent_error_message(e: &AgentError) -> String {
    match e {
        AgentError::BackendUnavailable(inner) => inner.to_string(),
        other => other.to_string(),
    }
}

/// Load, subsample, plant, run, score, persist.
pub fn run_experiment(config: &RunConfig) -> Result<RunOutcome, HarnessError> {
    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
    let dir = config.out.clone();
    // Settle config problems before touching the filesystem.
    let mut truths = match &config.truth {
        Some(p) => load_truth(p)?,
        None => Vec::new(),
    };
    match config.agent {
        AgentKind::Explorer => config.explorer.validate(),
        AgentKind::Aggregator => config.aggregator.validate(),
    }
    .map_err(|e| HarnessError::Config(e.to_string()))?;
    let client = build_client(config)?;
    prepare_run_dir(&dir)?;
    write_file(&dir.join("config.txt"), &config.to_text())?;

    let mut info = RunInfo {
        agent: config.agent,
        backend: client.describe(),
        data: config.data.display().to_string(),
        dataset_digest: String::new(),
        started_unix,
        wall_seconds: 0.0,
        status: "failed".into(),
        error: None,
    };
    let fail = |info: &mut RunInfo, err: HarnessError| -> HarnessError {
        info.wall_seconds = started.elapsed().as_secs_f64();
        info.error = Some(err.to_string());
        let _ = write_file(&dir.join("error.txt"), &format!("{err}\n"));
        let _ = write_file(&dir.join("run.json"), &pretty(info));
        err
    };

    let mut table = match load_dataset(&config.data) {
        Ok(t) => t,
        Err(e) => return Err(fail(&mut info, e)),
    };
    if config.subsample_per_state > 0 {
        table = match subsample_balanced(&table, "State", config.subsample_per_state, &FOCUS_STATES, config.seed) {
            Ok(t) => t,
            Err(e) => return Err(fail(&mut info, HarnessError::stage("subsample", e))),
        };
    }
    if !config.flags.is_empty() {
        match plant_builtin(&table, &config.flags) {
            Ok((t, planted)) => {
                table = t;
                truths.extend(planted);
            }
            Err(e) => return Err(fail(&mut info, e)),
        }
    }
    info.dataset_digest = table.digest();
    write_file(&dir.join("truth.json"), &pretty(&truths))?;

    let ran = match config.agent {
        AgentKind::Explorer => run_explorer(&table, &config.explorer, &client),
        AgentKind::Aggregator => run_aggregator(&table, &config.aggregator, &client),
    };
    let result = match ran {
        Ok(r) => r,
        Err(e) => {
            // Keep whatever the model already answered.
            write_file(&dir.join("transcripts.jsonl"), &write_transcript(&client.transcript()))?;
            return Err(fail(&mut info, HarnessError::stage("agent", agent_error_message(&e))));
        }
    };

    let lenient = score_run(&result.ranked, &truths, MatchMode::Lenient);
    let strict = score_run(&result.ranked, &truths, MatchMode::Strict);
    let report = RunReport::new(&result, &table, lenient, strict);

    write_file(&dir.join("transcripts.jsonl"), &write_transcript(&result.transcript))?;
    write_file(&dir.join("views.jsonl"), &to_jsonl(&result.views))?;
    write_file(&dir.join("answers.jsonl"), &to_jsonl(&result.answers))?;
    write_file(&dir.join("skips.jsonl"), &to_jsonl(&result.skips))?;
    write_file(&dir.join("warnings.jsonl"), &to_jsonl(&result.warnings))?;
    write_file(&dir.join("insights.jsonl"), &to_jsonl(&result.ranked))?;
    write_file(&dir.join("report.json"), &pretty(&report))?;
    write_file(&dir.join("report.md"), &render_markdown(std::slice::from_ref(&report)))?;
    info.status = result.status.clone();
    info.wall_seconds = started.elapsed().as_secs_f64();
    write_file(&dir.join("run.json"), &pretty(&info))?;

    Ok(RunOutcome {
        dir,
        result,
        truths,
        report,
    })
}

pub fn load_report(dir: &Path) -> Result<RunReport, HarnessError> {
    let path = dir.join("report.json");
    serde_json::from_str(&read_file(&path)?)
        .map_err(|e| HarnessError::Config(format!("invalid report {}: {e}", path.display())))
}

pub fn load_insights(dir: &Path) -> Result<Vec<Insight>, HarnessError> {
    read_jsonl(&dir.join("insights.jsonl"))
}

/// Rescores a finished run against a truth file.
pub fn score_dir(dir: &Path, truth: &Path, mode: MatchMode) -> Result<CaptureReport, HarnessError> {
    Ok(score_run(&load_insights(dir)?, &load_truth(truth)?, mode))
}

/// Rebuilds a run's views from its records and the dataset.
///
/// Returns the view set and the ids whose digest no longer matches.
pub fn rebuild_views(dir: &Path, table: &Table) -> Result<(ViewSet, Vec<String>), HarnessError> {
    let records: Vec<ViewRecord> = read_jsonl(&dir.join("views.jsonl"))?;
    let answers: Vec<Answer> = read_jsonl(&dir.join("answers.jsonl"))?;
    let plans: BTreeMap<&str, _> = answers
        .iter()
        .filter_map(|a| Some((a.view.as_deref()?, a.plan.as_ref()?)))
        .collect();
    let mut set = ViewSet::new();
    let mut stale = Vec::new();
    for rec in &records {
        let view = if let Some(d) = &rec.directive {
            let func = d
                .function()
                .ok_or_else(|| HarnessError::Config(format!("view {} has unknown function {}", rec.id, d.func)))?;
            group_aggregate(table, &d.group_by, &d.target, &func).map(|o| (o.table, o.lineage))
        } else if let Some(plan) = plans.get(rec.id.as_str()) {
            execute_plan_traced(plan, table).map(|o| (o.table, o.lineage))
        } else {
            Ok((table.clone(), (0..table.num_rows()).map(|i| vec![i]).collect()))
        };
        let (t, lineage) = view.map_err(|e| HarnessError::stage("verify", format!("view {}: {e}", rec.id)))?;
        if t.digest() != rec.digest {
            stale.push(rec.id.clone());
        }
        set.insert(View {
            id: rec.id.clone(),
            directive: rec.directive.clone(),
            description: rec.description.clone(),
            table: t,
            lineage,
        });
    }
    Ok((set, stale))
}

#[derive(Debug, Clone, Serialize)]
pub struct Recheck {
    pub id: String,
    pub recorded: Option<VerificationStatus>,
    pub recomputed: Option<VerificationStatus>,
}

/// Re-verifies every stored insight against freshly rebuilt views.
pub fn reverify_dir(dir: &Path, table: &Table) -> Result<(Vec<Recheck>, Vec<String>), HarnessError> {
    let (views, stale) = rebuild_views(dir, table)?;
    let checks = load_insights(dir)?
        .into_iter()
        .map(|ins| Recheck {
            recorded: ins.status(),
            recomputed: verify_citations(&ins, &views).ok().map(|v| v.status),
            id: ins.id,
        })
        .collect();
    Ok((checks, stale))
}

/// True when a stage failed because a replay transcript had no answer.
pub fn is_replay_miss(err: &HarnessError) -> bool {
    matches!(err, HarnessError::Stage { message, .. } if message.starts_with("ReplayMiss"))
}
