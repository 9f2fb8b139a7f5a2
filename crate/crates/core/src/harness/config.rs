//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::agent::AgentKind;
use crate::aggregator::AggregatorConfig;
use crate::explorer::ExplorerConfig;
use crate::llmlink::{DEFAULT_MAX_TOKENS, DEFAULT_TEMPERATURE};

use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    Live,
    Record(PathBuf),
    Replay(PathBuf),
    Scripted,
}

impl std::str::FromStr for BackendSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "live" => Ok(BackendSpec::Live),
            None if s == "scripted" => Ok(BackendSpec::Scripted),
            Some(("record", p)) if !p.is_empty() => Ok(BackendSpec::Record(p.into())),
            Some(("replay", p)) if !p.is_empty() => Ok(BackendSpec::Replay(p.into())),
            _ => Err(format!(
                "invalid backend `{s}` (expected live, record:PATH, replay:PATH or scripted)"
            )),
        }
    }
}

impl std::fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BackendSpec::Live => f.write_str("live"),
            BackendSpec::Record(p) => write!(f, "record:{}", p.display()),
            BackendSpec::Replay(p) => write!(f, "replay:{}", p.display()),
            BackendSpec::Scripted => f.write_str("scripted"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub agent: AgentKind,
    pub data: PathBuf,
    /// Ground truth produced by `plant`, if the data already carries flags.
    pub truth: Option<PathBuf>,
    pub backend: BackendSpec,
    pub base_url: String,
    pub out: PathBuf,
    pub seed: u64,
    /// Rows drawn per focus state before planting; 0 keeps all rows.
    pub subsample_per_state: usize,
    /// Builtin flag ids planted before the agent runs.
    pub flags: Vec<u32>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub explorer: ExplorerConfig,
    pub aggregator: AggregatorConfig,
}

impl RunConfig {
    pub fn new(agent: AgentKind, data: PathBuf, backend: BackendSpec, out: PathBuf) -> Self {
        Self {
            agent,
            data,
            truth: None,
            backend,
            base_url: "https://api.openai.com".to_string(),
            out,
            seed: 0,
            subsample_per_state: 0,
            flags: Vec::new(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
            explorer: ExplorerConfig::default(),
            aggregator: AggregatorConfig::default(),
        }
    }

    /// Applies one documented key. Text values use `\n` for newlines.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, HarnessError> {
            v.trim()
                .parse()
                .map_err(|_| HarnessError::Config(format!("`{key}` expects a number, got `{v}`")))
        }
        fn flag(key: &str, v: &str) -> Result<bool, HarnessError> {
            match v.trim() {
                "true" | "on" | "yes" | "1" => Ok(true),
                "false" | "off" | "no" | "0" => Ok(false),
                _ => Err(HarnessError::Config(format!("`{key}` expects true or false, got `{v}`"))),
            }
        }
        let text = || value.trim().replace("\\n", "\n");
        match key {
            "agent" => {
                self.agent = value.trim().parse().map_err(HarnessError::Config)?;
            }
            "seed" => self.seed = num(key, value)?,
            "subsample_per_state" => self.subsample_per_state = num(key, value)?,
            "flags" => {
                self.flags = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| num(key, s))
                    .collect::<Result<_, _>>()?;
            }
            "base_url" => self.base_url = value.trim().to_string(),
            "temperature" => self.temperature = num(key, value)?,
            "max_tokens" => self.max_tokens = num(key, value)?,
            "rounds" => self.explorer.n_rounds = num(key, value)?,
            "questions" => self.explorer.questions_per_round = num(key, value)?,
            "plan_retries" => self.explorer.plan_retries = num(key, value)?,
            "result_cap" => self.explorer.result_cap = num(key, value)?,
            "insights_per_answer" => self.explorer.insights_per_answer = num(key, value)?,
            "data_context" => self.explorer.data_context = text(),
            "explorer_goal" => self.explorer.general_goal = text(),
            "question_model" => self.explorer.question_model = text(),
            "plan_model" => self.explorer.plan_model = text(),
            "explorer_extract_model" => self.explorer.extract_model = text(),
            "explorer_rank_model" => self.explorer.rank_model = text(),
            "window" => self.aggregator.window = num(key, value)?,
            "n_aggregations" => self.aggregator.n_aggregations = num(key, value)?,
            "insights_per_window" => self.aggregator.insights_per_window = num(key, value)?,
            "scan_raw" => self.aggregator.scan_raw = flag(key, value)?,
            "aggregator_goal" => self.aggregator.general_goal = text(),
            "extract_model" => self.aggregator.extract_model = text(),
            "rank_model" => self.aggregator.rank_model = text(),
            other => return Err(HarnessError::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), HarnessError> {
        for (key, value) in parse_flat(text)? {
            self.set(&key, &value)?;
        }
        Ok(())
    }

    /// Effective settings as sorted `key = value` lines.
    pub fn to_text(&self) -> String {
        let esc = |s: &str| s.replace('\n', "\\n");
        let e = &self.explorer;
        let a = &self.aggregator;
        let mut map: BTreeMap<&str, String> = BTreeMap::new();
        map.insert("agent", self.agent.to_string());
        map.insert("data", self.data.display().to_string());
        map.insert(
            "truth",
            self.truth.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
        );
        map.insert("backend", self.backend.to_string());
        map.insert("base_url", self.base_url.clone());
        map.insert("seed", self.seed.to_string());
        map.insert("subsample_per_state", self.subsample_per_state.to_string());
        map.insert(
            "flags",
            self.flags.iter().map(u32::to_string).collect::<Vec<_>>().join(","),
        );
        map.insert("temperature", format!("{}", self.temperature));
        map.insert("max_tokens", self.max_tokens.to_string());
        map.insert("rounds", e.n_rounds.to_string());
        map.insert("questions", e.questions_per_round.to_string());
        map.insert("plan_retries", e.plan_retries.to_string());
        map.insert("result_cap", e.result_cap.to_string());
        map.insert("insights_per_answer", e.insights_per_answer.to_string());
        map.insert("data_context", esc(&e.data_context));
        map.insert("explorer_goal", esc(&e.general_goal));
        map.insert("question_model", e.question_model.clone());
        map.insert("plan_model", e.plan_model.clone());
        map.insert("explorer_extract_model", e.extract_model.clone());
        map.insert("explorer_rank_model", e.rank_model.clone());
        map.insert("window", a.window.to_string());
        map.insert("n_aggregations", a.n_aggregations.to_string());
        map.insert("insights_per_window", a.insights_per_window.to_string());
        map.insert("scan_raw", a.scan_raw.to_string());
        map.insert("aggregator_goal", esc(&a.general_goal));
        map.insert("extract_model", a.extract_model.clone());
        map.insert("rank_model", a.rank_model.clone());
        map.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// Reads `key = value` lines; `#` starts a comment line.
pub fn parse_flat(text: &str) -> Result<Vec<(String, String)>, HarnessError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| HarnessError::Config(format!("line {}: expected key = value", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}
