//! Prompt templates and the response grammars the agents rely on.
//!
//! Parsers are tolerant: malformed pieces are dropped and reported as
//! warnings, and only a response with nothing usable is an error.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::insight::Claimed;
use crate::queryengine::{AggregationFn, QueryPlan};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("missing template slot `{0}`")]
    MissingSlot(String),
    #[error("no <question> tags found")]
    NoQuestionsFound,
    #[error("malformed question tags at byte {0}")]
    MalformedTags(usize),
    #[error("no aggregation directives found")]
    NoDirectivesFound,
    #[error("no query plan found")]
    NoPlanFound,
    #[error("query plan syntax error at byte {position}: {reason}")]
    PlanSyntax { position: usize, reason: String },
    #[error("no insights found")]
    NoInsightsFound,
    #[error("no ranking found")]
    NoRankingFound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    ExplorerQuestions,
    ExplorerRank,
    AggregatorViews,
    AggregatorExtract,
    AggregatorRank,
    ExplorerPlan,
}

impl TemplateId {
    pub const ALL: [TemplateId; 6] = [
        TemplateId::ExplorerQuestions,
        TemplateId::ExplorerRank,
        TemplateId::AggregatorViews,
        TemplateId::AggregatorExtract,
        TemplateId::AggregatorRank,
        TemplateId::ExplorerPlan,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::ExplorerQuestions => "explorer_questions",
            TemplateId::ExplorerRank => "explorer_rank",
            TemplateId::AggregatorViews => "aggregator_views",
            TemplateId::AggregatorExtract => "aggregator_extract",
            TemplateId::AggregatorRank => "aggregator_rank",
            TemplateId::ExplorerPlan => "explorer_plan",
        }
    }

    pub fn body(self) -> &'static str {
        match self {
            TemplateId::ExplorerQuestions => include_str!("templates/explorer_questions.txt"),
            TemplateId::ExplorerRank => include_str!("templates/explorer_rank.txt"),
            TemplateId::AggregatorViews => include_str!("templates/aggregator_views.txt"),
            TemplateId::AggregatorExtract => include_str!("templates/aggregator_extract.txt"),
            TemplateId::AggregatorRank => include_str!("templates/aggregator_rank.txt"),
            TemplateId::ExplorerPlan => include_str!("templates/explorer_plan.txt"),
        }
    }

    /// Slot names referenced by the body, in first-use order.
    pub fn slots(self) -> Vec<&'static str> {
        let mut out: Vec<&'static str> = Vec::new();
        for piece in scan(self.body()) {
            if let Piece::Slot(name) = piece {
                if !out.contains(&name) {
                    out.push(name);
                }
            }
        }
        out
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TemplateId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown template `{s}`"))
    }
}

enum Piece<'a> {
    Text(&'a str),
    Slot(&'a str),
}

/// Splits a body into literal text and `{identifier}` slots.
fn scan(body: &str) -> Vec<Piece<'_>> {
    let mut pieces = Vec::new();
    let mut rest = body;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        let ident_len = after
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(after.len());
        if ident_len > 0 && after[ident_len..].starts_with('}') {
            pieces.push(Piece::Text(&rest[..open]));
            pieces.push(Piece::Slot(&after[..ident_len]));
            rest = &after[ident_len + 1..];
        } else {
            pieces.push(Piece::Text(&rest[..=open]));
            rest = after;
        }
    }
    pieces.push(Piece::Text(rest));
    pieces
}

/// Substitutes every slot in one pass; slot values are never re-scanned.
pub fn render_prompt(id: TemplateId, slots: &[(&str, &str)]) -> Result<String, ProtocolError> {
    let mut out = String::new();
    for piece in scan(id.body()) {
        match piece {
            Piece::Text(t) => out.push_str(t),
            Piece::Slot(name) => {
                let value = slots
                    .iter()
                    .find(|(k, _)| *k == name)
                    .map(|(_, v)| *v)
                    .ok_or_else(|| ProtocolError::MissingSlot(name.to_string()))?;
                out.push_str(value);
            }
        }
    }
    Ok(out)
}

/// Items recovered from a response plus what had to be skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub items: Vec<T>,
    pub warnings: Vec<String>,
}

pub fn parse_questions(text: &str) -> Result<Vec<String>, ProtocolError> {
    const OPEN: &str = "<question>";
    const CLOSE: &str = "</question>";
    let lower = text.to_ascii_lowercase();
    let mut questions = Vec::new();
    let mut open_at: Option<usize> = None;
    let mut pos = 0;
    loop {
        let next_open = lower[pos..].find(OPEN).map(|i| i + pos);
        let next_close = lower[pos..].find(CLOSE).map(|i| i + pos);
        match (next_open, next_close) {
            (None, None) => break,
            (Some(o), c) if c.is_none_or(|c| o < c) => {
                if open_at.is_some() {
                    return Err(ProtocolError::MalformedTags(o));
                }
                open_at = Some(o);
                pos = o + OPEN.len();
            }
            (_, Some(c)) => {
                let Some(o) = open_at.take() else {
                    return Err(ProtocolError::MalformedTags(c));
                };
                let q = text[o + OPEN.len()..c].trim();
                if !q.is_empty() {
                    questions.push(q.to_string());
                }
                pos = c + CLOSE.len();
            }
            (Some(_), None) => unreachable!("covered by the guard above"),
        }
    }
    if let Some(o) = open_at {
        return Err(ProtocolError::MalformedTags(o));
    }
    if questions.is_empty() {
        return Err(ProtocolError::NoQuestionsFound);
    }
    Ok(questions)
}

/// One proposed aggregation view: group on one column, aggregate another.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AggregationDirective {
    pub group_by: String,
    pub target: String,
    #[serde(rename = "fn")]
    pub func: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub with: Option<String>,
}

impl AggregationDirective {
    pub fn new(group_by: &str, target: &str, func: &AggregationFn) -> Self {
        let with = match func {
            AggregationFn::Correlation(o) => Some(o.clone()),
            _ => None,
        };
        Self {
            group_by: group_by.to_string(),
            target: target.to_string(),
            func: func.name().to_string(),
            with,
        }
    }

    pub fn function(&self) -> Option<AggregationFn> {
        AggregationFn::parse(&self.func, self.with.as_deref())
    }

    /// Output column of the materialized view, e.g. `Total Sales (sum)`.
    pub fn output_column(&self) -> String {
        match self.function() {
            Some(f) => f.label(&self.target),
            None => format!("{} ({})", self.target, self.func),
        }
    }

    /// `Grouped by: State on Total Sales (sum)`.
    pub fn describe(&self) -> String {
        format!("Grouped by: {} on {}", self.group_by, self.output_column())
    }
}

/// Strips list markers and markdown emphasis, then splits `key: value`
/// when the key is one of `keys`.
fn keyed_line(line: &str, keys: &[&str]) -> Option<(String, String)> {
    let mut s = line.trim().trim_start_matches(['-', '*', '•', '+', '#', '>']).trim_start();
    let digits = s.find(|c: char| !c.is_ascii_digit()).unwrap_or(0);
    if digits > 0 && s[digits..].starts_with(['.', ')']) {
        s = s[digits + 1..].trim_start();
    }
    let colon = s.find(':')?;
    let key = s[..colon].replace("**", "").replace('_', "").trim().to_ascii_lowercase();
    let key = keys.iter().find(|k| **k == key)?;
    let value = s[colon + 1..].trim().trim_start_matches("**").trim();
    Some((key.to_string(), value.to_string()))
}

fn canonical_key(key: &str) -> &str {
    match key {
        "groupby" | "group by" | "grouped by" => "group",
        "target column" | "target" => "target",
        "aggregation function" | "aggregation" | "function" => "fn",
        "value" | "values" => "values",
        other => other,
    }
}

fn clean_name(s: &str) -> String {
    s.trim()
        .trim_matches(|c| c == '`' || c == '"' || c == '\'' || c == '*')
        .trim()
        .to_string()
}

fn parse_function(raw: &str) -> Option<(String, Option<String>)> {
    let text = clean_name(raw);
    let lower = text.to_ascii_lowercase();
    if lower.starts_with("corr") {
        let partner = if let Some(i) = lower.find(" with ") {
            Some(clean_name(&text[i + 6..]))
        } else if let (Some(a), Some(b)) = (text.find('('), text.rfind(')')) {
            (a < b).then(|| clean_name(&text[a + 1..b]))
        } else {
            None
        };
        let partner = partner.filter(|p| !p.is_empty())?;
        return Some(("correlation".to_string(), Some(partner)));
    }
    let name = lower.trim_end_matches("()");
    AggregationFn::parse(name, None).map(|f| (f.name().to_string(), None))
}

pub fn parse_aggregations(text: &str) -> Result<Parsed<AggregationDirective>, ProtocolError> {
    const KEYS: [&str; 8] = [
        "groupby",
        "group by",
        "grouped by",
        "target column",
        "target",
        "aggregation function",
        "aggregation",
        "function",
    ];
    let mut items = Vec::new();
    let mut warnings = Vec::new();
    let mut current: [Option<String>; 3] = [None, None, None];

    let flush = |current: &mut [Option<String>; 3], items: &mut Vec<AggregationDirective>, warnings: &mut Vec<String>| {
        let fields = std::mem::take(current);
        match fields {
            [None, None, None] => {}
            [Some(g), Some(t), Some(f)] => match parse_function(&f) {
                Some((func, with)) => items.push(AggregationDirective {
                    group_by: clean_name(&g),
                    target: clean_name(&t),
                    func,
                    with,
                }),
                None => warnings.push(format!("skipped directive ({g}, {t}): unknown aggregation function `{f}`")),
            },
            partial => warnings.push(format!("skipped incomplete directive {partial:?}")),
        }
    };

    for line in text.lines() {
        let Some((key, value)) = keyed_line(line, &KEYS) else {
            continue;
        };
        let slot = match canonical_key(&key) {
            "group" => 0,
            "target" => 1,
            _ => 2,
        };
        if current[slot].is_some() || (slot == 0 && current.iter().any(Option::is_some)) {
            flush(&mut current, &mut items, &mut warnings);
        }
        current[slot] = Some(value);
        if current.iter().all(Option::is_some) {
            flush(&mut current, &mut items, &mut warnings);
        }
    }
    flush(&mut current, &mut items, &mut warnings);
    if items.is_empty() {
        return Err(ProtocolError::NoDirectivesFound);
    }
    Ok(Parsed { items, warnings })
}

/// Finds the first JSON object in the response and reads it as a plan.
pub fn parse_query_plan(text: &str) -> Result<QueryPlan, ProtocolError> {
    let mut syntax: Option<ProtocolError> = None;
    let mut pos = 0;
    while let Some(off) = text[pos..].find('{') {
        let start = pos + off;
        let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<serde_json::Value>();
        match stream.next() {
            Some(Ok(value @ serde_json::Value::Object(_))) => {
                return serde_json::from_value::<QueryPlan>(value).map_err(|e| ProtocolError::PlanSyntax {
                    position: start,
                    reason: e.to_string(),
                });
            }
            Some(Err(e)) => {
                let looks_like_json = text[start + 1..].trim_start().starts_with(['"', '}']);
                if looks_like_json && syntax.is_none() {
                    syntax = Some(ProtocolError::PlanSyntax {
                        position: start,
                        reason: e.to_string(),
                    });
                }
            }
            _ => {}
        }
        pos = start + 1;
    }
    Err(syntax.unwrap_or(ProtocolError::NoPlanFound))
}

/// Reads a cited literal: optional sign, optional `$` on either side,
/// thousands separators (comma or space), optional `%` suffix.
pub fn parse_literal(raw: &str) -> Claimed {
    let text = raw.trim().trim_matches(|c| c == '"' || c == '\'' || c == '`').trim();
    parse_number_literal(text)
        .map(Claimed::Number)
        .unwrap_or_else(|| Claimed::Text(text.to_string()))
}

fn parse_number_literal(text: &str) -> Option<f64> {
    let mut s = text.trim();
    let mut percent = false;
    if let Some(rest) = s.strip_suffix('%') {
        percent = true;
        s = rest.trim_end();
    }
    let mut negative = false;
    if let Some(rest) = s.strip_prefix('-') {
        negative = true;
        s = rest.trim_start();
    }
    if let Some(rest) = s.strip_prefix('$') {
        s = rest.trim_start();
    } else if let Some(rest) = s.strip_suffix('$') {
        s = rest.trim_end();
    }
    if !negative {
        if let Some(rest) = s.strip_prefix('-') {
            negative = true;
            s = rest.trim_start();
        }
    }
    if s.is_empty() || !s.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        return None;
    }
    let is_sep = |c: char| c == ',' || c == ' ' || c == '\u{2009}' || c == '\u{202f}' || c == '\u{a0}';
    let (int_part, frac_part) = match s.find('.') {
        Some(i) => (&s[..i], Some(&s[i + 1..])),
        None => (s, None),
    };
    let value: f64 = if int_part.contains(is_sep) {
        let groups: Vec<&str> = int_part.split(is_sep).collect();
        let first_ok = (1..=3).contains(&groups[0].len());
        let rest_ok = groups[1..].iter().all(|g| g.len() == 3);
        if !first_ok || !rest_ok || !groups.iter().all(|g| g.chars().all(|c| c.is_ascii_digit())) {
            return None;
        }
        let mut joined: String = groups.concat();
        if let Some(f) = frac_part {
            if f.is_empty() || !f.chars().all(|c| c.is_ascii_digit()) {
                return None;
            }
            joined.push('.');
            joined.push_str(f);
        }
        joined.parse().ok()?
    } else {
        s.parse().ok()?
    };
    if !value.is_finite() {
        return None;
    }
    let value = if negative { -value } else { value };
    Some(if percent { value / 100.0 } else { value })
}

/// One `Row / Insight / Values / Score / Explanation` block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawInsight {
    pub row: usize,
    pub text: String,
    /// `(column, literal)` pairs as written.
    pub values: Vec<(String, String)>,
    pub score: u8,
    pub explanation: String,
}

type Block = Vec<(String, String)>;

/// Groups keyed lines into blocks, each starting at a `Row:` line.
/// Unkeyed lines continue the previous field.
fn split_blocks(text: &str, keys: &[&str]) -> Vec<Block> {
    let mut blocks: Vec<Block> = Vec::new();
    for line in text.lines() {
        match keyed_line(line, keys) {
            Some((key, value)) => {
                let key = canonical_key(&key).to_string();
                if key == "row" {
                    blocks.push(vec![(key, value)]);
                } else if let Some(b) = blocks.last_mut() {
                    if !b.iter().any(|(k, _)| *k == key) {
                        b.push((key, value));
                    }
                }
            }
            None => {
                let extra = line.trim();
                if extra.is_empty() {
                    continue;
                }
                if let Some((_, v)) = blocks.last_mut().and_then(|b| b.last_mut()) {
                    if !v.is_empty() {
                        v.push(' ');
                    }
                    v.push_str(extra);
                }
            }
        }
    }
    blocks
}

fn field<'a>(block: &'a Block, key: &str) -> Option<&'a str> {
    block
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .filter(|v| !v.is_empty())
}

fn first_integer(s: &str) -> Option<u64> {
    let start = s.find(|c: char| c.is_ascii_digit())?;
    let digits: String = s[start..].chars().take_while(|c| c.is_ascii_digit()).collect();
    digits.parse().ok()
}

/// Splits `(col, value), (col, value)` into pairs. Parentheses nest, so
/// `(Total Sales (sum), 1,200)` is one pair; the first top-level comma
/// inside a pair separates column from value.
pub fn parse_value_pairs(s: &str) -> Vec<(String, String)> {
    let mut pairs = Vec::new();
    let mut depth = 0usize;
    let mut start = None;
    for (i, c) in s.char_indices() {
        match c {
            '(' => {
                if depth == 0 {
                    start = Some(i + 1);
                }
                depth += 1;
            }
            ')' if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    if let Some(st) = start.take() {
                        if let Some(pair) = split_pair(&s[st..i]) {
                            pairs.push(pair);
                        }
                    }
                }
            }
            _ => {}
        }
    }
    pairs
}

fn split_pair(inner: &str) -> Option<(String, String)> {
    let mut depth = 0usize;
    for (i, c) in inner.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                let col = clean_name(&inner[..i]);
                let val = inner[i + 1..].trim().to_string();
                if col.is_empty() || val.is_empty() {
                    return None;
                }
                return Some((col, val));
            }
            _ => {}
        }
    }
    None
}

pub fn parse_insights(text: &str) -> Result<Parsed<RawInsight>, ProtocolError> {
    const KEYS: [&str; 6] = ["row", "insight", "values", "value", "score", "explanation"];
    let mut items = Vec::new();
    let mut warnings = Vec::new();
    for (n, block) in split_blocks(text, &KEYS).iter().enumerate() {
        let row = field(block, "row").and_then(first_integer);
        let Some(row) = row.and_then(|r| usize::try_from(r).ok()) else {
            warnings.push(format!("block {}: missing or unreadable Row", n + 1));
            continue;
        };
        let Some(insight) = field(block, "insight") else {
            warnings.push(format!("block {}: missing Insight", n + 1));
            continue;
        };
        let values = field(block, "values").map(parse_value_pairs).unwrap_or_default();
        if values.is_empty() {
            warnings.push(format!("block {}: no (column, value) pairs in Values", n + 1));
            continue;
        }
        let score = match field(block, "score").and_then(first_integer) {
            Some(s @ 1..=5) => s as u8,
            Some(s) => {
                warnings.push(format!("block {}: score {s} outside 1-5", n + 1));
                continue;
            }
            None => {
                warnings.push(format!("block {}: missing Score", n + 1));
                continue;
            }
        };
        items.push(RawInsight {
            row,
            text: insight.to_string(),
            values,
            score,
            explanation: field(block, "explanation").unwrap_or_default().to_string(),
        });
    }
    if items.is_empty() {
        return Err(ProtocolError::NoInsightsFound);
    }
    Ok(Parsed { items, warnings })
}

/// One entry of a ranking response, most interesting first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedItem {
    pub row: Option<usize>,
    pub insight: String,
    pub explanation: String,
}

pub fn parse_ranked(text: &str) -> Result<Parsed<RankedItem>, ProtocolError> {
    const KEYS: [&str; 6] = ["row", "insight", "values", "value", "score", "explanation"];
    let mut items = Vec::new();
    let mut warnings = Vec::new();
    for (n, block) in split_blocks(text, &KEYS).iter().enumerate() {
        let row = field(block, "row")
            .and_then(first_integer)
            .and_then(|r| usize::try_from(r).ok());
        if row.is_none() {
            warnings.push(format!("ranked item {}: unreadable Row", n + 1));
        }
        items.push(RankedItem {
            row,
            insight: field(block, "insight").unwrap_or_default().to_string(),
            explanation: field(block, "explanation").unwrap_or_default().to_string(),
        });
    }
    if items.is_empty() {
        return Err(ProtocolError::NoRankingFound);
    }
    Ok(Parsed { items, warnings })
}

/// Maps ranked items back onto `n` inputs. Matched inputs come first in
/// ranked order; unknown or repeated rows are warned about, and inputs
/// the ranking never mentioned are appended in their original order.
pub fn apply_ranking(items: &[RankedItem], n: usize) -> (Vec<usize>, Vec<String>) {
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut warnings = Vec::new();
    for (pos, item) in items.iter().enumerate() {
        match item.row {
            Some(r) if r < n && !seen[r] => {
                seen[r] = true;
                order.push(r);
            }
            Some(r) if r < n => warnings.push(format!("ranked item {}: row {r} repeated", pos + 1)),
            Some(r) => warnings.push(format!("ranked item {}: unknown row {r}", pos + 1)),
            None => {}
        }
    }
    let missing: Vec<usize> = (0..n).filter(|&i| !seen[i]).collect();
    if !missing.is_empty() {
        warnings.push(format!("{} unranked insights appended after the ranking", missing.len()));
        order.extend(missing);
    }
    (order, warnings)
}

fn csv_text(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

/// Ranking input for the aggregator: `,Insight,Values,Score,Explanation`.
pub fn aggregator_ranking_csv(insights: &[crate::insight::Insight]) -> String {
    let rows = insights
        .iter()
        .enumerate()
        .map(|(i, ins)| {
            vec![
                i.to_string(),
                ins.text.clone(),
                ins.values_text(),
                ins.score.to_string(),
                ins.explanation.clone(),
            ]
        })
        .collect();
    csv_text(&["", "Insight", "Values", "Score", "Explanation"], rows)
}

/// Ranking input for the explorer: `,Question,Insight,Values,Score,Explanation`.
pub fn explorer_ranking_csv(insights: &[crate::insight::Insight]) -> String {
    let rows = insights
        .iter()
        .enumerate()
        .map(|(i, ins)| {
            let question = match &ins.provenance {
                crate::insight::Provenance::Question { question, .. } => question.clone(),
                _ => String::new(),
            };
            vec![
                i.to_string(),
                question,
                ins.text.clone(),
                ins.values_text(),
                ins.score.to_string(),
                ins.explanation.clone(),
            ]
        })
        .collect();
    csv_text(&["", "Question", "Insight", "Values", "Score", "Explanation"], rows)
}

/// Formats blocks in the `Row / Insight / Values / Score / Explanation`
/// grammar accepted by [`parse_insights`].
pub fn format_insight_blocks(items: &[RawInsight]) -> String {
    let mut out = String::new();
    for it in items {
        let values = it
            .values
            .iter()
            .map(|(c, v)| format!("({c}, {v})"))
            .collect::<Vec<_>>()
            .join(", ");
        out.push_str(&format!(
            "Row: {}\nInsight: {}\nValues: {}\nScore: {}\nExplanation: {}\n\n",
            it.row, it.text, values, it.score, it.explanation
        ));
    }
    out
}

pub fn format_ranked_blocks(items: &[RankedItem]) -> String {
    let mut out = String::new();
    for it in items {
        let row = it.row.map(|r| r.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "Row: {row}\nInsight: {}\nExplanation: {}\n\n",
            it.insight, it.explanation
        ));
    }
    out
}

pub fn format_directives(items: &[AggregationDirective]) -> String {
    let mut out = String::new();
    for d in items {
        let func = match &d.with {
            Some(w) => format!("{} with {w}", d.func),
            None => d.func.clone(),
        };
        out.push_str(&format!(
            "Groupby: {}\nTarget column: {}\nAggregation function: {func}\n\n",
            d.group_by, d.target
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_fills_slots_once() {
        let out = render_prompt(
            TemplateId::AggregatorRank,
            &[("insights", "{insights} stays")],
        )
        .unwrap();
        assert!(out.ends_with("{insights} stays"));
    }

    #[test]
    fn missing_slot() {
        let err = render_prompt(TemplateId::AggregatorViews, &[("dataColumns", "a"), ("dataStats", "b")]).unwrap_err();
        assert_eq!(err, ProtocolError::MissingSlot("generalGoal".into()));
    }

    #[test]
    fn template_slots() {
        assert_eq!(
            TemplateId::ExplorerQuestions.slots(),
            vec!["dataContext", "generalGoal", "dataSchema", "insights", "max_questions"]
        );
        assert_eq!(TemplateId::AggregatorExtract.slots(), vec!["generalGoal", "aggregatedDataWindow"]);
        assert_eq!(TemplateId::AggregatorRank.slots(), vec!["insights"]);
    }

    #[test]
    fn questions_basic_and_errors() {
        assert_eq!(
            parse_questions("<question>A</question><question>B</question>").unwrap(),
            vec!["A", "B"]
        );
        assert_eq!(
            parse_questions("Sure!\n<Question> A? </Question> and then\n<QUESTION>B?</QUESTION> done").unwrap(),
            vec!["A?", "B?"]
        );
        assert_eq!(parse_questions("nothing"), Err(ProtocolError::NoQuestionsFound));
        assert_eq!(
            parse_questions("<question>a<question>b</question></question>"),
            Err(ProtocolError::MalformedTags(11))
        );
        assert_eq!(parse_questions("<question>a"), Err(ProtocolError::MalformedTags(0)));
        assert_eq!(parse_questions("a</question>"), Err(ProtocolError::MalformedTags(1)));
    }

    #[test]
    fn directives() {
        let p = parse_aggregations(
            "1. Groupby: State\nTarget column: Total Sales\nAggregation function: sum\n\n\
             **Groupby:** Retailer\n**Target column:** Operating Margin\n**Aggregation function:** Average\n\n\
             Groupby: City\nTarget column: Units Sold\nAggregation function: median\n\n\
             Groupby: Product\nTarget column: Units Sold\nAggregation function: correlation with Price per Unit\n",
        )
        .unwrap();
        assert_eq!(p.items.len(), 3);
        assert_eq!(p.items[0], AggregationDirective::new("State", "Total Sales", &AggregationFn::Sum));
        assert_eq!(p.items[1].func, "mean");
        assert_eq!(p.items[2].with.as_deref(), Some("Price per Unit"));
        assert_eq!(p.warnings.len(), 1);
        assert_eq!(parse_aggregations("hello").unwrap_err(), ProtocolError::NoDirectivesFound);
    }

    #[test]
    fn plan_extraction() {
        let plan = parse_query_plan(
            "Here you go:\n```json\n{\"group_by\": [\"State\"], \"aggregations\": [{\"column\": \"Total Sales\", \"fn\": \"sum\"}]}\n```",
        )
        .unwrap();
        assert_eq!(plan.group_by, vec!["State"]);
        assert_eq!(parse_query_plan("I cannot do that."), Err(ProtocolError::NoPlanFound));
        match parse_query_plan("{\"sorting\": {\"column\": \"x\"}}") {
            Err(ProtocolError::PlanSyntax { position, reason }) => {
                assert_eq!(position, 0);
                assert!(reason.contains("sorting"), "{reason}");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_query_plan("{\"group_by\": [\"State\""),
            Err(ProtocolError::PlanSyntax { .. })
        ));
    }

    #[test]
    fn literals() {
        assert_eq!(parse_literal("417223750"), Claimed::Number(417223750.0));
        assert_eq!(parse_literal("$ 49 473 404"), Claimed::Number(49473404.0));
        assert_eq!(parse_literal("49,473,404"), Claimed::Number(49473404.0));
        assert_eq!(parse_literal("732 000 $"), Claimed::Number(732000.0));
        assert_eq!(parse_literal("0.1 %"), Claimed::Number(0.001));
        assert_eq!(parse_literal("-$12.50"), Claimed::Number(-12.5));
        assert_eq!(parse_literal("\"Kohl's\""), Claimed::Text("Kohl's".into()));
        assert_eq!(parse_literal("1,5"), Claimed::Text("1,5".into()));
        assert_eq!(parse_literal("inf"), Claimed::Text("inf".into()));
        assert_eq!(parse_literal("2021-01-03"), Claimed::Text("2021-01-03".into()));
    }

    #[test]
    fn insight_blocks() {
        let text = "Row: 2\nInsight: Kohl's dominates\nValues: (Retailer, Kohl's), (Total Sales (sum), 417,223,750)\nScore: 5\nExplanation: far above\nthe rest.\n\n\
                    Row: 3\nInsight: x\nValues: (Total Sales (sum), 1)\nScore: 7\nExplanation: y\n\n\
                    Row: 4\nInsight: z\nScore: 2\n";
        let p = parse_insights(text).unwrap();
        assert_eq!(p.items.len(), 1);
        assert_eq!(p.items[0].row, 2);
        assert_eq!(p.items[0].values[1], ("Total Sales (sum)".into(), "417,223,750".into()));
        assert_eq!(p.items[0].explanation, "far above the rest.");
        assert_eq!(p.warnings.len(), 2);
        assert_eq!(parse_insights("Row:\n"), Err(ProtocolError::NoInsightsFound));
    }

    #[test]
    fn ranking_round_trip_and_matching() {
        let items = vec![
            RankedItem { row: Some(2), insight: "a".into(), explanation: "b".into() },
            RankedItem { row: Some(0), insight: "c".into(), explanation: "d".into() },
            RankedItem { row: Some(0), insight: "c".into(), explanation: "d".into() },
            RankedItem { row: Some(9), insight: "e".into(), explanation: "f".into() },
        ];
        let parsed = parse_ranked(&format_ranked_blocks(&items)).unwrap();
        assert!(parsed.warnings.is_empty());
        assert_eq!(parsed.items, items);
        let (order, warnings) = apply_ranking(&parsed.items, 4);
        assert_eq!(order, vec![2, 0, 1, 3]);
        assert_eq!(warnings.len(), 3);
    }

    #[test]
    fn blocks_round_trip() {
        let items = vec![RawInsight {
            row: 7,
            text: "Arizona has an extremely low Operating Margin".into(),
            values: vec![("State".into(), "Arizona".into()), ("Operating Margin (mean)".into(), "0.001".into())],
            score: 5,
            explanation: "margin far below every other state".into(),
        }];
        let p = parse_insights(&format_insight_blocks(&items)).unwrap();
        assert!(p.warnings.is_empty());
        assert_eq!(p.items, items);
        let d = vec![AggregationDirective::new("A", "B", &AggregationFn::Correlation("C".into()))];
        assert_eq!(parse_aggregations(&format_directives(&d)).unwrap().items, d);
    }
}
