//! Declarative analysis plans over [`Table`]s.
//!
//! A [`QueryPlan`] is the constrained stand-in for generated analysis code:
//! filter, optionally bucket a date column by month, group, aggregate, sort,
//! and limit. Its JSON form (field names `filters`, `derive`, `group_by`,
//! `aggregations`, `sort`, `limit`) is the grammar agents ask models to emit.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tabular::{parse_cell, Column, ColumnType, Schema, Table, Value};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueryError {
    #[error("plan rejected at column `{column}`: {reason}")]
    PlanValidation { column: String, reason: String },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
}

fn invalid(column: &str, reason: impl Into<String>) -> QueryError {
    QueryError::PlanValidation {
        column: column.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AggregationFn {
    Sum,
    Mean,
    Count,
    Min,
    Max,
    Std,
    /// Pearson correlation between the target and the named column.
    Correlation(String),
}

impl AggregationFn {
    pub fn name(&self) -> &'static str {
        match self {
            AggregationFn::Sum => "sum",
            AggregationFn::Mean => "mean",
            AggregationFn::Count => "count",
            AggregationFn::Min => "min",
            AggregationFn::Max => "max",
            AggregationFn::Std => "std",
            AggregationFn::Correlation(_) => "correlation",
        }
    }

    /// Parses a function name plus optional partner column. Accepts common
    /// synonyms (`average`, `total`, `stddev`, ...), case-insensitively.
    pub fn parse(name: &str, with: Option<&str>) -> Option<Self> {
        let n = name.trim().to_ascii_lowercase();
        Some(match n.as_str() {
            "sum" | "total" => AggregationFn::Sum,
            "mean" | "average" | "avg" => AggregationFn::Mean,
            "count" => AggregationFn::Count,
            "min" | "minimum" => AggregationFn::Min,
            "max" | "maximum" => AggregationFn::Max,
            "std" | "stddev" | "std dev" | "standard deviation" => AggregationFn::Std,
            "correlation" | "corr" => AggregationFn::Correlation(with?.trim().to_string()),
            _ => return None,
        })
    }

    /// Output column label: `Total Sales (sum)`.
    pub fn label(&self, target: &str) -> String {
        match self {
            AggregationFn::Correlation(other) => format!("{target} (correlation with {other})"),
            f => format!("{target} ({})", f.name()),
        }
    }
}

impl fmt::Display for AggregationFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AggregationFn::Correlation(other) => write!(f, "correlation({other})"),
            other => f.write_str(other.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "=", alias = "==")]
    Eq,
    #[serde(rename = "!=", alias = "≠", alias = "<>")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=", alias = "≤")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=", alias = "≥")]
    Ge,
    #[serde(rename = "contains")]
    Contains,
}

impl Comparator {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Eq => "=",
            Comparator::Ne => "!=",
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
            Comparator::Contains => "contains",
        }
    }

    pub fn holds(self, ord: Ordering) -> bool {
        match self {
            Comparator::Eq => ord == Ordering::Equal,
            Comparator::Ne => ord != Ordering::Equal,
            Comparator::Lt => ord == Ordering::Less,
            Comparator::Le => ord != Ordering::Greater,
            Comparator::Gt => ord == Ordering::Greater,
            Comparator::Ge => ord != Ordering::Less,
            Comparator::Contains => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Literal {
    Number(f64),
    Text(String),
}

impl Literal {
    fn as_text(&self) -> String {
        match self {
            Literal::Number(n) => format!("{n}"),
            Literal::Text(s) => s.clone(),
        }
    }
}

impl From<&str> for Literal {
    fn from(s: &str) -> Self {
        Literal::Text(s.to_string())
    }
}

impl From<f64> for Literal {
    fn from(v: f64) -> Self {
        Literal::Number(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Filter {
    pub column: String,
    pub op: Comparator,
    pub value: Literal,
}

impl Filter {
    pub fn new(column: &str, op: Comparator, value: impl Into<Literal>) -> Self {
        Self {
            column: column.to_string(),
            op,
            value: value.into(),
        }
    }
}

fn default_month_name() -> String {
    "Month".to_string()
}

/// Adds a `YYYY-MM` text column derived from a date column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonthBucket {
    pub month_of: String,
    #[serde(rename = "as", default = "default_month_name")]
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawAggregation", into = "RawAggregation")]
pub struct Aggregation {
    pub column: String,
    pub func: AggregationFn,
    pub name: String,
}

impl Aggregation {
    pub fn new(column: &str, func: AggregationFn) -> Self {
        let name = func.label(column);
        Self {
            column: column.to_string(),
            func,
            name,
        }
    }

    pub fn named(column: &str, func: AggregationFn, name: &str) -> Self {
        Self {
            column: column.to_string(),
            func,
            name: name.to_string(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAggregation {
    column: String,
    #[serde(rename = "fn")]
    func: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    with: Option<String>,
    #[serde(rename = "as", default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
}

impl TryFrom<RawAggregation> for Aggregation {
    type Error = String;
    fn try_from(raw: RawAggregation) -> Result<Self, Self::Error> {
        let func = AggregationFn::parse(&raw.func, raw.with.as_deref()).ok_or_else(|| {
            if raw.func.trim().eq_ignore_ascii_case("correlation") {
                "correlation requires a `with` column".to_string()
            } else {
                format!("unknown aggregation function `{}`", raw.func)
            }
        })?;
        let name = raw.name.unwrap_or_else(|| func.label(&raw.column));
        Ok(Aggregation {
            column: raw.column,
            func,
            name,
        })
    }
}

impl From<Aggregation> for RawAggregation {
    fn from(a: Aggregation) -> Self {
        let with = match &a.func {
            AggregationFn::Correlation(o) => Some(o.clone()),
            _ => None,
        };
        let default_name = a.func.label(&a.column);
        RawAggregation {
            func: a.func.name().to_string(),
            with,
            name: (a.name != default_name).then_some(a.name),
            column: a.column,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortOrder {
    #[default]
    Asc,
    Desc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SortSpec {
    pub column: String,
    #[serde(default)]
    pub order: SortOrder,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryPlan {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub filters: Vec<Filter>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derive: Option<MonthBucket>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub group_by: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aggregations: Vec<Aggregation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sort: Option<SortSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<usize>,
}

impl QueryPlan {
    pub fn is_noop(&self) -> bool {
        self.filters.is_empty()
            && self.derive.is_none()
            && self.group_by.is_empty()
            && self.aggregations.is_empty()
            && self.sort.is_none()
            && self.limit.is_none()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plan serializes")
    }
}

/// Human-readable description of the plan JSON grammar, embedded in prompts.
pub const PLAN_GRAMMAR: &str = r#"Reply with one JSON object using only these fields (all optional):
{
  "filters": [{"column": "<column>", "op": "=" | "!=" | "<" | "<=" | ">" | ">=" | "contains", "value": <string or number>}],
  "derive": {"month_of": "<date column>", "as": "<new column name, default Month>"},
  "group_by": ["<column>", ...],
  "aggregations": [{"column": "<column>", "fn": "sum" | "mean" | "count" | "min" | "max" | "std" | "correlation", "with": "<second column, correlation only>", "as": "<output name>"}],
  "sort": {"column": "<output column>", "order": "asc" | "desc"},
  "limit": <number of rows>
}
Filters run first, then the month column is derived, then rows are grouped and aggregated.
Aggregation targets must be numeric except for count. Percent values are fractions (0.35 means 35%).
Dates are written YYYY-MM-DD and months as YYYY-MM."#;

/// Result of executing a plan, with the source rows behind each output row.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutput {
    pub table: Table,
    /// For each output row, the input rows it was computed from, ascending.
    pub lineage: Vec<Vec<usize>>,
}

struct Compiled {
    filters: Vec<(usize, Comparator, Value, String)>,
    derive: Option<usize>,
    group_cols: Vec<usize>,
    aggs: Vec<(usize, AggregationFn, Option<usize>, ColumnType)>,
    output: Schema,
    sort: Option<(usize, SortOrder)>,
}

fn agg_output_type(func: &AggregationFn, input: ColumnType) -> ColumnType {
    match func {
        AggregationFn::Count => ColumnType::Integer,
        AggregationFn::Sum => match input {
            ColumnType::Integer | ColumnType::Money => input,
            _ => ColumnType::Decimal,
        },
        AggregationFn::Mean => match input {
            ColumnType::Percent => ColumnType::Percent,
            _ => ColumnType::Decimal,
        },
        AggregationFn::Min | AggregationFn::Max => input,
        AggregationFn::Std | AggregationFn::Correlation(_) => ColumnType::Decimal,
    }
}

fn compile(plan: &QueryPlan, schema: &Schema) -> Result<Compiled, QueryError> {
    let lookup = |s: &Schema, name: &str| {
        s.index_of(name)
            .ok_or_else(|| invalid(name, "no such column"))
    };

    let mut filters = Vec::new();
    for f in &plan.filters {
        let idx = lookup(schema, &f.column)?;
        let ty = schema.columns()[idx].ty;
        let text = f.value.as_text();
        let typed = if f.op == Comparator::Contains {
            Value::Text(text.clone())
        } else {
            parse_cell(&text, ty)
                .ok()
                .filter(|v| !v.is_null())
                .ok_or_else(|| invalid(&f.column, format!("literal `{text}` is not a valid {ty}")))?
        };
        filters.push((idx, f.op, typed, text));
    }

    let mut working_cols: Vec<Column> = schema.columns().to_vec();
    let derive = match &plan.derive {
        Some(d) => {
            let idx = lookup(schema, &d.month_of)?;
            if schema.columns()[idx].ty != ColumnType::Date {
                return Err(invalid(&d.month_of, "month bucketing needs a date column"));
            }
            if schema.index_of(&d.name).is_some() {
                return Err(invalid(&d.name, "derived column name already exists"));
            }
            working_cols.push(Column {
                name: d.name.clone(),
                ty: ColumnType::Text,
            });
            Some(idx)
        }
        None => None,
    };
    let working = Schema::new(working_cols).map_err(|e| invalid("", e.to_string()))?;

    let group_cols = plan
        .group_by
        .iter()
        .map(|g| lookup(&working, g))
        .collect::<Result<Vec<_>, _>>()?;

    let mut aggs = Vec::new();
    for a in &plan.aggregations {
        let idx = lookup(&working, &a.column)?;
        let ty = working.columns()[idx].ty;
        if a.func != AggregationFn::Count && !ty.is_numeric() {
            return Err(invalid(&a.column, format!("{} needs a numeric column, found {ty}", a.func.name())));
        }
        let partner = match &a.func {
            AggregationFn::Correlation(other) => {
                let j = lookup(&working, other)?;
                if !working.columns()[j].ty.is_numeric() {
                    return Err(invalid(other, "correlation needs two numeric columns"));
                }
                Some(j)
            }
            _ => None,
        };
        aggs.push((idx, a.func.clone(), partner, agg_output_type(&a.func, ty)));
    }

    let output = if group_cols.is_empty() && aggs.is_empty() {
        working.clone()
    } else {
        let mut cols: Vec<Column> = group_cols
            .iter()
            .map(|&g| working.columns()[g].clone())
            .collect();
        for (a, (_, _, _, ty)) in plan.aggregations.iter().zip(&aggs) {
            cols.push(Column {
                name: a.name.clone(),
                ty: *ty,
            });
        }
        Schema::new(cols).map_err(|e| invalid("", e.to_string()))?
    };

    let sort = match &plan.sort {
        Some(s) => Some((lookup(&output, &s.column)?, s.order)),
        None => None,
    };

    Ok(Compiled {
        filters,
        derive,
        group_cols,
        aggs,
        output,
        sort,
    })
}

fn passes(cell: &Value, op: Comparator, lit: &Value, raw: &str) -> bool {
    if cell.is_null() {
        return false;
    }
    match op {
        Comparator::Contains => cell.export().contains(raw),
        _ => op.holds(cell.total_cmp(lit)),
    }
}

fn month_key(v: &Value) -> Value {
    match v {
        Value::Date(d) => Value::Text(d.format("%Y-%m").to_string()),
        _ => Value::Null,
    }
}

fn keys_equal(a: &[Value], b: &[Value]) -> bool {
    a.iter().zip(b).all(|(x, y)| x.total_cmp(y) == Ordering::Equal)
}

fn cmp_keys(a: &[Value], b: &[Value]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal)
}

fn sample_std(values: &[f64]) -> Option<f64> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    // A rounded mean can leave a residual on constant input.
    if values.iter().all(|v| *v == values[0]) {
        return Some(0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    Some((ss / (n - 1) as f64).sqrt())
}

fn pearson(pairs: &[(f64, f64)]) -> Option<f64> {
    let n = pairs.len();
    if n < 2 || pairs.iter().all(|p| p.0 == pairs[0].0) || pairs.iter().all(|p| p.1 == pairs[0].1) {
        return None;
    }
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in pairs {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

fn aggregate(
    rows: &[Vec<Value>],
    members: &[usize],
    col: usize,
    func: &AggregationFn,
    partner: Option<usize>,
    out_ty: ColumnType,
) -> Result<Value, QueryError> {
    let cells = || members.iter().map(|&r| &rows[r][col]).filter(|v| !v.is_null());
    let floats = || cells().filter_map(Value::as_f64);
    let v = match func {
        AggregationFn::Count => Value::Integer(cells().count() as i64),
        AggregationFn::Sum => match out_ty {
            ColumnType::Integer | ColumnType::Money => {
                let mut acc: i128 = 0;
                for c in cells() {
                    if let Value::Integer(x) | Value::Money(x) = c {
                        acc += *x as i128;
                    }
                }
                let total = i64::try_from(acc).map_err(|_| {
                    QueryError::DegenerateInput("integer sum overflows".to_string())
                })?;
                if out_ty == ColumnType::Money {
                    Value::Money(total)
                } else {
                    Value::Integer(total)
                }
            }
            // Folding from +0.0: an empty f64 sum is -0.0.
            _ => Value::Decimal(floats().fold(0.0, |a, b| a + b)),
        },
        AggregationFn::Mean => {
            let n = cells().count();
            if n == 0 {
                Value::Null
            } else {
                let mean = exact_sum(cells()) / n as f64;
                if out_ty == ColumnType::Percent {
                    Value::Percent(mean)
                } else {
                    Value::Decimal(mean)
                }
            }
        }
        AggregationFn::Min => cells()
            .min_by(|a, b| a.total_cmp(b))
            .cloned()
            .unwrap_or(Value::Null),
        AggregationFn::Max => cells()
            .max_by(|a, b| a.total_cmp(b))
            .cloned()
            .unwrap_or(Value::Null),
        AggregationFn::Std => {
            let xs: Vec<f64> = floats().collect();
            sample_std(&xs).map(Value::Decimal).unwrap_or(Value::Null)
        }
        AggregationFn::Correlation(_) => {
            let j = partner.expect("compiled correlation has a partner");
            let pairs: Vec<(f64, f64)> = members
                .iter()
                .filter_map(|&r| Some((rows[r][col].as_f64()?, rows[r][j].as_f64()?)))
                .collect();
            pearson(&pairs).map(Value::Decimal).unwrap_or(Value::Null)
        }
    };
    Ok(v)
}

/// Sum of numeric cells; integer-valued types are accumulated exactly.
fn exact_sum<'a>(cells: impl Iterator<Item = &'a Value>) -> f64 {
    let mut int_acc: i128 = 0;
    let mut cents_acc: i128 = 0;
    let mut float_acc = 0.0;
    for c in cells {
        match c {
            Value::Integer(x) => int_acc += *x as i128,
            Value::Money(x) => cents_acc += *x as i128,
            other => float_acc += other.as_f64().unwrap_or(0.0),
        }
    }
    int_acc as f64 + cents_acc as f64 / 100.0 + float_acc
}

/// Executes a plan, tracking which input rows feed each output row.
pub fn execute_plan_traced(plan: &QueryPlan, table: &Table) -> Result<PlanOutput, QueryError> {
    if plan.is_noop() {
        return Ok(PlanOutput {
            table: table.clone(),
            lineage: (0..table.num_rows()).map(|i| vec![i]).collect(),
        });
    }
    let c = compile(plan, table.schema())?;

    let kept: Vec<usize> = (0..table.num_rows())
        .filter(|&r| {
            let row = &table.rows()[r];
            c.filters
                .iter()
                .all(|(i, op, lit, raw)| passes(&row[*i], *op, lit, raw))
        })
        .collect();

    // Working rows: input rows plus the derived month column, if any.
    let working_rows: Vec<Vec<Value>> = match c.derive {
        Some(d) => table
            .rows()
            .iter()
            .map(|r| {
                let mut w = r.clone();
                w.push(month_key(&r[d]));
                w
            })
            .collect(),
        None => table.rows().to_vec(),
    };

    let (mut out_rows, mut lineage): (Vec<Vec<Value>>, Vec<Vec<usize>>) =
        if c.group_cols.is_empty() && c.aggs.is_empty() {
            kept.iter()
                .map(|&r| (working_rows[r].clone(), vec![r]))
                .unzip()
        } else {
            let key_of = |r: usize| -> Vec<Value> {
                c.group_cols.iter().map(|&g| working_rows[r][g].clone()).collect()
            };
            let mut order = kept.clone();
            order.sort_by(|&a, &b| cmp_keys(&key_of(a), &key_of(b)));
            let mut groups: Vec<(Vec<Value>, Vec<usize>)> = Vec::new();
            for r in order {
                let k = key_of(r);
                match groups.last_mut() {
                    Some((gk, members)) if keys_equal(gk, &k) => members.push(r),
                    _ => groups.push((k, vec![r])),
                }
            }
            if c.group_cols.is_empty() && groups.is_empty() {
                groups.push((Vec::new(), Vec::new()));
            }
            let mut rows = Vec::with_capacity(groups.len());
            let mut lin = Vec::with_capacity(groups.len());
            for (key, mut members) in groups {
                members.sort_unstable();
                let mut row = key;
                for (col, func, partner, ty) in &c.aggs {
                    row.push(aggregate(&working_rows, &members, *col, func, *partner, *ty)?);
                }
                rows.push(row);
                lin.push(members);
            }
            (rows, lin)
        };

    if let Some((col, order)) = c.sort {
        let mut idx: Vec<usize> = (0..out_rows.len()).collect();
        idx.sort_by(|&a, &b| {
            let (x, y) = (&out_rows[a][col], &out_rows[b][col]);
            match (x.is_null(), y.is_null()) {
                (true, true) => Ordering::Equal,
                (true, false) => Ordering::Greater,
                (false, true) => Ordering::Less,
                _ => match order {
                    SortOrder::Asc => x.total_cmp(y),
                    SortOrder::Desc => y.total_cmp(x),
                },
            }
        });
        let mut rows = Vec::with_capacity(idx.len());
        let mut lin = Vec::with_capacity(idx.len());
        for i in idx {
            rows.push(std::mem::take(&mut out_rows[i]));
            lin.push(std::mem::take(&mut lineage[i]));
        }
        out_rows = rows;
        lineage = lin;
    }
    if let Some(n) = plan.limit {
        out_rows.truncate(n);
        lineage.truncate(n);
    }

    let table = Table::new(c.output, out_rows).map_err(|e| invalid("", e.to_string()))?;
    Ok(PlanOutput { table, lineage })
}

pub fn execute_plan(plan: &QueryPlan, table: &Table) -> Result<Table, QueryError> {
    execute_plan_traced(plan, table).map(|o| o.table)
}

/// Checks a plan against a schema without running it.
pub fn validate_plan(plan: &QueryPlan, schema: &Schema) -> Result<(), QueryError> {
    compile(plan, schema).map(|_| ())
}

/// One row per distinct value of `group_by`, aggregating `target` into a
/// column labelled `<target> (<fn>)`.
pub fn group_aggregate(
    table: &Table,
    group_by: &str,
    target: &str,
    func: &AggregationFn,
) -> Result<PlanOutput, QueryError> {
    let plan = QueryPlan {
        group_by: vec![group_by.to_string()],
        aggregations: vec![Aggregation::new(target, func.clone())],
        ..QueryPlan::default()
    };
    execute_plan_traced(&plan, table)
}

/// Pearson correlation over rows where both columns are non-null.
pub fn correlation(table: &Table, col_a: &str, col_b: &str) -> Result<f64, QueryError> {
    let schema = table.schema();
    for name in [col_a, col_b] {
        let col = schema.column(name).ok_or_else(|| invalid(name, "no such column"))?;
        if !col.ty.is_numeric() {
            return Err(invalid(name, "correlation needs numeric columns"));
        }
    }
    let a = schema.index_of(col_a).expect("checked");
    let b = schema.index_of(col_b).expect("checked");
    let pairs: Vec<(f64, f64)> = table
        .rows()
        .iter()
        .filter_map(|r| Some((r[a].as_f64()?, r[b].as_f64()?)))
        .collect();
    if pairs.len() < 2 {
        return Err(QueryError::DegenerateInput(format!(
            "{} paired values, need at least 2",
            pairs.len()
        )));
    }
    pearson(&pairs).ok_or_else(|| QueryError::DegenerateInput("constant column".to_string()))
}
