//! Planting flags: deliberate, explainable anomalies with recorded ground
//! truth.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::queryengine::{Comparator, Filter, Literal};
use crate::tabular::{parse_cell, scale_cents, CellEdit, ColumnType, Table, Value};
use crate::verify::{MatchCriteria, MatchMode, ValuePredicate};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlagError {
    #[error("selector matches no rows: {0}")]
    SelectorMatchesNothing(String),
    #[error("spike selector matched {0} rows and no tiebreak is configured")]
    SelectorAmbiguous(usize),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invalid flag spec: {0}")]
    InvalidSpec(String),
}

/// `target := left * right`, rounded to the target column's precision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecomputeRule {
    pub target: String,
    pub left: String,
    pub right: String,
}

impl RecomputeRule {
    pub fn product(target: &str, left: &str, right: &str) -> Self {
        Self {
            target: target.to_string(),
            left: left.to_string(),
            right: right.to_string(),
        }
    }
}

/// How to pick one row when a spike selector matches several.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tiebreak {
    /// Several matches are an error.
    #[default]
    Unique,
    LowestIndex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CorruptionOp {
    SetValueForGroup {
        filter_column: String,
        filter_value: String,
        target_column: String,
        new_value: String,
        #[serde(default)]
        recompute: Vec<RecomputeRule>,
    },
    /// Multiplies `scaled_columns` of the group by
    /// `margin_factor * compared(comparison) / compared(group)`, so the
    /// group's `compared_column` total ends up above the comparison
    /// group's.
    ScaleGroupUntilExceeds {
        filter_column: String,
        filter_value: String,
        scaled_columns: Vec<String>,
        comparison_value: String,
        compared_column: String,
        margin_factor: f64,
        #[serde(default)]
        recompute: Vec<RecomputeRule>,
    },
    SpikeRowValue {
        selector: Vec<Filter>,
        #[serde(default)]
        prefer: Vec<Filter>,
        #[serde(default)]
        tiebreak: Tiebreak,
        target_column: String,
        new_value: String,
        #[serde(default)]
        recompute: Vec<RecomputeRule>,
        /// Columns whose values on the chosen row join the entity keywords.
        #[serde(default)]
        entity_columns: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlagSpec {
    pub id: u32,
    pub description: String,
    pub corruption: CorruptionOp,
    pub match_criteria: MatchCriteria,
}

/// One changed cell, values in canonical export form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellChange {
    pub row: usize,
    pub column: String,
    pub before: String,
    pub after: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub flag_id: u32,
    pub description: String,
    pub touched_rows: BTreeSet<usize>,
    pub touched_columns: BTreeSet<String>,
    pub changes: Vec<CellChange>,
    /// Criteria with plant-time values filled in.
    pub match_criteria: MatchCriteria,
}

const STATE: &str = "State";
const UNITS: &str = "Units Sold";
const PRICE: &str = "Price per Unit";
const SALES: &str = "Total Sales";
const PROFIT: &str = "Operating Profit";
const MARGIN: &str = "Operating Margin";

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// The three standard flags: near-zero Arizona margins, Alaska outselling
/// California, and one men's-footwear row with eight million units.
pub fn builtin_flags() -> Vec<FlagSpec> {
    let sales_rule = RecomputeRule::product(SALES, PRICE, UNITS);
    let profit_rule = RecomputeRule::product(PROFIT, SALES, MARGIN);
    vec![
        FlagSpec {
            id: 1,
            description: "Operating margins for every retailer in Arizona are extremely low (0.1%)".into(),
            corruption: CorruptionOp::SetValueForGroup {
                filter_column: STATE.into(),
                filter_value: "Arizona".into(),
                target_column: MARGIN.into(),
                new_value: "0.001".into(),
                recompute: vec![profit_rule.clone()],
            },
            match_criteria: MatchCriteria {
                metric_keywords: strings(&["operating margin", "margin"]),
                entity_keywords: strings(&["Arizona"]),
                value_predicate: Some(ValuePredicate::Compare {
                    op: Comparator::Le,
                    threshold: 0.01,
                }),
                mode: MatchMode::Lenient,
            },
        },
        FlagSpec {
            id: 2,
            description: "Alaska has higher total sales than California".into(),
            corruption: CorruptionOp::ScaleGroupUntilExceeds {
                filter_column: STATE.into(),
                filter_value: "Alaska".into(),
                scaled_columns: strings(&[UNITS]),
                comparison_value: "California".into(),
                compared_column: SALES.into(),
                margin_factor: 1.1,
                recompute: vec![sales_rule.clone(), profit_rule.clone()],
            },
            match_criteria: MatchCriteria {
                metric_keywords: strings(&["total sales", "revenue"]),
                entity_keywords: strings(&["Alaska", "Anchorage"]),
                value_predicate: Some(ValuePredicate::ExceedsComparisonGroup),
                mode: MatchMode::Lenient,
            },
        },
        FlagSpec {
            id: 3,
            description: "One retailer sold an enormous quantity (8,000,000 units) of men's footwear".into(),
            corruption: CorruptionOp::SpikeRowValue {
                selector: vec![
                    Filter::new("Product", Comparator::Contains, "Men's"),
                    Filter::new("Product", Comparator::Contains, "Footwear"),
                ],
                prefer: vec![Filter::new("City", Comparator::Eq, "Los Angeles")],
                tiebreak: Tiebreak::LowestIndex,
                target_column: UNITS.into(),
                new_value: "8000000".into(),
                recompute: vec![sales_rule, profit_rule],
                entity_columns: strings(&["Retailer", "City", "State"]),
            },
            match_criteria: MatchCriteria {
                metric_keywords: strings(&["units"]),
                entity_keywords: strings(&["Los Angeles", "Men's"]),
                value_predicate: Some(ValuePredicate::Near {
                    target: 8_000_000.0,
                    tolerance: 0.5,
                }),
                mode: MatchMode::Lenient,
            },
        },
    ]
}

/// Looks up a builtin flag by id.
pub fn builtin_flag(id: u32) -> Option<FlagSpec> {
    builtin_flags().into_iter().find(|f| f.id == id)
}

fn column(table: &Table, name: &str) -> Result<(usize, ColumnType), FlagError> {
    let idx = table
        .schema()
        .index_of(name)
        .ok_or_else(|| FlagError::SchemaMismatch(format!("no column `{name}`")))?;
    Ok((idx, table.schema().columns()[idx].ty))
}

fn parse_for(table: &Table, col: &str, raw: &str) -> Result<Value, FlagError> {
    let (_, ty) = column(table, col)?;
    parse_cell(raw, ty).map_err(|e| FlagError::InvalidSpec(format!("{col}: {e}")))
}

fn rows_where(table: &Table, col: &str, raw: &str) -> Result<Vec<usize>, FlagError> {
    let (idx, _) = column(table, col)?;
    let want = parse_for(table, col, raw)?;
    Ok((0..table.num_rows())
        .filter(|&r| table.rows()[r][idx] == want)
        .collect())
}

fn filter_matches(table: &Table, filters: &[Filter], row: usize) -> Result<bool, FlagError> {
    for f in filters {
        let (idx, ty) = column(table, &f.column)?;
        let cell = &table.rows()[row][idx];
        if cell.is_null() {
            return Ok(false);
        }
        let raw = match &f.value {
            Literal::Text(s) => s.clone(),
            Literal::Number(n) => format!("{n}"),
        };
        let ok = match f.op {
            Comparator::Contains => cell.export().contains(&raw),
            op => {
                let lit = parse_cell(&raw, ty).map_err(|e| FlagError::InvalidSpec(format!("{}: {e}", f.column)))?;
                op.holds(cell.total_cmp(&lit))
            }
        };
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

fn product(left: &Value, right: &Value, target: ColumnType) -> Option<Value> {
    Some(match (target, left, right) {
        (ColumnType::Money, Value::Money(c), Value::Integer(n)) | (ColumnType::Money, Value::Integer(n), Value::Money(c)) => {
            Value::Money(c.checked_mul(*n)?)
        }
        (ColumnType::Money, Value::Money(c), other) | (ColumnType::Money, other, Value::Money(c)) => {
            Value::Money(scale_cents(*c, other.as_f64()?))
        }
        (ColumnType::Money, a, b) => Value::Money((a.as_f64()? * b.as_f64()? * 100.0).round() as i64),
        (ColumnType::Integer, a, b) => Value::Integer((a.as_f64()? * b.as_f64()?).round() as i64),
        (ColumnType::Decimal, a, b) => Value::Decimal(a.as_f64()? * b.as_f64()?),
        (ColumnType::Percent, a, b) => Value::Percent(a.as_f64()? * b.as_f64()?),
        _ => return None,
    })
}

/// Applies rules in order to one row, reading earlier results.
fn recompute_row(table: &Table, row: &mut [Value], rules: &[RecomputeRule]) -> Result<(), FlagError> {
    for rule in rules {
        let (t, ty) = column(table, &rule.target)?;
        let (l, _) = column(table, &rule.left)?;
        let (r, _) = column(table, &rule.right)?;
        if row[l].is_null() || row[r].is_null() {
            continue;
        }
        row[t] = product(&row[l], &row[r], ty)
            .ok_or_else(|| FlagError::InvalidSpec(format!("cannot compute {} as {} x {}", rule.target, rule.left, rule.right)))?;
    }
    Ok(())
}

fn scale_value(v: &Value, factor: f64) -> Value {
    match v {
        Value::Integer(n) => Value::Integer((*n as f64 * factor).round() as i64),
        Value::Money(c) => Value::Money(scale_cents(*c, factor)),
        Value::Decimal(x) => Value::Decimal(x * factor),
        Value::Percent(x) => Value::Percent((x * factor).min(1.0)),
        other => other.clone(),
    }
}

fn sum_column(table: &Table, rows: &[usize], col: usize) -> f64 {
    let mut cents: i128 = 0;
    let mut other = 0.0;
    for &r in rows {
        match &table.rows()[r][col] {
            Value::Money(c) => cents += *c as i128,
            v => other += v.as_f64().unwrap_or(0.0),
        }
    }
    cents as f64 / 100.0 + other
}

/// Plants one flag. Untouched cells are copied unchanged; the ground truth
/// lists every cell whose value differs.
pub fn plant_flag(table: &Table, flag: &FlagSpec) -> Result<(Table, GroundTruth), FlagError> {
    if !flag.match_criteria.is_valid() {
        return Err(FlagError::InvalidSpec("criteria need metric keywords or a value predicate".into()));
    }
    let mut criteria = flag.match_criteria.clone();
    // Row index -> replacement row.
    let mut replaced: Vec<(usize, Vec<Value>)> = Vec::new();

    match &flag.corruption {
        CorruptionOp::SetValueForGroup {
            filter_column,
            filter_value,
            target_column,
            new_value,
            recompute,
        } => {
            let rows = rows_where(table, filter_column, filter_value)?;
            if rows.is_empty() {
                return Err(FlagError::SelectorMatchesNothing(format!("{filter_column} = {filter_value}")));
            }
            let (t, _) = column(table, target_column)?;
            let value = parse_for(table, target_column, new_value)?;
            for r in rows {
                let mut row = table.rows()[r].clone();
                row[t] = value.clone();
                recompute_row(table, &mut row, recompute)?;
                replaced.push((r, row));
            }
        }
        CorruptionOp::ScaleGroupUntilExceeds {
            filter_column,
            filter_value,
            scaled_columns,
            comparison_value,
            compared_column,
            margin_factor,
            recompute,
        } => {
            if !(margin_factor.is_finite() && *margin_factor > 1.0) {
                return Err(FlagError::InvalidSpec(format!("margin factor {margin_factor} must exceed 1")));
            }
            let group = rows_where(table, filter_column, filter_value)?;
            if group.is_empty() {
                return Err(FlagError::SelectorMatchesNothing(format!("{filter_column} = {filter_value}")));
            }
            let comparison = rows_where(table, filter_column, comparison_value)?;
            if comparison.is_empty() {
                return Err(FlagError::SelectorMatchesNothing(format!("{filter_column} = {comparison_value}")));
            }
            let (c, cty) = column(table, compared_column)?;
            if !cty.is_numeric() {
                return Err(FlagError::SchemaMismatch(format!("`{compared_column}` is not numeric")));
            }
            let group_total = sum_column(table, &group, c);
            let comparison_total = sum_column(table, &comparison, c);
            if group_total <= 0.0 {
                return Err(FlagError::InvalidSpec(format!("{filter_value} total {compared_column} is not positive")));
            }
            let factor = margin_factor * comparison_total / group_total;
            let scaled = scaled_columns
                .iter()
                .map(|name| column(table, name).map(|(i, _)| i))
                .collect::<Result<Vec<_>, _>>()?;
            for &r in &group {
                let mut row = table.rows()[r].clone();
                for &s in &scaled {
                    row[s] = scale_value(&row[s], factor);
                }
                recompute_row(table, &mut row, recompute)?;
                replaced.push((r, row));
            }
            let new_total: f64 = {
                let mut cents: i128 = 0;
                let mut other = 0.0;
                for (_, row) in &replaced {
                    match &row[c] {
                        Value::Money(x) => cents += *x as i128,
                        v => other += v.as_f64().unwrap_or(0.0),
                    }
                }
                cents as f64 / 100.0 + other
            };
            if new_total <= comparison_total {
                return Err(FlagError::InvalidSpec(format!(
                    "scaling left {filter_value} at {new_total} which does not exceed {comparison_value} at {comparison_total}"
                )));
            }
            if criteria.value_predicate == Some(ValuePredicate::ExceedsComparisonGroup) {
                criteria.value_predicate = Some(ValuePredicate::Compare {
                    op: Comparator::Gt,
                    threshold: comparison_total,
                });
            }
        }
        CorruptionOp::SpikeRowValue {
            selector,
            prefer,
            tiebreak,
            target_column,
            new_value,
            recompute,
            entity_columns,
        } => {
            let mut matches = Vec::new();
            for r in 0..table.num_rows() {
                if filter_matches(table, selector, r)? {
                    matches.push(r);
                }
            }
            if matches.is_empty() {
                return Err(FlagError::SelectorMatchesNothing(format!("{} spike selector filters", selector.len())));
            }
            let mut preferred = Vec::new();
            for &r in &matches {
                if !prefer.is_empty() && filter_matches(table, prefer, r)? {
                    preferred.push(r);
                }
            }
            let pool = if preferred.is_empty() { &matches } else { &preferred };
            let chosen = match (pool.len(), tiebreak) {
                (1, _) => pool[0],
                (n, Tiebreak::Unique) => return Err(FlagError::SelectorAmbiguous(n)),
                (_, Tiebreak::LowestIndex) => pool[0],
            };
            let (t, _) = column(table, target_column)?;
            let mut row = table.rows()[chosen].clone();
            row[t] = parse_for(table, target_column, new_value)?;
            recompute_row(table, &mut row, recompute)?;
            for name in entity_columns {
                let (i, _) = column(table, name)?;
                if let Value::Text(s) = &table.rows()[chosen][i] {
                    if !criteria.entity_keywords.iter().any(|k| k.eq_ignore_ascii_case(s)) {
                        criteria.entity_keywords.push(s.clone());
                    }
                }
            }
            replaced.push((chosen, row));
        }
    }

    if criteria.value_predicate == Some(ValuePredicate::ExceedsComparisonGroup) {
        return Err(FlagError::InvalidSpec(
            "exceeds-comparison predicate needs a scale-group corruption".into(),
        ));
    }

    let names: Vec<String> = table.schema().names().map(str::to_string).collect();
    let mut edits = Vec::new();
    let mut changes = Vec::new();
    let mut touched_columns = BTreeSet::new();
    let touched_rows: BTreeSet<usize> = replaced.iter().map(|(r, _)| *r).collect();
    for (r, row) in &replaced {
        for (c, new) in row.iter().enumerate() {
            let old = &table.rows()[*r][c];
            if old != new {
                edits.push(CellEdit {
                    row: *r,
                    column: c,
                    value: new.clone(),
                });
                changes.push(CellChange {
                    row: *r,
                    column: names[c].clone(),
                    before: old.export(),
                    after: new.export(),
                });
                touched_columns.insert(names[c].clone());
            }
        }
    }
    let planted = table
        .with_edits(&edits)
        .map_err(|e| FlagError::SchemaMismatch(e.to_string()))?;
    Ok((
        planted,
        GroundTruth {
            flag_id: flag.id,
            description: flag.description.clone(),
            touched_rows,
            touched_columns,
            changes,
            match_criteria: criteria,
        },
    ))
}
