use serde::{Deserialize, Serialize};

use super::{py_float, Table, TabularError};

/// Descriptive statistics of one numeric column. Nulls are excluded;
/// `std` is the sample standard deviation (n - 1 denominator) and is NaN
/// below two values, as are all location statistics for an empty column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub name: String,
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsTable {
    pub columns: Vec<ColumnStats>,
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = (sorted.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

impl ColumnStats {
    pub fn from_values(name: &str, values: &[f64]) -> Self {
        let n = values.len();
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mean = if n == 0 {
            f64::NAN
        } else {
            values.iter().sum::<f64>() / n as f64
        };
        let std = if n < 2 {
            f64::NAN
        } else {
            let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt()
        };
        ColumnStats {
            name: name.to_string(),
            count: n,
            mean,
            std,
            min: sorted.first().copied().unwrap_or(f64::NAN),
            p25: quantile(&sorted, 0.25),
            p50: quantile(&sorted, 0.50),
            p75: quantile(&sorted, 0.75),
            max: sorted.last().copied().unwrap_or(f64::NAN),
        }
    }
}

impl StatsTable {
    /// The describe-style block: a header of column names followed by the
    /// `count`, `mean`, `std`, `min`, `25%`, `50%`, `75%`, `max` rows.
    pub fn to_text(&self) -> String {
        let header = self
            .columns
            .iter()
            .map(|c| c.name.as_str())
            .collect::<Vec<_>>()
            .join(",");
        let mut out = header;
        out.push('\n');
        type Getter = fn(&ColumnStats) -> f64;
        let rows: [(&str, Getter); 8] = [
            ("count", |c| c.count as f64),
            ("mean", |c| c.mean),
            ("std", |c| c.std),
            ("min", |c| c.min),
            ("25%", |c| c.p25),
            ("50%", |c| c.p50),
            ("75%", |c| c.p75),
            ("max", |c| c.max),
        ];
        for (label, get) in rows {
            out.push_str(label);
            for c in &self.columns {
                out.push(',');
                out.push_str(&py_float(get(c)));
            }
            out.push('\n');
        }
        out
    }
}

pub fn summary_stats(table: &Table) -> Result<StatsTable, TabularError> {
    let mut columns = Vec::new();
    for (i, col) in table.schema().columns().iter().enumerate() {
        if !col.ty.is_numeric() {
            continue;
        }
        let values: Vec<f64> = table.rows().iter().filter_map(|r| r[i].as_f64()).collect();
        columns.push(ColumnStats::from_values(&col.name, &values));
    }
    if columns.is_empty() {
        return Err(TabularError::NoNumericColumns);
    }
    Ok(StatsTable { columns })
}
