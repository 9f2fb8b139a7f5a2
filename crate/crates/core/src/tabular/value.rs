use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

/// Logical type of a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Text,
    Integer,
    Decimal,
    /// Currency amount, held as integer cents.
    Money,
    /// Ratio held as a fraction in `[0, 1]`.
    Percent,
    Date,
}

impl ColumnType {
    pub fn is_numeric(self) -> bool {
        matches!(
            self,
            ColumnType::Integer | ColumnType::Decimal | ColumnType::Money | ColumnType::Percent
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            ColumnType::Text => "text",
            ColumnType::Integer => "integer",
            ColumnType::Decimal => "decimal",
            ColumnType::Money => "money",
            ColumnType::Percent => "percent",
            ColumnType::Date => "date",
        }
    }
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ColumnType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "text" => Ok(ColumnType::Text),
            "integer" => Ok(ColumnType::Integer),
            "decimal" => Ok(ColumnType::Decimal),
            "money" => Ok(ColumnType::Money),
            "percent" => Ok(ColumnType::Percent),
            "date" => Ok(ColumnType::Date),
            other => Err(format!("unknown column type `{other}`")),
        }
    }
}

/// A single typed cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Text(String),
    Integer(i64),
    Decimal(f64),
    /// Integer cents.
    Money(i64),
    /// Fraction, `0.35` for 35%.
    Percent(f64),
    Date(NaiveDate),
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    /// Numeric view of the cell. Money is expressed in currency units.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Integer(v) => Some(*v as f64),
            Value::Decimal(v) | Value::Percent(v) => Some(*v),
            Value::Money(c) => Some(*c as f64 / 100.0),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn column_type(&self) -> Option<ColumnType> {
        Some(match self {
            Value::Null => return None,
            Value::Text(_) => ColumnType::Text,
            Value::Integer(_) => ColumnType::Integer,
            Value::Decimal(_) => ColumnType::Decimal,
            Value::Money(_) => ColumnType::Money,
            Value::Percent(_) => ColumnType::Percent,
            Value::Date(_) => ColumnType::Date,
        })
    }

    /// Canonical CSV form; parses back to the same value under the same type.
    pub fn export(&self) -> String {
        match self {
            Value::Null => String::new(),
            Value::Text(s) => s.clone(),
            Value::Integer(v) => v.to_string(),
            Value::Decimal(v) | Value::Percent(v) => format!("{v}"),
            Value::Money(c) => format_cents(*c),
            Value::Date(d) => d.format("%Y-%m-%d").to_string(),
        }
    }

    /// Compact form shown to language models: whole money amounts drop the
    /// cents and decimals are rounded to ten significant digits.
    pub fn render(&self) -> String {
        match self {
            Value::Money(c) if c % 100 == 0 => (c / 100).to_string(),
            Value::Decimal(v) | Value::Percent(v) => render_float(*v),
            other => other.export(),
        }
    }

    fn type_rank(&self) -> u8 {
        match self {
            Value::Null => 0,
            Value::Integer(_) | Value::Decimal(_) | Value::Money(_) | Value::Percent(_) => 1,
            Value::Date(_) => 2,
            Value::Text(_) => 3,
        }
    }

    /// Total order used for grouping and sorting: nulls first, numbers by
    /// value, then dates, then text.
    pub fn total_cmp(&self, other: &Value) -> Ordering {
        match (self, other) {
            (Value::Integer(a), Value::Integer(b)) => a.cmp(b),
            (Value::Money(a), Value::Money(b)) => a.cmp(b),
            (Value::Text(a), Value::Text(b)) => a.cmp(b),
            (Value::Date(a), Value::Date(b)) => a.cmp(b),
            (a, b) => match (a.as_f64(), b.as_f64()) {
                // -0.0 and 0.0 are the same number here.
                (Some(x), Some(y)) => x.partial_cmp(&y).unwrap_or_else(|| x.total_cmp(&y)),
                _ => a.type_rank().cmp(&b.type_rank()),
            },
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

pub(crate) fn format_cents(c: i64) -> String {
    let sign = if c < 0 { "-" } else { "" };
    let abs = c.unsigned_abs();
    format!("{sign}{}.{:02}", abs / 100, abs % 100)
}

/// Shortest representation after rounding to ten significant digits.
pub fn render_float(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let rounded: f64 = format!("{v:.9e}").parse().unwrap_or(v);
    if rounded == 0.0 {
        return "0".to_string();
    }
    format!("{rounded}")
}

/// Float formatting compatible with Python's `repr`, which the stats block
/// layout follows (`1000.0`, `1e+16`, `1e-05`).
pub fn py_float(v: f64) -> String {
    if v.is_nan() {
        return String::new();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{v:?}");
    match s.split_once('e') {
        Some((mantissa, exp)) => {
            let e: i32 = exp.parse().unwrap_or(0);
            let sign = if e < 0 { '-' } else { '+' };
            format!("{mantissa}e{sign}{:02}", e.abs())
        }
        None => s,
    }
}

/// Removes thousands separators when they are correctly placed
/// (`1,234,567`). Returns `None` for misplaced separators.
fn strip_grouping(s: &str) -> Option<String> {
    if !s.contains(',') {
        return Some(s.to_string());
    }
    let (int_part, frac) = match s.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (s, None),
    };
    let digits = int_part.trim_start_matches(['-', '+']);
    let sign = &int_part[..int_part.len() - digits.len()];
    let groups: Vec<&str> = digits.split(',').collect();
    let first_ok = !groups[0].is_empty() && groups[0].len() <= 3;
    if !first_ok || groups[1..].iter().any(|g| g.len() != 3) {
        return None;
    }
    let mut out = String::from(sign);
    out.push_str(&groups.concat());
    if let Some(f) = frac {
        out.push('.');
        out.push_str(f);
    }
    Some(out)
}

fn parse_int(s: &str) -> Option<i64> {
    let plain = strip_grouping(s)?;
    if plain.is_empty() {
        return None;
    }
    plain.parse().ok()
}

fn parse_decimal(s: &str) -> Option<f64> {
    let plain = strip_grouping(s)?;
    let v: f64 = plain.parse().ok()?;
    // f64::from_str accepts "inf"/"nan"; a decimal cell must be a number.
    v.is_finite().then_some(v)
}

/// Parses a currency amount into cents. Accepts an optional sign, a `$`
/// prefix or suffix, thousands separators, and up to two decimals (more are
/// rounded half away from zero).
pub(crate) fn parse_money(s: &str) -> Option<i64> {
    let mut t = s.trim();
    let mut negative = false;
    if let Some(rest) = t.strip_prefix('-') {
        negative = true;
        t = rest.trim_start();
    }
    t = t.strip_prefix('$').unwrap_or(t).trim();
    t = t.strip_suffix('$').unwrap_or(t).trim();
    if let Some(rest) = t.strip_prefix('-') {
        negative = !negative;
        t = rest;
    }
    let plain = strip_grouping(t)?;
    let (int_s, frac_s) = match plain.split_once('.') {
        Some((i, f)) => (i, f),
        None => (plain.as_str(), ""),
    };
    if int_s.is_empty() && frac_s.is_empty() {
        return None;
    }
    if !int_s.bytes().all(|b| b.is_ascii_digit()) || !frac_s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let whole: i64 = if int_s.is_empty() { 0 } else { int_s.parse().ok()? };
    let mut frac_digits: Vec<u8> = frac_s.bytes().map(|b| b - b'0').collect();
    frac_digits.resize(frac_digits.len().max(3), 0);
    let mut cents = whole.checked_mul(100)? + (frac_digits[0] as i64) * 10 + frac_digits[1] as i64;
    if frac_digits[2] >= 5 {
        cents += 1;
    }
    Some(if negative { -cents } else { cents })
}

/// Parses a percentage into a fraction. A `%` suffix always means
/// percentage points; bare values above 1 are also read as points, bare
/// values up to 1 are already fractions.
pub(crate) fn parse_percent(s: &str) -> Option<f64> {
    let t = s.trim();
    let frac = if let Some(points) = t.strip_suffix('%') {
        parse_decimal(points.trim())? / 100.0
    } else {
        let v = parse_decimal(t)?;
        if v.abs() > 1.0 {
            v / 100.0
        } else {
            v
        }
    };
    Some(frac)
}

const DATE_FORMATS: [&str; 3] = ["%Y-%m-%d", "%m/%d/%Y", "%Y/%m/%d"];

pub(crate) fn parse_date(s: &str) -> Option<NaiveDate> {
    let t = s.trim();
    DATE_FORMATS
        .iter()
        .find_map(|f| NaiveDate::parse_from_str(t, f).ok())
}

/// Parses one raw cell under `ty`. Blank cells are nulls for every type.
pub fn parse_cell(raw: &str, ty: ColumnType) -> Result<Value, String> {
    let t = raw.trim();
    if t.is_empty() {
        return Ok(Value::Null);
    }
    let fail = || format!("`{raw}` is not a valid {ty}");
    match ty {
        ColumnType::Text => Ok(Value::Text(raw.to_string())),
        ColumnType::Integer => parse_int(t).map(Value::Integer).ok_or_else(fail),
        ColumnType::Decimal => parse_decimal(t).map(Value::Decimal).ok_or_else(fail),
        ColumnType::Money => parse_money(t).map(Value::Money).ok_or_else(fail),
        ColumnType::Percent => {
            let v = parse_percent(t).ok_or_else(fail)?;
            if (0.0..=1.0).contains(&v) {
                Ok(Value::Percent(v))
            } else {
                Err(format!("`{raw}` is outside the 0-100% range"))
            }
        }
        ColumnType::Date => parse_date(t).map(Value::Date).ok_or_else(fail),
    }
}

/// Most specific type that accepts every non-blank cell.
pub(crate) fn infer_type<'a>(cells: impl Iterator<Item = &'a str> + Clone) -> ColumnType {
    let mut non_blank = cells.filter(|c| !c.trim().is_empty()).peekable();
    if non_blank.peek().is_none() {
        return ColumnType::Text;
    }
    let all = |pred: &dyn Fn(&str) -> bool| non_blank.clone().all(pred);
    if all(&|c| parse_int(c.trim()).is_some()) {
        ColumnType::Integer
    } else if all(&|c| parse_decimal(c.trim()).is_some()) {
        ColumnType::Decimal
    } else if all(&|c| c.contains('$') && parse_money(c).is_some()) {
        ColumnType::Money
    } else if all(&|c| {
        c.trim().ends_with('%') && parse_percent(c).is_some_and(|v| (0.0..=1.0).contains(&v))
    }) {
        ColumnType::Percent
    } else if all(&|c| parse_date(c).is_some()) {
        ColumnType::Date
    } else {
        ColumnType::Text
    }
}
