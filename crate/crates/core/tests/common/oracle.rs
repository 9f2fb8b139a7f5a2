//! Random tables, a plan fuzzer, and a brute-force evaluator to compare the
//! query engine against.
//!
//! The evaluator deliberately shares no code with the engine: groups are
//! found by linear search, spread statistics use Welford updates, and
//! ordering is written out by hand.

use std::cmp::Ordering;

use chrono::{Duration, NaiveDate};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use ctf_core::queryengine::{
    Aggregation, AggregationFn, Comparator, Filter, Literal, MonthBucket, PlanOutput, QueryPlan, SortOrder,
    SortSpec,
};
use ctf_core::tabular::{parse_cell, Column, ColumnType, Schema, Table, Value};

pub const TYPES: [ColumnType; 6] = [
    ColumnType::Text,
    ColumnType::Integer,
    ColumnType::Decimal,
    ColumnType::Money,
    ColumnType::Percent,
    ColumnType::Date,
];

const WORDS: [&str; 10] = [
    "Amazon",
    "Foot Locker",
    "Kohl's",
    "Walmart",
    "West Gear",
    "Sports Direct",
    "alpha",
    "beta, gamma",
    "Ünïcode",
    "a\"quote",
];

const OPS: [Comparator; 7] = [
    Comparator::Eq,
    Comparator::Ne,
    Comparator::Lt,
    Comparator::Le,
    Comparator::Gt,
    Comparator::Ge,
    Comparator::Contains,
];

fn base_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date")
}

/// One cell; `spread` controls how many distinct values a column has.
pub fn random_value(rng: &mut ChaCha8Rng, ty: ColumnType, spread: i64) -> Value {
    match ty {
        ColumnType::Text => Value::Text(WORDS[rng.gen_range(0..WORDS.len().min(spread.max(1) as usize))].to_string()),
        ColumnType::Integer => Value::Integer(rng.gen_range(-spread..=spread * 10)),
        ColumnType::Decimal => Value::Decimal(rng.gen_range(-spread * 100..=spread * 100) as f64 / 100.0),
        ColumnType::Money => Value::Money(rng.gen_range(-spread * 1000..=spread * 100_000)),
        ColumnType::Percent => Value::Percent(rng.gen_range(0..=spread.min(1000)) as f64 / spread.min(1000) as f64),
        ColumnType::Date => Value::Date(base_date() + Duration::days(rng.gen_range(0..spread.max(1) * 7))),
    }
}

/// Up to 200 rows and 12 columns of every type, with nulls.
pub fn random_table(rng: &mut ChaCha8Rng) -> Table {
    let ncols = rng.gen_range(1..=12);
    let nrows = rng.gen_range(0..=200);
    let mut cols = Vec::with_capacity(ncols);
    let mut shape = Vec::with_capacity(ncols);
    for i in 0..ncols {
        let ty = TYPES[rng.gen_range(0..TYPES.len())];
        cols.push(Column {
            name: format!("{} {i}", ty.name()),
            ty,
        });
        let spread = [3i64, 10, 100, 1000][rng.gen_range(0..4)];
        let null_rate = if rng.gen_bool(0.4) { 0.0 } else { rng.gen_range(0.0..0.3) };
        shape.push((ty, spread, null_rate));
    }
    let rows = (0..nrows)
        .map(|_| {
            shape
                .iter()
                .map(|&(ty, spread, nulls)| {
                    if rng.gen_bool(nulls) {
                        Value::Null
                    } else {
                        random_value(rng, ty, spread)
                    }
                })
                .collect()
        })
        .collect();
    Table::new(Schema::new(cols).expect("distinct names"), rows).expect("typed rows")
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, xs: &'a [T]) -> Option<&'a T> {
    (!xs.is_empty()).then(|| &xs[rng.gen_range(0..xs.len())])
}

fn random_literal(rng: &mut ChaCha8Rng, table: &Table, col: usize, op: Comparator) -> Literal {
    let ty = table.schema().columns()[col].ty;
    if rng.gen_bool(0.04) {
        return Literal::Text("not a value".into());
    }
    let present: Vec<&Value> = table.rows().iter().map(|r| &r[col]).filter(|v| !v.is_null()).collect();
    let value = match pick(rng, &present) {
        Some(v) => (*v).clone(),
        None => random_value(rng, ty, 10),
    };
    if op == Comparator::Contains {
        let chars: Vec<char> = value.export().chars().collect();
        let a = rng.gen_range(0..=chars.len());
        let b = rng.gen_range(a..=chars.len());
        let s: String = chars[a..b].iter().collect();
        return Literal::Text(if s.is_empty() { "e".into() } else { s });
    }
    match value.as_f64() {
        Some(x) if rng.gen_bool(0.2) => Literal::Number(x),
        _ => Literal::Text(value.export()),
    }
}

/// Output columns whose values are exact, so ties sort the same way in the
/// engine and the oracle.
fn exact_output(func: &AggregationFn) -> bool {
    matches!(
        func,
        AggregationFn::Count | AggregationFn::Sum | AggregationFn::Min | AggregationFn::Max
    )
}

/// A plan over `table`, valid most of the time.
pub fn random_plan(rng: &mut ChaCha8Rng, table: &Table) -> QueryPlan {
    let schema = table.schema();
    let names: Vec<String> = schema.names().map(str::to_string).collect();
    let mut plan = QueryPlan::default();

    for _ in 0..rng.gen_range(0..=3) {
        if rng.gen_bool(0.03) {
            plan.filters.push(Filter::new("no such column", Comparator::Eq, "1"));
            continue;
        }
        let col = rng.gen_range(0..names.len());
        let op = *pick(rng, &OPS).expect("ops");
        let value = random_literal(rng, table, col, op);
        plan.filters.push(Filter {
            column: names[col].clone(),
            op,
            value,
        });
    }

    let mut working: Vec<(String, ColumnType)> = schema.columns().iter().map(|c| (c.name.clone(), c.ty)).collect();
    let dates: Vec<&Column> = schema.columns().iter().filter(|c| c.ty == ColumnType::Date).collect();
    if rng.gen_bool(0.05) {
        // Deliberately broken: wrong source type or a clashing name.
        plan.derive = Some(MonthBucket {
            month_of: names[0].clone(),
            name: names[names.len() - 1].clone(),
        });
    } else if let Some(d) = pick(rng, &dates).filter(|_| rng.gen_bool(0.35)) {
        plan.derive = Some(MonthBucket {
            month_of: d.name.clone(),
            name: "Month".into(),
        });
        working.push(("Month".into(), ColumnType::Text));
    }

    let numeric: Vec<&(String, ColumnType)> = working.iter().filter(|(_, t)| t.is_numeric()).collect();
    for _ in 0..rng.gen_range(0..=2) {
        let (name, _) = pick(rng, &working).expect("columns");
        plan.group_by.push(name.clone());
    }
    for _ in 0..rng.gen_range(0..=3) {
        let target = if rng.gen_bool(0.9) {
            pick(rng, &numeric).map(|c| c.0.clone())
        } else {
            None
        }
        .unwrap_or_else(|| pick(rng, &working).expect("columns").0.clone());
        let func = match rng.gen_range(0..7) {
            0 => AggregationFn::Sum,
            1 => AggregationFn::Mean,
            2 => AggregationFn::Count,
            3 => AggregationFn::Min,
            4 => AggregationFn::Max,
            5 => AggregationFn::Std,
            _ => {
                let other = pick(rng, &numeric).map(|c| c.0.clone()).unwrap_or_else(|| target.clone());
                AggregationFn::Correlation(other)
            }
        };
        plan.aggregations.push(Aggregation::new(&target, func));
    }

    if rng.gen_bool(0.5) {
        let column = if rng.gen_bool(0.03) {
            Some("no such column".to_string())
        } else if plan.group_by.is_empty() && plan.aggregations.is_empty() {
            pick(rng, &working).map(|c| c.0.clone())
        } else {
            let mut exact: Vec<String> = plan.group_by.clone();
            exact.extend(plan.aggregations.iter().filter(|a| exact_output(&a.func)).map(|a| a.name.clone()));
            pick(rng, &exact).cloned()
        };
        if let Some(column) = column {
            let order = if rng.gen_bool(0.5) { SortOrder::Asc } else { SortOrder::Desc };
            plan.sort = Some(SortSpec { column, order });
        }
    }
    if rng.gen_bool(0.3) {
        plan.limit = Some(rng.gen_range(0..=20));
    }
    plan
}

/// What the engine must produce for a valid plan.
#[derive(Debug)]
pub struct Expected {
    pub columns: Vec<(String, ColumnType)>,
    /// Marks columns compared with a relative tolerance.
    pub approx: Vec<bool>,
    pub rows: Vec<Vec<Value>>,
    /// Rounding floor per cell: `4 n eps max|x|` over the inputs, the
    /// forward-error bound of a float sum. Zero for exact cells.
    pub floors: Vec<Vec<f64>>,
    pub lineage: Vec<Vec<usize>>,
}

/// Plain ordering of two cells of one column: nulls first.
pub fn order(a: &Value, b: &Value) -> Ordering {
    match (a, b) {
        (Value::Null, Value::Null) => Ordering::Equal,
        (Value::Null, _) => Ordering::Less,
        (_, Value::Null) => Ordering::Greater,
        (Value::Integer(x), Value::Integer(y)) | (Value::Money(x), Value::Money(y)) => x.cmp(y),
        (Value::Decimal(x), Value::Decimal(y)) | (Value::Percent(x), Value::Percent(y)) => {
            x.partial_cmp(y).expect("no NaN in generated data")
        }
        (Value::Text(x), Value::Text(y)) => x.as_bytes().cmp(y.as_bytes()),
        (Value::Date(x), Value::Date(y)) => x.cmp(y),
        (x, y) => panic!("cells of different types: {x:?} vs {y:?}"),
    }
}

fn literal_text(l: &Literal) -> String {
    match l {
        Literal::Number(n) => format!("{n}"),
        Literal::Text(s) => s.clone(),
    }
}

fn numeric(v: &Value) -> Option<f64> {
    match v {
        Value::Integer(x) => Some(*x as f64),
        Value::Money(c) => Some(*c as f64 / 100.0),
        Value::Decimal(x) | Value::Percent(x) => Some(*x),
        _ => None,
    }
}

fn is_numeric(ty: ColumnType) -> bool {
    matches!(
        ty,
        ColumnType::Integer | ColumnType::Decimal | ColumnType::Money | ColumnType::Percent
    )
}

fn welford(xs: &[f64]) -> (f64, f64) {
    let (mut mean, mut m2) = (0.0, 0.0);
    for (i, x) in xs.iter().enumerate() {
        let d = x - mean;
        mean += d / (i + 1) as f64;
        m2 += d * (x - mean);
    }
    (mean, m2)
}

fn correlation(pairs: &[(f64, f64)]) -> Option<f64> {
    let n = pairs.len();
    if n < 2 || pairs.iter().all(|p| p.0 == pairs[0].0) || pairs.iter().all(|p| p.1 == pairs[0].1) {
        return None;
    }
    let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, (x, y)) in pairs.iter().enumerate() {
        let k = (i + 1) as f64;
        let dx = x - mx;
        let dy = y - my;
        mx += dx / k;
        my += dy / k;
        sxx += dx * (x - mx);
        syy += dy * (y - my);
        sxy += dx * (y - my);
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn aggregate(rows: &[Vec<Value>], members: &[usize], col: usize, ty: ColumnType, func: &AggregationFn, partner: Option<usize>) -> Value {
    let present: Vec<&Value> = members.iter().map(|&r| &rows[r][col]).filter(|v| !v.is_null()).collect();
    match func {
        AggregationFn::Count => Value::Integer(present.len() as i64),
        AggregationFn::Sum => match ty {
            ColumnType::Integer => Value::Integer(present.iter().map(|v| match v {
                Value::Integer(x) => *x as i128,
                _ => unreachable!(),
            }).sum::<i128>() as i64),
            ColumnType::Money => Value::Money(present.iter().map(|v| match v {
                Value::Money(x) => *x as i128,
                _ => unreachable!(),
            }).sum::<i128>() as i64),
            _ => {
                let mut total = 0.0;
                for v in &present {
                    total += numeric(v).expect("numeric");
                }
                Value::Decimal(total)
            }
        },
        AggregationFn::Mean => {
            if present.is_empty() {
                return Value::Null;
            }
            let n = present.len() as f64;
            let mean = match ty {
                ColumnType::Integer | ColumnType::Money => {
                    let exact: i128 = present
                        .iter()
                        .map(|v| match v {
                            Value::Integer(x) | Value::Money(x) => *x as i128,
                            _ => unreachable!(),
                        })
                        .sum();
                    let scale = if ty == ColumnType::Money { 100.0 } else { 1.0 };
                    exact as f64 / scale / n
                }
                _ => welford(&present.iter().map(|v| numeric(v).expect("numeric")).collect::<Vec<_>>()).0,
            };
            if ty == ColumnType::Percent {
                Value::Percent(mean)
            } else {
                Value::Decimal(mean)
            }
        }
        AggregationFn::Min | AggregationFn::Max => {
            let mut best: Option<&Value> = None;
            for v in present {
                let better = match best {
                    None => true,
                    Some(b) if *func == AggregationFn::Min => order(v, b) == Ordering::Less,
                    Some(b) => order(v, b) == Ordering::Greater,
                };
                if better {
                    best = Some(v);
                }
            }
            best.cloned().unwrap_or(Value::Null)
        }
        AggregationFn::Std => {
            let xs: Vec<f64> = present.iter().map(|v| numeric(v).expect("numeric")).collect();
            if xs.len() < 2 {
                return Value::Null;
            }
            let (_, m2) = welford(&xs);
            Value::Decimal((m2 / (xs.len() - 1) as f64).sqrt())
        }
        AggregationFn::Correlation(_) => {
            let j = partner.expect("partner column");
            let pairs: Vec<(f64, f64)> = members
                .iter()
                .filter_map(|&r| Some((numeric(&rows[r][col])?, numeric(&rows[r][j])?)))
                .collect();
            correlation(&pairs).map(Value::Decimal).unwrap_or(Value::Null)
        }
    }
}

fn floor(rows: &[Vec<Value>], members: &[usize], col: usize, func: &AggregationFn) -> f64 {
    let scale = match func {
        AggregationFn::Mean | AggregationFn::Std => members
            .iter()
            .filter_map(|&r| numeric(&rows[r][col]))
            .fold(0.0f64, |m, x| m.max(x.abs())),
        AggregationFn::Correlation(_) => 1.0,
        _ => return 0.0,
    };
    4.0 * members.len() as f64 * f64::EPSILON * scale
}

fn output_type(func: &AggregationFn, ty: ColumnType) -> ColumnType {
    match (func, ty) {
        (AggregationFn::Count, _) => ColumnType::Integer,
        (AggregationFn::Sum, ColumnType::Integer | ColumnType::Money) => ty,
        (AggregationFn::Mean, ColumnType::Percent) => ColumnType::Percent,
        (AggregationFn::Min | AggregationFn::Max, _) => ty,
        _ => ColumnType::Decimal,
    }
}

fn passes(cell: &Value, op: Comparator, lit: &Value, raw: &str) -> bool {
    if cell.is_null() {
        return false;
    }
    if op == Comparator::Contains {
        return cell.export().contains(raw);
    }
    let o = order(cell, lit);
    match op {
        Comparator::Eq => o == Ordering::Equal,
        Comparator::Ne => o != Ordering::Equal,
        Comparator::Lt => o == Ordering::Less,
        Comparator::Le => o != Ordering::Greater,
        Comparator::Gt => o == Ordering::Greater,
        Comparator::Ge => o != Ordering::Less,
        Comparator::Contains => unreachable!(),
    }
}

/// Row-scan evaluation. `None` means the plan must be rejected.
pub fn evaluate(plan: &QueryPlan, table: &Table) -> Option<Expected> {
    let input: Vec<(String, ColumnType)> = table.schema().columns().iter().map(|c| (c.name.clone(), c.ty)).collect();
    let find = |cols: &[(String, ColumnType)], name: &str| cols.iter().position(|c| c.0 == name);

    let trivial = plan.filters.is_empty()
        && plan.derive.is_none()
        && plan.group_by.is_empty()
        && plan.aggregations.is_empty()
        && plan.sort.is_none()
        && plan.limit.is_none();
    if trivial {
        return Some(Expected {
            approx: vec![false; input.len()],
            columns: input,
            rows: table.rows().to_vec(),
            floors: vec![Vec::new(); table.num_rows()],
            lineage: (0..table.num_rows()).map(|r| vec![r]).collect(),
        });
    }

    let mut filters = Vec::new();
    for f in &plan.filters {
        let i = find(&input, &f.column)?;
        let raw = literal_text(&f.value);
        let lit = if f.op == Comparator::Contains {
            Value::Null
        } else {
            match parse_cell(&raw, input[i].1) {
                Ok(v) if !v.is_null() => v,
                _ => return None,
            }
        };
        filters.push((i, f.op, lit, raw));
    }

    let mut working = input.clone();
    let mut month_of = None;
    if let Some(d) = &plan.derive {
        let i = find(&input, &d.month_of)?;
        if input[i].1 != ColumnType::Date || find(&input, &d.name).is_some() {
            return None;
        }
        working.push((d.name.clone(), ColumnType::Text));
        month_of = Some(i);
    }

    let keys: Vec<usize> = plan.group_by.iter().map(|g| find(&working, g)).collect::<Option<_>>()?;
    let mut aggs = Vec::new();
    for a in &plan.aggregations {
        let i = find(&working, &a.column)?;
        let ty = working[i].1;
        if a.func != AggregationFn::Count && !is_numeric(ty) {
            return None;
        }
        let partner = match &a.func {
            AggregationFn::Correlation(other) => {
                let j = find(&working, other)?;
                if !is_numeric(working[j].1) {
                    return None;
                }
                Some(j)
            }
            _ => None,
        };
        aggs.push((i, ty, a, partner));
    }

    let plain = keys.is_empty() && aggs.is_empty();
    let (columns, approx): (Vec<(String, ColumnType)>, Vec<bool>) = if plain {
        (working.clone(), vec![false; working.len()])
    } else {
        let mut cols: Vec<(String, ColumnType)> = keys.iter().map(|&k| working[k].clone()).collect();
        let mut approx = vec![false; cols.len()];
        for (_, ty, a, _) in &aggs {
            cols.push((a.name.clone(), output_type(&a.func, *ty)));
            approx.push(matches!(
                a.func,
                AggregationFn::Mean | AggregationFn::Std | AggregationFn::Correlation(_)
            ));
        }
        (cols, approx)
    };
    for (i, c) in columns.iter().enumerate() {
        if columns[..i].iter().any(|p| p.0 == c.0) {
            return None;
        }
    }
    let sort = match &plan.sort {
        Some(s) => Some((find(&columns, &s.column)?, s.order)),
        None => None,
    };

    let mut rows_w: Vec<Vec<Value>> = Vec::with_capacity(table.num_rows());
    for row in table.rows() {
        let mut w = row.clone();
        if let Some(d) = month_of {
            w.push(match &row[d] {
                Value::Date(date) => Value::Text(date.format("%Y-%m").to_string()),
                _ => Value::Null,
            });
        }
        rows_w.push(w);
    }
    let kept: Vec<usize> = (0..table.num_rows())
        .filter(|&r| filters.iter().all(|(i, op, lit, raw)| passes(&table.rows()[r][*i], *op, lit, raw)))
        .collect();

    let mut floors: Vec<Vec<f64>> = Vec::new();
    let (mut rows, mut lineage): (Vec<Vec<Value>>, Vec<Vec<usize>>) = if plain {
        floors = vec![Vec::new(); kept.len()];
        kept.iter().map(|&r| (rows_w[r].clone(), vec![r])).unzip()
    } else {
        let mut groups: Vec<(Vec<Value>, Vec<usize>)> = Vec::new();
        for &r in &kept {
            let key: Vec<Value> = keys.iter().map(|&k| rows_w[r][k].clone()).collect();
            match groups.iter_mut().find(|(k, _)| *k == key) {
                Some((_, members)) => members.push(r),
                None => groups.push((key, vec![r])),
            }
        }
        if keys.is_empty() && groups.is_empty() {
            groups.push((Vec::new(), Vec::new()));
        }
        groups.sort_by(|a, b| {
            a.0.iter()
                .zip(&b.0)
                .map(|(x, y)| order(x, y))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        });
        groups
            .into_iter()
            .map(|(key, members)| {
                let mut row = key;
                let mut fl = vec![0.0; row.len()];
                for (i, ty, a, partner) in &aggs {
                    row.push(aggregate(&rows_w, &members, *i, *ty, &a.func, *partner));
                    fl.push(floor(&rows_w, &members, *i, &a.func));
                }
                floors.push(fl);
                (row, members)
            })
            .unzip()
    };

    if let Some((c, dir)) = sort {
        let mut idx: Vec<usize> = (0..rows.len()).collect();
        idx.sort_by(|&a, &b| {
            let (x, y) = (&rows[a][c], &rows[b][c]);
            if x.is_null() || y.is_null() {
                return x.is_null().cmp(&y.is_null());
            }
            match dir {
                SortOrder::Asc => order(x, y),
                SortOrder::Desc => order(y, x),
            }
        });
        rows = idx.iter().map(|&i| rows[i].clone()).collect();
        floors = idx.iter().map(|&i| floors[i].clone()).collect();
        lineage = idx.iter().map(|&i| lineage[i].clone()).collect();
    }
    if let Some(n) = plan.limit {
        rows.truncate(n);
        floors.truncate(n);
        lineage.truncate(n);
    }
    Some(Expected {
        columns,
        approx,
        rows,
        floors,
        lineage,
    })
}

/// `|a - b| <= 1e-9 * max(|a|, |b|)`, or within the rounding floor.
pub fn close(a: f64, b: f64, floor: f64) -> bool {
    let d = (a - b).abs();
    a == b || d <= 1e-9 * a.abs().max(b.abs()) || d <= floor
}

/// Checks engine output against the oracle; the error says what differs.
pub fn compare(got: &PlanOutput, want: &Expected) -> Result<(), String> {
    let cols: Vec<(String, ColumnType)> = got.table.schema().columns().iter().map(|c| (c.name.clone(), c.ty)).collect();
    if cols != want.columns {
        return Err(format!("columns {cols:?}, expected {:?}", want.columns));
    }
    if got.table.num_rows() != want.rows.len() {
        return Err(format!("{} rows, expected {}", got.table.num_rows(), want.rows.len()));
    }
    if got.lineage != want.lineage {
        return Err(format!("lineage {:?}, expected {:?}", got.lineage, want.lineage));
    }
    for (r, (g, w)) in got.table.rows().iter().zip(&want.rows).enumerate() {
        for (c, (x, y)) in g.iter().zip(w).enumerate() {
            let ok = if want.approx[c] {
                match (x, y) {
                    (Value::Null, Value::Null) => true,
                    (a, b) => match (numeric(a), numeric(b)) {
                        (Some(p), Some(q)) => close(p, q, want.floors[r][c]) && a.column_type() == b.column_type(),
                        _ => false,
                    },
                }
            } else {
                x == y
            };
            if !ok {
                return Err(format!("row {r} column `{}`: got {x:?}, expected {y:?}", want.columns[c].0));
            }
        }
    }
    Ok(())
}
