//! Regenerates the replay fixtures in `tests/fixtures/`.
//!
//! The transcripts are produced by a hand-written rulebook that answers the
//! way the analysts' notes describe the original model runs: the aggregator
//! surfaces all three planted anomalies, the explorer finds the margin and
//! Alaska anomalies but never asks about unit volumes.
//!
//! ```text
//! cargo run -p ctf-core --example author_fixtures
//! ```

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use ctf_core::aggregator::{run_aggregator, AggregatorConfig};
use ctf_core::explorer::{run_explorer, ExplorerConfig};
use ctf_core::harness::{load_dataset, plant_builtin};
use ctf_core::llmlink::{write_transcript, ChatRequest, LlmClient, Rulebook};
use ctf_core::protocol::{
    format_directives, format_insight_blocks, format_ranked_blocks, parse_insights, AggregationDirective, RankedItem,
    RawInsight,
};
use ctf_core::queryengine::{AggregationFn, QueryPlan};
use ctf_core::scripted::{extract_window, prompt_kind, ranking_rows, task_prompt, DefaultRulebook, PromptKind, WindowData};
use ctf_core::tabular::{export_csv, sales_schema, subsample_balanced, synth_sales, Table, Value, FOCUS_STATES};
use ctf_core::verify::{score_run, MatchMode};

const BASE_SEED: u64 = 2021;
const SOURCE_ROWS: usize = 9652;
const PER_STATE: usize = 100;
/// California total before planting, in cents.
const CALIFORNIA_CENTS: i64 = 4_497_582_182;
/// Alaska total before planting. Planting scales its units by five, landing
/// on 49,473,404 dollars exactly.
const ALASKA_CENTS: i64 = 989_468_080;

const POPULOUS: [&str; 7] = ["California", "New York", "Texas", "Los Angeles", "San Francisco", "Houston", "Chicago"];

fn thousands(n: i64) -> String {
    let digits = n.abs().to_string();
    let mut out = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    if n < 0 {
        format!("-{out}")
    } else {
        out
    }
}

fn percent(x: f64) -> String {
    let s = format!("{:.2}", x * 100.0);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    format!("{s}%")
}

// ---------------------------------------------------------------------------
// Base dataset

struct Cols {
    state: usize,
    retailer: usize,
    method: usize,
    price: usize,
    units: usize,
    sales: usize,
    profit: usize,
    margin: usize,
}

fn cols(t: &Table) -> Cols {
    let s = t.schema();
    let i = |n: &str| s.index_of(n).expect("sales column");
    Cols {
        state: i("State"),
        retailer: i("Retailer"),
        method: i("Sales Method"),
        price: i("Price per Unit"),
        units: i("Units Sold"),
        sales: i("Total Sales"),
        profit: i("Operating Profit"),
        margin: i("Operating Margin"),
    }
}

fn money(v: &Value) -> i64 {
    match v {
        Value::Money(c) => *c,
        other => panic!("expected money, got {other:?}"),
    }
}

fn int(v: &Value) -> i64 {
    match v {
        Value::Integer(n) => *n,
        other => panic!("expected integer, got {other:?}"),
    }
}

fn refresh(row: &mut [Value], c: &Cols) {
    let total = money(&row[c.price]) * int(&row[c.units]);
    row[c.sales] = Value::Money(total);
    let m = row[c.margin].as_f64().expect("margin");
    row[c.profit] = Value::Money((total as f64 * m).round() as i64);
}

/// Adjusts units and one row's price so the group's Total Sales is exactly
/// `target` cents.
fn fit_group_total(rows: &mut [Vec<Value>], c: &Cols, state: &str, target: i64) {
    let group: Vec<usize> = (0..rows.len())
        .filter(|&r| rows[r][c.state] == Value::Text(state.into()))
        .collect();
    let (&last, others) = group.split_last().expect("state present");
    let sum = |rows: &[Vec<Value>]| -> i64 { others.iter().map(|&r| money(&rows[r][c.price]) * int(&rows[r][c.units])).sum() };
    let typical = sum(rows) / others.len() as i64;
    let g = (target - typical) as f64 / sum(rows) as f64;
    for &r in others {
        let u = ((int(&rows[r][c.units]) as f64) * g).round().max(1.0) as i64;
        rows[r][c.units] = Value::Integer(u);
    }
    let mut k = 0;
    loop {
        let residual = target - sum(rows);
        let fit = (300..=20_000).find(|u| residual % u == 0 && (2_500..=9_000).contains(&(residual / u)));
        if let Some(u) = fit {
            rows[last][c.units] = Value::Integer(u);
            rows[last][c.price] = Value::Money(residual / u);
            break;
        }
        // Nudge one row by a unit and try again.
        let r = others[k % others.len()];
        let u = int(&rows[r][c.units]);
        rows[r][c.units] = Value::Integer(if residual > 0 { u + 1 } else { (u - 1).max(1) });
        k += 1;
    }
    for &r in &group {
        refresh(&mut rows[r], c);
    }
}

fn build_base() -> Table {
    let source = synth_sales(BASE_SEED, SOURCE_ROWS);
    let t = subsample_balanced(&source, "State", PER_STATE, &FOCUS_STATES, BASE_SEED).expect("balanced sample");
    let c = cols(&t);
    let mut rows: Vec<Vec<Value>> = t.rows().to_vec();

    // Kohl's sells online only in Arizona, so the planted margins show up
    // as a Kohl's online anomaly.
    let kohls = Value::Text("Kohl's".into());
    let online = Value::Text("Online".into());
    let arizona = Value::Text("Arizona".into());
    for row in rows.iter_mut() {
        if row[c.retailer] == kohls && row[c.method] == online && row[c.state] != arizona {
            row[c.method] = Value::Text("Outlet".into());
        }
    }
    if !rows
        .iter()
        .any(|r| r[c.retailer] == kohls && r[c.method] == online && r[c.state] == arizona)
    {
        let r = rows
            .iter()
            .position(|r| r[c.retailer] == kohls && r[c.state] == arizona)
            .expect("Kohl's trades in Arizona");
        rows[r][c.method] = online.clone();
    }

    fit_group_total(&mut rows, &c, "California", CALIFORNIA_CENTS);
    fit_group_total(&mut rows, &c, "Alaska", ALASKA_CENTS);
    Table::new(sales_schema(), rows).expect("rows match schema")
}

// ---------------------------------------------------------------------------
// Rulebook

fn plan(json: &str) -> QueryPlan {
    serde_json::from_str(json).unwrap_or_else(|e| panic!("authored plan {json}: {e}"))
}

const Q_MARGIN: &str = "What is the relationship between operating margin and sales method for each retailer in 2021?";
const Q_CITIES: &str = "What are the top 5 cities in terms of sales revenue for 2021?";

fn authored_questions() -> Vec<(&'static str, QueryPlan)> {
    let p = |q, j: &str| (q, plan(j));
    vec![
        p(Q_MARGIN, r#"{"group_by": ["Retailer", "Sales Method"], "aggregations": [{"column": "Operating Margin", "fn": "mean"}]}"#),
        p(Q_CITIES, r#"{"group_by": ["City"], "aggregations": [{"column": "Total Sales", "fn": "sum"}], "sort": {"column": "Total Sales (sum)", "order": "desc"}, "limit": 5}"#),
        p(
            "What is the average units sold per transaction for each sales method (Outlet, Online, In-store) in 2021?",
            r#"{"group_by": ["Sales Method"], "aggregations": [{"column": "Units Sold", "fn": "mean"}]}"#,
        ),
        p(
            "Are there any seasonal trends in sales for specific product categories in 2021?",
            r#"{"derive": {"month_of": "Invoice Date", "as": "Month"}, "group_by": ["Product", "Month"], "aggregations": [{"column": "Total Sales", "fn": "sum"}], "sort": {"column": "Total Sales (sum)", "order": "desc"}, "limit": 12}"#,
        ),
        p(
            "How did the sales of each retailer evolve month by month in 2021?",
            r#"{"derive": {"month_of": "Invoice Date"}, "group_by": ["Retailer", "Month"], "aggregations": [{"column": "Total Sales", "fn": "sum"}], "limit": 30}"#,
        ),
        p(
            "What is the relationship between operating margin and total sales for each product category in 2021?",
            r#"{"group_by": ["Product"], "aggregations": [{"column": "Operating Margin", "fn": "correlation", "with": "Total Sales", "as": "Margin vs Sales"}]}"#,
        ),
        p(
            "Which region had the highest total sales in 2021?",
            r#"{"group_by": ["Region"], "aggregations": [{"column": "Total Sales", "fn": "sum"}], "sort": {"column": "Total Sales (sum)", "order": "desc"}}"#,
        ),
        p(
            "What is the average price per unit for each product?",
            r#"{"group_by": ["Product"], "aggregations": [{"column": "Price per Unit", "fn": "mean"}]}"#,
        ),
        p(
            "Which retailers have the highest operating profit in 2021?",
            r#"{"group_by": ["Retailer"], "aggregations": [{"column": "Operating Profit", "fn": "sum"}], "sort": {"column": "Operating Profit (sum)", "order": "desc"}}"#,
        ),
        p(
            "What is the average operating margin by region?",
            r#"{"group_by": ["Region"], "aggregations": [{"column": "Operating Margin", "fn": "mean"}]}"#,
        ),
        // Round two.
        p(
            "What is the total operating profit by sales method?",
            r#"{"group_by": ["Sales Method"], "aggregations": [{"column": "Operating Profit", "fn": "sum"}]}"#,
        ),
        p(
            "Which states have the highest average operating margin?",
            r#"{"group_by": ["State"], "aggregations": [{"column": "Operating Margin", "fn": "mean"}], "sort": {"column": "Operating Margin (mean)", "order": "desc"}, "limit": 5}"#,
        ),
        p(
            "How do total sales compare across sales methods in each region?",
            r#"{"group_by": ["Region", "Sales Method"], "aggregations": [{"column": "Total Sales", "fn": "sum"}]}"#,
        ),
        p(
            "What is the average total sales per transaction for each retailer?",
            r#"{"group_by": ["Retailer"], "aggregations": [{"column": "Total Sales", "fn": "mean"}]}"#,
        ),
        p(
            "Which products have the highest average operating margin?",
            r#"{"group_by": ["Product"], "aggregations": [{"column": "Operating Margin", "fn": "mean"}], "sort": {"column": "Operating Margin (mean)", "order": "desc"}}"#,
        ),
        p(
            "How did online sales evolve month by month in 2021?",
            r#"{"filters": [{"column": "Sales Method", "op": "=", "value": "Online"}], "derive": {"month_of": "Invoice Date"}, "group_by": ["Month"], "aggregations": [{"column": "Total Sales", "fn": "sum"}]}"#,
        ),
        p(
            "Which cities have the lowest average price per unit?",
            r#"{"group_by": ["City"], "aggregations": [{"column": "Price per Unit", "fn": "mean"}], "sort": {"column": "Price per Unit (mean)", "order": "asc"}, "limit": 5}"#,
        ),
        p(
            "What is the average operating profit per transaction for each product?",
            r#"{"group_by": ["Product"], "aggregations": [{"column": "Operating Profit", "fn": "mean"}]}"#,
        ),
        p(
            "How many transactions did each retailer record in 2021?",
            r#"{"group_by": ["Retailer"], "aggregations": [{"column": "Invoice Date", "fn": "count", "as": "Transactions"}]}"#,
        ),
        p(
            "What are the total sales of each retailer in the West region?",
            r#"{"filters": [{"column": "Region", "op": "=", "value": "West"}], "group_by": ["Retailer"], "aggregations": [{"column": "Total Sales", "fn": "sum"}]}"#,
        ),
        // Round three.
        p(
            "Which states had the lowest total operating profit?",
            r#"{"group_by": ["State"], "aggregations": [{"column": "Operating Profit", "fn": "sum"}], "sort": {"column": "Operating Profit (sum)", "order": "asc"}, "limit": 5}"#,
        ),
        p(
            "What is the average operating margin for each sales method?",
            r#"{"group_by": ["Sales Method"], "aggregations": [{"column": "Operating Margin", "fn": "mean"}]}"#,
        ),
        p(
            "How did total operating profit evolve month by month in 2021?",
            r#"{"derive": {"month_of": "Invoice Date"}, "group_by": ["Month"], "aggregations": [{"column": "Operating Profit", "fn": "sum"}]}"#,
        ),
        p(
            "What is the highest price per unit for each product?",
            r#"{"group_by": ["Product"], "aggregations": [{"column": "Price per Unit", "fn": "max"}]}"#,
        ),
        p(
            "Which retailer has the highest total sales through outlets?",
            r#"{"filters": [{"column": "Sales Method", "op": "=", "value": "Outlet"}], "group_by": ["Retailer"], "aggregations": [{"column": "Total Sales", "fn": "sum"}], "sort": {"column": "Total Sales (sum)", "order": "desc"}}"#,
        ),
        p(
            "What is the spread of operating margins within each region?",
            r#"{"group_by": ["Region"], "aggregations": [{"column": "Operating Margin", "fn": "std"}]}"#,
        ),
        p(
            "Which products sell best online?",
            r#"{"filters": [{"column": "Sales Method", "op": "=", "value": "Online"}], "group_by": ["Product"], "aggregations": [{"column": "Total Sales", "fn": "sum"}], "sort": {"column": "Total Sales (sum)", "order": "desc"}}"#,
        ),
        p(
            "What is the average operating profit for each state?",
            r#"{"group_by": ["State"], "aggregations": [{"column": "Operating Profit", "fn": "mean"}]}"#,
        ),
        p(
            "How does the average price per unit differ between sales methods?",
            r#"{"group_by": ["Sales Method"], "aggregations": [{"column": "Price per Unit", "fn": "mean"}]}"#,
        ),
        p(
            "Which cities had the highest operating profit in 2021?",
            r#"{"group_by": ["City"], "aggregations": [{"column": "Operating Profit", "fn": "sum"}], "sort": {"column": "Operating Profit (sum)", "order": "desc"}, "limit": 5}"#,
        ),
    ]
}

fn authored_views() -> Vec<AggregationDirective> {
    use AggregationFn::{Mean, Sum};
    [
        ("State", "Operating Margin", Mean),
        ("State", "Total Sales", Sum),
        ("Retailer", "Units Sold", Sum),
        ("Retailer", "Total Sales", Sum),
        ("City", "Total Sales", Sum),
        ("Product", "Total Sales", Sum),
        ("Sales Method", "Operating Margin", Mean),
        ("Region", "Total Sales", Sum),
        ("Retailer", "Operating Margin", Mean),
        ("Product", "Units Sold", Sum),
        ("State", "Units Sold", Sum),
        ("City", "Operating Profit", Sum),
        ("Sales Method", "Units Sold", Mean),
        ("Region", "Operating Margin", Mean),
        ("Retailer", "Price per Unit", Mean),
        ("Product", "Operating Margin", Mean),
        ("State", "Operating Profit", Sum),
        ("Sales Method", "Total Sales", Sum),
        ("City", "Units Sold", Sum),
        ("Invoice Date", "Total Sales", Sum),
    ]
    .iter()
    .map(|(g, t, f)| AggregationDirective::new(g, t, f))
    .collect()
}

/// Default extraction with scores capped at 4, so authored findings lead.
fn background(request: &ChatRequest) -> Vec<RawInsight> {
    let reply = DefaultRulebook.respond(request);
    parse_insights(&reply)
        .map(|p| p.items)
        .unwrap_or_default()
        .into_iter()
        .map(|mut i| {
            i.score = i.score.min(4);
            i
        })
        .collect()
}

fn text(w: &WindowData, row: usize, col: &str) -> Option<String> {
    w.column(col).map(|c| w.rows[row].1[c].clone())
}

fn extreme(w: &WindowData, col: &str, lowest: bool) -> Option<(usize, f64)> {
    let c = w.column(col)?;
    (0..w.rows.len())
        .filter_map(|r| w.number(r, c).map(|x| (r, x)))
        .reduce(|a, b| if (b.1 < a.1) == lowest && b.1 != a.1 { b } else { a })
}

fn aggregator_finding(w: &WindowData) -> Option<RawInsight> {
    if let Some((r, x)) = extreme(w, "Operating Margin (mean)", true).filter(|_| w.column("State").is_some()) {
        if x <= 0.01 {
            let state = text(w, r, "State")?;
            return Some(RawInsight {
                row: w.rows[r].0,
                text: format!("{state} has an extremely low Operating Margin"),
                values: vec![("State".into(), state), ("Operating Margin (mean)".into(), percent(x))],
                score: 5,
                explanation: "This insight is captivating because it demonstrates an extremely low operating margin, indicating very low profitability for this sale.".into(),
            });
        }
    }
    if let Some((r, x)) = extreme(w, "Total Sales (sum)", false).filter(|_| w.column("State").is_some()) {
        let state = text(w, r, "State")?;
        if !POPULOUS.contains(&state.as_str()) {
            return Some(RawInsight {
                row: w.rows[r].0,
                text: format!("{state} has the highest sales."),
                values: vec![("State".into(), state.clone()), ("Total Sales (sum)".into(), format!("${}", thousands(x.round() as i64)))],
                score: 5,
                explanation: format!("Despite its small population, {state} has the highest sales, which is surprising considering the larger populations and economies of states like California and New York."),
            });
        }
    }
    if w.column("Invoice Date").is_some() {
        let (r, x) = extreme(w, "Units Sold", false)?;
        if x >= 1_000_000.0 {
            let retailer = text(w, r, "Retailer")?;
            return Some(RawInsight {
                row: w.rows[r].0,
                text: format!("{retailer} has unusually high units sold."),
                values: vec![("Retailer".into(), retailer), ("Units Sold".into(), thousands(x as i64))],
                score: 5,
                explanation: "This is the highest number of units sold, which is surprising given the average units sold in other rows.".into(),
            });
        }
    }
    None
}

fn explorer_finding(question: &str, w: &WindowData) -> Option<RawInsight> {
    if question == Q_MARGIN {
        let (r, x) = extreme(w, "Operating Margin (mean)", true)?;
        if x > 0.01 {
            return None;
        }
        let retailer = text(w, r, "Retailer")?;
        let method = text(w, r, "Sales Method")?;
        let outlet = (0..w.rows.len())
            .find(|&i| text(w, i, "Retailer").as_deref() == Some(&retailer) && text(w, i, "Sales Method").as_deref() == Some("Outlet"))
            .and_then(|i| w.number(i, w.column("Operating Margin (mean)")?));
        let contrast = outlet
            .map(|o| format!(", but a higher average operating margin for outlet sales ({})", percent(o)))
            .unwrap_or_default();
        return Some(RawInsight {
            row: w.rows[r].0,
            text: format!(
                "{retailer} had a very low average operating margin for {} sales ({}){contrast}.",
                method.to_lowercase(),
                percent(x)
            ),
            values: vec![
                ("Retailer".into(), retailer.clone()),
                ("Sales Method".into(), method.clone()),
                ("Operating Margin (mean)".into(), percent(x)),
            ],
            score: 5,
            explanation: format!("The almost non-existent operating margin for {retailer} {} sales, when juxtaposed with its outlet sales, is surprising. Retailers typically achieve significant margins through online sales due to reduced overheads compared to physical stores.", method.to_lowercase()),
        });
    }
    if question == Q_CITIES {
        let (r, x) = extreme(w, "Total Sales (sum)", false)?;
        let city = text(w, r, "City")?;
        if POPULOUS.contains(&city.as_str()) {
            return None;
        }
        return Some(RawInsight {
            row: w.rows[r].0,
            text: format!("{city} is the top city in terms of sales revenue for 2021."),
            values: vec![("City".into(), city.clone()), ("Total Sales (sum)".into(), format!("${}", thousands(x.round() as i64)))],
            score: 5,
            explanation: format!("{city} being at the top in sales revenue is unexpected, given that it's a less populated city when compared to other major U.S. cities. One would expect cities with higher populations and larger economies, like San Francisco or Chicago, to lead in sales revenue."),
        });
    }
    None
}

struct PublishedEcho {
    questions: Vec<(&'static str, QueryPlan)>,
    rounds_asked: AtomicUsize,
}

impl PublishedEcho {
    fn new() -> Self {
        Self {
            questions: authored_questions(),
            rounds_asked: AtomicUsize::new(0),
        }
    }

    fn extract(&self, request: &ChatRequest, prompt: &str) -> String {
        let mut items = background(request);
        let finding = extract_window(prompt).and_then(|w| match prompt.split_once("\nQuestion: ") {
            Some((_, rest)) => explorer_finding(rest.lines().next().unwrap_or(""), &w),
            None => aggregator_finding(&w),
        });
        if let Some(f) = finding {
            items.truncate(4);
            items.insert(0, f);
        }
        format_insight_blocks(&items)
    }

    fn rank(prompt: &str) -> String {
        let Some(w) = ranking_rows(prompt) else {
            return "Nothing to rank.".into();
        };
        let score = w.column("Score");
        let insight = w.column("Insight");
        let mut rows: Vec<&(usize, Vec<String>)> = w.rows.iter().collect();
        rows.sort_by_key(|(_, cells)| std::cmp::Reverse(score.and_then(|c| cells[c].parse::<u8>().ok()).unwrap_or(0)));
        let items: Vec<RankedItem> = rows
            .into_iter()
            .map(|(idx, cells)| {
                let s = score.map(|c| cells[c].as_str()).unwrap_or("");
                RankedItem {
                    row: Some(*idx),
                    insight: insight.map(|c| cells[c].clone()).unwrap_or_default(),
                    explanation: if s == "5" {
                        "This insight is the most interesting as it departs sharply from the rest of the data.".into()
                    } else {
                        "A useful but expected pattern.".into()
                    },
                }
            })
            .collect();
        format_ranked_blocks(&items)
    }
}

impl Rulebook for PublishedEcho {
    fn respond(&self, request: &ChatRequest) -> String {
        let prompt = task_prompt(request);
        match prompt_kind(prompt) {
            PromptKind::Views => format_directives(&authored_views()),
            PromptKind::Questions => {
                let round = self.rounds_asked.fetch_add(1, Ordering::SeqCst);
                self.questions
                    .iter()
                    .skip(round * 10)
                    .take(10)
                    .map(|(q, _)| format!("<question>{q}</question>\n"))
                    .collect()
            }
            PromptKind::Plan => {
                let question = ctf_core::scripted::question_of(prompt).unwrap_or("");
                match self.questions.iter().find(|(q, _)| *q == question) {
                    Some((_, p)) => format!("```json\n{}\n```", p.to_json()),
                    None => DefaultRulebook.respond(request),
                }
            }
            PromptKind::Extract => self.extract(request, prompt),
            PromptKind::RankInsights | PromptKind::RankAnswers => Self::rank(prompt),
            PromptKind::Unknown => DefaultRulebook.respond(request),
        }
    }
}

// ---------------------------------------------------------------------------

fn main() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let transcripts = root.join("transcripts");
    std::fs::create_dir_all(&transcripts).expect("fixture directory");

    let base_path = root.join("sales_base.csv");
    std::fs::write(&base_path, export_csv(&build_base())).expect("write base");
    // Reload so the fixture sees exactly what the harness will.
    let base = load_dataset(&base_path).expect("reload base");

    for flag in 1..=3u32 {
        let (table, truths) = plant_builtin(&base, &[flag]).expect("plant");
        if flag == 2 {
            let alaska: i64 = (0..table.num_rows())
                .filter(|&r| table.cell(r, "State") == Some(&Value::Text("Alaska".into())))
                .map(|r| money(table.cell(r, "Total Sales").unwrap()))
                .sum();
            assert_eq!(alaska, 4_947_340_400, "planted Alaska total");
        }
        for agent in ["aggregator", "explorer"] {
            let client = LlmClient::scripted(PublishedEcho::new());
            let result = match agent {
                "aggregator" => run_aggregator(&table, &AggregatorConfig::default(), &client),
                _ => run_explorer(&table, &ExplorerConfig::default(), &client),
            }
            .expect("agent run");
            let path: PathBuf = transcripts.join(format!("{agent}_flag{flag}.jsonl"));
            std::fs::write(&path, write_transcript(&result.transcript)).expect("write transcript");
            let report = score_run(&result.ranked, &truths, MatchMode::Lenient);
            let f = &report.flags[0];
            println!(
                "{}: {} calls, {} insights, flag {} captured={} rank={:?} value={:?}",
                rel(&path, &root),
                result.calls,
                result.ranked.len(),
                flag,
                f.captured,
                f.rank,
                f.detail.as_ref().and_then(|d| d.cited_value.clone())
            );
        }
    }
}

fn rel(p: &Path, root: &Path) -> String {
    p.strip_prefix(root).unwrap_or(p).display().to_string()
}
