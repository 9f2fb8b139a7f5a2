//! Response samples in the documented formats, plus broken variants.

use ctf_core::protocol::{parse_aggregations, parse_insights, parse_query_plan, parse_questions, parse_ranked};

pub const QUESTIONS: &str = "Here are some questions for your team.\n\n\
<question>What is the relationship between operating margin and sales method for each retailer in 2021?</question>\n\
<question>Which cities are the top performers in terms of sales revenue for 2021?</question>\n\
<question>Are there any seasonal trends in sales for different product categories in 2021?</question>\n\
<question>What is the average number of units sold per transaction for each sales method?</question>\n\
<question>Are there any retailers with no sales data for the entire year?</question>\n";

pub const DIRECTIVES: &str = "1. Groupby: Retailer\nTarget column: Total Sales\nAggregation function: sum\n\n\
2. Groupby: State\nTarget column: Operating Margin\nAggregation function: mean\n\n\
3. Groupby: Product\nTarget column: Units Sold\nAggregation function: max\n\n\
4. Groupby: Region\nTarget column: Operating Profit\nAggregation function: std\n\n\
5. Groupby: Sales Method\nTarget column: Price per Unit\nAggregation function: min\n\n\
6. Groupby: City\nTarget column: Retailer ID\nAggregation function: count\n";

/// The three aggregator insights from the published example, one block each.
pub const INSIGHTS: &str = "Row: 0\n\
Insight: Amazon's total sales are surprisingly low.\n\
Values: (Retailer, Amazon), (Total Sales (sum), 45,020,834)\n\
Score: 4\n\
Explanation: Given Amazon's dominance in the retail market, one would expect their total sales to be higher than other retailers.\n\n\
Row: 1\n\
Insight: Foot Locker has the highest total sales.\n\
Values: (Retailer, Foot Locker), (Total Sales (sum), 49,888,450)\n\
Score: 5\n\
Explanation: It's surprising that a specialized retailer like Foot Locker has the highest total sales, surpassing even Amazon.\n\n\
Row: 2\n\
Insight: Kohl's total sales are significantly lower than others.\n\
Values: (Retailer, Kohl's), (Total Sales (sum), 11,888,750)\n\
Score: 3\n\
Explanation: Considering Kohl's is a well-known retailer, it's surprising their total sales are so much lower than other retailers.\n";

pub const RANKING: &str = "Row: 1\n\
Insight: Foot Locker has the highest total sales.\n\
Explanation: A specialized retailer outselling Amazon is unexpected.\n\n\
Row: 0\n\
Insight: Amazon's total sales are surprisingly low.\n\
Explanation: Amazon dominates online retail.\n\n\
Row: 2\n\
Insight: Kohl's total sales are significantly lower than others.\n\
Explanation: Kohl's is a well-known retailer.\n";

pub const PLAN: &str = "```json\n{\"filters\": [{\"column\": \"State\", \"op\": \"=\", \"value\": \"Arizona\"}], \
\"group_by\": [\"Retailer\"], \"aggregations\": [{\"column\": \"Operating Margin\", \"fn\": \"mean\"}], \
\"sort\": {\"column\": \"Operating Margin (mean)\", \"order\": \"asc\"}, \"limit\": 5}\n```";

/// Outcome of one malformed sample: the typed error, or the warning count.
pub type Outcome = Result<usize, String>;

fn insights(text: &str) -> Outcome {
    parse_insights(text).map(|p| p.warnings.len()).map_err(|e| e.to_string())
}

fn ranked(text: &str) -> Outcome {
    parse_ranked(text).map(|p| p.warnings.len()).map_err(|e| e.to_string())
}

fn directives(text: &str) -> Outcome {
    parse_aggregations(text).map(|p| p.warnings.len()).map_err(|e| e.to_string())
}

fn questions(text: &str) -> Outcome {
    // A question list has no warning channel; success means nothing to report.
    parse_questions(text).map(|_| 0).map_err(|e| e.to_string())
}

fn plan(text: &str) -> Outcome {
    parse_query_plan(text).map(|_| 0).map_err(|e| e.to_string())
}

/// Twenty broken responses. Each must produce an error or a warning.
pub fn malformed() -> Vec<(&'static str, Box<dyn Fn() -> Outcome>)> {
    let truncated = &INSIGHTS[..INSIGHTS.find("Score: 5").expect("second block")];
    let truncated = truncated.to_string();
    vec![
        ("insight block cut before its score", Box::new(move || insights(&truncated))),
        ("insight with only a row", Box::new(|| insights("Row: 3\n"))),
        (
            "score above five",
            Box::new(|| insights("Row: 0\nInsight: x\nValues: (A, 1)\nScore: 7\nExplanation: y\n")),
        ),
        (
            "score of zero",
            Box::new(|| insights("Row: 0\nInsight: x\nValues: (A, 1)\nScore: 0\nExplanation: y\n")),
        ),
        (
            "score in words",
            Box::new(|| insights("Row: 0\nInsight: x\nValues: (A, 1)\nScore: five\nExplanation: y\n")),
        ),
        (
            "row that is not a number",
            Box::new(|| insights("Row: abc\nInsight: x\nValues: (A, 1)\nScore: 2\nExplanation: y\n")),
        ),
        (
            "values without pairs",
            Box::new(|| insights("Row: 0\nInsight: x\nValues: Retailer Amazon\nScore: 2\nExplanation: y\n")),
        ),
        (
            "unbalanced value parentheses",
            Box::new(|| insights("Row: 0\nInsight: x\nValues: (Total Sales (sum), 1,200\nScore: 2\nExplanation: y\n")),
        ),
        ("empty insight response", Box::new(|| insights(""))),
        (
            "nested question tags",
            Box::new(|| questions("<question>a<question>b</question></question>")),
        ),
        ("unclosed question tag", Box::new(|| questions("<question>What sold best?"))),
        ("stray closing tag", Box::new(|| questions("What sold best?</question>"))),
        ("numbered questions without tags", Box::new(|| questions("1. What sold best?\n2. Where?"))),
        (
            "directive without a target",
            Box::new(|| directives("Groupby: State\nAggregation function: sum\n\nGroupby: City\nTarget column: Units Sold\nAggregation function: sum\n")),
        ),
        (
            "unknown aggregation function",
            Box::new(|| directives("Groupby: State\nTarget column: Units Sold\nAggregation function: median\n")),
        ),
        ("ranking without row numbers", Box::new(|| ranked("Row: first\nInsight: x\nExplanation: y\n"))),
        ("empty ranking", Box::new(|| ranked("I cannot rank these."))),
        ("truncated plan", Box::new(|| plan("{\"filters\": [{\"column\": \"State\""))),
        ("plan with an unknown field", Box::new(|| plan("{\"where\": \"State = 'Arizona'\"}"))),
        ("plan in prose", Box::new(|| plan("Group the rows by state and sum the sales."))),
    ]
}
