//! Grounds insights against the views they cite and scores flag capture.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flagforge::GroundTruth;
use crate::insight::{Citation, CitationCheck, Claimed, Insight, Verification, VerificationStatus, View, ViewSet};
use crate::queryengine::Comparator;
use crate::tabular::Value;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("unknown view `{0}`")]
    UnknownView(String),
}

/// `max(1e-6, 1e-6 * |actual|)`.
pub fn tolerance(actual: f64) -> f64 {
    (1e-6 * actual.abs()).max(1e-6)
}

fn resolve_column(view: &View, column: &str) -> Option<usize> {
    let schema = view.table.schema();
    schema.index_of(column).or_else(|| {
        let want = column.trim();
        schema
            .names()
            .position(|n| n.trim().eq_ignore_ascii_case(want))
    })
}

fn check_citation(c: &Citation, view: &View) -> (CitationCheck, Vec<usize>) {
    let fail = |actual: Option<String>, reason: String| {
        (
            CitationCheck {
                passed: false,
                actual,
                reason: Some(reason),
            },
            Vec::new(),
        )
    };
    let rows = view.table.num_rows();
    if c.row >= rows {
        return fail(None, format!("row {} out of range ({rows} rows)", c.row));
    }
    let Some(col) = resolve_column(view, &c.column) else {
        return fail(None, format!("unknown column `{}`", c.column));
    };
    let cell = &view.table.rows()[c.row][col];
    let actual = cell.render();
    let passed = match (&c.claimed, cell) {
        (_, Value::Null) => false,
        (Claimed::Number(x), v) if v.as_f64().is_some() => {
            let a = v.as_f64().expect("checked numeric");
            (x - a).abs() <= tolerance(a)
        }
        (Claimed::Number(_), v) => c.raw.trim().eq_ignore_ascii_case(&v.export()),
        (Claimed::Text(t), v) => {
            let t = t.trim();
            t.eq_ignore_ascii_case(&v.export()) || t.eq_ignore_ascii_case(&v.render())
        }
    };
    if passed {
        let lineage = view.lineage.get(c.row).cloned().unwrap_or_default();
        (
            CitationCheck {
                passed: true,
                actual: Some(actual),
                reason: None,
            },
            lineage,
        )
    } else {
        fail(Some(actual.clone()), format!("claimed {} but found {actual}", c.raw))
    }
}

/// Checks every citation of `insight`. Out-of-range rows and unknown
/// columns are failed citations; only an unknown view is an error.
pub fn verify_citations(insight: &Insight, views: &ViewSet) -> Result<Verification, VerifyError> {
    verify_with_lineage(insight, views).map(|(v, _)| v)
}

fn verify_with_lineage(insight: &Insight, views: &ViewSet) -> Result<(Verification, Vec<Vec<usize>>), VerifyError> {
    let mut checks = Vec::with_capacity(insight.citations.len());
    let mut lineage = Vec::with_capacity(insight.citations.len());
    for c in &insight.citations {
        let view = views.get(&c.view).ok_or_else(|| VerifyError::UnknownView(c.view.clone()))?;
        let (check, rows) = check_citation(c, view);
        checks.push(check);
        lineage.push(rows);
    }
    let passed = checks.iter().filter(|c| c.passed).count();
    let status = if checks.is_empty() {
        VerificationStatus::Unverifiable
    } else if passed == checks.len() {
        VerificationStatus::Verified
    } else if passed == 0 {
        VerificationStatus::Failed
    } else {
        VerificationStatus::Partial
    };
    Ok((Verification { status, checks }, lineage))
}

/// Verifies in place, recording source rows on passing citations.
pub fn annotate(insight: &mut Insight, views: &ViewSet) -> Result<VerificationStatus, VerifyError> {
    let (verification, lineage) = verify_with_lineage(insight, views)?;
    for (c, rows) in insight.citations.iter_mut().zip(lineage) {
        c.source_rows = rows;
    }
    let status = verification.status;
    insight.verification = Some(verification);
    Ok(status)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    Strict,
    #[default]
    Lenient,
}

impl std::fmt::Display for MatchMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MatchMode::Strict => "strict",
            MatchMode::Lenient => "lenient",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValuePredicate {
    Compare { op: Comparator, threshold: f64 },
    Near { target: f64, tolerance: f64 },
    /// Placeholder resolved when the flag is planted: the cited value must
    /// exceed the comparison group's aggregate.
    ExceedsComparisonGroup,
}

impl ValuePredicate {
    pub fn holds(&self, x: f64) -> bool {
        match self {
            ValuePredicate::Compare { op, threshold } => op.holds(x.total_cmp(threshold)),
            ValuePredicate::Near { target, tolerance } => (x - target).abs() <= *tolerance,
            ValuePredicate::ExceedsComparisonGroup => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchCriteria {
    pub metric_keywords: Vec<String>,
    #[serde(default)]
    pub entity_keywords: Vec<String>,
    #[serde(default)]
    pub value_predicate: Option<ValuePredicate>,
    #[serde(default)]
    pub mode: MatchMode,
}

impl MatchCriteria {
    pub fn is_valid(&self) -> bool {
        !self.metric_keywords.is_empty() || self.value_predicate.is_some()
    }
}

/// Which clauses of a criteria set an insight satisfied.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MatchDetail {
    pub matched: bool,
    pub grounded: bool,
    pub metric: bool,
    pub value: bool,
    pub entity: bool,
    pub lineage: bool,
    /// The cited literal that satisfied the value clause.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cited_value: Option<String>,
}

fn contains_ci(haystack: &str, needle: &str) -> bool {
    !needle.is_empty() && haystack.to_lowercase().contains(&needle.to_lowercase())
}

/// Matches one insight against a flag's criteria. Only fully verified
/// insights can match.
pub fn match_flag(insight: &Insight, criteria: &MatchCriteria, touched_rows: &BTreeSet<usize>) -> MatchDetail {
    let mut d = MatchDetail {
        grounded: insight.status() == Some(VerificationStatus::Verified),
        ..MatchDetail::default()
    };
    let metric_in = |s: &str| criteria.metric_keywords.iter().any(|k| contains_ci(s, k));
    d.metric = criteria.metric_keywords.is_empty()
        || metric_in(&insight.text)
        || insight.citations.iter().any(|c| metric_in(&c.column));

    let numeric: Vec<(&Citation, f64)> = insight
        .citations
        .iter()
        .filter_map(|c| match c.claimed {
            Claimed::Number(x) => Some((c, x)),
            Claimed::Text(_) => None,
        })
        .collect();
    let on_metric: Vec<(&Citation, f64)> = numeric.iter().copied().filter(|(c, _)| metric_in(&c.column)).collect();
    let candidates = if on_metric.is_empty() { numeric } else { on_metric };
    match &criteria.value_predicate {
        Some(p) => {
            if let Some((c, _)) = candidates.iter().find(|(_, x)| p.holds(*x)) {
                d.value = true;
                d.cited_value = Some(c.raw.clone());
            }
        }
        None => {
            d.value = true;
            d.cited_value = candidates.first().map(|(c, _)| c.raw.clone());
        }
    }

    d.entity = criteria.entity_keywords.iter().any(|k| {
        contains_ci(&insight.text, k)
            || insight
                .citations
                .iter()
                .any(|c| matches!(&c.claimed, Claimed::Text(t) if contains_ci(t, k)))
    });
    // A cited row counts when most of the source rows behind it were planted.
    d.lineage = insight.citations.iter().any(|c| {
        let hit = c.source_rows.iter().filter(|r| touched_rows.contains(r)).count();
        hit > 0 && 2 * hit > c.source_rows.len()
    });

    d.matched = d.grounded
        && d.metric
        && d.value
        && match criteria.mode {
            MatchMode::Lenient => d.entity || d.lineage,
            MatchMode::Strict => d.entity && d.lineage,
        };
    d
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlagCapture {
    pub flag_id: u32,
    pub description: String,
    pub captured: bool,
    /// 1-based position of the best matching insight.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub insight_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<MatchDetail>,
    /// Ranks of every matching insight.
    pub matching_ranks: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsightOutcome {
    pub rank: usize,
    pub id: String,
    pub status: Option<VerificationStatus>,
    /// Flags this insight matched.
    pub flags: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureReport {
    pub mode: MatchMode,
    pub flags: Vec<FlagCapture>,
    pub insights: Vec<InsightOutcome>,
    pub total_flags: usize,
    pub captured_at_1: usize,
    pub captured_at_5: usize,
    pub captured: usize,
}

/// Scores a ranked insight list against planted flags.
pub fn score_run(ranked: &[Insight], truths: &[GroundTruth], mode: MatchMode) -> CaptureReport {
    let mut outcomes: Vec<InsightOutcome> = ranked
        .iter()
        .enumerate()
        .map(|(i, ins)| InsightOutcome {
            rank: i + 1,
            id: ins.id.clone(),
            status: ins.status(),
            flags: Vec::new(),
        })
        .collect();
    let mut flags = Vec::with_capacity(truths.len());
    for truth in truths {
        let criteria = MatchCriteria {
            mode,
            ..truth.match_criteria.clone()
        };
        let mut best: Option<(usize, MatchDetail)> = None;
        let mut matching_ranks = Vec::new();
        for (i, ins) in ranked.iter().enumerate() {
            let d = match_flag(ins, &criteria, &truth.touched_rows);
            if d.matched {
                matching_ranks.push(i + 1);
                outcomes[i].flags.push(truth.flag_id);
                if best.is_none() {
                    best = Some((i, d));
                }
            }
        }
        flags.push(FlagCapture {
            flag_id: truth.flag_id,
            description: truth.description.clone(),
            captured: best.is_some(),
            rank: best.as_ref().map(|(i, _)| i + 1),
            insight_id: best.as_ref().map(|(i, _)| ranked[*i].id.clone()),
            detail: best.map(|(_, d)| d),
            matching_ranks,
        });
    }
    let count = |k: usize| flags.iter().filter(|f| f.rank.is_some_and(|r| r <= k)).count();
    CaptureReport {
        mode,
        total_flags: flags.len(),
        captured_at_1: count(1),
        captured_at_5: count(5),
        captured: flags.iter().filter(|f| f.captured).count(),
        flags,
        insights: outcomes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::insight::Provenance;
    use crate::protocol::parse_literal;
    use crate::tabular::load_csv;

    fn retail_view() -> ViewSet {
        let t = load_csv(
            "Retailer,Total Sales (sum)\nAmazon,13158552\nFoot Locker,64051537\nKohl's,417223750\n".as_bytes(),
            None,
        )
        .unwrap();
        let mut v = View::raw("v00", t);
        v.lineage = vec![vec![0, 3], vec![1], vec![2, 4]];
        std::iter::once(v).collect()
    }

    fn insight(cites: &[(usize, &str, &str)]) -> Insight {
        Insight {
            id: "i".into(),
            text: "Kohl's has the highest total sales".into(),
            explanation: String::new(),
            score: 5,
            citations: cites
                .iter()
                .map(|(r, c, v)| Citation {
                    view: "v00".into(),
                    row: *r,
                    column: c.to_string(),
                    claimed: parse_literal(v),
                    raw: v.to_string(),
                    source_rows: Vec::new(),
                })
                .collect(),
            provenance: Provenance::Window { view: "v00".into(), window: 0 },
            aggregation: "Grouped by: Retailer on Total Sales (sum)".into(),
            verification: None,
        }
    }

    #[test]
    fn sample_citation_passes_and_mismatch_fails() {
        let views = retail_view();
        let ok = verify_citations(&insight(&[(2, "Total Sales (sum)", "417223750")]), &views).unwrap();
        assert_eq!(ok.status, VerificationStatus::Verified);
        let bad = verify_citations(&insight(&[(2, "Total Sales (sum)", "417000000")]), &views).unwrap();
        assert_eq!(bad.status, VerificationStatus::Failed);
        assert_eq!(bad.checks[0].actual.as_deref(), Some("417223750"));
    }

    #[test]
    fn text_and_bad_references() {
        let views = retail_view();
        let v = verify_citations(
            &insight(&[(2, "retailer", "KOHL'S"), (9, "Retailer", "x"), (0, "Nope", "1")]),
            &views,
        )
        .unwrap();
        assert_eq!(v.status, VerificationStatus::Partial);
        assert_eq!(v.checks.iter().map(|c| c.passed).collect::<Vec<_>>(), vec![true, false, false]);
        let mut orphan = insight(&[(0, "Retailer", "Amazon")]);
        orphan.citations[0].view = "zz".into();
        assert_eq!(verify_citations(&orphan, &views), Err(VerifyError::UnknownView("zz".into())));
    }

    #[test]
    fn annotate_records_lineage() {
        let views = retail_view();
        let mut ins = insight(&[(2, "Total Sales (sum)", "417,223,750")]);
        annotate(&mut ins, &views).unwrap();
        assert_eq!(ins.citations[0].source_rows, vec![2, 4]);
    }

    #[test]
    fn gate_and_modes() {
        let views = retail_view();
        let criteria = MatchCriteria {
            metric_keywords: vec!["sales".into()],
            entity_keywords: vec!["Kohl's".into()],
            value_predicate: Some(ValuePredicate::Compare { op: Comparator::Gt, threshold: 1e8 }),
            mode: MatchMode::Strict,
        };
        let touched: BTreeSet<usize> = [2, 4].into();
        let mut good = insight(&[(2, "Total Sales (sum)", "417223750")]);
        annotate(&mut good, &views).unwrap();
        assert!(match_flag(&good, &criteria, &touched).matched);
        assert!(!match_flag(&good, &criteria, &BTreeSet::from([7])).matched);
        // Half the source rows planted is not enough.
        assert!(!match_flag(&good, &criteria, &BTreeSet::from([4])).lineage);

        let mut wrong = insight(&[(2, "Total Sales (sum)", "500000000")]);
        annotate(&mut wrong, &views).unwrap();
        let d = match_flag(&wrong, &MatchCriteria { mode: MatchMode::Lenient, ..criteria }, &touched);
        assert!(d.value && !d.grounded && !d.matched);
    }
}
