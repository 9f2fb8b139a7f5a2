//! Insights, their citations, and the views citations point into.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::protocol::AggregationDirective;
use crate::tabular::Table;

/// A cited value as written by the model: a number when the literal parses
/// as one (money and percent normalized), otherwise text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Claimed {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Citation {
    pub view: String,
    pub row: usize,
    pub column: String,
    pub claimed: Claimed,
    /// The literal exactly as the model wrote it.
    pub raw: String,
    /// Source-table rows behind the cited view row; filled in when the
    /// citation verifies.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub source_rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Window { view: String, window: usize },
    Question { round: usize, index: usize, question: String, view: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerificationStatus {
    /// Every citation matched the data.
    Verified,
    /// Some citations matched, some did not.
    Partial,
    /// No citation matched.
    Failed,
    /// Nothing numeric or textual to check.
    Unverifiable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitationCheck {
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actual: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub status: VerificationStatus,
    pub checks: Vec<CitationCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Insight {
    pub id: String,
    pub text: String,
    pub explanation: String,
    pub score: u8,
    pub citations: Vec<Citation>,
    pub provenance: Provenance,
    /// "Grouped by: State on Total Sales (sum)", or "None" for raw rows.
    pub aggregation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification: Option<Verification>,
}

impl Insight {
    pub fn status(&self) -> Option<VerificationStatus> {
        self.verification.as_ref().map(|v| v.status)
    }

    /// The citations formatted as `(column, value)` pairs.
    pub fn values_text(&self) -> String {
        self.citations
            .iter()
            .map(|c| format!("({}, {})", c.column, c.raw))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// A table the model looked at, with lineage back to the source rows.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub id: String,
    /// `None` for the raw input table or a query result.
    pub directive: Option<AggregationDirective>,
    pub description: String,
    pub table: Table,
    pub lineage: Vec<Vec<usize>>,
}

impl View {
    pub fn raw(id: &str, table: Table) -> Self {
        let lineage = (0..table.num_rows()).map(|i| vec![i]).collect();
        View {
            id: id.to_string(),
            directive: None,
            description: "None".to_string(),
            table,
            lineage,
        }
    }
}

/// Views addressable by id.
#[derive(Debug, Clone, Default)]
pub struct ViewSet {
    views: BTreeMap<String, View>,
}

impl ViewSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, view: View) {
        self.views.insert(view.id.clone(), view);
    }

    pub fn get(&self, id: &str) -> Option<&View> {
        self.views.get(id)
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &View> {
        self.views.values()
    }
}

impl FromIterator<View> for ViewSet {
    fn from_iter<I: IntoIterator<Item = View>>(iter: I) -> Self {
        let mut set = ViewSet::new();
        for v in iter {
            set.insert(v);
        }
        set
    }
}
