//! Python bindings: tables, plans, flags and whole runs.
//!
//! Structured results come back as plain dicts and lists, decoded from the
//! same JSON the CLI writes.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ctf_core::agent::AgentKind;
use ctf_core::harness::{self, BackendSpec, HarnessError, RunConfig};
use ctf_core::queryengine::{self, QueryPlan};
use ctf_core::tabular::{self, Value};
use ctf_core::verify::{self, MatchMode};

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn harness_err(e: HarnessError) -> PyErr {
    match e {
        HarnessError::Config(m) => PyValueError::new_err(m),
        HarnessError::Io { .. } => PyIOError::new_err(e.to_string()),
        HarnessError::Stage { .. } => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn cell_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Integer(i) => i.into_pyobject(py)?.into_any(),
        Value::Money(c) => (*c as f64 / 100.0).into_pyobject(py)?.into_any(),
        Value::Text(s) => s.into_pyobject(py)?.into_any(),
        other => match other.as_f64() {
            Some(x) => x.into_pyobject(py)?.into_any(),
            None => other.export().into_pyobject(py)?.into_any(),
        },
    })
}

/// An immutable typed table.
#[pyclass(frozen, from_py_object, module = "ctf_py")]
#[derive(Clone)]
struct Table {
    inner: tabular::Table,
}

#[pymethods]
impl Table {
    /// Parses CSV text. Column types come from `like` when given, else are inferred.
    #[staticmethod]
    #[pyo3(signature = (text, like = None))]
    fn from_csv(text: &str, like: Option<&Table>) -> PyResult<Self> {
        let inner = tabular::load_csv(text.as_bytes(), like.map(|t| t.inner.schema())).map_err(value_err)?;
        Ok(Self { inner })
    }

    /// Loads a sales CSV from disk with the fixed sales schema.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: harness::load_dataset(&path).map_err(harness_err)?,
        })
    }

    fn to_csv(&self) -> String {
        tabular::export_csv(&self.inner)
    }

    #[getter]
    fn num_rows(&self) -> usize {
        self.inner.num_rows()
    }

    fn __len__(&self) -> usize {
        self.inner.num_rows()
    }

    /// `(name, type)` pairs.
    #[getter]
    fn columns(&self) -> Vec<(String, String)> {
        self.inner
            .schema()
            .columns()
            .iter()
            .map(|c| (c.name.clone(), c.ty.name().to_string()))
            .collect()
    }

    /// One cell as a Python value. Money is dollars, percent a fraction.
    fn cell<'py>(&self, py: Python<'py>, row: usize, column: &str) -> PyResult<Bound<'py, PyAny>> {
        let v = self
            .inner
            .cell(row, column)
            .ok_or_else(|| PyValueError::new_err(format!("no cell at row {row}, column {column}")))?;
        cell_to_py(py, v)
    }

    fn row<'py>(&self, py: Python<'py>, index: usize) -> PyResult<Vec<Bound<'py, PyAny>>> {
        let row = self
            .inner
            .row(index)
            .ok_or_else(|| PyValueError::new_err(format!("row {index} out of range")))?;
        row.iter().map(|v| cell_to_py(py, v)).collect()
    }

    fn digest(&self) -> String {
        self.inner.digest()
    }

    /// CSV text of rows `start..start+length` with their absolute indices.
    fn window(&self, start: usize, length: usize) -> PyResult<String> {
        tabular::render_window(&self.inner, start, length).map_err(value_err)
    }

    fn stats(&self) -> PyResult<String> {
        Ok(tabular::summary_stats(&self.inner).map_err(value_err)?.to_text())
    }

    /// Runs a JSON query plan. Returns the result and, per output row, its source rows.
    fn execute(&self, plan: &str) -> PyResult<(Table, Vec<Vec<usize>>)> {
        let plan: QueryPlan = serde_json::from_str(plan).map_err(|e| value_err(format!("invalid plan: {e}")))?;
        let out = queryengine::execute_plan_traced(&plan, &self.inner).map_err(value_err)?;
        Ok((Table { inner: out.table }, out.lineage))
    }

    fn correlation(&self, a: &str, b: &str) -> PyResult<f64> {
        queryengine::correlation(&self.inner, a, b).map_err(value_err)
    }

    /// Plants builtin flags. Returns the corrupted table and the ground truth.
    fn plant<'py>(&self, py: Python<'py>, flags: Vec<u32>) -> PyResult<(Table, Bound<'py, PyAny>)> {
        let (inner, truths) = harness::plant_builtin(&self.inner, &flags).map_err(harness_err)?;
        Ok((Table { inner }, to_py(py, &truths)?))
    }

    fn __repr__(&self) -> String {
        format!("Table({} rows, {} columns)", self.inner.num_rows(), self.inner.schema().len())
    }

    fn __eq__(&self, other: &Table) -> bool {
        self.inner == other.inner
    }
}

/// Synthetic sales data, deterministic in `seed`.
#[pyfunction]
#[pyo3(signature = (seed = 0, rows = 1000))]
fn synth(seed: u64, rows: usize) -> Table {
    Table {
        inner: tabular::synth_sales(seed, rows),
    }
}

/// Absolute tolerance used when checking a cited value against `actual`.
#[pyfunction]
fn tolerance(actual: f64) -> f64 {
    verify::tolerance(actual)
}

/// Runs one experiment and returns its report.
///
/// `backend` is `scripted`, `live`, `record:PATH` or `replay:PATH`; `settings`
/// takes the same keys as `--set`.
#[pyfunction]
#[pyo3(signature = (agent, data, out, backend = "scripted", flags = Vec::new(), truth = None, settings = None))]
#[allow(clippy::too_many_arguments)]
fn run<'py>(
    py: Python<'py>,
    agent: &str,
    data: PathBuf,
    out: PathBuf,
    backend: &str,
    flags: Vec<u32>,
    truth: Option<PathBuf>,
    settings: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyAny>> {
    let agent: AgentKind = agent.parse().map_err(value_err)?;
    let backend: BackendSpec = backend.parse().map_err(value_err)?;
    let mut cfg = RunConfig::new(agent, data, backend, out);
    cfg.flags = flags;
    cfg.truth = truth;
    if let Some(settings) = settings {
        for (k, v) in settings.iter() {
            let value = if let Ok(b) = v.cast::<pyo3::types::PyBool>() {
                b.is_true().to_string()
            } else if let Ok(s) = v.extract::<String>() {
                s
            } else {
                v.str()?.to_string()
            };
            cfg.set(&k.extract::<String>()?, &value).map_err(harness_err)?;
        }
    }
    let outcome = py.detach(|| harness::run_experiment(&cfg)).map_err(harness_err)?;
    to_py(py, &outcome.report)
}

/// Rescores a finished run against a truth file.
#[pyfunction]
#[pyo3(signature = (run_dir, truth, strict = false))]
fn score<'py>(py: Python<'py>, run_dir: PathBuf, truth: PathBuf, strict: bool) -> PyResult<Bound<'py, PyAny>> {
    let mode = if strict { MatchMode::Strict } else { MatchMode::Lenient };
    let report = harness::score_dir(&run_dir, &truth, mode).map_err(harness_err)?;
    to_py(py, &report)
}

/// Markdown report over one or more run directories.
#[pyfunction]
fn report(run_dirs: Vec<PathBuf>) -> PyResult<String> {
    let reports = run_dirs
        .iter()
        .map(|d| harness::load_report(d))
        .collect::<Result<Vec<_>, _>>()
        .map_err(harness_err)?;
    Ok(harness::render_markdown(&reports))
}

/// Re-checks a run's citations against `table`.
///
/// Returns `{"checks": [...], "stale": [...]}`.
#[pyfunction]
fn reverify<'py>(py: Python<'py>, run_dir: PathBuf, table: &Table) -> PyResult<Bound<'py, PyAny>> {
    let (checks, stale) = harness::reverify_dir(&run_dir, &table.inner).map_err(harness_err)?;
    to_py(py, &serde_json::json!({ "checks": checks, "stale": stale }))
}

#[pymodule]
fn ctf_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Table>()?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(tolerance, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(report, m)?)?;
    m.add_function(wrap_pyfunction!(reverify, m)?)?;
    Ok(())
}
