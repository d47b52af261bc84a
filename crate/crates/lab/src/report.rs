//! Result tables (CSV) and the JSON summary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::LabError;

/// Metadata line written at the top of every CSV.
#[derive(Debug, Clone, Default)]
pub struct Context {
    pub alpha: f64,
    pub t_final: f64,
    pub n: usize,
    pub grading: f64,
    pub delta: Option<f64>,
    pub s: Option<String>,
    pub modes: Option<usize>,
}

impl Context {
    fn line(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "none".into());
        format!(
            "# alpha={},T={},n={},g={},delta={},s={},K={}",
            self.alpha,
            self.t_final,
            self.n,
            self.grading,
            opt(self.delta.map(|d| d.to_string())),
            opt(self.s.clone()),
            opt(self.modes.map(|k| k.to_string())),
        )
    }
}

/// A cell of a result table.
#[derive(Debug, Clone)]
pub enum Cell {
    Real(f64),
    Int(usize),
    Text(String),
    Bool(bool),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Real(v) if v.is_nan() => "nan".into(),
            Cell::Real(v) if v.is_infinite() => if *v > 0.0 { "inf" } else { "-inf" }.into(),
            // 17 significant digits
            Cell::Real(v) => format!("{v:.16e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(v) => v.clone(),
            Cell::Bool(v) => v.to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub context: Context,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, context: Context, columns: &[&'static str]) -> Self {
        Self { name: name.into(), context, columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width of table {}", self.name);
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{}", self.context.line()).unwrap();
        writeln!(out, "{}", self.columns.join(",")).unwrap();
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            writeln!(out, "{}", cells.join(",")).unwrap();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

/// Everything an experiment produces.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
    /// Scalar results quoted in the summary; NaN and infinities become null.
    pub values: BTreeMap<String, f64>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn value(&mut self, key: &str, v: f64) {
        self.values.insert(key.into(), v);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub experiment: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub values: BTreeMap<String, Option<f64>>,
    pub tables: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub parts: Vec<Summary>,
}

impl Summary {
    pub fn from_report(experiment: &str, report: &Report) -> Self {
        Self {
            experiment: experiment.into(),
            passed: report.passed(),
            checks: report.checks.clone(),
            values: report.values.iter().map(|(k, v)| (k.clone(), v.is_finite().then_some(*v))).collect(),
            tables: report.tables.iter().map(|t| format!("{}.csv", t.name)).collect(),
            parts: Vec::new(),
        }
    }
}

fn io(path: &Path, e: std::io::Error) -> LabError {
    LabError::Io(format!("{}: {e}", path.display()))
}

/// Writes the tables of `report` into `dir`.
pub fn write_tables(dir: &Path, report: &Report) -> Result<(), LabError> {
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    for t in &report.tables {
        let path = dir.join(format!("{}.csv", t.name));
        std::fs::write(&path, t.to_csv()).map_err(|e| io(&path, e))?;
    }
    Ok(())
}

pub fn write_summary(dir: &Path, summary: &Summary) -> Result<(), LabError> {
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let path = dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(summary).map_err(|e| LabError::Io(e.to_string()))?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| io(&path, e))
}
