//! CSV tables with a `#`-prefixed header recording the resolved configuration.

use std::io::Write;
use std::path::Path;

use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Bool(bool),
    Text(String),
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Real(v) => real(*v),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

/// 17 significant digits in scientific notation; `inf`, `-inf`, `NaN` otherwise.
pub fn real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Extra `# key: value` header lines.
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), ..Default::default() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    /// Header and data as one document.
    pub fn render(&self, subcommand: &str, resolved: &str, seconds: f64) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "# qpc {} ({} build)\n",
            env!("CARGO_PKG_VERSION"),
            if cocycle_lab::par::is_parallel() { "parallel" } else { "sequential" }
        ));
        out.push_str(&format!("# subcommand: {subcommand}\n"));
        out.push_str(&format!("# wall_clock_seconds: {seconds:.3}\n"));
        out.push_str("# config:\n");
        for line in resolved.lines() {
            out.push_str(&format!("#   {line}\n"));
        }
        for n in &self.notes {
            out.push_str(&format!("# {n}\n"));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("writing to memory");
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::render)).expect("writing to memory");
        }
        let body = w.into_inner().expect("writing to memory");
        out.push_str(&String::from_utf8(body).expect("CSV of UTF-8 cells is UTF-8"));
        out
    }
}

pub fn emit(text: &str, dest: Option<&Path>) -> Result<(), CliError> {
    match dest {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes()).map_err(|e| CliError::Io(format!("stdout: {e}")))
        }
    }
}
