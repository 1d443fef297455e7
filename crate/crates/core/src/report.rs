//! Machine-readable experiment records: verdicts, tables and summaries.

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

/// One checked inequality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    /// The mathematical statement being checked.
    pub anchor: String,
    pub measured: f64,
    pub bound: f64,
    /// Signed margin; nonnegative iff the check passes.
    pub slack: f64,
    pub pass: bool,
    /// Informational verdicts are reported but never fail a run.
    pub informational: bool,
}

impl Verdict {
    /// Passes when `measured ≤ bound`.
    pub fn at_most(name: impl Into<String>, anchor: impl Into<String>, measured: f64, bound: f64) -> Self {
        let slack = bound - measured;
        Verdict {
            name: name.into(),
            anchor: anchor.into(),
            measured,
            bound,
            slack,
            pass: measured <= bound,
            informational: false,
        }
    }

    /// Passes when `measured ≥ bound`.
    pub fn at_least(name: impl Into<String>, anchor: impl Into<String>, measured: f64, bound: f64) -> Self {
        let slack = measured - bound;
        Verdict {
            name: name.into(),
            anchor: anchor.into(),
            measured,
            bound,
            slack,
            pass: measured >= bound,
            informational: false,
        }
    }

    /// Passes when `|measured - target| ≤ tol`.
    pub fn within(name: impl Into<String>, anchor: impl Into<String>, measured: f64, target: f64, tol: f64) -> Self {
        let dev = (measured - target).abs();
        Verdict {
            name: name.into(),
            anchor: anchor.into(),
            measured,
            bound: target,
            slack: tol - dev,
            pass: dev <= tol,
            informational: false,
        }
    }

    pub fn informational(mut self) -> Self {
        self.informational = true;
        self
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = match (self.pass, self.informational) {
            (true, _) => "PASS",
            (false, true) => "INFO",
            (false, false) => "FAIL",
        };
        write!(
            f,
            "[{status}] {} measured={:.6} bound={:.6} slack={:.6} ({})",
            self.name, self.measured, self.bound, self.slack, self.anchor
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
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

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Num(v) => write!(f, "{v}"),
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Bool(v) => write!(f, "{v}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Table { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// RFC 4180 CSV with `.` decimals and LF line endings.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.to_string())).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8 csv")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Report {
    pub title: String,
    pub verdicts: Vec<Verdict>,
    pub summary: BTreeMap<String, Value>,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub tables: Vec<Table>,
}

impl Report {
    pub fn new(title: impl Into<String>) -> Self {
        Report { title: title.into(), ..Default::default() }
    }

    pub fn verdict(&mut self, v: Verdict) -> &mut Self {
        self.verdicts.push(v);
        self
    }

    pub fn table(&mut self, t: Table) -> &mut Self {
        self.tables.push(t);
        self
    }

    pub fn note(&mut self, s: impl Into<String>) -> &mut Self {
        self.notes.push(s.into());
        self
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        self.summary.insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
        self
    }

    /// True when every non-informational verdict passes.
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass || v.informational)
    }

    pub fn find(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    /// Appends another report's verdicts, tables and notes under a name prefix.
    pub fn absorb(&mut self, prefix: &str, other: Report) {
        for mut v in other.verdicts {
            v.name = format!("{prefix}/{}", v.name);
            self.verdicts.push(v);
        }
        for mut t in other.tables {
            t.name = format!("{prefix}_{}", t.name);
            self.tables.push(t);
        }
        self.notes.extend(other.notes.into_iter().map(|n| format!("{prefix}: {n}")));
        if !other.summary.is_empty() {
            self.summary.insert(prefix.to_string(), serde_json::to_value(other.summary).unwrap_or(Value::Null));
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Writes `<stem>.json` plus one `<stem>_<table>.csv` per table; returns the paths.
    pub fn write_to(&self, dir: &Path, stem: &str) -> io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for t in &self.tables {
            let path = dir.join(format!("{stem}_{}.csv", t.name));
            std::fs::write(&path, t.to_csv())?;
            written.push(path);
        }
        let path = dir.join(format!("{stem}.json"));
        std::fs::write(&path, self.to_json() + "\n")?;
        written.push(path);
        Ok(written)
    }
}
