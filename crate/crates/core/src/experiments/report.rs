//! CSV and markdown rendering of experiment results.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

/// A rectangular table of preformatted cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Table {
    /// File-name friendly identifier.
    pub name: String,
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, title: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_owned(),
            title: title.to_owned(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let line = |cells: &[String]| cells.iter().map(|c| csv_cell(c)).collect::<Vec<_>>().join(",");
        out.push_str(&line(&self.columns));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&line(row));
            out.push('\n');
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "| {} |", self.columns.join(" | "));
        let _ = writeln!(out, "|{}", "---|".repeat(self.columns.len()));
        for row in &self.rows {
            let _ = writeln!(out, "| {} |", row.join(" | "));
        }
        out
    }
}

fn csv_cell(c: &str) -> String {
    if c.contains([',', '"', '\n']) {
        format!("\"{}\"", c.replace('"', "\"\""))
    } else {
        c.to_owned()
    }
}

/// Result tables plus the inputs that produced them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    /// Content hash of the corpus the experiment ran on.
    pub corpus_sha256: Option<String>,
    pub config: serde_json::Value,
    pub tables: Vec<Table>,
}

impl ExperimentReport {
    pub fn new(experiment: &str, config: &impl Serialize, tables: Vec<Table>) -> Self {
        Self {
            experiment: experiment.to_owned(),
            corpus_sha256: None,
            config: serde_json::to_value(config).expect("config serializes"),
            tables,
        }
    }

    pub fn with_corpus_hash(mut self, sha256: Option<String>) -> Self {
        self.corpus_sha256 = sha256;
        self
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!("# {}\n\n", self.experiment);
        if let Some(h) = &self.corpus_sha256 {
            let _ = writeln!(out, "Corpus SHA-256: `{h}`\n");
        }
        for t in &self.tables {
            let _ = writeln!(out, "## {}\n\n{}", t.title, t.to_markdown());
        }
        let config = serde_json::to_string_pretty(&self.config).expect("config serializes");
        let _ = writeln!(out, "## Configuration\n\n```json\n{config}\n```");
        out
    }

    /// Writes `<experiment>.md`, `<experiment>_<table>.csv` per table and
    /// `<experiment>.json` into `dir`; returns the paths written.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut files = vec![(dir.join(format!("{}.md", self.experiment)), self.to_markdown())];
        for t in &self.tables {
            files.push((dir.join(format!("{}_{}.csv", self.experiment, t.name)), t.to_csv()));
        }
        let mut json = serde_json::to_string_pretty(self).expect("report serializes");
        json.push('\n');
        files.push((dir.join(format!("{}.json", self.experiment)), json));
        for (path, body) in &files {
            fs::write(path, body).map_err(|e| Error::io(path, e))?;
        }
        Ok(files.into_iter().map(|(p, _)| p).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_markdown() {
        let mut t = Table::new("t", "Title", &["a", "b"]);
        t.push(vec!["1".into(), "x,y".into()]);
        assert_eq!(t.to_csv(), "a,b\n1,\"x,y\"\n");
        assert_eq!(t.to_markdown(), "| a | b |\n|---|---|\n| 1 | x,y |\n");
    }

    #[test]
    #[should_panic]
    fn ragged_rows_rejected() {
        Table::new("t", "T", &["a"]).push(vec![]);
    }

    #[test]
    fn write_is_deterministic() {
        let mut t = Table::new("rows", "Rows", &["k"]);
        t.push(vec!["v".into()]);
        let r = ExperimentReport::new("demo", &serde_json::json!({"seed": 1}), vec![t])
            .with_corpus_hash(Some("abc".into()));
        let dir = std::env::temp_dir().join(format!("trustgate-report-{}", std::process::id()));
        let paths = r.write(&dir).unwrap();
        assert_eq!(paths.len(), 3);
        let first: Vec<_> = paths.iter().map(|p| fs::read(p).unwrap()).collect();
        r.write(&dir).unwrap();
        let second: Vec<_> = paths.iter().map(|p| fs::read(p).unwrap()).collect();
        assert_eq!(first, second);
        assert!(String::from_utf8(first[0].clone()).unwrap().contains("`abc`"));
        fs::remove_dir_all(dir).unwrap();
    }
}
