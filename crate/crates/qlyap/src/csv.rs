//! CSV output with a `#`-prefixed metadata header.

use std::fmt::Write as _;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// Version string `<crate version>-g<git describe>`.
pub const VERSION: &str = env!("QLYAP_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub metadata: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Full-precision, round-trippable number formatting.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

impl Table {
    /// Starts a table whose header echoes the command and configuration.
    pub fn new(command: &str, cfg: &RunConfig, columns: &[&str]) -> Self {
        let mut metadata = vec![format!("qlyap {command}"), format!("version={VERSION}")];
        metadata.extend(cfg.to_settings().iter().map(|(k, v)| format!("{k}={v}")));
        Table { metadata, columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.metadata.push(line.into());
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for m in &self.metadata {
            let _ = writeln!(out, "# {m}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for r in &self.rows {
            let _ = writeln!(out, "{}", r.join(","));
        }
        out
    }

    pub fn write(&self, path: &str) -> CliResult<()> {
        std::fs::write(path, self.render()).map_err(|source| CliError::Io { path: path.to_string(), source })
    }
}
