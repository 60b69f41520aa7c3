//! Report rows and their CSV / JSON encodings.

use std::io::Write;

use serde::Serialize;

use crate::config::Format;
use crate::error::{CliError, CliResult};

/// One cell of a result matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub initial_state: String,
    pub terminal_state: String,
    pub target: String,
    pub value: f64,
    pub stderr: Option<f64>,
    /// Simulated estimate, for `compare`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_score: Option<f64>,
}

impl Row {
    pub fn new(initial_state: String, terminal_state: String, target: String, value: f64) -> Self {
        Self { initial_state, terminal_state, target, value, stderr: None, estimate: None, z_score: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub t: Option<String>,
    pub notes: Vec<String>,
    pub rows: Vec<Row>,
}

impl Report {
    fn is_comparison(&self) -> bool {
        self.rows.iter().any(|r| r.estimate.is_some())
    }

    pub fn csv(&self) -> CliResult<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let compare = self.is_comparison();
        let mut header = vec!["initial_state", "terminal_state", "target", "value", "stderr"];
        if compare {
            header.extend(["estimate", "z_score"]);
        }
        let fail = |e: csv::Error| CliError::io(e.to_string());
        w.write_record(&header).map_err(fail)?;
        let num = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            let mut rec = vec![r.initial_state.clone(), r.terminal_state.clone(), r.target.clone(), r.value.to_string(), num(r.stderr)];
            if compare {
                rec.extend([num(r.estimate), num(r.z_score)]);
            }
            w.write_record(&rec).map_err(fail)?;
        }
        w.into_inner().map_err(|e| CliError::io(e.to_string()))
    }

    pub fn json(&self) -> CliResult<Vec<u8>> {
        let mut out = serde_json::to_vec_pretty(self).map_err(|e| CliError::io(e.to_string()))?;
        out.push(b'\n');
        Ok(out)
    }

    pub fn encode(&self, format: Format) -> CliResult<Vec<u8>> {
        match format {
            Format::Csv => self.csv(),
            Format::Json => self.json(),
        }
    }

    /// Writes to `path`, or stdout when absent.
    pub fn emit(&self, format: Format, path: Option<&std::path::Path>) -> CliResult<()> {
        let bytes = self.encode(format)?;
        let fail = |e: std::io::Error| CliError::io(e.to_string());
        match path {
            Some(p) => std::fs::write(p, bytes).map_err(|e| CliError::io(format!("{}: {e}", p.display()))),
            None => std::io::stdout().lock().write_all(&bytes).map_err(fail),
        }
    }
}
