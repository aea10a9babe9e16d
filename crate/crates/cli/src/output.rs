//! CSV and JSON emission.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{to_toml, MARKER_PREFIX};
use crate::error::CliError;
use crate::Format;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    /// Empty in CSV, `null` in JSON.
    Missing,
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Missing, Cell::Float)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Float(x) => format_g17(*x),
            Cell::Missing => String::new(),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Float(x) => json!(x),
            Cell::Missing => Value::Null,
            Cell::Int(i) => json!(i),
            Cell::Text(s) => json!(s),
        }
    }
}

/// Formats like C's `%.17g`: 17 significant digits, trailing zeros
/// removed, exponent form below 1e-4 or from 1e17 on.
pub fn format_g17(x: f64) -> String {
    const P: i32 = 17;
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..P).contains(&exp) {
        let fixed = format!("{:.*}", (P - 1 - exp) as usize, x);
        trim_zeros(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// A command's result: rows for the data file and a short summary.
pub struct Report {
    command: &'static str,
    config_toml: String,
    config_json: Value,
    header: &'static [&'static str],
    rows: Vec<Vec<Cell>>,
    summary: Vec<(&'static str, Cell)>,
}

impl Report {
    pub fn new<C: Serialize>(
        command: &'static str,
        config: &C,
        header: &'static [&'static str],
    ) -> Self {
        Self {
            command,
            config_toml: to_toml(config),
            config_json: serde_json::to_value(config).expect("config serializes"),
            header,
            rows: Vec::new(),
            summary: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn summarize(&mut self, key: &'static str, value: impl Into<Cell>) {
        self.summary.push((key, value.into()));
    }

    pub fn csv(&self) -> String {
        let mut s = format!("{MARKER_PREFIX}{}\n", self.command);
        for line in self.config_toml.lines() {
            s.push_str(if line.is_empty() { "#" } else { "# " });
            s.push_str(line);
            s.push('\n');
        }
        s.push_str(&self.header.join(","));
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self
                    .header
                    .iter()
                    .zip(row)
                    .map(|(k, c)| (k.to_string(), c.json()))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        let summary: Map<String, Value> = self
            .summary
            .iter()
            .map(|(k, c)| (k.to_string(), c.json()))
            .collect();
        let doc = json!({
            "command": self.command,
            "config": self.config_json,
            "summary": summary,
            "rows": rows,
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("json value serializes");
        s.push('\n');
        s
    }

    fn summary_text(&self) -> String {
        self.summary
            .iter()
            .map(|(k, c)| {
                let v = match c {
                    Cell::Missing => "none".to_string(),
                    other => other.csv(),
                };
                format!("{k} = {v}\n")
            })
            .collect()
    }

    /// Writes the data to `out` (or stdout) and the summary to stdout (or
    /// stderr when the data already occupies stdout).
    pub fn emit(&self, format: Format, out: Option<&Path>) -> Result<(), CliError> {
        let body = match format {
            Format::Csv => self.csv(),
            Format::Json => self.json(),
        };
        let summary = self.summary_text();
        match out {
            Some(path) => {
                std::fs::write(path, body)
                    .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
                print!("{summary}");
            }
            None => {
                std::io::stdout()
                    .write_all(body.as_bytes())
                    .map_err(|e| CliError::io(format!("cannot write stdout: {e}")))?;
                eprint!("{summary}");
            }
        }
        Ok(())
    }
}
