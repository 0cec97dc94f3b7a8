//! Rendering of command results as JSON, CSV and plot-data files.
//!
//! JSON output is `{"config": …, "result": …}`. CSV output starts with a
//! `# config: <json>` line followed by a header row. Set files carry the
//! config under `provenance`.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context;
use serde_json::{json, Value};

use crate::Format;

pub enum Cell {
    Num(f64),
    Text(String),
    Flag(bool),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
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

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Flag(v)
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Num(v) => write!(f, "{v}"),
            Cell::Text(s) => write!(f, "{s}"),
            Cell::Flag(b) => write!(f, "{b}"),
        }
    }
}

pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<const K: usize>(columns: [&str; K], rows: impl IntoIterator<Item = Vec<Cell>>) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: rows.into_iter().collect(),
        }
    }
}

pub struct Report {
    config: Value,
    result: Value,
    table: Table,
    plot: Option<Vec<(f64, f64)>>,
    set_file: bool,
    pub failed: bool,
}

impl Report {
    pub fn new(config: Value, result: Value, table: Table) -> Self {
        Report {
            config,
            result,
            table,
            plot: None,
            set_file: false,
            failed: false,
        }
    }

    /// JSON output is the set file itself, with the config as provenance.
    pub fn set_file(config: Value, file: Value, table: Table) -> Self {
        Report {
            set_file: true,
            ..Report::new(config, file, table)
        }
    }

    pub fn with_plot(mut self, points: Vec<(f64, f64)>) -> Self {
        self.plot = Some(points);
        self
    }

    pub fn failing(mut self, failed: bool) -> Self {
        self.failed = failed;
        self
    }

    fn config_line(&self) -> String {
        format!("# config: {}\n", self.config)
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let value = if self.set_file {
                    self.result.clone()
                } else {
                    json!({"config": self.config, "result": self.result})
                };
                let mut text = serde_json::to_string_pretty(&value).expect("JSON values serialize");
                text.push('\n');
                text
            }
            Format::Csv => {
                let mut text = self.config_line();
                text.push_str(&self.table.columns.join(","));
                text.push('\n');
                for row in &self.table.rows {
                    let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
                    text.push_str(&cells.join(","));
                    text.push('\n');
                }
                text
            }
        }
    }

    pub fn emit(&self, format: Format, out: Option<&Path>, plot: Option<&Path>) -> anyhow::Result<()> {
        let text = self.render(format);
        match out {
            Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
            None => print!("{text}"),
        }
        if let Some(path) = plot {
            let mut body = self.config_line();
            for (x, y) in self.plot.iter().flatten() {
                let _ = writeln!(body, "{x} {y}");
            }
            std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }
}
