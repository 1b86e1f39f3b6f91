//! Tabular and structured output.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;

use crate::config::Format;

/// A CSV table with a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> anyhow::Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))
    }
}

/// Shortest round-trip text for a float; exponent form for very small or
/// very large magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x != 0.0 && x.is_finite() && !(1.0e-4..1.0e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Everything a command produces.
#[derive(Debug)]
pub struct Report {
    pub table: Table,
    pub json: String,
    /// Extra CSV files written next to the main one, keyed by suffix.
    pub side_tables: Vec<(&'static str, Table)>,
}

impl Report {
    pub fn new<T: serde::Serialize>(table: Table, doc: &T) -> anyhow::Result<Self> {
        let mut json = serde_json::to_string_pretty(doc)?;
        json.push('\n');
        Ok(Self {
            table,
            json,
            side_tables: Vec::new(),
        })
    }
}

fn side_path(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.{suffix}.csv"))
}

fn write_bytes(path: Option<&Path>, bytes: &[u8]) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()
        }
    }
}

/// Writes the report; `path = None` means standard output.
pub fn emit(report: &Report, format: Format, path: Option<&Path>) -> anyhow::Result<()> {
    match format {
        Format::Json => write_bytes(path, report.json.as_bytes()).context("writing JSON output")?,
        Format::Csv => {
            write_bytes(path, &report.table.to_csv()?).context("writing CSV output")?;
            if let Some(out) = path {
                for (suffix, table) in &report.side_tables {
                    let p = side_path(out, suffix);
                    std::fs::write(&p, table.to_csv()?).with_context(|| format!("writing {}", p.display()))?;
                }
            }
        }
    }
    Ok(())
}
