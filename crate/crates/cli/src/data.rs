//! Headerless numeric tables: one sample per row, values separated by commas
//! or whitespace. Blank lines and lines starting with `#` are skipped.

use std::fmt::Write as _;
use std::path::Path;

use slicedmi::SampleMatrix;

use crate::error::{CliError, Result};

pub fn parse_table(text: &str, source: &str) -> Result<SampleMatrix> {
    let mut cols = None;
    let mut rows = 0;
    let mut data = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: String| CliError::Input(format!("{source}:{}: {msg}", i + 1));
        let fields: Vec<&str> = if line.contains(',') {
            line.split(',').map(str::trim).collect()
        } else {
            line.split_whitespace().collect()
        };
        for f in &fields {
            let v: f64 = f.parse().map_err(|_| bad(format!("not a number: {f:?}")))?;
            if !v.is_finite() {
                return Err(bad(format!("non-finite value {f:?}")));
            }
            data.push(v);
        }
        match cols {
            None => cols = Some(fields.len()),
            Some(c) if c != fields.len() => return Err(bad(format!("expected {c} columns, found {}", fields.len()))),
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| CliError::Input(format!("{source}: no data rows")))?;
    SampleMatrix::new(rows, cols, data).map_err(|e| CliError::Input(format!("{source}: {e}")))
}

pub fn read_table(path: &Path) -> Result<SampleMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    parse_table(&text, &path.display().to_string())
}

/// Comma-separated rows with shortest round-trip formatting.
pub fn format_table(m: &SampleMatrix) -> String {
    let mut out = String::new();
    for row in m.iter_rows() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}
