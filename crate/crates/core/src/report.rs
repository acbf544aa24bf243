//! Result tables and their CSV / plain-text renderings.

use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("csv writer: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv buffer was not valid utf-8")]
    Utf8(#[from] std::string::FromUtf8Error),
}

/// One scenario's results: a row per horizon, a numeric cell per requested
/// metric column.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTable {
    pub name: String,
    /// Column keys, not counting the leading horizon column.
    pub columns: Vec<Column>,
    pub rows: Vec<TableRow>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    /// Stable machine-readable key used as the CSV header.
    pub key: String,
    /// Human-oriented label used by the aligned text rendering.
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub n: u64,
    pub values: Vec<f64>,
}

/// Formats with the given number of significant digits, plain decimal
/// notation ('.' separator, no exponent) — e.g. 0.971823, 16.4335, 1746.32.
pub fn format_significant(x: f64, digits: u32) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Cell precision for both output formats.
pub const SIGNIFICANT_DIGITS: u32 = 6;

impl ScenarioTable {
    /// RFC-quoted CSV with a header row; numbers carry
    /// [`SIGNIFICANT_DIGITS`] significant digits.
    pub fn to_csv(&self) -> Result<String, ReportError> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["n".to_string()];
        header.extend(self.columns.iter().map(|c| c.key.clone()));
        writer.write_record(&header)?;
        for row in &self.rows {
            let mut record = vec![row.n.to_string()];
            record.extend(
                row.values
                    .iter()
                    .map(|&v| format_significant(v, SIGNIFICANT_DIGITS)),
            );
            writer.write_record(&record)?;
        }
        let bytes = writer.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes)?)
    }

    /// Right-aligned fixed-width text table.
    pub fn to_text(&self) -> String {
        let mut headers = vec!["N".to_string()];
        headers.extend(self.columns.iter().map(|c| c.label.clone()));
        let mut grid: Vec<Vec<String>> = vec![headers];
        for row in &self.rows {
            let mut cells = vec![row.n.to_string()];
            cells.extend(
                row.values
                    .iter()
                    .map(|&v| format_significant(v, SIGNIFICANT_DIGITS)),
            );
            grid.push(cells);
        }
        let cols = grid[0].len();
        let widths: Vec<usize> = (0..cols)
            .map(|c| grid.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();

        let mut out = String::new();
        let _ = writeln!(out, "# {}", self.name);
        for (i, row) in grid.iter().enumerate() {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(cell, w)| format!("{cell:>width$}", width = w))
                .collect();
            let _ = writeln!(out, "{}", line.join("  "));
            if i == 0 {
                let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
                let _ = writeln!(out, "{}", rule.join("  "));
            }
        }
        out
    }
}
