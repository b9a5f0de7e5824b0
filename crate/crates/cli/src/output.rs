//! CSV output: one file per (method, mode) table.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};

use crate::experiment::{Row, Table};

pub const HEADER: [&str; 8] = [
    "sweep_value",
    "p_far",
    "p_near",
    "stderr_far",
    "stderr_near",
    "goodput",
    "method",
    "seed",
];

/// 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn record(row: &Row, method: &str) -> Vec<String> {
    let opt = |x: Option<f64>| x.map(format_float).unwrap_or_default();
    vec![
        format_float(row.sweep_value),
        format_float(row.p_far),
        format_float(row.p_near),
        opt(row.stderr_far),
        opt(row.stderr_near),
        format_float(row.goodput),
        method.to_string(),
        row.seed.map(|s| s.to_string()).unwrap_or_default(),
    ]
}

pub fn file_name(prefix: &str, table: &Table) -> String {
    format!("{prefix}_{}_{}.csv", table.method.name(), table.mode.name())
}

/// Writes `table` to `path`. Unless `deterministic`, the first line is a
/// `#`-prefixed generation timestamp.
pub fn write_table(path: &Path, table: &Table, deterministic: bool) -> Result<()> {
    let mut file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    if !deterministic {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        writeln!(file, "# generated at unix time {secs}")?;
    }
    let mut w = csv::Writer::from_writer(file);
    w.write_record(HEADER)?;
    for row in &table.rows {
        w.write_record(record(row, table.method.name()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_all(dir: &Path, prefix: &str, tables: &[Table], deterministic: bool) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    tables
        .iter()
        .map(|t| {
            let path = dir.join(file_name(prefix, t));
            write_table(&path, t, deterministic)?;
            Ok(path)
        })
        .collect()
}
