//! Trace and summary CSV files.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{HarnessError, Result};

pub const TRACE_HEADER: [&str; 6] = ["seed", "strategy", "labels_spent", "test_accuracy", "active_set_size", "wall_ms"];
pub const SUMMARY_HEADER: [&str; 5] = ["strategy", "budget", "mean_accuracy", "stderr", "n_seeds"];

/// Shortest decimal that round-trips `x` rounded to nine significant digits.
pub fn fmt_sig(x: f64) -> String {
    if !x.is_finite() || x == 0.0 {
        return format!("{x}");
    }
    let rounded: f64 = format!("{x:.8e}").parse().unwrap_or(x);
    format!("{rounded}")
}

/// `x` rounded the way [`fmt_sig`] prints it.
pub fn round_sig(x: f64) -> f64 {
    fmt_sig(x).parse().unwrap_or(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub seed: u64,
    pub strategy: String,
    pub labels_spent: u64,
    pub test_accuracy: f64,
    pub active_set_size: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
}

impl RunTrace {
    /// Sorts by strategy, seed, then labels spent.
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            a.strategy.cmp(&b.strategy).then(a.seed.cmp(&b.seed)).then(a.labels_spent.cmp(&b.labels_spent))
        });
    }

    /// Copy with every float rounded as it would be written.
    pub fn rounded(&self) -> RunTrace {
        RunTrace {
            rows: self
                .rows
                .iter()
                .map(|r| TraceRow { test_accuracy: round_sig(r.test_accuracy), wall_ms: round_sig(r.wall_ms), ..r.clone() })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub strategy: String,
    pub budget: u64,
    pub mean_accuracy: f64,
    pub stderr: f64,
    pub n_seeds: usize,
}

/// Mean and standard error over seeds for every (strategy, budget) pair.
pub fn summarize(trace: &RunTrace) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(&str, u64), Vec<f64>> = BTreeMap::new();
    for r in &trace.rows {
        groups.entry((r.strategy.as_str(), r.labels_spent)).or_default().push(r.test_accuracy);
    }
    groups
        .into_iter()
        .map(|((strategy, budget), acc)| {
            let n = acc.len();
            let mean = acc.iter().sum::<f64>() / n as f64;
            let stderr = if n > 1 {
                let var = acc.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                (var / n as f64).sqrt()
            } else {
                0.0
            };
            SummaryRow { strategy: strategy.to_string(), budget, mean_accuracy: mean, stderr, n_seeds: n }
        })
        .collect()
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    csv::Writer::from_path(path).map_err(HarnessError::from)
}

pub fn write_trace(path: &Path, trace: &RunTrace) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(TRACE_HEADER)?;
    for r in &trace.rows {
        w.write_record([
            r.seed.to_string(),
            r.strategy.clone(),
            r.labels_spent.to_string(),
            fmt_sig(r.test_accuracy),
            r.active_set_size.to_string(),
            fmt_sig(r.wall_ms),
        ])?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.strategy.clone(),
            r.budget.to_string(),
            fmt_sig(r.mean_accuracy),
            fmt_sig(r.stderr),
            r.n_seeds.to_string(),
        ])?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, k: usize, line: Option<usize>) -> Result<T> {
    rec.get(k)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| HarnessError::format(line, format!("bad value in column {}", k + 1)))
}

fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<(csv::StringRecord, Option<usize>)>> {
    let file = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    if r.headers()?.iter().ne(header.iter().copied()) {
        return Err(HarnessError::format(Some(1), format!("expected header {}", header.join(","))));
    }
    r.records()
        .map(|rec| {
            let rec = rec?;
            let line = rec.position().map(|p| p.line() as usize);
            Ok((rec, line))
        })
        .collect()
}

pub fn read_trace(path: &Path) -> Result<RunTrace> {
    let rows = read_rows(path, &TRACE_HEADER)?
        .into_iter()
        .map(|(rec, line)| {
            Ok(TraceRow {
                seed: field(&rec, 0, line)?,
                strategy: field(&rec, 1, line)?,
                labels_spent: field(&rec, 2, line)?,
                test_accuracy: field(&rec, 3, line)?,
                active_set_size: field(&rec, 4, line)?,
                wall_ms: field(&rec, 5, line)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(RunTrace { rows })
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    read_rows(path, &SUMMARY_HEADER)?
        .into_iter()
        .map(|(rec, line)| {
            Ok(SummaryRow {
                strategy: field(&rec, 0, line)?,
                budget: field(&rec, 1, line)?,
                mean_accuracy: field(&rec, 2, line)?,
                stderr: field(&rec, 3, line)?,
                n_seeds: field(&rec, 4, line)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_digits() {
        assert_eq!(fmt_sig(0.1234567891234), "0.123456789");
        assert_eq!(fmt_sig(1.0), "1");
        assert_eq!(fmt_sig(123456789012.0), "123456789000");
        assert_eq!(fmt_sig(0.0), "0");
    }

    #[test]
    fn stderr_of_two_values() {
        let mk = |seed, acc| TraceRow {
            seed,
            strategy: "random".into(),
            labels_spent: 50,
            test_accuracy: acc,
            active_set_size: 3,
            wall_ms: 0.0,
        };
        let s = summarize(&RunTrace { rows: vec![mk(0, 0.5), mk(1, 0.7)] });
        assert_eq!(s.len(), 1);
        assert!((s[0].mean_accuracy - 0.6).abs() < 1e-12);
        assert!((s[0].stderr - 0.1).abs() < 1e-12);
    }
}
