//! Comma-delimited run metrics: one row per episode, append-only, flushed per
//! row so an aborted run still leaves a parseable file. The wallclock column
//! records cumulative simulated seconds, which keeps reruns byte-identical.

use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;
use thiserror::Error;

pub const METRICS_HEADER: &str =
    "step,episode,return_dense,return_sparse,success_align,success_insert,collision,episode_len,wallclock_s";

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("metrics io: {0}")]
    Io(#[from] std::io::Error),
    #[error("metrics parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: u64,
    pub episode: u64,
    pub return_dense: f64,
    pub return_sparse: f64,
    pub success_align: u8,
    pub success_insert: u8,
    pub collision: u8,
    pub episode_len: u64,
    pub wallclock_s: f64,
}

impl MetricsRow {
    fn to_line(self) -> String {
        format!(
            "{},{},{:.9},{:.9},{},{},{},{},{:.6}",
            self.step,
            self.episode,
            self.return_dense,
            self.return_sparse,
            self.success_align,
            self.success_insert,
            self.collision,
            self.episode_len,
            self.wallclock_s
        )
    }
}

/// Append-only writer; the header goes out at creation, each row is flushed.
pub struct MetricsWriter {
    file: std::fs::File,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self, MetricsError> {
        let mut file = std::fs::File::create(path)?;
        writeln!(file, "{METRICS_HEADER}")?;
        file.flush()?;
        Ok(Self { file })
    }

    pub fn write_row(&mut self, row: &MetricsRow) -> Result<(), MetricsError> {
        writeln!(self.file, "{}", row.to_line())?;
        self.file.flush()?;
        Ok(())
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>, MetricsError> {
    let text = std::fs::read_to_string(path)?;
    parse_metrics(&text)
}

pub fn parse_metrics(text: &str) -> Result<Vec<MetricsRow>, MetricsError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == METRICS_HEADER => {}
        Some((_, other)) => {
            return Err(MetricsError::Parse {
                line: 1,
                reason: format!("unexpected header {other:?}"),
            })
        }
        None => return Err(MetricsError::Parse { line: 1, reason: "empty file".into() }),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(MetricsError::Parse {
                line: idx + 1,
                reason: format!("expected 9 fields, got {}", fields.len()),
            });
        }
        let parse_err = |what: &str| MetricsError::Parse {
            line: idx + 1,
            reason: format!("invalid {what}"),
        };
        rows.push(MetricsRow {
            step: fields[0].parse().map_err(|_| parse_err("step"))?,
            episode: fields[1].parse().map_err(|_| parse_err("episode"))?,
            return_dense: fields[2].parse().map_err(|_| parse_err("return_dense"))?,
            return_sparse: fields[3].parse().map_err(|_| parse_err("return_sparse"))?,
            success_align: fields[4].parse().map_err(|_| parse_err("success_align"))?,
            success_insert: fields[5].parse().map_err(|_| parse_err("success_insert"))?,
            collision: fields[6].parse().map_err(|_| parse_err("collision"))?,
            episode_len: fields[7].parse().map_err(|_| parse_err("episode_len"))?,
            wallclock_s: fields[8].parse().map_err(|_| parse_err("wallclock_s"))?,
        });
    }
    Ok(rows)
}

/// Trailing window means over a series; output length is `n - window + 1`.
pub fn window_mean(series: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1);
    if series.len() < window {
        return Vec::new();
    }
    let inv = 1.0 / window as f64;
    (0..=series.len() - window)
        .map(|i| series[i..i + window].iter().sum::<f64>() * inv)
        .collect()
}

/// Smoothed total-return and insert-success series ready for plotting.
pub struct Curves {
    /// (episode index at window end, smoothed total return)
    pub returns: Vec<(u64, f64)>,
    /// (episode index at window end, smoothed insert success rate)
    pub success: Vec<(u64, f64)>,
}

pub fn export_curves(rows: &[MetricsRow], window: usize) -> Curves {
    let totals: Vec<f64> = rows.iter().map(|r| r.return_dense + r.return_sparse).collect();
    let succ: Vec<f64> = rows.iter().map(|r| r.success_insert as f64).collect();
    let episodes: Vec<u64> = rows.iter().map(|r| r.episode).collect();
    let r = window_mean(&totals, window);
    let s = window_mean(&succ, window);
    let xs = &episodes[window.saturating_sub(1)..];
    Curves {
        returns: xs.iter().copied().zip(r).collect(),
        success: xs.iter().copied().zip(s).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(step: u64, episode: u64, ret: f64, insert: u8) -> MetricsRow {
        MetricsRow {
            step,
            episode,
            return_dense: ret,
            return_sparse: 0.0,
            success_align: 0,
            success_insert: insert,
            collision: 0,
            episode_len: 10,
            wallclock_s: step as f64 * 0.3,
        }
    }

    #[test]
    fn write_read_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let rows = vec![row(10, 0, -1.25, 0), row(25, 1, 3.5, 1)];
        let mut w = MetricsWriter::create(&path).unwrap();
        for r in &rows {
            w.write_row(r).unwrap();
        }
        drop(w);
        let back = read_metrics(&path).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn parse_error_carries_line_number() {
        let text = format!("{METRICS_HEADER}\n1,0,0.0,0.0,0,0,0,5,0.1\nbad,line\n");
        let err = parse_metrics(&text).unwrap_err();
        match err {
            MetricsError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn window_mean_definitions() {
        assert_eq!(window_mean(&[1.0, 2.0, 3.0], 1), vec![1.0, 2.0, 3.0]);
        assert_eq!(window_mean(&[5.0, 5.0, 5.0], 2), vec![5.0, 5.0]);
        assert_eq!(window_mean(&[0.0, 1.0], 2), vec![0.5]);
        assert!(window_mean(&[1.0], 2).is_empty());
    }

    #[test]
    fn export_curves_aligns_x_with_window_end() {
        let rows = vec![row(1, 0, 0.0, 0), row(2, 1, 1.0, 1), row(3, 2, 2.0, 1)];
        let c = export_curves(&rows, 2);
        assert_eq!(c.returns, vec![(1, 0.5), (2, 1.5)]);
        assert_eq!(c.success, vec![(1, 0.5), (2, 1.0)]);
    }
}
