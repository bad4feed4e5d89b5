use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{BestSolutionLog, PruneOutcome};
use crate::objective::FitnessRecord;

/// One row of a calibration log. `epoch` is a number or `Pruning`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub epoch: String,
    pub active_count: usize,
    pub rmse_train_x100: f64,
    pub rmse_val_x100: f64,
    pub rmse_test_x100: Option<f64>,
}

impl LogRow {
    fn new(epoch: String, active_count: usize, f: &FitnessRecord) -> Self {
        Self {
            epoch,
            active_count,
            rmse_train_x100: 100.0 * f.rmse_train,
            rmse_val_x100: 100.0 * f.rmse_validation,
            rmse_test_x100: f.rmse_test.map(|r| 100.0 * r),
        }
    }
}

/// Epoch winners followed by the pruned solution.
pub fn log_rows(log: &BestSolutionLog, pruned: &PruneOutcome) -> Vec<LogRow> {
    log.epochs
        .iter()
        .map(|e| LogRow::new(e.epoch.to_string(), e.matrix.active_count(), &e.fitness))
        .chain(std::iter::once(LogRow::new(
            "Pruning".into(),
            pruned.matrix.active_count(),
            &pruned.fitness,
        )))
        .collect()
}

pub fn write_log(path: impl AsRef<Path>, rows: &[LogRow]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<LogRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Aligned text table with RMSE values to two decimals.
pub fn render_log(rows: &[LogRow]) -> String {
    let fmt = |x: f64| format!("{x:.2}");
    let header = ["Epoch", "Active", "Train", "Validation", "Test"];
    let body: Vec<[String; 5]> = rows
        .iter()
        .map(|r| {
            [
                r.epoch.clone(),
                r.active_count.to_string(),
                fmt(r.rmse_train_x100),
                fmt(r.rmse_val_x100),
                r.rmse_test_x100.map(fmt).unwrap_or_else(|| "-".into()),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..5)
        .map(|c| body.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap())
        .collect();
    let line = |cells: &[&str]| {
        let parts: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(c, s)| if c == 0 { format!("{s:<w$}", w = widths[c]) } else { format!("{s:>w$}", w = widths[c]) })
            .collect();
        parts.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(&header);
    for r in &body {
        out += &line(&r.iter().map(String::as_str).collect::<Vec<_>>());
    }
    out
}

/// Log files under `path`: the file itself, or every `log_k*.csv` in a directory.
pub fn find_logs(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let entries = std::fs::read_dir(path).map_err(|e| Error::io(path, e))?;
    let mut logs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("log_k") && n.ends_with(".csv"))
        })
        .collect();
    logs.sort();
    if logs.is_empty() {
        return Err(Error::InvalidConfig(format!("no log_k*.csv files in {}", path.display())));
    }
    Ok(logs)
}
