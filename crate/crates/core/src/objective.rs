//! Linear fit of attention to the target and the penalized objective.
//!
//! The objective of a matrix over a window is the mean squared error of the
//! least-squares line from attention (lagged by `lag_h`) to the standardized
//! target, plus `lambda1` per token active in more than one dimension, plus
//! `lambda2` if the slope is positive or `lambda3` otherwise.

use std::collections::HashMap;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{TimeBucketedCorpus, WindowSplit};
use crate::error::{Error, Result};
use crate::selection::{attention_values, SelectionMatrix};

/// Target values aligned to corpus buckets, z-scored with training statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSeries {
    pub raw: Vec<f64>,
    pub standardized: Vec<f64>,
    pub split: WindowSplit,
    pub mean: f64,
    pub sd: f64,
}

/// Z-scores `raw` using the mean and population standard deviation of the
/// training window only.
pub fn standardize_target(raw: Vec<f64>, split: WindowSplit) -> Result<TargetSeries> {
    if raw.len() != split.num_buckets() {
        return Err(Error::InvalidSplit(format!(
            "target has {} values, split covers {} buckets",
            raw.len(),
            split.num_buckets()
        )));
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("target contains non-finite values".into()));
    }
    let train = &raw[split.train.clone()];
    if train.len() < 2 {
        return Err(Error::WindowTooShort {
            len: train.len(),
            need: 2,
        });
    }
    let n = train.len() as f64;
    let mean = train.iter().sum::<f64>() / n;
    let var = train.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if var <= 0.0 || !var.is_finite() {
        return Err(Error::ConstantTarget);
    }
    let sd = var.sqrt();
    let standardized = raw.iter().map(|v| (v - mean) / sd).collect();
    Ok(TargetSeries {
        raw,
        standardized,
        split,
        mean,
        sd,
    })
}

/// Reads a `bucket,value` CSV (header optional) and aligns it to `labels`.
pub fn read_target_csv(path: impl AsRef<Path>, labels: &[String]) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(file);
    let mut values: HashMap<String, f64> = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(Error::parse(path, i + 1, "expected two columns: bucket,value"));
        }
        match rec[1].parse::<f64>() {
            Ok(v) => {
                values.insert(rec[0].to_string(), v);
            }
            Err(_) if i == 0 => continue,
            Err(e) => return Err(Error::parse(path, i + 1, e.to_string())),
        }
    }
    let missing: Vec<&str> = labels
        .iter()
        .filter(|l| !values.contains_key(*l))
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        return Err(Error::parse(
            path,
            0,
            format!("no target value for buckets: {}", missing.join(", ")),
        ));
    }
    Ok(labels.iter().map(|l| values[l]).collect())
}

pub fn write_target_csv(path: impl AsRef<Path>, labels: &[String], values: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["bucket", "value"])?;
    for (l, v) in labels.iter().zip(values) {
        w.write_record([l.as_str(), &v.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PenaltyConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lag_h: usize,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self {
            lambda1: 0.25,
            lambda2: 0.0,
            lambda3: 1.0,
            lag_h: 0,
        }
    }
}

impl PenaltyConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2), ("lambda3", self.lambda3)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidConfig(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    fn sign_penalty(&self, beta: f64) -> f64 {
        if beta > 0.0 {
            self.lambda2
        } else {
            self.lambda3
        }
    }
}

/// Fit and scores of one matrix. `alpha`/`beta` come from the training
/// window and are reused on every other window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessRecord {
    pub alpha: f64,
    pub beta: f64,
    pub overlap: usize,
    pub objective_train: f64,
    pub objective_validation: f64,
    pub rmse_train: f64,
    pub rmse_validation: f64,
    pub rmse_test: Option<f64>,
}

/// Target indices of `window` that have a lagged regressor inside it.
pub fn lag_aligned(window: &Range<usize>, lag_h: usize) -> Range<usize> {
    (window.start + lag_h).min(window.end)..window.end
}

/// Least squares of `y[t]` on `x[t - lag_h]` for `t` in the lag-aligned window.
/// A constant regressor yields slope 0 and the mean of `y` as intercept.
pub fn ols_fit(x: &[f64], y: &[f64], window: Range<usize>, lag_h: usize) -> Result<(f64, f64)> {
    let w = lag_aligned(&window, lag_h);
    if w.len() < 2 {
        return Err(Error::WindowTooShort { len: w.len(), need: 2 });
    }
    let n = w.len() as f64;
    let mx = w.clone().map(|t| x[t - lag_h]).sum::<f64>() / n;
    let my = w.clone().map(|t| y[t]).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for t in w {
        let dx = x[t - lag_h] - mx;
        sxy += dx * (y[t] - my);
        sxx += dx * dx;
    }
    if sxx == 0.0 {
        return Ok((my, 0.0));
    }
    let beta = sxy / sxx;
    Ok((my - beta * mx, beta))
}

/// Squared residuals over the lag-aligned window, in bucket order.
pub fn squared_errors(alpha: f64, beta: f64, x: &[f64], y: &[f64], window: Range<usize>, lag_h: usize) -> Vec<f64> {
    lag_aligned(&window, lag_h)
        .map(|t| (y[t] - alpha - beta * x[t - lag_h]).powi(2))
        .collect()
}

fn mse(alpha: f64, beta: f64, x: &[f64], y: &[f64], window: Range<usize>, lag_h: usize) -> Result<f64> {
    let se = squared_errors(alpha, beta, x, y, window, lag_h);
    if se.is_empty() {
        return Err(Error::WindowTooShort { len: 0, need: 1 });
    }
    Ok(se.iter().sum::<f64>() / se.len() as f64)
}

/// Root mean squared residual over the lag-aligned window.
pub fn window_rmse(alpha: f64, beta: f64, x: &[f64], y: &[f64], window: Range<usize>, lag_h: usize) -> Result<f64> {
    mse(alpha, beta, x, y, window, lag_h).map(f64::sqrt)
}

/// Tokens active in more than one dimension.
pub fn overlap_count(omega: &SelectionMatrix) -> usize {
    let mut seen: HashMap<u32, usize> = HashMap::new();
    for &t in omega.dims().iter().flatten() {
        *seen.entry(t).or_default() += 1;
    }
    seen.values().filter(|&&c| c > 1).count()
}

/// Objective of attention series `x` when the line is fitted on `fit_window`
/// and scored on `eval_window`. Returns `(objective, alpha, beta)`.
pub fn objective_on(
    x: &[f64],
    target: &TargetSeries,
    cfg: &PenaltyConfig,
    overlap: usize,
    fit_window: Range<usize>,
    eval_window: Range<usize>,
) -> Result<(f64, f64, f64)> {
    let y = &target.standardized;
    let (alpha, beta) = ols_fit(x, y, fit_window, cfg.lag_h)?;
    let m = mse(alpha, beta, x, y, eval_window, cfg.lag_h)?;
    Ok((m + cfg.lambda1 * overlap as f64 + cfg.sign_penalty(beta), alpha, beta))
}

/// Scores an attention series against the target's train/validation/test split.
pub fn score_series(x: &[f64], overlap: usize, target: &TargetSeries, cfg: &PenaltyConfig) -> Result<FitnessRecord> {
    let y = &target.standardized;
    let split = &target.split;
    let h = cfg.lag_h;
    let (alpha, beta) = ols_fit(x, y, split.train.clone(), h)?;
    let penalty = cfg.lambda1 * overlap as f64 + cfg.sign_penalty(beta);
    let mse_train = mse(alpha, beta, x, y, split.train.clone(), h)?;
    let mse_val = mse(alpha, beta, x, y, split.validation.clone(), h)?;
    let rmse_test = if lag_aligned(&split.test, h).is_empty() {
        None
    } else {
        Some(mse(alpha, beta, x, y, split.test.clone(), h)?.sqrt())
    };
    Ok(FitnessRecord {
        alpha,
        beta,
        overlap,
        objective_train: mse_train + penalty,
        objective_validation: mse_val + penalty,
        rmse_train: mse_train.sqrt(),
        rmse_validation: mse_val.sqrt(),
        rmse_test,
    })
}

/// Fitness of `omega`: attention over the corpus, line fitted on training.
pub fn score_matrix(
    omega: &SelectionMatrix,
    corpus: &TimeBucketedCorpus,
    target: &TargetSeries,
    cfg: &PenaltyConfig,
) -> Result<FitnessRecord> {
    let x = attention_values(omega, corpus)?;
    score_series(&x, overlap_count(omega), target, cfg)
}

/// Objective of `omega` on `window` with the line fitted on that same window,
/// alongside the matrix's train/validation/test record.
pub fn penalized_objective(
    omega: &SelectionMatrix,
    corpus: &TimeBucketedCorpus,
    target: &TargetSeries,
    cfg: &PenaltyConfig,
    window: Range<usize>,
) -> Result<(f64, FitnessRecord)> {
    let x = attention_values(omega, corpus)?;
    let overlap = overlap_count(omega);
    let (obj, _, _) = objective_on(&x, target, cfg, overlap, window.clone(), window)?;
    Ok((obj, score_series(&x, overlap, target, cfg)?))
}
