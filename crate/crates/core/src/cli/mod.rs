//! Command-line front end: `optimize`, `evaluate`, `prune`, `synth`, `report`.
//!
//! Every command reads one TOML [`RunConfig`] and writes CSV and JSON files
//! into an output directory. Outputs contain no timestamps, so identical
//! inputs and seed give byte-identical files at any worker count.

mod config;
mod report;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use config::{DataPaths, Dataset, FilterBounds, RunConfig, SplitLabels};
pub use report::{find_logs, log_rows, read_log, render_log, write_log, LogRow};

use crate::corpus::TimeBucketedCorpus;
use crate::error::{Error, Result};
use crate::evolve::{prune, CalibrationState, Calibrator};
use crate::objective::{lag_aligned, objective_on, overlap_count, score_matrix, squared_errors, FitnessRecord, TargetSeries};
use crate::selection::{attention_series, SelectionMatrix};
use crate::synthlab::generate_planted_instance;

#[derive(Debug, Parser)]
#[command(name = "optidx", version, about = "Search for token selection matrices whose attention index tracks a target series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (TOML)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the GA and generator seeds
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Evaluation threads; results do not depend on it
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Calibrate and prune a matrix for every K in the sweep and keep the best
    Optimize {
        /// Continue from checkpoints in the output directory
        #[arg(long)]
        resume: bool,
    },
    /// RMSE of a matrix per window, optionally against a benchmark
    Evaluate {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        benchmark: Option<PathBuf>,
    },
    /// Best deactivation subset of a matrix's active tokens
    Prune {
        #[arg(long)]
        matrix: PathBuf,
    },
    /// Write a planted synthetic instance and a config to optimize it
    Synth,
    /// Render calibration logs as aligned tables
    Report {
        /// A log file or a directory of log_k*.csv files
        logdir: PathBuf,
    },
}

const DEFAULT_OUT: &str = "optidx-out";

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.ga.seed = s;
        cfg.synth.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output = Some(o.clone());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Optimize { resume } => cmd_optimize(&cfg, *resume),
        Command::Evaluate { matrix, benchmark } => cmd_evaluate(&cfg, matrix, benchmark.as_deref()),
        Command::Prune { matrix } => cmd_prune(&cfg, matrix),
        Command::Synth => cmd_synth(&cfg),
        Command::Report { logdir } => cmd_report(logdir),
    })
}

fn output_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.output.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn window_name(target: &TargetSeries, t: usize) -> &'static str {
    let s = &target.split;
    if s.train.contains(&t) {
        "train"
    } else if s.validation.contains(&t) {
        "validation"
    } else {
        "test"
    }
}

/// Objective with the line fitted and scored on training plus validation.
pub fn combined_objective(
    omega: &SelectionMatrix,
    corpus: &TimeBucketedCorpus,
    target: &TargetSeries,
    pcfg: &crate::objective::PenaltyConfig,
) -> Result<f64> {
    let x = attention_series(omega, corpus)?.values;
    let tv = target.split.train_and_validation();
    Ok(objective_on(&x, target, pcfg, overlap_count(omega), tv.clone(), tv)?.0)
}

/// Result of one K in the sweep.
#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub k: usize,
    pub matrix: SelectionMatrix,
    pub fitness: FitnessRecord,
    pub combined_objective: f64,
    pub log: Vec<LogRow>,
}

/// Calibration and pruning for every K of `cfg.k`, with per-epoch progress
/// on stderr and checkpoints in `out`. Returns the entries and the index of
/// the one with the lowest combined objective (earliest K on ties).
pub fn optimize(cfg: &RunConfig, data: &Dataset, out: &Path, resume: bool) -> Result<(Vec<SweepEntry>, usize)> {
    cfg.validate()?;
    let (corpus, target) = (&data.corpus, &data.target);
    let mut entries = Vec::with_capacity(cfg.k.len());
    for &k in &cfg.k {
        let cal = Calibrator::new(corpus, target, data.embeddings.as_ref(), k, cfg.ga.clone(), cfg.penalty)?;
        let ckpt = out.join(format!("checkpoint_k{k}.json"));
        let state = if resume && ckpt.exists() {
            CalibrationState::load(&ckpt)?
        } else {
            cal.initial_state()?
        };
        let res = cal.run_from(state, |s| {
            let e = s.log.epochs.last().expect("epoch just finished");
            eprintln!(
                "K={k} epoch {}: {} active, train RMSE {:.4}, validation RMSE {:.4}",
                e.epoch,
                e.matrix.active_count(),
                e.fitness.rmse_train,
                e.fitness.rmse_validation
            );
            s.save(&ckpt)
        })?;
        let pruned = prune(&res.interim, corpus, target, &cfg.penalty)?;
        eprintln!("K={k} pruning: {} candidates", pruned.candidates);
        let combined_objective = combined_objective(&pruned.matrix, corpus, target, &cfg.penalty)?;
        entries.push(SweepEntry {
            k,
            log: log_rows(&res.log, &pruned),
            matrix: pruned.matrix,
            fitness: pruned.fitness,
            combined_objective,
        });
    }
    let best = (0..entries.len())
        .min_by(|&a, &b| entries[a].combined_objective.total_cmp(&entries[b].combined_objective).then(a.cmp(&b)))
        .expect("k list validated non-empty");
    Ok((entries, best))
}

pub fn cmd_optimize(cfg: &RunConfig, resume: bool) -> Result<()> {
    let data = Dataset::load(cfg)?;
    let out = output_dir(cfg)?;
    let (entries, best) = optimize(cfg, &data, &out, resume)?;
    let vocab = data.corpus.vocab();

    let mut sweep = csv_writer(&out.join("sweep.csv"))?;
    sweep.write_record([
        "k",
        "active_count",
        "objective_combined",
        "objective_train",
        "objective_validation",
        "selected",
    ])?;
    for (i, e) in entries.iter().enumerate() {
        write_log(out.join(format!("log_k{}.csv", e.k)), &e.log)?;
        e.matrix.write(out.join(format!("matrix_k{}.json", e.k)), vocab)?;
        sweep.write_record([
            e.k.to_string(),
            e.matrix.active_count().to_string(),
            e.combined_objective.to_string(),
            e.fitness.objective_train.to_string(),
            e.fitness.objective_validation.to_string(),
            (i == best).to_string(),
        ])?;
    }
    sweep.flush().map_err(|e| Error::io(&out, e))?;

    let chosen = &entries[best];
    chosen.matrix.write(out.join("best_matrix.json"), vocab)?;
    let f = &chosen.fitness;
    let mut fit = csv_writer(&out.join("fit.csv"))?;
    fit.write_record(["k", "alpha", "beta", "rmse_train", "rmse_validation", "rmse_test"])?;
    fit.write_record([
        chosen.k.to_string(),
        f.alpha.to_string(),
        f.beta.to_string(),
        f.rmse_train.to_string(),
        f.rmse_validation.to_string(),
        opt(f.rmse_test),
    ])?;
    fit.flush().map_err(|e| Error::io(&out, e))?;
    write_attention(&out.join("attention.csv"), &chosen.matrix, f, &data, cfg.penalty.lag_h)?;

    println!("selected K = {} with {} active tokens", chosen.k, chosen.matrix.active_count());
    for (d, dim) in chosen.matrix.to_record(vocab).dims.iter().enumerate() {
        println!("  dim {}: {}", d + 1, dim.join(" "));
    }
    print!("{}", render_log(&chosen.log));
    Ok(())
}

fn write_attention(path: &Path, m: &SelectionMatrix, f: &FitnessRecord, data: &Dataset, h: usize) -> Result<()> {
    let x = attention_series(m, &data.corpus)?;
    let mut w = csv_writer(path)?;
    w.write_record(["bucket", "window", "attention", "target_standardized", "fitted"])?;
    for (t, label) in x.labels.iter().enumerate() {
        let fitted = (t >= h).then(|| f.alpha + f.beta * x.values[t - h]);
        w.write_record([
            label.clone(),
            window_name(&data.target, t).to_string(),
            x.values[t].to_string(),
            data.target.standardized[t].to_string(),
            opt(fitted),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Per-bucket squared errors of two matrices, each with its own
/// training-fitted line, over every bucket that has a lagged regressor.
/// Rows are `(bucket, benchmark error, candidate error)`.
pub fn squared_error_paths(
    candidate: &SelectionMatrix,
    benchmark: &SelectionMatrix,
    data: &Dataset,
    pcfg: &crate::objective::PenaltyConfig,
) -> Result<Vec<(usize, f64, f64)>> {
    let h = pcfg.lag_h;
    let all = 0..data.target.split.num_buckets();
    let y = &data.target.standardized;
    let errs = |m: &SelectionMatrix| -> Result<Vec<f64>> {
        let f = score_matrix(m, &data.corpus, &data.target, pcfg)?;
        let x = attention_series(m, &data.corpus)?.values;
        Ok(squared_errors(f.alpha, f.beta, &x, y, all.clone(), h))
    };
    let (b, c) = (errs(benchmark)?, errs(candidate)?);
    Ok(lag_aligned(&all, h).zip(b).zip(c).map(|((t, b), c)| (t, b, c)).collect())
}

pub fn cmd_evaluate(cfg: &RunConfig, matrix: &Path, benchmark: Option<&Path>) -> Result<()> {
    let data = Dataset::load(cfg)?;
    let out = output_dir(cfg)?;
    let vocab = data.corpus.vocab();
    let candidate = SelectionMatrix::read(matrix, vocab)?;
    let bench = benchmark.map(|p| SelectionMatrix::read(p, vocab)).transpose()?;

    let mut w = csv_writer(&out.join("evaluation.csv"))?;
    w.write_record(["matrix", "alpha", "beta", "rmse_train_x100", "rmse_val_x100", "rmse_test_x100"])?;
    println!("{:<10} {:>10} {:>10} {:>10}", "matrix", "train", "validation", "test");
    for (name, m) in std::iter::once(("candidate", &candidate)).chain(bench.as_ref().map(|b| ("benchmark", b))) {
        let f = score_matrix(m, &data.corpus, &data.target, &cfg.penalty)?;
        let test = f.rmse_test.map(|r| 100.0 * r);
        w.write_record([
            name.to_string(),
            f.alpha.to_string(),
            f.beta.to_string(),
            (100.0 * f.rmse_train).to_string(),
            (100.0 * f.rmse_validation).to_string(),
            opt(test),
        ])?;
        println!(
            "{:<10} {:>10.2} {:>10.2} {:>10}",
            name,
            100.0 * f.rmse_train,
            100.0 * f.rmse_validation,
            test.map(|t| format!("{t:.2}")).unwrap_or_else(|| "-".into())
        );
    }
    w.flush().map_err(|e| Error::io(&out, e))?;

    if let Some(b) = &bench {
        let path = out.join("cumulative_sq_diff.csv");
        let mut w = csv_writer(&path)?;
        w.write_record(["bucket", "window", "sq_err_benchmark", "sq_err_candidate", "difference", "cumulative"])?;
        let mut cum = 0.0;
        for (t, eb, ec) in squared_error_paths(&candidate, b, &data, &cfg.penalty)? {
            cum += eb - ec;
            w.write_record([
                data.corpus.labels()[t].clone(),
                window_name(&data.target, t).to_string(),
                eb.to_string(),
                ec.to_string(),
                (eb - ec).to_string(),
                cum.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

pub fn cmd_prune(cfg: &RunConfig, matrix: &Path) -> Result<()> {
    let data = Dataset::load(cfg)?;
    let out = output_dir(cfg)?;
    let vocab = data.corpus.vocab();
    let interim = SelectionMatrix::read(matrix, vocab)?;
    let before = score_matrix(&interim, &data.corpus, &data.target, &cfg.penalty)?;
    let pruned = prune(&interim, &data.corpus, &data.target, &cfg.penalty)?;
    println!("evaluated {} candidates", pruned.candidates);
    println!(
        "validation objective {:.6e} -> {:.6e} ({} -> {} active)",
        before.objective_validation,
        pruned.fitness.objective_validation,
        interim.active_count(),
        pruned.matrix.active_count()
    );
    pruned.matrix.write(out.join("pruned_matrix.json"), vocab)
}

pub fn cmd_synth(cfg: &RunConfig) -> Result<()> {
    let out = output_dir(cfg)?;
    let inst = generate_planted_instance(&cfg.synth)?;
    inst.write(&out)?;
    let manifest = inst.manifest();
    let run = RunConfig {
        data: DataPaths {
            corpus: Some("corpus.jsonl".into()),
            vocabulary: Some("vocab.txt".into()),
            target: Some("target.csv".into()),
            embeddings: Some("embeddings.txt".into()),
        },
        split: Some(SplitLabels {
            train_end: manifest.train_end,
            validation_end: manifest.validation_end,
        }),
        output: Some("run".into()),
        ..cfg.clone()
    };
    let path = out.join("config.toml");
    fs::write(&path, run.to_toml()?).map_err(|e| Error::io(&path, e))?;
    println!(
        "wrote {} documents over {} buckets to {}",
        inst.corpus.num_docs(),
        inst.corpus.num_buckets(),
        out.display()
    );
    Ok(())
}

pub fn cmd_report(path: &Path) -> Result<()> {
    for log in find_logs(path)? {
        println!("{}", log.display());
        print!("{}", render_log(&read_log(&log)?));
    }
    Ok(())
}
