//! Experiment runner for event-triggered safety simulations: declarative
//! JSON configs in, CSV logs, a JSON report and SVG plots out.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub mod compare;
pub mod config;
pub mod experiment;
pub mod oracle_check;
pub mod plot;

use config::{ConfigError, LoadedConfig};
use experiment::{write_artifacts, Experiment, RunReport, EXIT_ASSERTION, EXIT_CONFIG};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Model(#[from] etsafe::Error),
    #[error("{0}")]
    Mismatch(String),
    #[error("{0}")]
    Pool(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Mismatch(_) => EXIT_CONFIG,
            _ => EXIT_ASSERTION,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the config's `output_dir`; in batch mode each run gets a
    /// subdirectory named after its config file.
    pub out: Option<PathBuf>,
    pub plots: bool,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub config: PathBuf,
    pub out_dir: PathBuf,
    pub report: RunReport,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        self.report.exit_code()
    }
}

pub fn output_dir(loaded: &LoadedConfig, opts: &RunOptions, batch: bool) -> PathBuf {
    match (&opts.out, &loaded.config.output_dir) {
        (Some(out), _) if batch => out.join(loaded.stem()),
        (Some(out), _) => out.clone(),
        (None, Some(dir)) => dir.clone(),
        (None, None) => Path::new("out").join(loaded.stem()),
    }
}

/// Loads, runs and writes the artifacts of one config file.
pub fn run_file(path: &Path, opts: &RunOptions, batch: bool) -> Result<RunSummary, CliError> {
    let loaded = LoadedConfig::from_path(path)?;
    let experiment = Experiment::build(&loaded)?;
    let result = experiment.run()?;
    let out_dir = output_dir(&loaded, opts, batch);
    write_artifacts(&result, &out_dir, opts.plots)?;
    Ok(RunSummary {
        config: path.to_path_buf(),
        out_dir,
        report: result.report,
    })
}

/// Runs independent configs on up to `parallel` threads; results keep input order.
pub fn run_batch(
    paths: &[PathBuf],
    opts: &RunOptions,
    parallel: usize,
) -> Result<Vec<Result<RunSummary, CliError>>, CliError> {
    use rayon::prelude::*;
    let batch = paths.len() > 1;
    if parallel <= 1 || !batch {
        return Ok(paths.iter().map(|p| run_file(p, opts, batch)).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel)
        .build()
        .map_err(|e| CliError::Pool(e.to_string()))?;
    Ok(pool.install(|| paths.par_iter().map(|p| run_file(p, opts, batch)).collect()))
}

/// Highest exit code over a batch: infeasible (3) > config (2) > assertion (1) > ok (0).
pub fn batch_exit_code(results: &[Result<RunSummary, CliError>]) -> i32 {
    results
        .iter()
        .map(|r| match r {
            Ok(s) => s.exit_code(),
            Err(e) => e.exit_code(),
        })
        .max()
        .unwrap_or(0)
}
