//! Experiment plumbing: configuration, the train loop, the toy experiment,
//! metric sinks and seed sweeps.

pub mod config;
pub mod metrics;
pub mod toy;
pub mod train;

use std::path::Path;

use log::info;
use rayon::prelude::*;
use thiserror::Error;

use crate::envs::EnvError;

pub use config::{EnvId, RunConfig, SweepConfig};
pub use metrics::{emit_metrics, CsvSink, MetricRecord, ToyRow};
pub use toy::{run_toy, toy_trial, ToyTrace, TOY_POLICIES};
pub use train::{evaluate, train, train_collect, TrainSummary};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("episode {episode}, step {step}: {message}")]
    Runtime {
        episode: usize,
        step: usize,
        message: String,
    },
}

impl From<EnvError> for HarnessError {
    fn from(e: EnvError) -> Self {
        HarnessError::Config(e.to_string())
    }
}

/// Trains and streams the metric rows into a CSV file.
pub fn train_to_file(config: &RunConfig, out: &Path) -> Result<TrainSummary, HarnessError> {
    config.validate()?;
    let mut sink = CsvSink::create(out)?;
    let summary = train(config, |r| sink.emit(r).map_err(HarnessError::from))?;
    info!(
        "{} {} seed {}: {} steps, final success {}",
        config.env, config.strategy, config.seed, summary.steps, summary.final_success
    );
    Ok(summary)
}

/// Runs the toy experiment and writes its CSV.
pub fn toy_to_file(
    n: usize,
    policies: &[crate::select::Strategy],
    iterations: usize,
    trials: usize,
    seed: u64,
    out: &Path,
) -> Result<Vec<ToyRow>, HarnessError> {
    let mut sink = CsvSink::create(out)?;
    let rows = run_toy(n, policies, iterations, trials, seed)?;
    emit_metrics(&rows, &mut sink)?;
    Ok(rows)
}

/// Runs every grid point of a sweep in parallel, one CSV per run.
pub fn run_sweep(sweep: &SweepConfig) -> Result<Vec<TrainSummary>, HarnessError> {
    let runs = sweep.runs();
    for r in &runs {
        r.validate()?;
    }
    std::fs::create_dir_all(&sweep.out_dir)?;
    runs.par_iter()
        .map(|r| train_to_file(r, &sweep.output_path(r)))
        .collect()
}
