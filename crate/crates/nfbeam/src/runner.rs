//! Parallel Monte-Carlo execution.
//!
//! Trials run on a rayon pool and are gathered back in job order before any
//! aggregation, so the output does not depend on the number of workers.

use nfbeam_core::sim::{aggregate, MetricsRecord, TrialRow};
use nfbeam_core::{Experiment, Scenario, Scheme};
use rayon::prelude::*;

use crate::error::CliError;

/// Run every `(snr, trial)` job of `kind` on `workers` threads (`0` = pool
/// default) and return the rows in sequential order.
pub fn run_trials(scenario: &Scenario, kind: Experiment, workers: usize) -> Result<Vec<TrialRow>, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start worker pool: {e}")))?;
    let jobs: Vec<(usize, usize)> = scenario.jobs().collect();
    let chunks: Vec<Vec<TrialRow>> =
        pool.install(|| jobs.par_iter().map(|&(s, t)| scenario.trial(kind, s, t)).collect());
    Ok(chunks.into_iter().flatten().collect())
}

/// Schemes in the order their records are reported.
pub fn reported_schemes(scenario: &Scenario, kind: Experiment) -> Vec<Scheme> {
    let mut schemes: Vec<Scheme> = scenario
        .config
        .schemes
        .iter()
        .copied()
        .filter(|s| *s != Scheme::FullCsi)
        .collect();
    if kind != Experiment::Nmse && scenario.config.schemes.contains(&Scheme::FullCsi) {
        schemes.push(Scheme::FullCsi);
    }
    schemes
}

pub fn run_experiment(
    scenario: &Scenario,
    kind: Experiment,
    workers: usize,
) -> Result<(Vec<TrialRow>, Vec<MetricsRecord>), CliError> {
    let rows = run_trials(scenario, kind, workers)?;
    let records = aggregate(&rows, &scenario.sampler, &reported_schemes(scenario, kind));
    Ok((rows, records))
}
