//! Monte Carlo experiments for APBM filtering: configuration, a run
//! scheduler, RMSE and parameter-variance metrics, CSV output and plots.

// `!(x >= 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod exec;
pub mod metrics;
pub mod output;
pub mod plot;
pub mod runner;

use std::path::Path;

pub use config::{Experiment, ExperimentConfig, Method, Preset};
pub use exec::Execution;
pub use metrics::Summary;
pub use runner::{run_monte_carlo, MonteCarloOutput};

/// Runs an experiment, reduces it, and writes every artifact into `dir`.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    exec: Execution,
    dir: &Path,
) -> anyhow::Result<(MonteCarloOutput, Summary)> {
    let out = run_monte_carlo(cfg, exec)?;
    let summary = metrics::summarize(&out)?;
    output::write_experiment(dir, &out, &summary)?;
    Ok((out, summary))
}
