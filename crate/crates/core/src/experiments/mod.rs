//! Config-driven experiments with pass/fail verdicts.
//!
//! Every experiment returns an [`ExperimentReport`]: CSV tables, plot data and
//! verdicts. Replications run on the ambient rayon pool and are collected in
//! replication order, so reports do not depend on the number of threads.

mod config;
mod heavy;
mod hitting;
mod homogenize;
mod ladder;
mod martingale_check;
mod mixing;
mod report;
mod sojourn;
mod stationary;

pub use config::{Config, ExperimentConfig, LadderConfig};
pub use heavy::run_heavy_traffic;
pub use hitting::run_hitting_diagnostics;
pub use homogenize::run_homogenization;
pub use ladder::{initial_state, HeavyTrafficLadder};
pub use martingale_check::run_martingale_check;
pub use mixing::{run_mixing, run_simulate};
pub use report::{ExperimentReport, Outcome, PlotPoint, Table, Verdict};
pub use sojourn::run_sojourn;
pub use stationary::run_stationary;

use crate::diffusion::DiffusionError;
use crate::martingale::MartingaleError;
use crate::mobility::MobilityError;
use crate::network::NetworkError;
use crate::path::PathError;
use crate::rng::StreamKey;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error("missing config key `{0}`")]
    MissingKey(String),
    #[error("invalid value for `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },
    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),
    #[error(transparent)]
    Mobility(#[from] MobilityError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Diffusion(#[from] DiffusionError),
    #[error(transparent)]
    Martingale(#[from] MartingaleError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn invalid(key: &str, reason: impl Into<String>) -> ExperimentError {
    ExperimentError::InvalidValue { key: key.to_string(), reason: reason.into() }
}

/// Runs `f` for replications `0..reps` of `key` and returns the results in order.
pub(crate) fn replicate<T, F>(key: StreamKey, reps: usize, f: F) -> Result<Vec<T>, ExperimentError>
where
    T: Send,
    F: Fn(StreamKey) -> Result<T, ExperimentError> + Sync,
{
    (0..reps as u64).into_par_iter().map(|r| f(key.with_replication(r))).collect()
}

/// Names accepted by [`run_named`].
pub const EXPERIMENTS: [&str; 8] =
    ["mixing", "simulate", "homogenize", "heavy-traffic", "stationary", "sojourn", "hitting", "martingale-check"];

/// Dispatches an experiment by its command-line name.
pub fn run_named(name: &str, config: &Config) -> Result<ExperimentReport, ExperimentError> {
    match name {
        "mixing" => run_mixing(config),
        "simulate" => run_simulate(config),
        "homogenize" => run_homogenization(config),
        "heavy-traffic" => run_heavy_traffic(config),
        "stationary" => run_stationary(config),
        "sojourn" => run_sojourn(config),
        "hitting" => run_hitting_diagnostics(config),
        "martingale-check" => run_martingale_check(config),
        other => Err(ExperimentError::UnknownExperiment(other.to_string())),
    }
}
