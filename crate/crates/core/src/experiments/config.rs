//! TOML configuration.
//!
//! ```toml
//! [mobility]
//! q = [[-1.0, 1.0], [1.0, -1.0]]
//!
//! [ladder]
//! lambda = 1.0
//! alpha = 1.0
//! n_values = [10, 20, 40]
//!
//! [experiment]
//! reps = 2000
//!
//! [rng]
//! seed = 7
//! ```
//!
//! `[ladder]` is only required by the experiments that use it; every key of
//! `[experiment]` has a default.

use super::{invalid, ExperimentError};
use crate::mobility::MobilityProfile;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub mobility: MobilityConfig,
    pub ladder: Option<LadderConfig>,
    #[serde(default)]
    pub experiment: ExperimentConfig,
    pub rng: RngConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MobilityConfig {
    /// Generator rows.
    pub q: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderConfig {
    pub lambda: f64,
    pub alpha: f64,
    pub n_values: Vec<u32>,
    /// Per-node arrival weights; uniform when absent.
    pub arrival_weights: Option<Vec<f64>>,
    /// Per-node capacity weights; uniform when absent.
    pub capacity_weights: Option<Vec<f64>>,
    /// Uniform bound on `λ_n + μ_n`; the largest value on the ladder when absent.
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RngConfig {
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub reps: usize,
    /// Accuracy levels for `mixing` and `homogenize`.
    pub eps_grid: Vec<f64>,
    /// Initial states for `homogenize`; `[2000, 0, …]` when empty.
    pub initial_states: Vec<Vec<u32>>,
    /// Scaled horizon of heavy-traffic runs (base time `n² · horizon`).
    pub horizon: f64,
    /// Scaled times at which marginals are compared.
    pub t_grid: Vec<f64>,
    pub ks_threshold: f64,
    pub ks_two_sample_threshold: f64,
    /// Scaled window `[a, b]` and number of grid points of the collapse diagnostic.
    pub collapse_window: [f64; 2],
    pub collapse_points: usize,
    pub collapse_threshold: f64,
    pub excursion_eps: f64,
    /// Euler step of the reference diffusion paths.
    pub rbm_step: f64,
    pub cycles: u64,
    pub r_max: usize,
    pub max_level: usize,
    pub balance_levels: usize,
    pub geometric_q_max: u32,
    pub moment_tolerance: f64,
    /// `b` in `y_n = round(n b π)`.
    pub sojourn_b: f64,
    pub phi_grid: Vec<u32>,
    pub delta: f64,
    pub hitting_t: f64,
    pub hitting_lambda: f64,
    pub hitting_mu: f64,
    pub c_grid: Vec<f64>,
    pub martingale_times: Vec<f64>,
    pub martingale_users: u32,
    pub quad_tol: f64,
    /// Initial state of `simulate`; `n_1 π` rounded when empty.
    pub initial: Vec<u32>,
    /// Unscaled horizon of `simulate`.
    pub simulate_horizon: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            reps: 2000,
            eps_grid: vec![0.05, 0.1, 0.2, 0.4],
            initial_states: Vec::new(),
            horizon: 1.0,
            t_grid: vec![0.25, 0.5, 1.0],
            ks_threshold: 0.05,
            ks_two_sample_threshold: 0.07,
            collapse_window: [0.2, 1.0],
            collapse_points: 17,
            collapse_threshold: 0.1,
            excursion_eps: 0.5,
            rbm_step: 5e-4,
            cycles: 200_000,
            r_max: 3,
            max_level: 512,
            balance_levels: 10,
            geometric_q_max: 10,
            moment_tolerance: 0.15,
            sojourn_b: 1.0,
            phi_grid: vec![50, 100, 200, 400],
            delta: 0.1,
            hitting_t: 5.0,
            hitting_lambda: 1.0,
            hitting_mu: 1.1,
            c_grid: vec![0.5, 1.0, 1.5],
            martingale_times: vec![0.5, 1.0, 2.0],
            martingale_users: 20,
            quad_tol: 1e-9,
            initial: Vec::new(),
            simulate_horizon: 100.0,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let c: Config = toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn profile(&self) -> Result<MobilityProfile, ExperimentError> {
        Ok(MobilityProfile::from_rows(&self.mobility.q)?)
    }

    pub fn ladder(&self) -> Result<&LadderConfig, ExperimentError> {
        self.ladder.as_ref().ok_or_else(|| ExperimentError::MissingKey("ladder".into()))
    }

    pub fn seed(&self) -> u64 {
        self.rng.seed
    }

    fn validate(&self) -> Result<(), ExperimentError> {
        let e = &self.experiment;
        if e.reps == 0 {
            return Err(invalid("experiment.reps", "must be positive"));
        }
        if e.eps_grid.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
            return Err(invalid("experiment.eps_grid", "entries must lie in (0, 1)"));
        }
        if !(e.horizon > 0.0) || e.t_grid.iter().any(|&t| !(t > 0.0 && t <= e.horizon)) {
            return Err(invalid("experiment.t_grid", "times must lie in (0, horizon]"));
        }
        if !(e.collapse_window[0] >= 0.0 && e.collapse_window[0] < e.collapse_window[1] && e.collapse_window[1] <= e.horizon) {
            return Err(invalid("experiment.collapse_window", "need 0 <= a < b <= horizon"));
        }
        if e.collapse_points < 2 {
            return Err(invalid("experiment.collapse_points", "need at least 2 points"));
        }
        if e.c_grid.iter().any(|&c| !(c > 0.0)) {
            return Err(invalid("experiment.c_grid", "entries must be positive"));
        }
        if let Some(l) = &self.ladder {
            if l.n_values.is_empty() || l.n_values.windows(2).any(|w| w[0] >= w[1]) || l.n_values[0] == 0 {
                return Err(invalid("ladder.n_values", "must be a nonempty increasing list of positive integers"));
            }
            if !(l.lambda > 0.0) || !(l.alpha >= 0.0) {
                return Err(invalid("ladder", "need lambda > 0 and alpha >= 0"));
            }
            if l.n_values.iter().any(|&n| (n as f64) < l.alpha) {
                return Err(invalid("ladder.n_values", "n must be at least alpha so that rho_n >= 0"));
            }
        }
        Ok(())
    }
}
