//! Exact event-driven simulation of the mobile-user network.

mod coupled;
mod engine;
mod log;
mod open;
mod stationary;
mod tagged;

pub mod csv;

pub use coupled::{simulate_coupled, verify_coupling, CouplingBundle, CouplingCheck};
pub use engine::CountsEngine;
pub use log::{EventKind, EventLog, CHECKPOINT_INTERVAL};
pub use open::{simulate_open, OpenOptions, OpenRun};
pub use stationary::{check_balance_identity, sample_stationary, BalanceResidual, RatioSums, StationaryEstimate, StationaryOptions};
pub use tagged::{simulate_tagged, TaggedOptions, TaggedUserRecord};

use crate::mobility::{MobilityError, MobilityProfile};
use thiserror::Error;

/// Default guard on the number of events of a single run.
pub const DEFAULT_EVENT_BUDGET: u64 = 2_000_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("rate {name}[{index}] = {value} must be finite and nonnegative")]
    InvalidRate { name: &'static str, index: usize, value: f64 },
    #[error("kappa bound {kappa} is below lambda + mu = {total}")]
    KappaTooSmall { kappa: f64, total: f64 },
    #[error("horizon must be positive, got {0}")]
    ZeroHorizon(f64),
    #[error("event budget of {0} events exceeded")]
    EventBudgetExceeded(u64),
    #[error("tagged node {0} holds no user")]
    EmptyTagNode(usize),
    #[error("load {0} is not below 1")]
    UnstableParams(f64),
    #[error("cycle budget exceeded after {0} cycles")]
    CycleBudgetExceeded(u64),
    #[error("not enough cycles to estimate level {level}")]
    InsufficientCycles { level: usize },
    #[error(transparent)]
    Mobility(#[from] MobilityError),
}

/// Arrival and service rates of one system of the sequence.
#[derive(Debug, Clone)]
pub struct NetworkParams {
    mobility: MobilityProfile,
    lambda_k: Vec<f64>,
    mu_k: Vec<f64>,
    lambda_total: f64,
    mu_total: f64,
    rho: f64,
    kappa_bound: f64,
}

impl NetworkParams {
    /// `kappa` defaults to `λ + μ` when not given.
    pub fn new(mobility: MobilityProfile, lambda_k: Vec<f64>, mu_k: Vec<f64>, kappa: Option<f64>) -> Result<Self, NetworkError> {
        let k = mobility.nodes();
        for (name, v) in [("lambda", &lambda_k), ("mu", &mu_k)] {
            if v.len() != k {
                return Err(NetworkError::DimensionMismatch { expected: k, got: v.len() });
            }
            if let Some((index, &value)) = v.iter().enumerate().find(|(_, x)| !(x.is_finite() && **x >= 0.0)) {
                return Err(NetworkError::InvalidRate { name, index, value });
            }
        }
        let lambda_total: f64 = lambda_k.iter().sum();
        let mu_total: f64 = mu_k.iter().sum();
        let rho = if mu_total > 0.0 {
            lambda_total / mu_total
        } else if lambda_total == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        let total = lambda_total + mu_total;
        let kappa_bound = kappa.unwrap_or(total);
        if kappa_bound < total {
            return Err(NetworkError::KappaTooSmall { kappa: kappa_bound, total });
        }
        Ok(Self { mobility, lambda_k, mu_k, lambda_total, mu_total, rho, kappa_bound })
    }

    /// Splits totals `lambda`, `mu` across nodes proportionally to the weights.
    pub fn from_totals(
        mobility: MobilityProfile,
        lambda: f64,
        mu: f64,
        lambda_weights: &[f64],
        mu_weights: &[f64],
        kappa: Option<f64>,
    ) -> Result<Self, NetworkError> {
        let split = |total: f64, w: &[f64]| {
            let s: f64 = w.iter().sum();
            w.iter().map(|x| total * x / s).collect::<Vec<_>>()
        };
        Self::new(mobility, split(lambda, lambda_weights), split(mu, mu_weights), kappa)
    }

    pub fn mobility(&self) -> &MobilityProfile {
        &self.mobility
    }

    pub fn nodes(&self) -> usize {
        self.mobility.nodes()
    }

    pub fn lambda_k(&self) -> &[f64] {
        &self.lambda_k
    }

    pub fn mu_k(&self) -> &[f64] {
        &self.mu_k
    }

    pub fn lambda_total(&self) -> f64 {
        self.lambda_total
    }

    pub fn mu_total(&self) -> f64 {
        self.mu_total
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn kappa_bound(&self) -> f64 {
        self.kappa_bound
    }

    /// `λ + Σ_k μ_k 1{y_k>0} + Σ_k y_k (−q_kk)`.
    pub fn total_event_rate(&self, y: &[u32]) -> f64 {
        let mut rate = self.lambda_total;
        for (k, &c) in y.iter().enumerate() {
            if c > 0 {
                rate += self.mu_k[k] + c as f64 * self.mobility.exit_rate(k);
            }
        }
        rate
    }
}

fn check_initial(params: &NetworkParams, initial: &[u32], horizon: f64) -> Result<(), NetworkError> {
    if initial.len() != params.nodes() {
        return Err(NetworkError::DimensionMismatch { expected: params.nodes(), got: initial.len() });
    }
    if !(horizon > 0.0) {
        return Err(NetworkError::ZeroHorizon(horizon));
    }
    Ok(())
}
