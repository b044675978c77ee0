//! The heavy-traffic sequence of systems.

use super::{invalid, Config, ExperimentError};
use crate::mobility::MobilityProfile;
use crate::network::NetworkParams;

/// Systems indexed by `n` with `ρ_n = 1 − α/n`, `λ_n = λ(1 − α/(2n))` and
/// `μ_n = λ_n/ρ_n`, split across nodes by fixed weights.
#[derive(Debug, Clone)]
pub struct HeavyTrafficLadder {
    pub lambda: f64,
    pub alpha: f64,
    pub n_values: Vec<u32>,
    pub arrival_weights: Vec<f64>,
    pub capacity_weights: Vec<f64>,
    pub kappa: f64,
    mobility: MobilityProfile,
}

impl HeavyTrafficLadder {
    pub fn new(
        mobility: MobilityProfile,
        lambda: f64,
        alpha: f64,
        n_values: Vec<u32>,
        arrival_weights: Option<Vec<f64>>,
        capacity_weights: Option<Vec<f64>>,
        kappa: Option<f64>,
    ) -> Result<Self, ExperimentError> {
        let k = mobility.nodes();
        let weights = |w: Option<Vec<f64>>, key: &str| -> Result<Vec<f64>, ExperimentError> {
            let w = w.unwrap_or_else(|| vec![1.0; k]);
            if w.len() != k || w.iter().any(|&x| !(x >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
                return Err(invalid(key, format!("need {k} nonnegative weights with a positive sum")));
            }
            Ok(w)
        };
        let arrival_weights = weights(arrival_weights, "ladder.arrival_weights")?;
        let capacity_weights = weights(capacity_weights, "ladder.capacity_weights")?;
        if n_values.iter().any(|&n| (n as f64) < alpha || n == 0) {
            return Err(invalid("ladder.n_values", "need n >= max(alpha, 1)"));
        }
        let mut ladder = Self { lambda, alpha, n_values, arrival_weights, capacity_weights, kappa: 0.0, mobility };
        let sup = ladder.n_values.iter().map(|&n| ladder.lambda_n(n) + ladder.mu_n(n)).fold(0.0, f64::max);
        ladder.kappa = kappa.unwrap_or(sup);
        if ladder.kappa < sup {
            return Err(invalid("ladder.kappa", format!("{} is below sup (lambda_n + mu_n) = {sup}", ladder.kappa)));
        }
        Ok(ladder)
    }

    pub fn from_config(config: &Config) -> Result<Self, ExperimentError> {
        let l = config.ladder()?;
        Self::new(
            config.profile()?,
            l.lambda,
            l.alpha,
            l.n_values.clone(),
            l.arrival_weights.clone(),
            l.capacity_weights.clone(),
            l.kappa,
        )
    }

    pub fn mobility(&self) -> &MobilityProfile {
        &self.mobility
    }

    pub fn rho_n(&self, n: u32) -> f64 {
        1.0 - self.alpha / n as f64
    }

    pub fn lambda_n(&self, n: u32) -> f64 {
        self.lambda * (1.0 - self.alpha / (2.0 * n as f64))
    }

    /// `λ_n/ρ_n`; equal to `λ_n` when `ρ_n = 1`, and infinite only for `n = α`.
    pub fn mu_n(&self, n: u32) -> f64 {
        self.lambda_n(n) / self.rho_n(n)
    }

    pub fn params(&self, n: u32) -> Result<NetworkParams, ExperimentError> {
        Ok(NetworkParams::from_totals(
            self.mobility.clone(),
            self.lambda_n(n),
            self.mu_n(n),
            &self.arrival_weights,
            &self.capacity_weights,
            Some(self.kappa),
        )?)
    }

    pub fn largest(&self) -> u32 {
        *self.n_values.last().expect("nonempty ladder")
    }
}

/// `round(scale · π)` with the rounding remainder given to the largest fractional parts.
pub fn initial_state(scale: f64, pi: &[f64]) -> Vec<u32> {
    let target = scale.round().max(0.0) as u64;
    let raw: Vec<f64> = pi.iter().map(|p| scale * p).collect();
    let mut y: Vec<u64> = raw.iter().map(|r| r.floor() as u64).collect();
    let assigned: u64 = y.iter().sum();
    let mut order: Vec<usize> = (0..pi.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    for &i in order.iter().cycle().take(target.saturating_sub(assigned) as usize) {
        y[i] += 1;
    }
    y.into_iter().map(|v| v as u32).collect()
}
