//! Direct-method (Gillespie) engine on node counts.

use super::{EventKind, NetworkParams};
use rand::Rng;
use rand_distr::Exp1;

/// Counts-only simulator state for the Markov process `x_n`.
#[derive(Debug, Clone)]
pub struct CountsEngine<'a> {
    params: &'a NetworkParams,
    exit: Vec<f64>,
    state: Vec<u32>,
}

impl<'a> CountsEngine<'a> {
    pub fn new(params: &'a NetworkParams, initial: &[u32]) -> Self {
        let exit = (0..params.nodes()).map(|k| params.mobility().exit_rate(k)).collect();
        Self { params, exit, state: initial.to_vec() }
    }

    pub fn state(&self) -> &[u32] {
        &self.state
    }

    pub fn total(&self) -> u64 {
        self.state.iter().map(|&c| c as u64).sum()
    }

    pub fn total_rate(&self) -> f64 {
        let mut rate = self.params.lambda_total();
        for (k, &c) in self.state.iter().enumerate() {
            if c > 0 {
                rate += self.params.mu_k()[k] + c as f64 * self.exit[k];
            }
        }
        rate
    }

    /// Picks the next transition given the current total rate.
    pub fn sample_kind<R: Rng + ?Sized>(&self, rate: f64, rng: &mut R) -> EventKind {
        let mut u = rng.random::<f64>() * rate;
        let lambda = self.params.lambda_k();
        let mu = self.params.mu_k();
        let mut fallback = None;
        for (k, &l) in lambda.iter().enumerate() {
            if l > 0.0 {
                if u < l {
                    return EventKind::Arrival { node: k as u16 };
                }
                u -= l;
                fallback = Some(EventKind::Arrival { node: k as u16 });
            }
        }
        for (k, &c) in self.state.iter().enumerate() {
            if c > 0 && mu[k] > 0.0 {
                if u < mu[k] {
                    return EventKind::Departure { node: k as u16 };
                }
                u -= mu[k];
                fallback = Some(EventKind::Departure { node: k as u16 });
            }
        }
        let mut mover = None;
        for (k, &c) in self.state.iter().enumerate() {
            if c > 0 && self.exit[k] > 0.0 {
                let r = c as f64 * self.exit[k];
                mover = Some(k);
                if u < r {
                    break;
                }
                u -= r;
            }
        }
        match mover {
            Some(from) => {
                let to = self.params.mobility().sample_destination(from, rng);
                EventKind::Move { from: from as u16, to: to as u16 }
            }
            // only reachable through rounding at the very end of the range
            None => fallback.expect("positive total rate"),
        }
    }

    pub fn apply(&mut self, kind: EventKind) {
        kind.apply(&mut self.state);
    }

    /// Holding time, the rate it was drawn at, and the next transition; `None`
    /// when the process is frozen.
    pub fn next_event<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<(f64, f64, EventKind)> {
        let rate = self.total_rate();
        if rate <= 0.0 {
            return None;
        }
        let e: f64 = rng.sample(Exp1);
        let kind = self.sample_kind(rate, rng);
        Some((e / rate, rate, kind))
    }
}
