//! Homogenization of the closed and open networks in constant time.

use super::{replicate, Config, ExperimentError, ExperimentReport, HeavyTrafficLadder, Outcome, Table};
use crate::diffusion::poisson_tail;
use crate::mobility::rho_metric;
use crate::network::{simulate_coupled, verify_coupling};
use crate::path::PiecewisePath;
use crate::rng::StreamKey;
use crate::row;
use crate::stats::wilson_interval;

pub(crate) fn state_at(path: &impl PiecewisePath, t: f64) -> Vec<u32> {
    path.eval(t).iter().map(|v| v.round() as u32).collect()
}

/// `2K exp(−ε²‖y‖/(4K²))`.
pub fn closed_bound(k: usize, eps: f64, total: u64) -> f64 {
    let k = k as f64;
    2.0 * k * (-eps * eps * total as f64 / (4.0 * k * k)).exp()
}

/// `P(Poisson(κτ) ≥ δ‖y‖/(4K)) + 2K exp(−δ²‖y‖/(16K²))`.
pub fn open_bound(k: usize, delta: f64, total: u64, kappa: f64, tau: f64) -> f64 {
    let kf = k as f64;
    let level = (delta * total as f64 / (4.0 * kf)).ceil() as u64;
    poisson_tail(kappa * tau, level) + 2.0 * kf * (-delta * delta * total as f64 / (16.0 * kf * kf)).exp()
}

/// For every initial state and every `ε`: the frequency of `ϱ(x'(τ(ε/(2K)))) ≥ ε`
/// in the closed network and of `ϱ(x(τ(ε/(4K)))) ≥ ε` in the open network at the
/// largest ladder rung, against the corresponding exponential bounds.
pub fn run_homogenization(config: &Config) -> Result<ExperimentReport, ExperimentError> {
    let ladder = HeavyTrafficLadder::from_config(config)?;
    let params = ladder.params(ladder.largest())?;
    let profile = params.mobility().clone();
    let k = profile.nodes();
    let pi = profile.pi().to_vec();
    let e = &config.experiment;
    let states = if e.initial_states.is_empty() {
        let mut y = vec![0u32; k];
        y[0] = 2000;
        vec![y]
    } else {
        e.initial_states.clone()
    };
    if let Some(y) = states.iter().find(|y| y.len() != k) {
        return Err(super::invalid("experiment.initial_states", format!("state {y:?} does not have {k} entries")));
    }
    let mut report = ExperimentReport::new("homogenize", config.seed(), config.to_toml());
    let times: Vec<(f64, f64, f64)> = e
        .eps_grid
        .iter()
        .map(|&eps| Ok((eps, profile.mixing_time(eps / (2.0 * k as f64))?, profile.mixing_time(eps / (4.0 * k as f64))?)))
        .collect::<Result<_, ExperimentError>>()?;
    let horizon = times.iter().map(|t| t.1.max(t.2)).fold(1e-9, f64::max);

    let mut summary = Table::new(
        "summary",
        &["state", "eps", "system", "t", "exceed", "reps", "p_hat", "se", "wilson_lo", "wilson_hi", "bound", "verdict"],
    );
    let mut reps_table = Table::new("replications", &["state", "rep", "eps", "rho_closed", "rho_open"]);
    let mut sanity = Table::new("initial_rho", &["state", "rho"]);
    let mut assertions = 0u64;
    let mut violations = 0u64;
    for (si, y) in states.iter().enumerate() {
        let label = y.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
        let total: u64 = y.iter().map(|&v| v as u64).sum();
        sanity.push(row![label, rho_metric(y, &pi)?]);
        let key = StreamKey::root(config.seed()).derive(100 + si as u64);
        let runs = replicate(key, e.reps, |rk| {
            let b = simulate_coupled(&params, y, horizon, rk)?;
            let check = verify_coupling(&b, &pi);
            let mut rhos = Vec::with_capacity(times.len());
            for &(_, tc, to) in &times {
                rhos.push((rho_metric(&state_at(&b.closed_path, tc), &pi)?, rho_metric(&state_at(&b.open_path, to), &pi)?));
            }
            Ok((check.assertions, check.violations.len() as u64, rhos))
        })?;
        for (r, (a, v, rhos)) in runs.iter().enumerate() {
            assertions += a;
            violations += v;
            for (&(eps, _, _), (c, o)) in times.iter().zip(rhos) {
                reps_table.push(row![label, r, eps, c, o]);
            }
        }
        for (j, &(eps, tc, to)) in times.iter().enumerate() {
            for (system, t, bound) in
                [("closed", tc, closed_bound(k, eps, total)), ("open", to, open_bound(k, eps, total, ladder.kappa, to))]
            {
                let exceed = runs
                    .iter()
                    .filter(|run| {
                        let (c, o) = run.2[j];
                        (if system == "closed" { c } else { o }) >= eps
                    })
                    .count() as u64;
                let n = runs.len() as u64;
                let p = exceed as f64 / n as f64;
                let se = (p * (1.0 - p) / n as f64).sqrt();
                let (lo, hi) = wilson_interval(exceed, n, 1.96);
                let ok = p <= bound + 3.0 * se;
                summary.push(row![label, eps, system, t, exceed, n, p, se, lo, hi, bound, if ok { "pass" } else { "fail" }]);
                report.verdict(format!("{system} [{label}] eps={eps}"), p, se, bound, n, Outcome::from_bool(ok));
            }
        }
    }
    report.verdict("coupling_violations", violations as f64, 0.0, 0.0, assertions, Outcome::from_bool(violations == 0 && assertions > 0));
    report.tables.extend([summary, sanity, reps_table]);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_formulas() {
        // 4 e^{-5} for K = 2, ε = 0.2, ‖y‖ = 2000
        assert!((closed_bound(2, 0.2, 2000) - 4.0 * (-5.0f64).exp()).abs() < 1e-15);
        assert_eq!(closed_bound(3, 0.1, 0), 6.0);
        let b = open_bound(2, 0.2, 2000, 3.0, 1.0);
        let tail = 2.0 * 2.0 * (-0.04 * 2000.0 / 64.0f64).exp();
        assert!((b - tail - poisson_tail(3.0, 50)).abs() < 1e-15);
        // a large κτ makes the Poisson term dominate
        assert!(open_bound(2, 0.2, 2000, 60.0, 1.0) > 0.5);
    }
}
