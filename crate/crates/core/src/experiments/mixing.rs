//! Mixing times of the single-user chain and raw coupled simulations.

use super::{initial_state, replicate, Config, ExperimentError, ExperimentReport, HeavyTrafficLadder, Outcome, Table};
use crate::network::{csv, simulate_coupled, verify_coupling};
use crate::path::PiecewisePath;
use crate::row;
use crate::rng::StreamKey;

/// `τ(ε)` over `experiment.eps_grid`, with `Δ` just after `τ(ε)` as a check.
pub fn run_mixing(config: &Config) -> Result<ExperimentReport, ExperimentError> {
    let profile = config.profile()?;
    let mut report = ExperimentReport::new("mixing", config.seed(), config.to_toml());
    let mut eps: Vec<f64> = config.experiment.eps_grid.clone();
    eps.sort_by(f64::total_cmp);
    let mut table = Table::new("tau", &["eps", "tau", "delta_after_tau"]);
    let mut taus = Vec::new();
    let mut worst_after: f64 = 0.0;
    for &e in &eps {
        let tau = profile.mixing_time(e)?;
        let after = profile.delta(tau * (1.0 + 1e-9) + 1e-12)?;
        worst_after = worst_after.max(after / e);
        table.push(row![e, tau, after]);
        taus.push(tau);
    }
    report.tables.push(table);
    let monotone = taus.windows(2).all(|w| w[1] <= w[0]);
    report.verdict("tau_nonincreasing_in_eps", monotone as u8 as f64, 0.0, 1.0, taus.len() as u64, Outcome::from_bool(monotone));
    report.verdict("max_delta_after_tau_over_eps", worst_after, 0.0, 1.0, taus.len() as u64, Outcome::from_bool(worst_after < 1.0));

    let horizon = taus.first().copied().unwrap_or(1.0 / profile.gamma()).max(1.0 / profile.gamma()) * 1.5;
    let times: Vec<f64> = (0..=100).map(|i| horizon * i as f64 / 100.0).collect();
    let prof = profile.mixing_profile(&times)?;
    for (t, d) in prof.times.iter().zip(&prof.delta_values) {
        report.plot("delta", *t, *d);
    }
    Ok(report)
}

/// Coupled replications of the open network, the closed network and the
/// M/M/1 queue at the first ladder rung, with the pathwise checks of every
/// replication and the paths of replication 0.
pub fn run_simulate(config: &Config) -> Result<ExperimentReport, ExperimentError> {
    let ladder = HeavyTrafficLadder::from_config(config)?;
    let n = ladder.n_values[0];
    let params = ladder.params(n)?;
    let pi = params.mobility().pi().to_vec();
    let e = &config.experiment;
    let initial = if e.initial.is_empty() { initial_state(n as f64, &pi) } else { e.initial.clone() };
    let horizon = e.simulate_horizon;
    let key = StreamKey::root(config.seed()).derive(1);
    let mut report = ExperimentReport::new("simulate", config.seed(), config.to_toml());

    let checks = replicate(key, e.reps, |k| {
        let b = simulate_coupled(&params, &initial, horizon, k)?;
        let c = verify_coupling(&b, &pi);
        Ok((b.open_log.len(), c))
    })?;
    let mut table = Table::new("coupling", &["rep", "events", "event_times", "assertions", "violations"]);
    let (mut assertions, mut violations) = (0u64, 0u64);
    for (r, (events, c)) in checks.iter().enumerate() {
        table.push(row![r, events, c.event_times, c.assertions, c.violations.len()]);
        assertions += c.assertions;
        violations += c.violations.len() as u64;
    }
    report.tables.push(table);
    report.verdict("coupling_violations", violations as f64, 0.0, 0.0, assertions, Outcome::from_bool(violations == 0));
    report.verdict("coupling_assertions", assertions as f64, 0.0, 1.0, checks.len() as u64, Outcome::from_bool(assertions > 0));

    let b = simulate_coupled(&params, &initial, horizon, key.with_replication(0))?;
    let grid: Vec<f64> = (0..=200).map(|i| horizon * i as f64 / 200.0).collect();
    for (name, path) in [("open_path", &b.open_path), ("closed_path", &b.closed_path)] {
        let mut buf = Vec::new();
        csv::write_path(&mut buf, path, &grid)?;
        report.tables.push(Table::from_csv(name, &buf));
    }
    let mut buf = Vec::new();
    csv::write_event_log(&mut buf, &b.open_log)?;
    report.tables.push(Table::from_csv("event_log", &buf));
    for &t in &grid {
        report.plot("open_total", t, b.open_path.norm_at(t));
        report.plot("mm1", t, b.mm1_path.norm_at(t));
    }
    Ok(report)
}
