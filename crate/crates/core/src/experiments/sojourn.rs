//! Sojourn time of a tagged user, from a fixed homogenized start and from the
//! stationary regime.

use super::{initial_state, invalid, replicate, Config, ExperimentError, ExperimentReport, HeavyTrafficLadder, Outcome, Table};
use crate::network::{sample_stationary, simulate_tagged, NetworkParams, StationaryOptions, TaggedOptions};
use crate::rng::{StreamClass, StreamKey};
use crate::row;
use crate::stats::{ks_critical, ks_one_sample, ks_two_sample, mean_se, median, median_interval};
use rand::Rng;
use rand_distr::Exp1;

/// Picks the node of a uniformly chosen user.
fn uniform_user_node<R: Rng + ?Sized>(y: &[u32], rng: &mut R) -> usize {
    let total: u64 = y.iter().map(|&v| v as u64).sum();
    let mut u = rng.random_range(0..total);
    for (k, &v) in y.iter().enumerate() {
        if u < v as u64 {
            return k;
        }
        u -= v as u64;
    }
    unreachable!("u < total")
}

#[derive(Debug, Clone, Copy)]
struct Tagged {
    /// `χ_n/n`, infinite when censored by the horizon.
    scaled: f64,
    /// `sup_t |s_n(nt) − λt/b|` over the grid points before departure.
    service_gap: f64,
}

fn tagged_run(params: &NetworkParams, y: &[u32], n: u32, slope: f64, horizon: f64, key: StreamKey) -> Result<Tagged, ExperimentError> {
    let node = uniform_user_node(y, &mut key.stream(StreamClass::Setup));
    let run = simulate_tagged(params, y, node, horizon, key, TaggedOptions::default())?;
    let nf = n as f64;
    let chi = run.record.sojourn.unwrap_or(f64::INFINITY);
    let mut gap: f64 = 0.0;
    for i in 1..=50 {
        let t = i as f64 * 0.05;
        if nf * t >= chi.min(horizon) {
            break;
        }
        gap = gap.max((run.record.service_at(nf * t) - slope * t).abs());
    }
    Ok(Tagged { scaled: chi / nf, service_gap: gap })
}

/// Fixed-start mode at every rung: `χ_n/n` against an exponential law of mean
/// `b/λ` and the attained service against the line `λt/b`. Stationary mode at
/// the largest rung: `χ_n/n` against `E′E/λ`.
pub fn run_sojourn(config: &Config) -> Result<ExperimentReport, ExperimentError> {
    let ladder = HeavyTrafficLadder::from_config(config)?;
    let e = &config.experiment;
    let b = e.sojourn_b;
    if !(b > 0.0) {
        return Err(invalid("experiment.sojourn_b", "must be positive"));
    }
    let pi = ladder.mobility().pi().to_vec();
    let lambda = ladder.lambda;
    let mean = b / lambda;
    let root = StreamKey::root(config.seed());
    let mut report = ExperimentReport::new("sojourn", config.seed(), config.to_toml());
    let mut fixed = Table::new("fixed_start", &["n", "initial", "ks", "p_value", "critical_95", "mean", "se", "censored", "service_gap_median"]);
    let mut per_rep = Table::new("replications", &["mode", "n", "rep", "chi_over_n", "service_gap"]);
    let mut gap_meds = Vec::new();
    let mut ks_last = (f64::NAN, f64::NAN);

    for (ni, &n) in ladder.n_values.iter().enumerate() {
        let params = ladder.params(n)?;
        let y = initial_state(n as f64 * b, &pi);
        if y.iter().all(|&v| v == 0) {
            return Err(invalid("experiment.sojourn_b", format!("round(n b pi) is empty at n = {n}")));
        }
        let horizon = 60.0 * n as f64 * mean;
        let runs = replicate(root.derive(30 + ni as u64), e.reps, |key| tagged_run(&params, &y, n, lambda / b, horizon, key))?;
        let xs: Vec<f64> = runs.iter().map(|r| r.scaled).collect();
        let finite: Vec<f64> = xs.iter().copied().filter(|v| v.is_finite()).collect();
        let ks = ks_one_sample(&xs, |x| if x.is_finite() { 1.0 - (-x / mean).exp() } else { 1.0 });
        let m = mean_se(&finite);
        let gaps: Vec<f64> = runs.iter().map(|r| r.service_gap).collect();
        let (lo, hi) = median_interval(&gaps, 1.96);
        gap_meds.push((median(&gaps), lo, hi));
        let crit = ks_critical(xs.len() as f64, 0.05);
        let label = y.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
        fixed.push(row![n, label, ks.statistic, ks.p_value, crit, m.mean, m.se, xs.len() - finite.len(), median(&gaps)]);
        for (r, t) in runs.iter().enumerate() {
            per_rep.push(row!["fixed", n, r, t.scaled, t.service_gap]);
        }
        report.plot("fixed_ks", n as f64, ks.statistic);
        report.plot("service_gap_median", n as f64, median(&gaps));
        ks_last = (ks.statistic, crit);
    }
    let reps = e.reps as u64;
    report.verdict(
        format!("fixed_start_ks n={}", ladder.largest()),
        ks_last.0,
        ks_last.1,
        e.ks_threshold,
        reps,
        Outcome::from_bool(ks_last.0 <= e.ks_threshold),
    );
    let gap_ok = gap_meds.windows(2).all(|w| w[1].0 <= w[0].0 || w[1].1 <= w[0].2);
    let g = gap_meds[gap_meds.len() - 1];
    report.verdict("service_gap_median_nonincreasing", g.0, 0.5 * (g.2 - g.1), 0.0, reps, Outcome::from_bool(gap_ok));

    let mut stationary = Table::new("stationary_mode", &["n", "ks", "p_value", "critical_95", "mean", "se", "target_mean", "resamples"]);
    if ladder.alpha > 0.0 {
        let n = ladder.largest();
        let params = ladder.params(n)?;
        let opts = StationaryOptions { cycles: e.cycles.min(20_000), max_level: e.max_level, keep_histogram: true, ..Default::default() };
        let est = sample_stationary(&params, root.derive(39), opts)?;
        let sampler = est.state_sampler().ok_or_else(|| invalid("experiment.cycles", "no stationary histogram"))?;
        let horizon = 60.0 * n as f64 * mean.max(1.0 / ladder.alpha) * (1.0 + 1.0 / ladder.alpha);
        let runs = replicate(root.derive(40), e.reps, |key| {
            let mut rng = key.stream(StreamClass::Auxiliary);
            let mut resamples = 0u64;
            let y = loop {
                let y = sampler.sample(&mut rng);
                if y.iter().any(|&v| v > 0) {
                    break y.to_vec();
                }
                resamples += 1;
            };
            Ok((tagged_run(&params, &y, n, lambda / b, horizon, key)?, resamples))
        })?;
        let xs: Vec<f64> = runs.iter().map(|r| r.0.scaled).collect();
        let resamples: u64 = runs.iter().map(|r| r.1).sum();
        let mut direct_rng = root.derive(41).stream(StreamClass::Auxiliary);
        let direct: Vec<f64> = (0..e.reps)
            .map(|_| {
                let e1: f64 = direct_rng.sample(Exp1);
                let e2: f64 = direct_rng.sample(Exp1);
                e1 / ladder.alpha * e2 / lambda
            })
            .collect();
        let ks = ks_two_sample(&xs, &direct);
        let crit = ks_critical(ks.n_eff, 0.05);
        let finite: Vec<f64> = xs.iter().copied().filter(|v| v.is_finite()).collect();
        let m = mean_se(&finite);
        let target = 1.0 / (ladder.alpha * lambda);
        stationary.push(row![n, ks.statistic, ks.p_value, crit, m.mean, m.se, target, resamples]);
        for (r, x) in xs.iter().enumerate() {
            per_rep.push(row!["stationary", n, r, x, ""]);
        }
        report.verdict(format!("stationary_ks n={n}"), ks.statistic, crit, e.ks_two_sample_threshold, reps, Outcome::from_bool(ks.statistic <= e.ks_two_sample_threshold));
        report.verdict(format!("stationary_mean n={n}"), m.mean, m.se, target, m.n as u64, Outcome::Info);
    }
    report.tables.extend([fixed, stationary, per_rep]);
    Ok(report)
}
