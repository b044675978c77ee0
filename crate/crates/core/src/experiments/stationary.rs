//! Stationary law along the ladder from regenerative cycles.

use super::{invalid, Config, ExperimentError, ExperimentReport, HeavyTrafficLadder, Outcome, Table};
use crate::network::{check_balance_identity, sample_stationary, NetworkParams, StationaryOptions};
use crate::rng::StreamKey;
use crate::row;
use crate::stats::weighted_linear_fit;

fn factorial(r: usize) -> f64 {
    (1..=r).map(|i| i as f64).product()
}

/// Moments of `‖X_n(0)‖` against `r!/αʳ`, the geometric lower bound, the
/// balance identity, the decay of `P(‖x‖ ≥ q, x_k = 0)` in `q` and the mean
/// of `ϱ` at every rung.
pub fn run_stationary(config: &Config) -> Result<ExperimentReport, ExperimentError> {
    let ladder = HeavyTrafficLadder::from_config(config)?;
    if !(ladder.alpha > 0.0) {
        return Err(invalid("ladder.alpha", "stationary experiments need alpha > 0"));
    }
    let e = &config.experiment;
    let k = ladder.mobility().nodes();
    let root = StreamKey::root(config.seed());
    let mut report = ExperimentReport::new("stationary", config.seed(), config.to_toml());
    let options = StationaryOptions {
        cycles: e.cycles,
        max_level: e.max_level,
        max_moment: e.r_max.max(2),
        ..Default::default()
    };

    let mut moments = Table::new("moments", &["n", "r", "estimate", "se", "target", "relative_error"]);
    let mut tails = Table::new("tail", &["n", "q", "p_hat", "se", "geometric_lower"]);
    let mut balance = Table::new("balance", &["n", "level", "residual", "se"]);
    let mut empty = Table::new("empty_node_tail", &["n", "node", "q", "p_hat", "se"]);
    let mut slopes = Table::new("empty_node_decay", &["n", "node", "slope", "slope_se"]);
    let mut rho = Table::new("rho", &["n", "mean_rho", "se", "cycles", "events"]);
    let mut rho_means = Vec::new();

    for (ni, &n) in ladder.n_values.iter().enumerate() {
        let params = ladder.params(n)?;
        let est = sample_stationary(&params, root.derive(20 + ni as u64), options)?;
        let cycles = est.cycles();
        let nf = n as f64;
        for r in 0..=e.r_max {
            let m = est.moment(r);
            let scale = nf.powi(r as i32);
            let target = factorial(r) / ladder.alpha.powi(r as i32);
            let (value, se) = (m.mean / scale, m.se / scale);
            let rel = (value - target).abs() / target;
            moments.push(row![n, r, value, se, target, rel]);
            if n == ladder.largest() && (1..=2).contains(&r) {
                report.verdict(format!("moment r={r} n={n}"), value, se, e.moment_tolerance, cycles, Outcome::from_bool(rel <= e.moment_tolerance));
            } else if r >= 1 {
                report.verdict(format!("moment r={r} n={n}"), value, se, e.moment_tolerance, cycles, Outcome::Info);
            }
        }

        let rho_n = params.rho();
        let mut worst = f64::INFINITY;
        for q in 1..=e.geometric_q_max {
            let t = est.tail_probability(q as usize);
            let g = rho_n.powi(q as i32);
            tails.push(row![n, q, t.mean, t.se, g]);
            worst = worst.min(t.mean + 3.0 * t.se - g);
        }
        report.verdict(format!("geometric_dominance n={n}"), worst, 0.0, 0.0, cycles, Outcome::from_bool(worst >= 0.0));

        let mut worst_z: f64 = 0.0;
        let mut checked = 0;
        for m in 1..=e.balance_levels {
            let b = check_balance_identity(&est, m)?;
            balance.push(row![n, m, b.residual, b.se]);
            worst_z = worst_z.max(if b.se > 0.0 { b.residual.abs() / b.se } else if b.residual == 0.0 { 0.0 } else { f64::INFINITY });
            checked += 1;
        }
        report.verdict(format!("balance_max_z n={n}"), worst_z, 0.0, 3.0, checked, Outcome::from_bool(worst_z <= 3.0));

        // log-linear decay of P(‖x‖ ≥ q, x_k = 0) on a doubling grid of levels
        let mut steepest_upper = f64::NEG_INFINITY;
        for node in 0..k {
            let (mut xs, mut ys, mut ws) = (Vec::new(), Vec::new(), Vec::new());
            let mut q = 1usize;
            while q <= e.max_level {
                let p = est.empty_node_tail(q, node);
                empty.push(row![n, node + 1, q, p.mean, p.se]);
                if p.mean > 0.0 && p.se > 0.0 {
                    xs.push(q as f64);
                    ys.push(p.mean.ln());
                    ws.push((p.mean / p.se).powi(2));
                }
                q *= 2;
            }
            if xs.len() >= 3 {
                let fit = weighted_linear_fit(&xs, &ys, &ws);
                slopes.push(row![n, node + 1, fit.slope, fit.slope_se]);
                steepest_upper = steepest_upper.max(fit.slope + 1.96 * fit.slope_se);
            } else {
                steepest_upper = f64::INFINITY;
            }
        }
        report.verdict(format!("empty_node_tail_decays n={n}"), steepest_upper, 0.0, 0.0, cycles, Outcome::from_bool(steepest_upper < 0.0));

        let mr = est.mean_rho();
        rho.push(row![n, mr.mean, mr.se, cycles, est.events()]);
        rho_means.push((mr.mean, mr.se));
        report.plot("mean_rho", nf, mr.mean);
        report.plot("first_moment", nf, est.moment(1).mean / nf);
    }
    let rho_ok = rho_means.windows(2).all(|w| w[1].0 <= w[0].0 + 1.96 * (w[0].1.powi(2) + w[1].1.powi(2)).sqrt());
    let last = rho_means[rho_means.len() - 1];
    report.verdict("mean_rho_nonincreasing", last.0, last.1, 0.0, e.cycles, Outcome::from_bool(rho_ok));

    // far from heavy traffic the empty probability stays below 1 − ρ, the M/M/1 value
    let light = NetworkParams::from_totals(ladder.mobility().clone(), 0.05, 1.0, &ladder.arrival_weights, &ladder.capacity_weights, None)?;
    let est = sample_stationary(&light, root.derive(29), StationaryOptions { cycles: e.cycles.min(20_000), max_level: 32, ..Default::default() })?;
    let p0 = est.level_probability(0);
    let mut sanity = Table::new("light_traffic", &["rho", "p_empty", "se", "mm1_p_empty"]);
    sanity.push(row![light.rho(), p0.mean, p0.se, 1.0 - light.rho()]);
    report.verdict("light_traffic_empty_below_mm1", p0.mean, p0.se, 1.0 - light.rho(), est.cycles(), Outcome::from_bool(p0.mean <= 1.0 - light.rho() + 3.0 * p0.se));

    report.tables.extend([moments, tails, balance, empty, slopes, rho, sanity]);
    Ok(report)
}
