//! Homogenized states stay homogenized while the population is large.

use super::{initial_state, replicate, Config, ExperimentError, ExperimentReport, Outcome, Table};
use crate::mobility::rho_metric;
use crate::network::{simulate_open, NetworkParams, OpenOptions};
use crate::path::{first_hit_above, first_hit_below, scaled_ratio, PathBuilder, PiecewisePath, StatePath};
use crate::rng::StreamKey;
use crate::row;
use crate::stats::{weighted_linear_fit, wilson_interval};

/// `r − π` along `x`, with `r = π` on empty states.
fn centered_ratio(x: &StatePath, pi: &[f64]) -> Result<StatePath, ExperimentError> {
    let r = scaled_ratio(x, pi)?;
    let mut b = PathBuilder::with_capacity(r.dim(), r.len());
    let mut row = vec![0.0; r.dim()];
    for i in 0..r.len() {
        for (k, v) in row.iter_mut().enumerate() {
            *v = r.coord(i, k) - pi[k];
        }
        b.push(r.time(i), &row);
    }
    Ok(b.finish(r.horizon()))
}

/// Whether `T↑(r − π, δ) ≤ t ∧ T↓(x, φ)` on a run of length `t`.
pub fn deviates_before_drain(x: &StatePath, pi: &[f64], delta: f64, phi: u32) -> Result<bool, ExperimentError> {
    let Some(t_r) = first_hit_above(&centered_ratio(x, pi)?, delta) else {
        return Ok(false);
    };
    Ok(first_hit_below(x, phi as f64).is_none_or(|t_x| t_r <= t_x))
}

/// Frequency of a `δ`-deviation of the empirical distribution before the
/// population falls to `φ`, from `y = round(2φπ)`, over `experiment.phi_grid`,
/// with a weighted log-linear fit in `φ`.
pub fn run_hitting_diagnostics(config: &Config) -> Result<ExperimentReport, ExperimentError> {
    let profile = config.profile()?;
    let k = profile.nodes();
    let e = &config.experiment;
    let params = NetworkParams::from_totals(profile.clone(), e.hitting_lambda, e.hitting_mu, &vec![1.0; k], &vec![1.0; k], None)?;
    let pi = profile.pi().to_vec();
    let eta = profile.pi_min() * e.delta * e.delta / 32.0;
    let root = StreamKey::root(config.seed());
    let mut report = ExperimentReport::new("hitting", config.seed(), config.to_toml());
    let mut table = Table::new("frequency", &["phi", "initial", "rho_initial", "eta", "hits", "reps", "p_hat", "wilson_lo", "wilson_hi"]);
    let mut per_rep = Table::new("replications", &["phi", "rep", "hit"]);
    let (mut xs, mut ys, mut ws) = (Vec::new(), Vec::new(), Vec::new());
    let mut precondition = true;

    for (i, &phi) in e.phi_grid.iter().enumerate() {
        let y = initial_state(2.0 * phi as f64, &pi);
        let rho0 = rho_metric(&y, &pi)?;
        precondition &= rho0 <= eta;
        let hits = replicate(root.derive(50 + i as u64), e.reps, |key| {
            let run = simulate_open(&params, &y, e.hitting_t, key, OpenOptions::default())?;
            deviates_before_drain(&run.path(), &pi, e.delta, phi)
        })?;
        let s = hits.iter().filter(|&&h| h).count() as u64;
        let n = hits.len() as u64;
        let (lo, hi) = wilson_interval(s, n, 1.96);
        let label = y.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
        table.push(row![phi, label, rho0, eta, s, n, s as f64 / n as f64, lo, hi]);
        for (r, h) in hits.iter().enumerate() {
            per_rep.push(row![phi, r, *h as u8]);
        }
        // continuity-corrected log frequency and its delta-method variance
        let p = (s as f64 + 0.5) / (n as f64 + 1.0);
        xs.push(phi as f64);
        ys.push(p.ln());
        ws.push((n as f64 + 1.0) * p / (1.0 - p));
        report.plot("log_frequency", phi as f64, p.ln());
        let total: f64 = y.iter().map(|&v| v as f64).sum();
        let overlay = k as f64 * e.hitting_t.ln() - e.delta * e.delta * total / 8.0;
        report.plot("closed_system_log_bound", phi as f64, overlay);
    }
    report.verdict("initial_rho_below_eta", precondition as u8 as f64, 0.0, eta, e.phi_grid.len() as u64, Outcome::from_bool(precondition));
    if xs.len() >= 2 {
        let fit = weighted_linear_fit(&xs, &ys, &ws);
        let upper = fit.slope + 1.96 * fit.slope_se;
        let mut fits = Table::new("fit", &["intercept", "slope", "slope_se", "upper_95"]);
        fits.push(row![fit.intercept, fit.slope, fit.slope_se, upper]);
        report.tables.push(fits);
        report.verdict("log_frequency_slope", fit.slope, fit.slope_se, 0.0, e.reps as u64 * xs.len() as u64, Outcome::from_bool(upper < 0.0));
    }
    report.tables.extend([table, per_rep]);
    Ok(report)
}
