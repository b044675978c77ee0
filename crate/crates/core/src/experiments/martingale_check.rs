//! Monte Carlo drift of the integral martingale of the closed network.

use super::{invalid, replicate, Config, ExperimentError, ExperimentReport, Outcome, Table};
use crate::martingale::{IntegralMartingale, SimplexGeometry, SpectralDecomposition};
use crate::rng::{StreamClass, StreamKey};
use crate::row;
use std::collections::BTreeMap;

/// `M_c(t) − M_c(0)` for every `c` in `experiment.c_grid` and `t` in
/// `experiment.martingale_times`, from `experiment.martingale_users` users at
/// node 1 (or `experiment.initial`), compared with zero and with the exact
/// expectation computed from the transition matrix.
pub fn run_martingale_check(config: &Config) -> Result<ExperimentReport, ExperimentError> {
    let profile = config.profile()?;
    let k = profile.nodes();
    let e = &config.experiment;
    let y: Vec<u32> = if e.initial.is_empty() {
        let mut y = vec![0; k];
        y[0] = e.martingale_users;
        y
    } else {
        e.initial.clone()
    };
    if y.len() != k {
        return Err(invalid("experiment.initial", format!("need {k} entries")));
    }
    let spec = SpectralDecomposition::new(&profile)?;
    let geometry = SimplexGeometry::from_profile(&profile);
    let times = &e.martingale_times;
    let t_max = times.iter().copied().fold(0.0, f64::max);
    let mut report = ExperimentReport::new("martingale-check", config.seed(), config.to_toml());

    // closed network at the sampled times; each user moves independently
    let key = StreamKey::root(config.seed()).derive(60);
    let states: Vec<Vec<Vec<u32>>> = replicate(key, e.reps, |rk| {
        let mut rng = rk.stream(StreamClass::Trajectories);
        let mut out = vec![vec![0u32; k]; times.len()];
        for (node, &count) in y.iter().enumerate() {
            for _ in 0..count {
                let tr = profile.sample_trajectory(node, t_max, &mut rng);
                for (slot, &t) in out.iter_mut().zip(times) {
                    slot[tr.node_at(t)] += 1;
                }
            }
        }
        Ok(out)
    })?;
    let mut counts: Vec<BTreeMap<Vec<u32>, u64>> = vec![BTreeMap::new(); times.len()];
    for rep in &states {
        for (c, s) in counts.iter_mut().zip(rep) {
            *c.entry(s.clone()).or_insert(0) += 1;
        }
    }
    let mut state_table = Table::new("state_counts", &["t", "state", "count"]);
    for (t, c) in times.iter().zip(&counts) {
        for (s, n) in c {
            state_table.push(row![t, s.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "), n]);
        }
    }

    let mut drift = Table::new("drift", &["c", "t", "mean_drift", "se", "n_reps", "verdict"]);
    let mut exact = Table::new(
        "exact",
        &["c", "t", "m0", "mc_mean", "se", "exact_mean", "exact_by_states", "core_mc_mean", "core_se", "core_exact", "core_states", "bound"],
    );
    // states expected at least this often form the core that the Monte Carlo can resolve
    let core_min = 5.0;
    let laws: Vec<BTreeMap<Vec<u32>, f64>> =
        times.iter().map(|&t| Ok(state_law(&profile.transition_matrix(t, 1e-15)?, &y))).collect::<Result<_, ExperimentError>>()?;
    let mut finiteness = Table::new("f_power_integral", &["c", "integral"]);
    let n = e.reps as f64;
    let total: u32 = y.iter().sum();
    for &c in &e.c_grid {
        let m = IntegralMartingale::new(&spec, &geometry, c, e.quad_tol)?;
        let m0 = m.value(&y, 0.0)?;
        let bound = m.bound(total)?;
        let mut cache: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        let mut integral = |state: &Vec<u32>| -> Result<f64, ExperimentError> {
            if let Some(&v) = cache.get(state) {
                return Ok(v);
            }
            let v = m.integral(state)?;
            cache.insert(state.clone(), v);
            Ok(v)
        };
        let mut sup: f64 = m0;
        for (ti, &t) in times.iter().enumerate() {
            let scale = (-c * m.gamma() * t).exp();
            let (mut s1, mut s2) = (0.0, 0.0);
            for (state, &count) in &counts[ti] {
                let v = integral(state)? * scale;
                sup = sup.max(v);
                let d = v - m0;
                s1 += count as f64 * d;
                s2 += count as f64 * d * d;
            }
            let mean = s1 / n;
            let se = ((s2 / n - mean * mean).max(0.0) / (n - 1.0).max(1.0)).sqrt();
            let ok = mean.abs() <= 3.0 * se;
            drift.push(row![c, t, mean, se, e.reps, if ok { "pass" } else { "fail" }]);
            report.verdict(format!("drift c={c} t={t}"), mean, se, 3.0 * se, e.reps as u64, Outcome::from_bool(ok));
            let ex = m.expected_value(&profile, &y, t)?;
            // the full mean is dominated by states too rare to sample, so the
            // Monte Carlo is compared on the core and the rest is checked exactly
            let (mut by_states, mut core_exact, mut core_states) = (0.0, 0.0, 0usize);
            let (mut c1, mut c2) = (0.0, 0.0);
            for (state, &p) in &laws[ti] {
                let v = integral(state)? * scale;
                by_states += p * v;
                if p * n >= core_min {
                    core_exact += p * v;
                    core_states += 1;
                    let hits = counts[ti].get(state).copied().unwrap_or(0) as f64;
                    c1 += hits * v;
                    c2 += hits * v * v;
                }
            }
            let core_mean = c1 / n;
            let core_se = ((c2 / n - core_mean * core_mean).max(0.0) / (n - 1.0).max(1.0)).sqrt();
            exact.push(row![c, t, m0, m0 + mean, se, ex, by_states, core_mean, core_se, core_exact, core_states, bound]);
            let agree = (core_mean - core_exact).abs() <= 3.0 * core_se && (by_states - ex).abs() <= 1e-6 * ex.abs().max(1e-300);
            report.verdict(
                format!("mc_vs_exact_expectation c={c} t={t}"),
                core_mean - core_exact,
                core_se,
                3.0 * core_se,
                e.reps as u64,
                Outcome::from_bool(agree),
            );
        }
        report.verdict(format!("bounded c={c}"), sup, 0.0, bound, e.reps as u64, Outcome::from_bool(sup <= bound * (1.0 + 1e-6)));
    }
    let mut worst: f64 = 0.0;
    for i in 1..20 {
        let c = i as f64 * 0.05;
        let v = IntegralMartingale::new(&spec, &geometry, c, e.quad_tol.max(1e-8))?.f_power_integral()?;
        finiteness.push(row![c, v]);
        report.plot("f_power_integral", c, v);
        worst = worst.max(v);
    }
    report.verdict("sup_f_power_integral_c_in_0_1", worst, 0.0, f64::INFINITY, 19, Outcome::Info);
    report.tables.extend([drift, exact, finiteness, state_table]);
    Ok(report)
}

/// Exact law of the closed state at time `t` from `y`, given `P(t)`: every
/// user moves independently, so the law is a convolution of categoricals.
fn state_law(p: &nalgebra::DMatrix<f64>, y: &[u32]) -> BTreeMap<Vec<u32>, f64> {
    let k = y.len();
    let mut law = BTreeMap::from([(vec![0u32; k], 1.0)]);
    for (i, &count) in y.iter().enumerate() {
        for _ in 0..count {
            let mut next = BTreeMap::new();
            for (state, &w) in &law {
                for j in (0..k).filter(|&j| p[(i, j)] > 0.0) {
                    let mut s = state.clone();
                    s[j] += 1;
                    *next.entry(s).or_insert(0.0) += w * p[(i, j)];
                }
            }
            law = next;
        }
    }
    law
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_law_is_binomial_for_two_nodes() {
        let p = nalgebra::DMatrix::from_row_slice(2, 2, &[0.7, 0.3, 0.4, 0.6]);
        let law = state_law(&p, &[3, 0]);
        assert!((law[&vec![3, 0]] - 0.343).abs() < 1e-12);
        assert!((law[&vec![1, 2]] - 3.0 * 0.7 * 0.09).abs() < 1e-12);
        assert!((law.values().sum::<f64>() - 1.0).abs() < 1e-12);
        let mixed = state_law(&p, &[1, 1]);
        assert!((mixed[&vec![2, 0]] - 0.28).abs() < 1e-12);
    }
}
