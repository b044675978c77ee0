//! Diffusive limit along the heavy-traffic ladder.

use super::{initial_state, replicate, Config, ExperimentError, ExperimentReport, HeavyTrafficLadder, Outcome, Table};
use crate::diffusion::{rbm_marginal_cdf, rbm_sample_path, Reflection, RbmParams};
use crate::network::{simulate_coupled, verify_coupling};
use crate::path::{collapse_gap, first_excursion, first_hit_above, rescale, PiecewisePath};
use crate::rng::StreamKey;
use crate::row;
use crate::stats::{ks_critical, ks_one_sample, ks_two_sample, median, median_interval, quantile};

/// Per-replication summary of one run from the empty state.
#[derive(Debug, Clone, PartialEq)]
struct RunSummary {
    norms: Vec<f64>,
    collapse: f64,
    /// `‖R_n(T↑(X_n, ε)) − π‖`, when the level is reached.
    ratio_gap: Option<f64>,
    excursion: Option<Excursion>,
    /// `g_ε(L_n)` for the dominating queue, when it reaches the level.
    g_mm1: Option<f64>,
    assertions: u64,
    violations: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Excursion {
    g_eps: f64,
    /// Time from `T↑` to the end of the excursion; infinite when censored by the horizon.
    t0: f64,
    max_height: f64,
}

fn excursion_of(f: &impl PiecewisePath, eps: f64) -> Option<Excursion> {
    first_excursion(f, eps).ok().map(|r| Excursion {
        g_eps: r.g_eps,
        t0: r.t0_after.map_or(f64::INFINITY, |t| t - r.t_up),
        max_height: r.max_height,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Non-increasing up to `slack[i]` between consecutive entries.
fn nonincreasing(values: &[f64], slack: &[f64]) -> bool {
    values.windows(2).zip(slack.windows(2)).all(|(v, s)| v[1] <= v[0] + s[0].max(s[1]))
}

/// Replicates `X_n` from the empty state at every rung and compares its
/// marginals, its distance to the ray `{cπ}`, the ratio at the first passage
/// above `ε` and the first excursion above `ε` with the reflected Brownian
/// reference.
pub fn run_heavy_traffic(config: &Config) -> Result<ExperimentReport, ExperimentError> {
    let ladder = HeavyTrafficLadder::from_config(config)?;
    let e = &config.experiment;
    let pi = ladder.mobility().pi().to_vec();
    let k = pi.len();
    let rbm = RbmParams::new(ladder.lambda, ladder.alpha)?;
    let horizon = e.horizon;
    let eps = e.excursion_eps;
    let grid: Vec<f64> = (0..e.collapse_points)
        .map(|i| e.collapse_window[0] + (e.collapse_window[1] - e.collapse_window[0]) * i as f64 / (e.collapse_points - 1) as f64)
        .collect();
    let root = StreamKey::root(config.seed());
    let mut report = ExperimentReport::new("heavy-traffic", config.seed(), config.to_toml());

    let reference: Vec<Option<Excursion>> = replicate(root.derive(2), e.reps, |key| {
        let path = rbm_sample_path(&rbm, horizon, e.rbm_step, Reflection::Projected, key)?;
        Ok(excursion_of(&path, eps))
    })?;
    let reference: Vec<Excursion> = reference.into_iter().flatten().collect();

    let mut marginal = Table::new("marginal", &["n", "t", "ks", "p_value", "n_samples", "critical_95"]);
    let mut collapse = Table::new("collapse", &["n", "median", "ci_lo", "ci_hi", "q25", "q75", "q90"]);
    let mut ratio = Table::new("ratio_at_level", &["n", "reached", "median", "ci_lo", "ci_hi", "q90"]);
    let mut exc = Table::new("excursions", &["n", "quantity", "ks", "p_value", "n_sim", "n_ref", "critical_95"]);
    let mut per_rep = Table::new(
        "replications",
        &["n", "rep", "norms", "collapse_gap", "ratio_gap", "g_eps", "t0", "max_height", "g_eps_mm1"],
    );

    let mut ks_by_t: Vec<Vec<(f64, f64)>> = vec![Vec::new(); e.t_grid.len()];
    let mut collapse_meds = Vec::new();
    let mut ratio_meds = Vec::new();
    let mut exc_ks: Vec<Vec<(f64, f64)>> = vec![Vec::new(); 3];
    let (mut assertions, mut violations, mut g_checked, mut g_violations, mut unreached) = (0u64, 0u64, 0u64, 0u64, 0u64);

    for (ni, &n) in ladder.n_values.iter().enumerate() {
        let params = ladder.params(n)?;
        let base_horizon = (n as f64).powi(2) * horizon;
        let empty = vec![0u32; k];
        let runs = replicate(root.derive(10 + ni as u64), e.reps, |key| {
            let b = simulate_coupled(&params, &empty, base_horizon, key)?;
            let check = verify_coupling(&b, &pi);
            let x = rescale(&b.open_path, n);
            let ell = rescale(&b.mm1_path, n);
            let norms = e.t_grid.iter().map(|&t| x.norm_at(t)).collect();
            let ratio_gap = first_hit_above(&x, eps).map(|t| {
                let v = x.eval(t);
                let s: f64 = v.iter().sum();
                v.iter().zip(&pi).map(|(a, p)| (a / s - p).abs()).sum()
            });
            Ok(RunSummary {
                norms,
                collapse: collapse_gap(&x, &pi, &grid)?,
                ratio_gap,
                excursion: excursion_of(&x, eps),
                g_mm1: excursion_of(&ell, eps).map(|r| r.g_eps),
                assertions: check.assertions,
                violations: check.violations.len() as u64,
            })
        })?;

        for (r, s) in runs.iter().enumerate() {
            assertions += s.assertions;
            violations += s.violations;
            if let (Some(x), Some(g)) = (s.excursion, s.g_mm1) {
                g_checked += 1;
                g_violations += (x.g_eps > g) as u64;
            }
            unreached += s.excursion.is_none() as u64;
            let norms = s.norms.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
            per_rep.push(row![
                n,
                r,
                norms,
                s.collapse,
                fmt_opt(s.ratio_gap),
                fmt_opt(s.excursion.map(|x| x.g_eps)),
                fmt_opt(s.excursion.map(|x| x.t0)),
                fmt_opt(s.excursion.map(|x| x.max_height)),
                fmt_opt(s.g_mm1)
            ]);
        }

        let crit = ks_critical(runs.len() as f64, 0.05);
        for (ti, &t) in e.t_grid.iter().enumerate() {
            let xs: Vec<f64> = runs.iter().map(|s| s.norms[ti]).collect();
            let ks = ks_one_sample(&xs, |x| rbm_marginal_cdf(&rbm, t, x).unwrap_or(f64::NAN));
            marginal.push(row![n, t, ks.statistic, ks.p_value, xs.len(), crit]);
            ks_by_t[ti].push((ks.statistic, crit));
            report.plot(format!("ks t={t}"), n as f64, ks.statistic);
        }

        let gaps: Vec<f64> = runs.iter().map(|s| s.collapse).collect();
        let (lo, hi) = median_interval(&gaps, 1.96);
        let med = median(&gaps);
        collapse.push(row![n, med, lo, hi, quantile(&gaps, 0.25), quantile(&gaps, 0.75), quantile(&gaps, 0.9)]);
        collapse_meds.push((med, lo, hi));
        report.plot("collapse_median", n as f64, med);

        let rg: Vec<f64> = runs.iter().filter_map(|s| s.ratio_gap).collect();
        let (lo, hi) = median_interval(&rg, 1.96);
        ratio.push(row![n, rg.len(), median(&rg), lo, hi, quantile(&rg, 0.9)]);
        ratio_meds.push((median(&rg), lo, hi));

        let sim: Vec<Excursion> = runs.iter().filter_map(|s| s.excursion).collect();
        let pick: [fn(&Excursion) -> f64; 3] = [|x| x.g_eps, |x| x.t0, |x| x.max_height];
        for (qi, name) in ["g_eps", "t0_after_level", "max_height"].iter().enumerate() {
            let a: Vec<f64> = sim.iter().map(pick[qi]).collect();
            let b: Vec<f64> = reference.iter().map(pick[qi]).collect();
            let ks = ks_two_sample(&a, &b);
            let crit = ks_critical(ks.n_eff, 0.05);
            exc.push(row![n, name, ks.statistic, ks.p_value, a.len(), b.len(), crit]);
            exc_ks[qi].push((ks.statistic, crit));
        }
    }

    let reps = e.reps as u64;
    let last = ladder.n_values.len() - 1;
    for (ti, &t) in e.t_grid.iter().enumerate() {
        let (vals, slack): (Vec<f64>, Vec<f64>) = ks_by_t[ti].iter().copied().unzip();
        let mono = nonincreasing(&vals, &slack);
        report.verdict(format!("marginal_ks_nonincreasing t={t}"), vals[last], slack[last], 0.0, reps, Outcome::from_bool(mono));
        let final_ok = vals[last] <= e.ks_threshold;
        report.verdict(format!("marginal_ks n={} t={t}", ladder.largest()), vals[last], slack[last], e.ks_threshold, reps, Outcome::from_bool(final_ok));
    }
    // CI overlap: the next median's lower limit may not exceed this median's upper limit
    let ci_mono = |m: &[(f64, f64, f64)]| m.windows(2).all(|w| w[1].0 <= w[0].0 || w[1].1 <= w[0].2);
    let (med, lo, hi) = collapse_meds[last];
    report.verdict("collapse_median_nonincreasing", med, 0.5 * (hi - lo), 0.0, reps, Outcome::from_bool(ci_mono(&collapse_meds)));
    report.verdict(
        format!("collapse_median n={}", ladder.largest()),
        med,
        0.5 * (hi - lo),
        e.collapse_threshold,
        reps,
        Outcome::from_bool(med <= e.collapse_threshold),
    );
    let (med, lo, hi) = ratio_meds[last];
    report.verdict("ratio_gap_median_nonincreasing", med, 0.5 * (hi - lo), 0.0, reps, Outcome::from_bool(ci_mono(&ratio_meds)));
    for (qi, name) in ["g_eps", "t0_after_level", "max_height"].iter().enumerate() {
        let (vals, slack): (Vec<f64>, Vec<f64>) = exc_ks[qi].iter().copied().unzip();
        report.verdict(format!("excursion_ks_nonincreasing {name}"), vals[last], slack[last], 0.0, reps, Outcome::from_bool(nonincreasing(&vals, &slack)));
    }
    report.verdict("g_eps_dominated_by_mm1", g_violations as f64, 0.0, 0.0, g_checked, Outcome::from_bool(g_violations == 0));
    report.verdict("coupling_violations", violations as f64, 0.0, 0.0, assertions, Outcome::from_bool(violations == 0 && assertions > 0));
    report.verdict("level_not_reached", unreached as f64, 0.0, 0.0, reps * ladder.n_values.len() as u64, Outcome::Info);
    let profile = start_profile(config, &ladder, &mut report)?;
    report.tables.extend([marginal, collapse, ratio, exc, per_rep, profile]);
    Ok(report)
}

/// Median collapse gap near `t = 0` at the largest rung, from `n·b` users that
/// either all sit at node 1 or are spread along `π`. The first start is off
/// the ray `{cπ}`, so the gap spikes at 0 and vanishes on the fast mobility
/// scale. Plot only; there is no rate to test against.
fn start_profile(config: &Config, ladder: &HeavyTrafficLadder, report: &mut ExperimentReport) -> Result<Table, ExperimentError> {
    let e = &config.experiment;
    let n = ladder.largest();
    let params = ladder.params(n)?;
    let pi = ladder.mobility().pi().to_vec();
    let size = n as f64 * e.sojourn_b;
    let mut corner = vec![0u32; pi.len()];
    corner[0] = size.round() as u32;
    let times: Vec<f64> = (0..=20).map(|i| e.collapse_window[0] * i as f64 / 20.0).collect();
    let mut table = Table::new("start_profile", &["start", "t", "median_gap"]);
    for (si, (label, y)) in [("node1", corner), ("pi", initial_state(size, &pi))].into_iter().enumerate() {
        let key = StreamKey::root(config.seed()).derive(40 + si as u64);
        let gaps: Vec<Vec<f64>> = replicate(key, e.reps.min(200), |rk| {
            let b = simulate_coupled(&params, &y, (n as f64).powi(2) * e.collapse_window[0], rk)?;
            let x = rescale(&b.open_path, n);
            Ok(times.iter().map(|&t| collapse_gap(&x, &pi, &[t])).collect::<Result<_, _>>()?)
        })?;
        for (ti, &t) in times.iter().enumerate() {
            let at: Vec<f64> = gaps.iter().map(|g| g[ti]).collect();
            let med = median(&at);
            table.push(row![label, t, med]);
            report.plot(format!("start_profile {label}"), t, med);
        }
    }
    Ok(table)
}
