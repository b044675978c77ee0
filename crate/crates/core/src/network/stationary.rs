//! Regenerative estimation of the stationary law from returns to the empty state.

use super::{CountsEngine, NetworkError, NetworkParams};
use crate::mobility::rho_metric;
use crate::rng::{StreamClass, StreamKey};
use crate::stats::MeanSe;
use rand::Rng;
use rayon::prelude::*;
use std::collections::{BTreeMap, HashMap};

/// Cycles are simulated in fixed blocks so results do not depend on threading.
pub const CYCLES_PER_BLOCK: u64 = 2048;

#[derive(Debug, Clone, Copy)]
pub struct StationaryOptions {
    pub cycles: u64,
    /// Levels `0..=max_level` are tracked individually.
    pub max_level: usize,
    pub cycle_event_budget: u64,
    /// Keep a time-weighted histogram of full states.
    pub keep_histogram: bool,
    /// Moments `E ‖x‖^r` are tracked for `r = 1..=max_moment`.
    pub max_moment: usize,
}

impl Default for StationaryOptions {
    fn default() -> Self {
        Self { cycles: 10_000, max_level: 256, cycle_event_budget: 100_000_000, keep_histogram: false, max_moment: 3 }
    }
}

/// Running sums `Σa, Σa², Σab` of a cycle functional `a` against the cycle length `b`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RatioSums {
    pub sa: f64,
    pub saa: f64,
    pub sab: f64,
}

impl RatioSums {
    fn push(&mut self, a: f64, b: f64) {
        self.sa += a;
        self.saa += a * a;
        self.sab += a * b;
    }

    fn merge(&mut self, o: &RatioSums) {
        self.sa += o.sa;
        self.saa += o.saa;
        self.sab += o.sab;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct CycleSums {
    n: u64,
    sb: f64,
    sbb: f64,
}

impl CycleSums {
    /// Renewal-reward ratio `Σa/Σb` with its delta-method standard error.
    fn ratio(&self, a: &RatioSums) -> MeanSe {
        let n = self.n as f64;
        let r = a.sa / self.sb;
        let var = if self.n > 1 { ((a.saa - 2.0 * r * a.sab + r * r * self.sbb) / (n - 1.0)).max(0.0) } else { 0.0 };
        MeanSe { mean: r, se: var.sqrt() / n.sqrt() / (self.sb / n), n: self.n as usize }
    }
}

/// Cycle aggregates of the stationary regime.
#[derive(Debug, Clone)]
pub struct StationaryEstimate {
    params: NetworkParams,
    cycles: CycleSums,
    max_level: usize,
    max_observed: usize,
    /// `∫ 1{‖x‖ = m}` per cycle, `m = 0..=max_level`.
    level: Vec<RatioSums>,
    /// `∫ 1{‖x‖ ≥ q}` per cycle.
    tail: Vec<RatioSums>,
    /// `∫ ‖x‖^r`, `r = 1..=max_moment`.
    moments: Vec<RatioSums>,
    /// `∫ 1{q ≤ ‖x‖ ≤ max_level, x_k = 0}` at index `q·K + k`.
    empty_tail: Vec<RatioSums>,
    rho: RatioSums,
    /// Balance numerators `λ T_{m−1} − μ T_m + Σ_k μ_k T_{m,k}` for `m = 1..=max_level`,
    /// with every holding time replaced by `1/rate`.
    balance: Vec<RatioSums>,
    events: u64,
    histogram: BTreeMap<Vec<u32>, f64>,
}

impl StationaryEstimate {
    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn cycles(&self) -> u64 {
        self.cycles.n
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn mean_cycle_length(&self) -> f64 {
        self.cycles.sb / self.cycles.n as f64
    }

    pub fn max_observed_level(&self) -> usize {
        self.max_observed
    }

    /// `P_ν(‖x‖ = m)`; zero with zero SE beyond the tracked levels.
    pub fn level_probability(&self, m: usize) -> MeanSe {
        match self.level.get(m) {
            Some(a) => self.cycles.ratio(a),
            None => MeanSe { mean: 0.0, se: 0.0, n: self.cycles.n as usize },
        }
    }

    /// `P_ν(‖x‖ ≥ q)` for `q ≤ max_level`.
    pub fn tail_probability(&self, q: usize) -> MeanSe {
        match self.tail.get(q) {
            Some(a) => self.cycles.ratio(a),
            None => MeanSe { mean: f64::NAN, se: f64::NAN, n: self.cycles.n as usize },
        }
    }

    /// `E_ν ‖x‖^r`; `NaN` beyond the tracked moments.
    pub fn moment(&self, r: usize) -> MeanSe {
        match r {
            0 => MeanSe { mean: 1.0, se: 0.0, n: self.cycles.n as usize },
            r => match self.moments.get(r - 1) {
                Some(a) => self.cycles.ratio(a),
                None => MeanSe { mean: f64::NAN, se: f64::NAN, n: self.cycles.n as usize },
            },
        }
    }

    /// `P_ν(q ≤ ‖x‖ ≤ max_level, x_k = 0)`.
    pub fn empty_node_tail(&self, q: usize, k: usize) -> MeanSe {
        let nodes = self.params.nodes();
        match self.empty_tail.get(q * nodes + k) {
            Some(a) if k < nodes => self.cycles.ratio(a),
            _ => MeanSe { mean: f64::NAN, se: f64::NAN, n: self.cycles.n as usize },
        }
    }

    /// `E_ν ϱ(x)`.
    pub fn mean_rho(&self) -> MeanSe {
        self.cycles.ratio(&self.rho)
    }

    /// Time-weighted state histogram, if it was requested.
    pub fn histogram(&self) -> &BTreeMap<Vec<u32>, f64> {
        &self.histogram
    }

    /// Sampler over the histogram.
    pub fn state_sampler(&self) -> Option<StateSampler> {
        if self.histogram.is_empty() {
            return None;
        }
        let mut acc = 0.0;
        let mut cumulative = Vec::with_capacity(self.histogram.len());
        let mut states = Vec::with_capacity(self.histogram.len());
        for (s, w) in &self.histogram {
            acc += w;
            cumulative.push(acc);
            states.push(s.clone());
        }
        Some(StateSampler { states, cumulative })
    }
}

/// Draws states from a weighted histogram.
#[derive(Debug, Clone)]
pub struct StateSampler {
    states: Vec<Vec<u32>>,
    cumulative: Vec<f64>,
}

impl StateSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &[u32] {
        let u = rng.random::<f64>() * self.cumulative.last().copied().unwrap_or(0.0);
        let i = self.cumulative.partition_point(|&c| c <= u).min(self.states.len() - 1);
        &self.states[i]
    }
}

struct Block {
    cycles: CycleSums,
    level: Vec<RatioSums>,
    tail: Vec<RatioSums>,
    moments: Vec<RatioSums>,
    empty_tail: Vec<RatioSums>,
    rho: RatioSums,
    balance: Vec<RatioSums>,
    max_observed: usize,
    events: u64,
    histogram: HashMap<Vec<u32>, f64>,
}

fn run_block(params: &NetworkParams, cycles: u64, key: StreamKey, opts: &StationaryOptions) -> Result<Block, NetworkError> {
    let k = params.nodes();
    let levels = opts.max_level + 1;
    let pi = params.mobility().pi().to_vec();
    let lambda = params.lambda_total();
    let mu = params.mu_total();
    let mu_k = params.mu_k();
    let mut rng = key.stream(StreamClass::Clock);
    let mut b = Block {
        cycles: CycleSums::default(),
        level: vec![RatioSums::default(); levels],
        tail: vec![RatioSums::default(); levels],
        moments: vec![RatioSums::default(); opts.max_moment],
        empty_tail: vec![RatioSums::default(); levels * k],
        rho: RatioSums::default(),
        balance: vec![RatioSums::default(); levels],
        max_observed: 0,
        events: 0,
        histogram: HashMap::new(),
    };
    // per-cycle scratch: time at level m, and at level m with x_k = 0
    let mut lt = vec![0.0; levels + 1];
    let mut zt = vec![0.0; levels * k];
    // balance numerators with each holding time replaced by its conditional mean
    let mut bal = vec![0.0; levels];
    let empty = vec![0u32; k];
    for _ in 0..cycles {
        let mut engine = CountsEngine::new(params, &empty);
        let mut length = 0.0;
        let mut mom = vec![0.0; opts.max_moment];
        let mut rho_int = 0.0;
        let mut top = 0usize;
        let mut events = 0u64;
        loop {
            let (dt, rate, kind) = engine.next_event(&mut rng).expect("positive arrival rate");
            let y = engine.state();
            let m = engine.total() as usize;
            length += dt;
            let slot = m.min(levels);
            lt[slot] += dt;
            if m < levels {
                let mut idle = 0.0;
                for (i, &c) in y.iter().enumerate() {
                    if c == 0 {
                        zt[m * k + i] += dt;
                        idle += mu_k[i];
                    }
                }
                let h = 1.0 / rate;
                if m > 0 {
                    bal[m] += (idle - mu) * h;
                }
                if m + 1 < levels {
                    bal[m + 1] += lambda * h;
                }
            }
            top = top.max(m);
            let mut p = dt;
            for v in mom.iter_mut() {
                p *= m as f64;
                *v += p;
            }
            if m > 0 {
                rho_int += rho_metric(y, &pi).unwrap_or(0.0) * dt;
            }
            if opts.keep_histogram {
                *b.histogram.entry(y.to_vec()).or_insert(0.0) += dt;
            }
            engine.apply(kind);
            events += 1;
            if events > opts.cycle_event_budget {
                return Err(NetworkError::CycleBudgetExceeded(b.cycles.n));
            }
            if engine.total() == 0 {
                break;
            }
        }
        b.events += events;
        b.max_observed = b.max_observed.max(top);
        b.cycles.n += 1;
        b.cycles.sb += length;
        b.cycles.sbb += length * length;
        for (acc, v) in b.moments.iter_mut().zip(&mom) {
            acc.push(*v, length);
        }
        b.rho.push(rho_int, length);
        let last = top.min(levels - 1);
        let mut suffix = if top >= levels { lt[levels] } else { 0.0 };
        for q in (0..=last).rev() {
            suffix += lt[q];
            b.tail[q].push(suffix, length);
        }
        for m in 0..=last {
            b.level[m].push(lt[m], length);
        }
        for i in 0..k {
            let mut suffix = 0.0;
            for q in (0..=last).rev() {
                suffix += zt[q * k + i];
                b.empty_tail[q * k + i].push(suffix, length);
            }
        }
        for m in 1..=(last + 1).min(levels - 1) {
            b.balance[m].push(bal[m], length);
            bal[m] = 0.0;
        }
        lt[..=last].iter_mut().for_each(|v| *v = 0.0);
        lt[levels] = 0.0;
        zt[..(last + 1) * k].iter_mut().for_each(|v| *v = 0.0);
    }
    Ok(b)
}

/// Estimates stationary quantities from `options.cycles` regeneration cycles.
pub fn sample_stationary(params: &NetworkParams, key: StreamKey, options: StationaryOptions) -> Result<StationaryEstimate, NetworkError> {
    if !(params.rho() < 1.0) {
        return Err(NetworkError::UnstableParams(params.rho()));
    }
    if params.lambda_total() <= 0.0 {
        return Err(NetworkError::InvalidRate { name: "lambda", index: 0, value: params.lambda_total() });
    }
    let blocks = options.cycles.div_ceil(CYCLES_PER_BLOCK);
    let results: Vec<Result<Block, NetworkError>> = (0..blocks)
        .into_par_iter()
        .map(|i| {
            let n = CYCLES_PER_BLOCK.min(options.cycles - i * CYCLES_PER_BLOCK);
            run_block(params, n, key.derive(i), &options)
        })
        .collect();
    let levels = options.max_level + 1;
    let mut est = StationaryEstimate {
        params: params.clone(),
        cycles: CycleSums::default(),
        max_level: options.max_level,
        max_observed: 0,
        level: vec![RatioSums::default(); levels],
        tail: vec![RatioSums::default(); levels],
        moments: vec![RatioSums::default(); options.max_moment],
        empty_tail: vec![RatioSums::default(); levels * params.nodes()],
        rho: RatioSums::default(),
        balance: vec![RatioSums::default(); levels],
        events: 0,
        histogram: BTreeMap::new(),
    };
    for r in results {
        let b = r?;
        est.cycles.n += b.cycles.n;
        est.cycles.sb += b.cycles.sb;
        est.cycles.sbb += b.cycles.sbb;
        for (dst, src) in [
            (&mut est.level, &b.level),
            (&mut est.tail, &b.tail),
            (&mut est.balance, &b.balance),
            (&mut est.moments, &b.moments),
            (&mut est.empty_tail, &b.empty_tail),
        ] {
            dst.iter_mut().zip(src).for_each(|(d, s)| d.merge(s));
        }
        est.rho.merge(&b.rho);
        est.max_observed = est.max_observed.max(b.max_observed);
        est.events += b.events;
        let mut entries: Vec<_> = b.histogram.into_iter().collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        for (s, w) in entries {
            *est.histogram.entry(s).or_insert(0.0) += w;
        }
    }
    Ok(est)
}

/// Balance residual at level `m` with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceResidual {
    pub level: usize,
    pub residual: f64,
    pub se: f64,
}

/// `λ P(‖x‖=m−1) − μ P(‖x‖=m) + Σ_k μ_k P(‖x‖=m, x_k=0)`, zero in expectation.
pub fn check_balance_identity(est: &StationaryEstimate, m: usize) -> Result<BalanceResidual, NetworkError> {
    if m == 0 || m > est.max_level || m > est.max_observed || est.cycles.n < 2 {
        return Err(NetworkError::InsufficientCycles { level: m });
    }
    let r = est.cycles.ratio(&est.balance[m]);
    Ok(BalanceResidual { level: m, residual: r.mean, se: r.se })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobility::MobilityProfile;

    fn params(lambda: Vec<f64>, mu: Vec<f64>) -> NetworkParams {
        NetworkParams::new(MobilityProfile::two_state(1.0, 1.0).unwrap(), lambda, mu, None).unwrap()
    }

    #[test]
    fn geometric_lower_bound_and_balance() {
        let p = params(vec![0.25, 0.25], vec![0.5, 0.5]);
        let est = sample_stationary(&p, StreamKey::root(1), StationaryOptions { cycles: 20_000, max_level: 64, ..Default::default() }).unwrap();
        for q in 1..=10 {
            let t = est.tail_probability(q);
            assert!(t.mean >= 0.5f64.powi(q as i32) - 3.0 * t.se, "q={q} {t:?}");
        }
        for m in 1..=5 {
            let b = check_balance_identity(&est, m).unwrap();
            assert!(b.residual.abs() <= 3.0 * b.se + 1e-12, "{b:?}");
        }
    }

    #[test]
    fn balance_with_one_serving_node() {
        // service only at node 0: the boundary term carries all the idleness
        let p = params(vec![0.3, 0.3], vec![2.0, 0.0]);
        let est = sample_stationary(&p, StreamKey::root(4), StationaryOptions { cycles: 10_000, max_level: 64, ..Default::default() }).unwrap();
        for m in 1..=5 {
            let b = check_balance_identity(&est, m).unwrap();
            assert!(b.residual.abs() <= 3.0 * b.se + 1e-12, "{b:?}");
        }
    }

    #[test]
    fn thread_count_does_not_matter() {
        let p = params(vec![0.3, 0.2], vec![0.6, 0.4]);
        let opts = StationaryOptions { cycles: 5000, max_level: 32, keep_histogram: true, ..Default::default() };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| sample_stationary(&p, StreamKey::root(2), opts).unwrap());
        let b = three.install(|| sample_stationary(&p, StreamKey::root(2), opts).unwrap());
        assert_eq!(a.moment(1), b.moment(1));
        assert_eq!(a.histogram(), b.histogram());
        let h: f64 = a.histogram().values().sum();
        assert!((h / (a.mean_cycle_length() * a.cycles() as f64) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn moments_and_empty_node_tails_agree_with_levels() {
        let p = params(vec![0.2, 0.1], vec![0.5, 0.5]);
        let est = sample_stationary(&p, StreamKey::root(3), StationaryOptions { cycles: 4000, max_level: 64, ..Default::default() }).unwrap();
        assert!(est.max_observed_level() < 64);
        for r in 1..=3 {
            let from_levels: f64 = (0..=64).map(|m| (m as f64).powi(r as i32) * est.level_probability(m).mean).sum();
            assert!((est.moment(r).mean / from_levels - 1.0).abs() < 1e-9);
        }
        assert!(est.moment(4).mean.is_nan());
        for k in 0..2 {
            assert!((est.empty_node_tail(0, k).mean - est.level_probability(0).mean - est.empty_node_tail(1, k).mean).abs() < 1e-12);
            for q in 1..20 {
                assert!(est.empty_node_tail(q + 1, k).mean <= est.empty_node_tail(q, k).mean);
                assert!(est.empty_node_tail(q, k).mean <= est.tail_probability(q).mean + 1e-15);
            }
        }
    }

    #[test]
    fn errors_and_degenerate_limits() {
        let p = params(vec![1.0, 1.0], vec![1.0, 1.0]);
        assert!(matches!(sample_stationary(&p, StreamKey::root(0), StationaryOptions::default()), Err(NetworkError::UnstableParams(_))));
        let light = params(vec![1e-4, 0.0], vec![1.0, 1.0]);
        let est = sample_stationary(&light, StreamKey::root(0), StationaryOptions { cycles: 200, max_level: 8, ..Default::default() }).unwrap();
        assert!(est.level_probability(0).mean > 0.999);
        assert!(matches!(check_balance_identity(&est, 50), Err(NetworkError::InsufficientCycles { level: 50 })));
    }

    #[test]
    fn empty_probability_matches_time_average() {
        use crate::network::{simulate_open, OpenOptions};
        let p = params(vec![0.2, 0.3], vec![0.5, 0.5]);
        let est = sample_stationary(&p, StreamKey::root(7), StationaryOptions { cycles: 20_000, max_level: 32, ..Default::default() }).unwrap();
        let regen = est.level_probability(0);
        // independent estimator: batch means of the empty-time fraction of a long run
        let batches: Vec<f64> = (0..20)
            .map(|i| {
                let run = simulate_open(&p, &[0, 0], 5000.0, StreamKey::new(99, i), OpenOptions::default()).unwrap();
                let mut empty = 0.0;
                let mut last = (0.0, true);
                run.log.replay(|t, s| {
                    if last.1 {
                        empty += t - last.0;
                    }
                    last = (t, s.iter().all(|&c| c == 0));
                });
                if last.1 {
                    empty += 5000.0 - last.0;
                }
                empty / 5000.0
            })
            .collect();
        let avg = crate::stats::mean_se(&batches);
        let joint = (regen.se.powi(2) + avg.se.powi(2)).sqrt();
        assert!((regen.mean - avg.mean).abs() <= 3.0 * joint, "{regen:?} {avg:?}");
    }
}
