//! User mobility: the generator `Q`, its stationary law, transient
//! probabilities, the mixing profile `Δ(t)`, mixing times and the
//! homogenization distance `ϱ`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

/// Row-sum tolerance of a valid generator.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Tolerance on `πQ = 0` and `Σπ = 1`.
pub const BALANCE_TOL: f64 = 1e-10;
/// Default per-entry truncation error of [`MobilityProfile::transition_matrix`].
pub const DEFAULT_TRANSIENT_TOL: f64 = 1e-12;
/// Upper bound on the number of Poisson terms one uniformization may use.
pub const MAX_UNIFORMIZATION_TERMS: usize = 5_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MobilityError {
    #[error("generator needs at least two nodes, got {0}")]
    TooFewNodes(usize),
    #[error("generator must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("generator entry ({row},{col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("row {row} of the generator sums to {sum:e}, expected 0")]
    RowSumViolation { row: usize, sum: f64 },
    #[error("off-diagonal entry ({row},{col}) = {value} is negative")]
    NegativeOffDiagonal { row: usize, col: usize, value: f64 },
    #[error("generator is reducible")]
    Reducible,
    #[error("stationary distribution solve failed: {0}")]
    SingularSolve(String),
    #[error("truncation tolerance {tol:e} is infeasible within {budget} terms")]
    TolTooSmall { tol: f64, budget: usize },
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("eps must lie in (0,1), got {0}")]
    EpsOutOfRange(f64),
    #[error("Δ(t) is still >= {eps} at the scan horizon {horizon}")]
    HorizonExceeded { eps: f64, horizon: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// A validated mobility generator with its stationary distribution.
#[derive(Debug, Clone)]
pub struct MobilityProfile {
    q: DMatrix<f64>,
    pi: Vec<f64>,
    gamma: f64,
    pi_min: f64,
    pi_max: f64,
    uniformization_rate: f64,
}

impl MobilityProfile {
    /// Validates `q` and solves for `π`.
    pub fn new(q: DMatrix<f64>) -> Result<Self, MobilityError> {
        let k = q.nrows();
        if q.ncols() != k {
            return Err(MobilityError::NotSquare { rows: k, cols: q.ncols() });
        }
        if k < 2 {
            return Err(MobilityError::TooFewNodes(k));
        }
        for row in 0..k {
            for col in 0..k {
                let v = q[(row, col)];
                if !v.is_finite() {
                    return Err(MobilityError::NonFinite { row, col });
                }
                if row != col && v < 0.0 {
                    return Err(MobilityError::NegativeOffDiagonal { row, col, value: v });
                }
            }
            let sum: f64 = q.row(row).iter().sum();
            let scale = q.row(row).iter().map(|v| v.abs()).fold(1.0, f64::max);
            if sum.abs() > ROW_SUM_TOL * scale {
                return Err(MobilityError::RowSumViolation { row, sum });
            }
        }
        if !strongly_connected(&q) {
            return Err(MobilityError::Reducible);
        }
        let pi = stationary_distribution(&q)?;
        let gamma = -(0..k).map(|i| q[(i, i)]).sum::<f64>();
        let pi_min = pi.iter().copied().fold(f64::INFINITY, f64::min);
        let pi_max = pi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let uniformization_rate = (0..k).map(|i| -q[(i, i)]).fold(0.0, f64::max);
        Ok(Self { q, pi, gamma, pi_min, pi_max, uniformization_rate })
    }

    /// Builds a profile from row-major rows, as they appear in config files.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MobilityError> {
        let k = rows.len();
        for r in rows {
            if r.len() != k {
                return Err(MobilityError::NotSquare { rows: k, cols: r.len() });
            }
        }
        Self::new(DMatrix::from_fn(k, k, |i, j| rows[i][j]))
    }

    /// Two-node chain with jump rates `a` (1→2) and `b` (2→1).
    pub fn two_state(a: f64, b: f64) -> Result<Self, MobilityError> {
        Self::from_rows(&[vec![-a, a], vec![b, -b]])
    }

    /// Complete graph on `k` nodes where every jump has rate `rate`.
    pub fn uniform(k: usize, rate: f64) -> Result<Self, MobilityError> {
        Self::new(DMatrix::from_fn(k, k, |i, j| if i == j { -(k as f64 - 1.0) * rate } else { rate }))
    }

    pub fn nodes(&self) -> usize {
        self.q.nrows()
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.q[(from, to)]
    }

    /// Total jump rate out of `node`, i.e. `-q_kk`.
    pub fn exit_rate(&self, node: usize) -> f64 {
        -self.q[(node, node)]
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// Trace of `-Q`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn pi_min(&self) -> f64 {
        self.pi_min
    }

    pub fn pi_max(&self) -> f64 {
        self.pi_max
    }

    pub fn uniformization_rate(&self) -> f64 {
        self.uniformization_rate
    }

    /// Row-major copy of `Q`.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.nodes()).map(|i| self.q.row(i).iter().copied().collect()).collect()
    }

    /// `e^{tQ}` by uniformization, with per-entry truncation error at most `tol`.
    pub fn transition_matrix(&self, t: f64, tol: f64) -> Result<DMatrix<f64>, MobilityError> {
        if !(t >= 0.0) {
            return Err(MobilityError::NegativeTime(t));
        }
        let k = self.nodes();
        if t == 0.0 {
            return Ok(DMatrix::identity(k, k));
        }
        let rate = self.uniformization_rate;
        let jump = DMatrix::identity(k, k) + &self.q / rate;
        let weights = PoissonWeights::new(rate * t, tol)?;
        let mut power = matrix_power(&jump, weights.first);
        let mut acc = DMatrix::zeros(k, k);
        for (offset, w) in weights.values.iter().enumerate() {
            acc += &power * *w;
            if offset + 1 < weights.values.len() {
                power = &power * &jump;
            }
        }
        acc.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        Ok(acc)
    }

    /// `Δ(t)`: worst-case deviation of the single-user law from `π`.
    pub fn delta(&self, t: f64) -> Result<f64, MobilityError> {
        let p = self.transition_matrix(t, DEFAULT_TRANSIENT_TOL)?;
        Ok(self.delta_of_matrix(&p))
    }

    fn delta_of_matrix(&self, p: &DMatrix<f64>) -> f64 {
        let k = self.nodes();
        let mut worst: f64 = 0.0;
        for i in 0..k {
            for j in 0..k {
                worst = worst.max((p[(i, j)] - self.pi[j]).abs());
            }
        }
        worst.min(1.0)
    }

    /// `Δ` on a time grid.
    pub fn mixing_profile(&self, times: &[f64]) -> Result<MixingProfile, MobilityError> {
        let mut delta_values = Vec::with_capacity(times.len());
        for &t in times {
            delta_values.push(self.delta(t)?);
        }
        Ok(MixingProfile { times: times.to_vec(), delta_values, tolerance: DEFAULT_TRANSIENT_TOL })
    }

    /// `τ(ε) = sup{t ≥ 0: Δ(t) ≥ ε}`.
    ///
    /// `Δ` need not be monotone, so the whole window `[0, 200/γ]` is scanned at
    /// step `1/(10γ)` for the last grid point still at or above `eps`, and the
    /// crossing after it is refined by bisection.
    pub fn mixing_time(&self, eps: f64) -> Result<f64, MobilityError> {
        self.mixing_time_with(eps, 1.0 / (10.0 * self.gamma), 200.0 / self.gamma)
    }

    pub fn mixing_time_with(&self, eps: f64, step: f64, horizon: f64) -> Result<f64, MobilityError> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(MobilityError::EpsOutOfRange(eps));
        }
        let steps = (horizon / step).ceil() as usize;
        let step_matrix = self.transition_matrix(step, 1e-15)?;
        let k = self.nodes();
        let mut p = DMatrix::identity(k, k);
        let mut last_above: Option<usize> = None;
        for i in 0..=steps {
            if self.delta_of_matrix(&p) >= eps {
                last_above = Some(i);
            }
            p = &p * &step_matrix;
        }
        let Some(i) = last_above else {
            return Ok(0.0);
        };
        if i == steps {
            return Err(MobilityError::HorizonExceeded { eps, horizon: steps as f64 * step });
        }
        let (mut lo, mut hi) = (i as f64 * step, (i + 1) as f64 * step);
        // The scan uses a propagated semigroup; re-check the bracket directly.
        if self.delta(hi)? >= eps {
            lo = hi;
            hi += step;
        }
        while hi - lo > 1e-12 * (1.0 + hi) {
            let mid = 0.5 * (lo + hi);
            if self.delta(mid)? >= eps {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }

    /// Draws the destination of a jump out of `from`.
    pub fn sample_destination<R: Rng + ?Sized>(&self, from: usize, rng: &mut R) -> usize {
        let exit = self.exit_rate(from);
        let mut target = rng.random::<f64>() * exit;
        let k = self.nodes();
        let mut last = from;
        for to in 0..k {
            if to == from {
                continue;
            }
            let r = self.q[(from, to)];
            if r <= 0.0 {
                continue;
            }
            last = to;
            if target < r {
                return to;
            }
            target -= r;
        }
        last
    }

    /// Samples one trajectory of the single-user chain on `[0, horizon]`.
    pub fn sample_trajectory<R: Rng + ?Sized>(&self, start: usize, horizon: f64, rng: &mut R) -> NodeTrajectory {
        let mut times = vec![0.0];
        let mut nodes = vec![start];
        let mut t = 0.0;
        let mut node = start;
        loop {
            let exit = self.exit_rate(node);
            let e: f64 = rng.sample(rand_distr::Exp1);
            t += e / exit;
            if t > horizon {
                break;
            }
            node = self.sample_destination(node, rng);
            times.push(t);
            nodes.push(node);
        }
        NodeTrajectory { times, nodes }
    }
}

/// Piecewise-constant node-valued path of one user.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeTrajectory {
    pub times: Vec<f64>,
    pub nodes: Vec<usize>,
}

impl NodeTrajectory {
    pub fn node_at(&self, t: f64) -> usize {
        let idx = self.times.partition_point(|&s| s <= t);
        self.nodes[idx.saturating_sub(1)]
    }
}

/// Samples of `Δ(t)` on a time grid.
#[derive(Debug, Clone)]
pub struct MixingProfile {
    pub times: Vec<f64>,
    pub delta_values: Vec<f64>,
    pub tolerance: f64,
}

/// `ϱ(y) = ‖y/‖y‖ − π‖₁`, with `ϱ(0) = 0`.
pub fn rho_metric(y: &[u32], pi: &[f64]) -> Result<f64, MobilityError> {
    if y.len() != pi.len() {
        return Err(MobilityError::DimensionMismatch { expected: pi.len(), got: y.len() });
    }
    let total: u64 = y.iter().map(|&c| c as u64).sum();
    if total == 0 {
        return Ok(0.0);
    }
    let total = total as f64;
    Ok(y.iter().zip(pi).map(|(&c, &p)| (c as f64 / total - p).abs()).sum())
}

/// Truncated Poisson weights `e^{-a} a^j / j!` for `j` in `first..first+values.len()`.
#[derive(Debug, Clone)]
pub(crate) struct PoissonWeights {
    pub first: usize,
    pub values: Vec<f64>,
}

impl PoissonWeights {
    /// Left and right tails dropped together carry less than `tol` mass.
    pub fn new(mean: f64, tol: f64) -> Result<Self, MobilityError> {
        if !(tol > 0.0) || !mean.is_finite() {
            return Err(MobilityError::TolTooSmall { tol, budget: MAX_UNIFORMIZATION_TERMS });
        }
        let half = 0.5 * tol;
        let mode = mean.floor() as usize;
        let log_mode = -mean + mode as f64 * mean.ln() - ln_gamma(mode as f64 + 1.0);
        let w_mode = if mode == 0 { (-mean).exp() } else { log_mode.exp() };

        // Walk left: w_{j-1} = w_j * j / mean.
        let mut left = Vec::new();
        let mut j = mode;
        let mut w = w_mode;
        loop {
            if j == 0 {
                break;
            }
            let ratio = (j as f64) / mean;
            // Mass strictly below j is at most w_j * ratio / (1 - ratio).
            if ratio < 1.0 && w * ratio / (1.0 - ratio) < half {
                break;
            }
            w *= ratio;
            j -= 1;
            left.push(w);
            if left.len() > MAX_UNIFORMIZATION_TERMS {
                return Err(MobilityError::TolTooSmall { tol, budget: MAX_UNIFORMIZATION_TERMS });
            }
        }
        let first = j;
        let mut values: Vec<f64> = left.into_iter().rev().collect();
        values.push(w_mode);

        // Walk right: w_{j+1} = w_j * mean / (j + 1).
        let mut j = mode;
        let mut w = w_mode;
        loop {
            let ratio = mean / (j as f64 + 2.0);
            if ratio < 1.0 && w * ratio / (1.0 - ratio) < half {
                break;
            }
            w *= mean / (j as f64 + 1.0);
            j += 1;
            values.push(w);
            if values.len() > MAX_UNIFORMIZATION_TERMS {
                return Err(MobilityError::TolTooSmall { tol, budget: MAX_UNIFORMIZATION_TERMS });
            }
        }
        Ok(Self { first, values })
    }
}

fn matrix_power(m: &DMatrix<f64>, mut e: usize) -> DMatrix<f64> {
    let k = m.nrows();
    let mut result = DMatrix::identity(k, k);
    let mut base = m.clone();
    while e > 0 {
        if e & 1 == 1 {
            result = &result * &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    result
}

fn strongly_connected(q: &DMatrix<f64>) -> bool {
    let k = q.nrows();
    let reach = |forward: bool| {
        let mut seen = vec![false; k];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..k {
                let rate = if forward { q[(i, j)] } else { q[(j, i)] };
                if i != j && rate > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

fn stationary_distribution(q: &DMatrix<f64>) -> Result<Vec<f64>, MobilityError> {
    let k = q.nrows();
    let mut a = q.transpose();
    for j in 0..k {
        a[(k - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(k);
    b[k - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&b)
        .ok_or_else(|| MobilityError::SingularSolve("augmented balance system is singular".into()))?;
    let scale = q.iter().map(|v| v.abs()).fold(1.0, f64::max);
    let residual = (pi.transpose() * q).iter().map(|v| v.abs()).fold(0.0, f64::max);
    if residual > BALANCE_TOL * scale || (pi.sum() - 1.0).abs() > BALANCE_TOL {
        return Err(MobilityError::SingularSolve(format!("balance residual {residual:e}")));
    }
    if pi.iter().any(|&p| !(p > 0.0)) {
        return Err(MobilityError::SingularSolve("non-positive stationary mass".into()));
    }
    Ok(pi.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn symmetric_two_state() {
        let p = MobilityProfile::from_rows(&[vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        assert_abs_diff_eq!(p.pi()[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p.pi()[1], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p.gamma(), 2.0);
    }

    #[test]
    fn asymmetric_two_state() {
        // balance: π₁·1 = π₂·2
        let p = MobilityProfile::from_rows(&[vec![-1.0, 1.0], vec![2.0, -2.0]]).unwrap();
        assert_abs_diff_eq!(p.pi()[0], 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.pi()[1], 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.gamma(), 3.0);
        assert_abs_diff_eq!(p.pi_min(), 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.pi_max(), 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn generator_errors() {
        assert_eq!(
            MobilityProfile::from_rows(&[vec![-1.0, 1.0], vec![0.0, 0.0]]).unwrap_err(),
            MobilityError::Reducible
        );
        assert!(matches!(
            MobilityProfile::from_rows(&[vec![-1.0, 0.5], vec![1.0, -1.0]]),
            Err(MobilityError::RowSumViolation { row: 0, .. })
        ));
        assert!(matches!(
            MobilityProfile::from_rows(&[vec![1.0, -1.0], vec![1.0, -1.0]]),
            Err(MobilityError::NegativeOffDiagonal { row: 0, col: 1, .. })
        ));
        assert!(matches!(MobilityProfile::from_rows(&[vec![0.0]]), Err(MobilityError::TooFewNodes(1))));
        assert!(matches!(
            MobilityProfile::from_rows(&[vec![f64::NAN, 1.0], vec![1.0, -1.0]]),
            Err(MobilityError::NonFinite { .. })
        ));
        // two closed classes {1,2} and {3}
        assert_eq!(
            MobilityProfile::from_rows(&[vec![-1.0, 1.0, 0.0], vec![1.0, -1.0, 0.0], vec![1.0, 0.0, -1.0]]).unwrap_err(),
            MobilityError::Reducible
        );
    }

    #[test]
    fn transition_matrix_closed_form() {
        let p = MobilityProfile::two_state(1.0, 1.0).unwrap();
        let id = p.transition_matrix(0.0, 1e-12).unwrap();
        assert_eq!(id, DMatrix::identity(2, 2));
        for &t in &[0.1, 1.0, 3.7] {
            let m = p.transition_matrix(t, 1e-13).unwrap();
            let expected = 0.5 + 0.5 * (-2.0 * t).exp();
            assert_abs_diff_eq!(m[(0, 0)], expected, epsilon = 1e-12);
            assert_abs_diff_eq!(m[(0, 1)], 1.0 - expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn transition_matrix_long_time_hits_pi() {
        let p = MobilityProfile::from_rows(&[vec![-1.0, 0.7, 0.3], vec![0.2, -0.5, 0.3], vec![2.0, 1.0, -3.0]]).unwrap();
        let m = p.transition_matrix(1e6 / p.gamma(), 1e-12).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(m[(i, j)], p.pi()[j], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn transition_tol_errors() {
        let p = MobilityProfile::two_state(1.0, 1.0).unwrap();
        assert!(matches!(p.transition_matrix(1.0, 0.0), Err(MobilityError::TolTooSmall { .. })));
        assert!(matches!(p.transition_matrix(-1.0, 1e-9), Err(MobilityError::NegativeTime(_))));
    }

    #[test]
    fn delta_values() {
        let p = MobilityProfile::two_state(1.0, 1.0).unwrap();
        assert_abs_diff_eq!(p.delta(0.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p.delta(1.0).unwrap(), (-2.0f64).exp() / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.delta(1.0).unwrap(), 0.0676676, epsilon = 1e-7);
        assert!(p.delta(50.0).unwrap() < 1e-8);
        let q = MobilityProfile::two_state(1.0, 2.0).unwrap();
        assert_abs_diff_eq!(q.delta(0.0).unwrap(), 1.0 - q.pi_min(), epsilon = 1e-15);
    }

    #[test]
    fn mixing_time_two_state() {
        let p = MobilityProfile::two_state(1.0, 1.0).unwrap();
        let tau = p.mixing_time(0.05).unwrap();
        assert_abs_diff_eq!(tau, 10f64.ln() / 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(tau, 1.15129, epsilon = 1e-5);
        // eps above Δ(0): the set {Δ ≥ eps} is empty
        assert_eq!(p.mixing_time(0.6).unwrap(), 0.0);
        assert!(matches!(p.mixing_time(1.5), Err(MobilityError::EpsOutOfRange(_))));
        assert!(matches!(p.mixing_time(0.0), Err(MobilityError::EpsOutOfRange(_))));
    }

    #[test]
    fn mixing_time_matches_dense_grid_oracle() {
        let p = MobilityProfile::two_state(1.0, 2.0).unwrap();
        let tau = p.mixing_time(0.01).unwrap();
        // brute force: last grid point (step 1e-4) where Δ ≥ 0.01, using the
        // closed form Δ(t) = (2/3) e^{-3t} of this chain
        let oracle = (0..100_000)
            .map(|i| i as f64 * 1e-4)
            .filter(|&t| (2.0 / 3.0) * (-3.0 * t).exp() >= 0.01)
            .fold(0.0, f64::max);
        assert!((tau - oracle).abs() <= 1e-4, "tau {tau} oracle {oracle}");
    }

    #[test]
    fn horizon_exceeded_for_slow_chain() {
        // nearly reducible: the slow rates dominate the mixing time
        let p = MobilityProfile::from_rows(&[vec![-1e-6, 1e-6, 0.0], vec![0.0, -100.0, 100.0], vec![1e-6, 0.0, -1e-6]]).unwrap();
        assert!(matches!(p.mixing_time(0.01), Err(MobilityError::HorizonExceeded { .. })));
    }

    #[test]
    fn rho_metric_examples() {
        assert_eq!(rho_metric(&[2, 2], &[0.5, 0.5]).unwrap(), 0.0);
        assert_eq!(rho_metric(&[0, 0], &[0.3, 0.7]).unwrap(), 0.0);
        assert_abs_diff_eq!(rho_metric(&[3, 1], &[0.5, 0.5]).unwrap(), 0.5);
        assert!(matches!(rho_metric(&[1], &[0.5, 0.5]), Err(MobilityError::DimensionMismatch { .. })));
    }

    #[test]
    fn trajectory_is_consistent() {
        use crate::rng::{StreamClass, StreamKey};
        let p = MobilityProfile::uniform(3, 1.0).unwrap();
        let mut rng = StreamKey::root(3).stream(StreamClass::Trajectories);
        let tr = p.sample_trajectory(1, 10.0, &mut rng);
        assert_eq!(tr.nodes[0], 1);
        assert!(tr.times.windows(2).all(|w| w[0] < w[1]));
        assert!(tr.nodes.windows(2).all(|w| w[0] != w[1]));
        assert_eq!(tr.node_at(0.0), 1);
    }

    fn random_generator(k: usize, rates: &[f64]) -> MobilityProfile {
        let mut idx = 0;
        let mut m = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    m[(i, j)] = rates[idx];
                    idx += 1;
                }
            }
            let s: f64 = m.row(i).iter().sum();
            m[(i, i)] = -s;
        }
        MobilityProfile::new(m).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn semigroup_property(rates in proptest::collection::vec(0.05f64..3.0, 6), t in 0.0f64..3.0, s in 0.0f64..3.0) {
            let p = random_generator(3, &rates);
            let tol = 1e-12;
            let lhs = p.transition_matrix(t + s, tol).unwrap();
            let rhs = p.transition_matrix(t, tol).unwrap() * p.transition_matrix(s, tol).unwrap();
            for (a, b) in lhs.iter().zip(rhs.iter()) {
                prop_assert!((a - b).abs() <= 10.0 * tol);
            }
            for i in 0..3 {
                prop_assert!((lhs.row(i).sum() - 1.0).abs() <= tol * 3.0);
            }
        }

        #[test]
        fn delta_is_permutation_invariant(rates in proptest::collection::vec(0.05f64..3.0, 6), t in 0.0f64..2.0) {
            let p = random_generator(3, &rates);
            let perm = [2usize, 0, 1];
            let q = DMatrix::from_fn(3, 3, |i, j| p.q()[(perm[i], perm[j])]);
            let permuted = MobilityProfile::new(q).unwrap();
            prop_assert!((p.delta(t).unwrap() - permuted.delta(t).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn rho_zero_iff_proportional(y in proptest::collection::vec(0u32..20, 2)) {
            let pi = [0.25, 0.75];
            let r = rho_metric(&y, &pi).unwrap();
            let proportional = y[0] * 3 == y[1];
            prop_assert_eq!(r == 0.0, proportional);
            prop_assert!(r < 2.0);
        }

        #[test]
        fn mixing_time_antitone(e1 in 0.01f64..0.3, e2 in 0.01f64..0.3) {
            let p = MobilityProfile::from_rows(&[vec![-1.0, 0.7, 0.3], vec![0.2, -0.5, 0.3], vec![2.0, 1.0, -3.0]]).unwrap();
            let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
            let grid_tol = 1.0 / (10.0 * p.gamma());
            prop_assert!(p.mixing_time(lo).unwrap() >= p.mixing_time(hi).unwrap() - grid_tol);
        }
    }
}
