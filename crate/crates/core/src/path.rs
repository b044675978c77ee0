//! Operators on piecewise-constant càdlàg paths.
//!
//! Paths are right-continuous step functions: the value at `t` is the state
//! recorded at the last event time `≤ t`. Because of that every hitting time
//! below lands exactly on an event time and no root finding is involved.
//! Norms are ℓ¹ norms.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PathError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("level {eps} is never reached before the horizon")]
    LevelNeverReached { eps: f64 },
    #[error("evaluation grid is empty")]
    EmptyGrid,
    #[error("invalid path: {0}")]
    Invalid(String),
}

/// Read access shared by owned paths and scaled views.
pub trait PiecewisePath {
    fn dim(&self) -> usize;
    fn len(&self) -> usize;
    fn time(&self, i: usize) -> f64;
    fn coord(&self, i: usize, k: usize) -> f64;
    fn horizon(&self) -> f64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn norm_at_event(&self, i: usize) -> f64 {
        (0..self.dim()).map(|k| self.coord(i, k).abs()).sum()
    }

    /// Index of the last event `≤ t` (the first event if `t` precedes it).
    fn index_at(&self, t: f64) -> usize {
        let (mut lo, mut hi) = (0usize, self.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.time(mid) <= t {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo.saturating_sub(1)
    }

    fn eval(&self, t: f64) -> Vec<f64> {
        let i = self.index_at(t);
        (0..self.dim()).map(|k| self.coord(i, k)).collect()
    }

    fn norm_at(&self, t: f64) -> f64 {
        self.norm_at_event(self.index_at(t))
    }
}

/// Owned piecewise-constant path in `ℝ^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePath {
    dim: usize,
    times: Vec<f64>,
    values: Vec<f64>,
    horizon: f64,
    /// Time at which the path was frozen by a stop operator, if any.
    stopped_at: Option<f64>,
}

impl StatePath {
    /// `values` is row-major, one row of length `dim` per event time.
    pub fn new(dim: usize, times: Vec<f64>, values: Vec<f64>, horizon: f64) -> Result<Self, PathError> {
        if dim == 0 {
            return Err(PathError::Invalid("dimension must be positive".into()));
        }
        if values.len() != dim * times.len() {
            return Err(PathError::DimensionMismatch { expected: dim * times.len(), got: values.len() });
        }
        if times.is_empty() {
            return Err(PathError::Invalid("a path needs an initial state".into()));
        }
        if times[0] != 0.0 {
            return Err(PathError::Invalid(format!("first event at {} instead of 0", times[0])));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(PathError::Invalid("event times must increase strictly".into()));
        }
        if !(horizon >= *times.last().unwrap()) {
            return Err(PathError::Invalid("horizon precedes the last event".into()));
        }
        Ok(Self { dim, times, values, horizon, stopped_at: None })
    }

    pub fn scalar(times: Vec<f64>, values: Vec<f64>, horizon: f64) -> Result<Self, PathError> {
        Self::new(1, times, values, horizon)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn stopped_at(&self) -> Option<f64> {
        self.stopped_at
    }

    /// Coordinate `k` as a scalar path.
    pub fn coordinate(&self, k: usize) -> StatePath {
        let mut b = PathBuilder::new(1);
        for i in 0..self.len() {
            b.push(self.times[i], &[self.values[i * self.dim + k]]);
        }
        b.finish(self.horizon)
    }

    /// `‖f‖` as a scalar path.
    pub fn norm_path(&self) -> StatePath {
        let mut b = PathBuilder::new(1);
        for i in 0..self.len() {
            b.push(self.times[i], &[self.norm_at_event(i)]);
        }
        b.finish(self.horizon)
    }
}

impl PiecewisePath for StatePath {
    fn dim(&self) -> usize {
        self.dim
    }
    fn len(&self) -> usize {
        self.times.len()
    }
    fn time(&self, i: usize) -> f64 {
        self.times[i]
    }
    fn coord(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.dim + k]
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }
}

/// Incremental constructor that drops repeated states and merges simultaneous events.
#[derive(Debug, Clone)]
pub struct PathBuilder {
    dim: usize,
    times: Vec<f64>,
    values: Vec<f64>,
}

impl PathBuilder {
    pub fn new(dim: usize) -> Self {
        Self { dim, times: Vec::new(), values: Vec::new() }
    }

    pub fn with_capacity(dim: usize, events: usize) -> Self {
        Self { dim, times: Vec::with_capacity(events), values: Vec::with_capacity(events * dim) }
    }

    pub fn push(&mut self, t: f64, state: &[f64]) {
        debug_assert_eq!(state.len(), self.dim);
        if let Some(&last) = self.times.last() {
            let start = self.values.len() - self.dim;
            if t <= last {
                self.values[start..].copy_from_slice(state);
                self.collapse_tail();
                return;
            }
            if &self.values[start..] == state {
                return;
            }
        }
        self.times.push(t);
        self.values.extend_from_slice(state);
    }

    // an overwrite may make the last two states equal
    fn collapse_tail(&mut self) {
        let n = self.times.len();
        if n >= 2 {
            let d = self.dim;
            if self.values[(n - 2) * d..(n - 1) * d] == self.values[(n - 1) * d..] {
                self.times.pop();
                self.values.truncate((n - 1) * d);
            }
        }
    }

    pub fn finish(self, horizon: f64) -> StatePath {
        let horizon = horizon.max(self.times.last().copied().unwrap_or(0.0));
        StatePath { dim: self.dim, times: self.times, values: self.values, horizon, stopped_at: None }
    }
}

/// `f̲(t) = f(t) − min(inf_{s≤t} f(s), 0)`.
pub fn reflect(f: &impl PiecewisePath) -> Result<StatePath, PathError> {
    if f.dim() != 1 {
        return Err(PathError::DimensionMismatch { expected: 1, got: f.dim() });
    }
    let mut inf = f64::INFINITY;
    let mut b = PathBuilder::with_capacity(1, f.len());
    for i in 0..f.len() {
        let v = f.coord(i, 0);
        inf = inf.min(v);
        b.push(f.time(i), &[v - inf.min(0.0)]);
    }
    Ok(b.finish(f.horizon()))
}

fn first_event(f: &impl PiecewisePath, from: usize, pred: impl Fn(f64) -> bool) -> Option<usize> {
    (from..f.len()).find(|&i| pred(f.norm_at_event(i)))
}

/// `T↑(f, ε)`: first time the norm is at least `eps`.
pub fn first_hit_above(f: &impl PiecewisePath, eps: f64) -> Option<f64> {
    first_event(f, 0, |v| v >= eps).map(|i| f.time(i))
}

/// `T↓(f, ε)`: first time the norm is at most `eps`.
pub fn first_hit_below(f: &impl PiecewisePath, eps: f64) -> Option<f64> {
    first_event(f, 0, |v| v <= eps).map(|i| f.time(i))
}

/// `T0(f)`: first positive time with zero norm.
///
/// A path that starts at zero stays there on a right neighbourhood of 0, so
/// the infimum is 0 in that case.
pub fn zero_hit(f: &impl PiecewisePath) -> Option<f64> {
    first_event(f, 0, |v| v == 0.0).map(|i| f.time(i))
}

/// `T̃0(f)`: first time some coordinate vanishes.
pub fn all_coords_positive_until(f: &impl PiecewisePath) -> Option<f64> {
    (0..f.len()).find(|&i| (0..f.dim()).any(|k| f.coord(i, k) == 0.0)).map(|i| f.time(i))
}

/// `θ_t f = f(t + ·)`.
pub fn shift(f: &impl PiecewisePath, t: f64) -> StatePath {
    let d = f.dim();
    let mut b = PathBuilder::new(d);
    let start = f.index_at(t);
    let mut row = vec![0.0; d];
    for i in start..f.len() {
        for (k, r) in row.iter_mut().enumerate() {
            *r = f.coord(i, k);
        }
        b.push((f.time(i) - t).max(0.0), &row);
    }
    b.finish((f.horizon() - t).max(0.0))
}

/// `σ f = f(· ∧ T0(f))`, recording the stop time.
pub fn stop_at_zero(f: &impl PiecewisePath) -> StatePath {
    let d = f.dim();
    let end = first_event(f, 0, |v| v == 0.0);
    let last = end.unwrap_or(f.len() - 1);
    let mut b = PathBuilder::new(d);
    let mut row = vec![0.0; d];
    for i in 0..=last {
        for (k, r) in row.iter_mut().enumerate() {
            *r = f.coord(i, k);
        }
        b.push(f.time(i), &row);
    }
    let mut p = b.finish(f.horizon());
    p.stopped_at = end.map(|i| f.time(i));
    p
}

/// `e_ε↑(f)`: the first excursion reaching norm `eps`, starting at its
/// crossing time and stopped at its next zero. Incomplete excursions have
/// `stopped_at() == None`.
pub fn excursion_above(f: &impl PiecewisePath, eps: f64) -> Result<StatePath, PathError> {
    let t = first_hit_above(f, eps).ok_or(PathError::LevelNeverReached { eps })?;
    Ok(stop_at_zero(&shift(f, t)))
}

/// `g_ε(f) = sup{t ≤ T↑(f, ε): ‖f(t)‖ = 0}`, 0 when that set is empty.
///
/// Zeros occupy intervals `[t_i, t_{i+1})`, so the supremum is the end of the
/// last zero segment before `T↑`.
pub fn excursion_left_endpoint(f: &impl PiecewisePath, eps: f64) -> Result<f64, PathError> {
    let up = first_event(f, 0, |v| v >= eps).ok_or(PathError::LevelNeverReached { eps })?;
    Ok((0..up).rev().find(|&i| f.norm_at_event(i) == 0.0).map_or(0.0, |i| f.time(i + 1)))
}

/// One excursion above level `eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcursionRecord {
    pub g_eps: f64,
    pub t_up: f64,
    /// End of the excursion; `None` when the horizon comes first.
    pub t0_after: Option<f64>,
    pub max_height: f64,
}

/// Statistics of the first excursion reaching `eps`.
pub fn first_excursion(f: &impl PiecewisePath, eps: f64) -> Result<ExcursionRecord, PathError> {
    excursions_from(f, eps, 0, 1).into_iter().next().ok_or(PathError::LevelNeverReached { eps })
}

/// Every excursion reaching `eps`, in order.
pub fn excursion_inventory(f: &impl PiecewisePath, eps: f64) -> Vec<ExcursionRecord> {
    excursions_from(f, eps, 0, usize::MAX)
}

fn excursions_from(f: &impl PiecewisePath, eps: f64, mut from: usize, limit: usize) -> Vec<ExcursionRecord> {
    let mut out = Vec::new();
    let mut last_zero_end = 0.0;
    while out.len() < limit {
        let Some(up) = first_event(f, from, |v| v >= eps) else { break };
        if let Some(z) = (from..up).rev().find(|&i| f.norm_at_event(i) == 0.0) {
            last_zero_end = f.time(z + 1);
        }
        let end = first_event(f, up, |v| v == 0.0);
        let stop = end.unwrap_or(f.len());
        let max_height = (up..stop).map(|i| f.norm_at_event(i)).fold(0.0, f64::max);
        out.push(ExcursionRecord { g_eps: last_zero_end, t_up: f.time(up), t0_after: end.map(|i| f.time(i)), max_height });
        match end {
            Some(i) => from = i,
            None => break,
        }
    }
    out
}

/// Diffusive view `X_n(t) = x(n²t)/n`; no data is copied.
#[derive(Debug, Clone, Copy)]
pub struct ScaledPath<'a> {
    base: &'a StatePath,
    n: f64,
}

pub fn rescale(base: &StatePath, n: u32) -> ScaledPath<'_> {
    assert!(n >= 1, "scaling index must be positive");
    ScaledPath { base, n: n as f64 }
}

impl<'a> ScaledPath<'a> {
    pub fn base(&self) -> &'a StatePath {
        self.base
    }

    pub fn scale(&self) -> f64 {
        self.n
    }

    /// Owned copy, for callers that need to keep the scaled path.
    pub fn materialize(&self) -> StatePath {
        let n2 = self.n * self.n;
        StatePath {
            dim: self.base.dim,
            times: self.base.times.iter().map(|t| t / n2).collect(),
            values: self.base.values.iter().map(|v| v / self.n).collect(),
            horizon: self.base.horizon / n2,
            stopped_at: self.base.stopped_at.map(|t| t / n2),
        }
    }
}

impl PiecewisePath for ScaledPath<'_> {
    fn dim(&self) -> usize {
        self.base.dim
    }
    fn len(&self) -> usize {
        self.base.len()
    }
    fn time(&self, i: usize) -> f64 {
        self.base.times[i] / (self.n * self.n)
    }
    fn coord(&self, i: usize, k: usize) -> f64 {
        self.base.coord(i, k) / self.n
    }
    fn horizon(&self) -> f64 {
        self.base.horizon / (self.n * self.n)
    }
}

/// `R_n = X_n/‖X_n‖`, equal to `pi` on empty states.
pub fn scaled_ratio(x: &impl PiecewisePath, pi: &[f64]) -> Result<StatePath, PathError> {
    if pi.len() != x.dim() {
        return Err(PathError::DimensionMismatch { expected: x.dim(), got: pi.len() });
    }
    let mut b = PathBuilder::with_capacity(x.dim(), x.len());
    let mut row = vec![0.0; x.dim()];
    for i in 0..x.len() {
        let norm = x.norm_at_event(i);
        for (k, r) in row.iter_mut().enumerate() {
            *r = if norm == 0.0 { pi[k] } else { x.coord(i, k) / norm };
        }
        b.push(x.time(i), &row);
    }
    Ok(b.finish(x.horizon()))
}

/// `max_{t ∈ grid} ‖X(t) − π‖X(t)‖‖₁`.
pub fn collapse_gap(x: &impl PiecewisePath, pi: &[f64], grid: &[f64]) -> Result<f64, PathError> {
    if grid.is_empty() {
        return Err(PathError::EmptyGrid);
    }
    if pi.len() != x.dim() {
        return Err(PathError::DimensionMismatch { expected: x.dim(), got: pi.len() });
    }
    let mut worst: f64 = 0.0;
    for &t in grid {
        let i = x.index_at(t);
        let norm = x.norm_at_event(i);
        let gap: f64 = (0..x.dim()).map(|k| (x.coord(i, k) - pi[k] * norm).abs()).sum();
        worst = worst.max(gap);
    }
    Ok(worst)
}
