//! Reference laws for the heavy-traffic limit: reflected Brownian motion
//! with drift `−λα` and variance `2λ`, its exponential stationary law, and
//! geometric and Poisson tail references.

use crate::path::{first_excursion, ExcursionRecord, PathBuilder, PathError, StatePath};
use crate::rng::{StreamClass, StreamKey};
use crate::stats::normal_cdf;
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::gamma_lr;
use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffusionError {
    #[error("invalid parameters: lambda = {lambda}, alpha = {alpha}")]
    InvalidParams { lambda: f64, alpha: f64 },
    #[error("NaN input")]
    NanInput,
    #[error("the stationary law needs alpha > 0")]
    ZeroAlpha,
    #[error("step {step} is coarser than horizon/1024 = {limit}")]
    StepTooCoarse { step: f64, limit: f64 },
    #[error("rho must lie in (0,1), got {0}")]
    RhoOutOfRange(f64),
    #[error("need v >= u > 0, got u = {u}, v = {v}")]
    VLessThanU { u: f64, v: f64 },
    #[error(transparent)]
    Path(#[from] PathError),
}

/// Reflected Brownian motion started at 0 with drift `−λα` and variance `2λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RbmParams {
    lambda: f64,
    alpha: f64,
}

impl RbmParams {
    pub fn new(lambda: f64, alpha: f64) -> Result<Self, DiffusionError> {
        if !(lambda > 0.0 && lambda.is_finite() && alpha >= 0.0 && alpha.is_finite()) {
            return Err(DiffusionError::InvalidParams { lambda, alpha });
        }
        Ok(Self { lambda, alpha })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn drift(&self) -> f64 {
        -self.lambda * self.alpha
    }

    pub fn variance(&self) -> f64 {
        2.0 * self.lambda
    }
}

/// `P(B̲_t ≤ x)` from `B̲_0 = 0`.
pub fn rbm_marginal_cdf(p: &RbmParams, t: f64, x: f64) -> Result<f64, DiffusionError> {
    if t.is_nan() || x.is_nan() {
        return Err(DiffusionError::NanInput);
    }
    if x < 0.0 {
        return Ok(0.0);
    }
    if t <= 0.0 || x.is_infinite() {
        return Ok(1.0);
    }
    let m = p.drift();
    let s2 = p.variance();
    let sd = (s2 * t).sqrt();
    let value = normal_cdf((x - m * t) / sd) - (2.0 * m * x / s2).exp() * normal_cdf((-x - m * t) / sd);
    Ok(value.clamp(0.0, 1.0))
}

/// Stationary law `1 − e^{−αx}`.
pub fn rbm_stationary_cdf(p: &RbmParams, x: f64) -> Result<f64, DiffusionError> {
    if x.is_nan() {
        return Err(DiffusionError::NanInput);
    }
    if !(p.alpha > 0.0) {
        return Err(DiffusionError::ZeroAlpha);
    }
    Ok(if x <= 0.0 { 0.0 } else { 1.0 - (-p.alpha * x).exp() })
}

/// How a discretized path is kept nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reflection {
    /// `W_{i+1} = max(W_i + ΔX, 0)`.
    Projected,
    /// Reflects against the minimum of the Brownian bridge between grid
    /// points, which makes grid values exact in law. Paths never sit exactly
    /// at 0 after time 0, so excursion endpoints need [`Reflection::Projected`].
    Bridge,
}

fn rbm_step<R: Rng + ?Sized>(w: f64, mean: f64, sd: f64, scheme: Reflection, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    let dx = mean + sd * z;
    match scheme {
        Reflection::Projected => (w + dx).max(0.0),
        Reflection::Bridge => {
            // minimum of the bridge from 0 to dx over the step
            let u: f64 = 1.0 - rng.random::<f64>();
            let low = 0.5 * (dx - (dx * dx - 2.0 * sd * sd * u.ln()).sqrt());
            (w + dx).max(dx - low)
        }
    }
}

/// Value of the reflected process at time `steps * step`, from 0.
pub fn rbm_sample_marginal<R: Rng + ?Sized>(p: &RbmParams, step: f64, steps: usize, scheme: Reflection, rng: &mut R) -> f64 {
    let mean = p.drift() * step;
    let sd = (p.variance() * step).sqrt();
    let mut w = 0.0;
    for _ in 0..steps {
        w = rbm_step(w, mean, sd, scheme, rng);
    }
    w
}

/// Discretized reflected path on `[0, horizon]`.
pub fn rbm_sample_path(p: &RbmParams, horizon: f64, step: f64, scheme: Reflection, key: StreamKey) -> Result<StatePath, DiffusionError> {
    let limit = horizon / 1024.0;
    if !(step > 0.0 && step <= limit) {
        return Err(DiffusionError::StepTooCoarse { step, limit });
    }
    let mut rng = key.stream(StreamClass::Diffusion);
    let steps = (horizon / step).floor() as usize;
    let mean = p.drift() * step;
    let sd = (p.variance() * step).sqrt();
    let mut b = PathBuilder::with_capacity(1, steps + 1);
    let mut w = 0.0;
    b.push(0.0, &[w]);
    for i in 1..=steps {
        w = rbm_step(w, mean, sd, scheme, &mut rng);
        b.push(i as f64 * step, &[w]);
    }
    Ok(b.finish(horizon))
}

/// `(g_ε, T0 after T↑, max height)` of the first excursion above `eps`.
pub fn rbm_excursion_stats(path: &StatePath, eps: f64) -> Result<ExcursionRecord, DiffusionError> {
    Ok(first_excursion(path, eps)?)
}

/// `ρ^q`.
pub fn geometric_tail(rho: f64, q: u32) -> Result<f64, DiffusionError> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(DiffusionError::RhoOutOfRange(rho));
    }
    Ok(rho.powi(q as i32))
}

/// `h(x) = x ln x + 1 − x`.
pub fn cramer_h(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x * x.ln() + 1.0 - x
    }
}

/// Chernoff bound `exp(−u h(v/u))` on `P(Poisson(u) ≥ v)`.
pub fn poisson_tail_bound(u: f64, v: f64) -> Result<f64, DiffusionError> {
    if !(u > 0.0 && v >= u) {
        return Err(DiffusionError::VLessThanU { u, v });
    }
    Ok((-u * cramer_h(v / u)).exp())
}

/// Exact `P(Poisson(u) ≥ k)`.
pub fn poisson_tail(u: f64, k: u64) -> f64 {
    if k == 0 {
        1.0
    } else {
        gamma_lr(k as f64, u)
    }
}

/// Writes `t, x, cdf` rows of the marginal law.
pub fn write_cdf_table<W: Write>(mut w: W, p: &RbmParams, times: &[f64], xs: &[f64]) -> io::Result<()> {
    writeln!(w, "t,x,cdf")?;
    for &t in times {
        for &x in xs {
            let c = rbm_marginal_cdf(p, t, x).map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
            writeln!(w, "{t},{x},{c}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{ks_two_sample, mean_se};
    use approx::assert_abs_diff_eq;

    fn unit() -> RbmParams {
        RbmParams::new(1.0, 1.0).unwrap()
    }

    #[test]
    fn params() {
        let p = RbmParams::new(2.0, 0.5).unwrap();
        assert_eq!(p.drift(), -1.0);
        assert_eq!(p.variance(), 4.0);
        assert!(RbmParams::new(0.0, 1.0).is_err());
        assert!(RbmParams::new(1.0, -1.0).is_err());
    }

    #[test]
    fn marginal_limits() {
        let p = unit();
        assert_eq!(rbm_marginal_cdf(&p, 1.0, f64::INFINITY).unwrap(), 1.0);
        assert!(rbm_marginal_cdf(&p, 1.0, 60.0).unwrap() > 1.0 - 1e-12);
        assert_eq!(rbm_marginal_cdf(&p, 1.0, -1.0).unwrap(), 0.0);
        assert!(matches!(rbm_marginal_cdf(&p, f64::NAN, 1.0), Err(DiffusionError::NanInput)));
    }

    #[test]
    fn driftless_reflection_principle() {
        let p = RbmParams::new(1.0, 0.0).unwrap();
        for &(t, x) in &[(1.0, 0.3), (2.0, 1.7), (0.5, 0.01)] {
            let expected = 2.0 * normal_cdf(x / (2.0f64 * t).sqrt()) - 1.0;
            assert_abs_diff_eq!(rbm_marginal_cdf(&p, t, x).unwrap(), expected, epsilon = 1e-14);
        }
    }

    #[test]
    fn stationary_law() {
        let p = unit();
        assert_eq!(rbm_stationary_cdf(&p, 0.0).unwrap(), 0.0);
        assert!(matches!(rbm_stationary_cdf(&RbmParams::new(1.0, 0.0).unwrap(), 1.0), Err(DiffusionError::ZeroAlpha)));
        // moments r!/α^r by integrating the survival function r x^{r-1} S(x)
        let moment = |r: i32| {
            let h = 1e-3;
            (0..60_000)
                .map(|i| {
                    let x = (i as f64 + 0.5) * h;
                    r as f64 * x.powi(r - 1) * (1.0 - rbm_stationary_cdf(&p, x).unwrap()) * h
                })
                .sum::<f64>()
        };
        assert_abs_diff_eq!(moment(1), 1.0, epsilon = 1e-5);
        assert_abs_diff_eq!(moment(2), 2.0, epsilon = 1e-5);
        assert_abs_diff_eq!(moment(3), 6.0, epsilon = 1e-4);
        for &x in &[0.1, 0.5, 1.0, 3.0, 7.0] {
            let gap = (rbm_marginal_cdf(&p, 50.0, x).unwrap() - rbm_stationary_cdf(&p, x).unwrap()).abs();
            assert!(gap < 1e-3);
        }
    }

    #[test]
    fn marginal_monotone_and_converging() {
        let p = RbmParams::new(1.5, 0.7).unwrap();
        for &t in &[0.1, 1.0, 10.0] {
            let mut last = 0.0;
            for i in 0..200 {
                let c = rbm_marginal_cdf(&p, t, i as f64 * 0.05).unwrap();
                assert!(c >= last && (0.0..=1.0).contains(&c));
                last = c;
            }
        }
        let gap = |t: f64| {
            (0..50)
                .map(|i| (rbm_marginal_cdf(&p, t, i as f64 * 0.2).unwrap() - rbm_stationary_cdf(&p, i as f64 * 0.2).unwrap()).abs())
                .fold(0.0, f64::max)
        };
        assert!(gap(40.0) < gap(4.0) && gap(4.0) < gap(0.4));
    }

    #[test]
    fn bridge_scheme_matches_closed_form() {
        let p = unit();
        let mut rng = StreamKey::root(5).stream(StreamClass::Diffusion);
        let n = 40_000;
        let samples: Vec<f64> = (0..n).map(|_| rbm_sample_marginal(&p, 1.0 / 16.0, 16, Reflection::Bridge, &mut rng)).collect();
        for &x in &[0.1, 0.5, 1.0, 2.0] {
            let emp = samples.iter().filter(|&&s| s <= x).count() as f64 / n as f64;
            let c = rbm_marginal_cdf(&p, 1.0, x).unwrap();
            let se = (c * (1.0 - c) / n as f64).sqrt();
            assert!((emp - c).abs() <= 4.0 * se, "x={x} emp={emp} cdf={c}");
        }
    }

    #[test]
    fn sample_path_contract() {
        let p = unit();
        assert!(matches!(rbm_sample_path(&p, 1.0, 0.01, Reflection::Projected, StreamKey::root(0)), Err(DiffusionError::StepTooCoarse { .. })));
        let path = rbm_sample_path(&p, 10.0, 10.0 / 4096.0, Reflection::Projected, StreamKey::root(0)).unwrap();
        assert!(path.times().len() > 1000);
        let again = rbm_sample_path(&p, 10.0, 10.0 / 4096.0, Reflection::Projected, StreamKey::root(0)).unwrap();
        assert_eq!(path, again);
    }

    #[test]
    fn excursion_heights_shrink_with_drift() {
        let mean_height = |alpha: f64| {
            let p = RbmParams::new(1.0, alpha).unwrap();
            let heights: Vec<f64> = (0..300)
                .filter_map(|r| {
                    let path = rbm_sample_path(&p, 20.0, 20.0 / 8192.0, Reflection::Projected, StreamKey::new(2, r)).ok()?;
                    rbm_excursion_stats(&path, 0.2).ok().map(|e| e.max_height)
                })
                .collect();
            mean_se(&heights).mean
        };
        assert!(mean_height(4.0) < mean_height(1.0));
    }

    #[test]
    fn excursion_endpoint_stable_under_step_halving() {
        let p = unit();
        let g = |steps: f64, seed: u64| -> Vec<f64> {
            (0..1000)
                .filter_map(|r| {
                    let path = rbm_sample_path(&p, 8.0, 8.0 / steps, Reflection::Projected, StreamKey::new(seed, r)).ok()?;
                    rbm_excursion_stats(&path, 0.5).ok().map(|e| e.g_eps)
                })
                .collect()
        };
        let ks = ks_two_sample(&g(4096.0, 1), &g(8192.0, 2));
        // two independent samples of 1000: the null spread alone is about 0.04
        assert!(ks.p_value > 0.001, "{ks:?}");
    }

    #[test]
    fn driftless_increments_are_symmetric() {
        let p = RbmParams::new(1.0, 0.0).unwrap();
        let mut rng = StreamKey::root(8).stream(StreamClass::Diffusion);
        let sd = (p.variance() * 1e-3).sqrt();
        let inc: Vec<f64> = (0..100_000).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
        let neg: Vec<f64> = inc.iter().map(|v| -v).collect();
        assert!(ks_two_sample(&inc, &neg).p_value > 0.01);
    }

    #[test]
    fn tails() {
        assert_eq!(geometric_tail(0.3, 0).unwrap(), 1.0);
        assert!(matches!(geometric_tail(1.0, 2), Err(DiffusionError::RhoOutOfRange(_))));
        let b = poisson_tail_bound(1.0, 2.0).unwrap();
        assert_abs_diff_eq!(b, (-(2.0 * 2f64.ln() - 1.0)).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(b, 0.6796, epsilon = 1e-4);
        assert_abs_diff_eq!(poisson_tail(1.0, 2), 1.0 - 2.0 / std::f64::consts::E, epsilon = 1e-14);
        assert!(poisson_tail(1.0, 2) <= b);
        assert_eq!(poisson_tail_bound(3.0, 3.0).unwrap(), 1.0);
        assert!(matches!(poisson_tail_bound(2.0, 1.0), Err(DiffusionError::VLessThanU { .. })));
    }

    #[test]
    fn cdf_table_format() {
        let mut out = Vec::new();
        write_cdf_table(&mut out, &unit(), &[1.0], &[0.0, 1.0]).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("t,x,cdf\n1,0,"));
        assert_eq!(text.lines().count(), 3);
    }
}
