//! Estimators and goodness-of-fit tools used by the experiments.

use statrs::distribution::{ContinuousCDF, Normal};

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

/// Welford accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Running {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Running {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn summary(&self) -> MeanSe {
        MeanSe { mean: self.mean, se: (self.variance() / self.n.max(1) as f64).sqrt(), n: self.n }
    }
}

pub fn mean_se(xs: &[f64]) -> MeanSe {
    let mut r = Running::default();
    xs.iter().for_each(|&x| r.push(x));
    r.summary()
}

/// Median of a sample; `NaN` when empty.
pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Distribution-free confidence interval for the median from order statistics.
pub fn median_interval(xs: &[f64], z: f64) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let half = 0.5 * z * n.sqrt();
    let lo = (0.5 * n - half).floor().max(0.0) as usize;
    let hi = ((0.5 * n + half).ceil() as usize).min(v.len() - 1);
    (v[lo], v[hi])
}

/// Linear-interpolated empirical quantile.
pub fn quantile(xs: &[f64], p: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// Kolmogorov–Smirnov outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Effective sample size used for the p-value.
    pub n_eff: f64,
}

/// One-sample KS distance between the empirical law of `samples` and `cdf`.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < v.len() {
        // ties: the empirical CDF jumps once over the whole block
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[i] {
            j += 1;
        }
        let f = cdf(v[i]);
        let below = i as f64 / n;
        let above = (j + 1) as f64 / n;
        d = d.max((f - below).abs()).max((above - f).abs());
        i = j + 1;
    }
    KsResult { statistic: d, p_value: kolmogorov_p_value(d, n), n_eff: n }
}

/// Two-sample KS distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (na, nb) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let n_eff = na * nb / (na + nb);
    KsResult { statistic: d, p_value: kolmogorov_p_value(d, n_eff), n_eff }
}

/// Asymptotic `P(D_n > d)` with the Stephens small-sample correction.
pub fn kolmogorov_p_value(d: f64, n: f64) -> f64 {
    if n <= 0.0 || d <= 0.0 {
        return 1.0;
    }
    let sn = n.sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    kolmogorov_survival(lambda)
}

/// `P(K > x)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * x * x).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Critical KS distance at level `alpha` for effective size `n`.
pub fn ks_critical(n: f64, alpha: f64) -> f64 {
    let (mut lo, mut hi) = (0.2, 5.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_survival(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let sn = n.sqrt();
    0.5 * (lo + hi) / (sn + 0.12 + 0.11 / sn)
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Weighted least squares fit `y ≈ a + b x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    /// Standard error of the slope when the weights are inverse variances.
    pub slope_se: f64,
}

pub fn weighted_linear_fit(x: &[f64], y: &[f64], w: &[f64]) -> LinearFit {
    let sw: f64 = w.iter().sum();
    let xm = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ym = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(a, b)| b * (a - xm).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).zip(w).map(|((a, c), b)| b * (a - xm) * (c - ym)).sum();
    let slope = sxy / sxx;
    LinearFit { intercept: ym - slope * xm, slope, slope_se: (1.0 / sxx).sqrt() }
}

/// Ratio of means `Σa / Σb` over i.i.d. pairs, with a delta-method standard error.
pub fn ratio_estimate(a: &[f64], b: &[f64]) -> MeanSe {
    let n = a.len();
    if n == 0 {
        return MeanSe { mean: f64::NAN, se: f64::NAN, n };
    }
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    let r = ma / mb;
    let var: f64 = if n > 1 {
        a.iter().zip(b).map(|(x, y)| (x - r * y).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    MeanSe { mean: r, se: (var / n as f64).sqrt() / mb, n }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn running_matches_two_pass() {
        let xs = [1.0, 4.0, 2.5, 7.0, -1.0];
        let s = mean_se(&xs);
        assert_abs_diff_eq!(s.mean, 2.7, epsilon = 1e-12);
        let var = xs.iter().map(|x| (x - 2.7f64).powi(2)).sum::<f64>() / 4.0;
        assert_abs_diff_eq!(s.se, (var / 5.0).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn quantiles() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn kolmogorov_reference_values() {
        // classic table: P(K > 1.36) ≈ 0.049, P(K > 1.63) ≈ 0.0098
        assert_abs_diff_eq!(kolmogorov_survival(1.36), 0.0494, epsilon = 5e-4);
        assert_abs_diff_eq!(kolmogorov_survival(1.63), 0.0098, epsilon = 3e-4);
        assert_abs_diff_eq!(ks_critical(1e8, 0.05), 1.3581 / 1e4, epsilon = 1e-7);
    }

    #[test]
    fn ks_one_sample_small() {
        // samples 0.1, 0.5, 0.9 against U(0,1): D = max(0.1, 1/3-0.1, 0.5-1/3, 2/3-0.5, 0.9-2/3, 1-0.9)
        let r = ks_one_sample(&[0.5, 0.1, 0.9], |x| x.clamp(0.0, 1.0));
        assert_abs_diff_eq!(r.statistic, 0.2333333333, epsilon = 1e-9);
    }

    #[test]
    fn ks_two_sample_small() {
        let r = ks_two_sample(&[1.0, 2.0, 3.0], &[2.5, 3.5, 4.5, 5.5]);
        // at t=3: 1 - 1/4
        assert_abs_diff_eq!(r.statistic, 0.75, epsilon = 1e-12);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[1.0, 2.0]).statistic, 0.0);
    }

    #[test]
    fn wilson_contains_estimate() {
        let (lo, hi) = wilson_interval(30, 100, 1.96);
        assert!(lo < 0.3 && hi > 0.3);
        assert_abs_diff_eq!(lo, 0.2189, epsilon = 1e-3);
        let (lo0, hi0) = wilson_interval(0, 50, 1.96);
        assert_eq!(lo0, 0.0);
        assert!(hi0 > 0.0 && hi0 < 0.1);
    }

    #[test]
    fn exact_line_fit() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [3.0, 5.0, 7.0, 9.0];
        let fit = weighted_linear_fit(&x, &y, &[1.0, 2.0, 1.0, 3.0]);
        assert_abs_diff_eq!(fit.slope, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.intercept, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ratio_of_constants() {
        let r = ratio_estimate(&[2.0, 4.0, 6.0], &[1.0, 2.0, 3.0]);
        assert_abs_diff_eq!(r.mean, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.se, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn normal_helpers() {
        assert_abs_diff_eq!(normal_quantile(0.975), 1.959964, epsilon = 1e-6);
        assert_abs_diff_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-15);
    }
}
