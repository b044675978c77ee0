//! Relative entropy between probability vectors and its two-sided bounds.

use super::MartingaleError;

/// `H(u, v) = Σ u_k ln(u_k / v_k)` with `0 ln 0 = 0`.
pub fn relative_entropy(u: &[f64], v: &[f64]) -> Result<f64, MartingaleError> {
    if u.len() != v.len() {
        return Err(MartingaleError::DimensionMismatch { expected: v.len(), got: u.len() });
    }
    if let Some(k) = v.iter().position(|&x| x <= 0.0) {
        return Err(MartingaleError::ZeroDenominator(k));
    }
    let h: f64 = u.iter().zip(v).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b).ln()).sum();
    Ok(h.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyBounds {
    pub entropy: f64,
    pub lower: f64,
    pub upper: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

/// Checks `½‖u − v‖₁² ≤ H(u, v) ≤ ‖u − v‖₁ / min_k v_k`.
pub fn check_entropy_bounds(u: &[f64], v: &[f64]) -> Result<EntropyBounds, MartingaleError> {
    let entropy = relative_entropy(u, v)?;
    let l1: f64 = u.iter().zip(v).map(|(a, b)| (a - b).abs()).sum();
    let v_min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let lower = 0.5 * l1 * l1;
    let upper = l1 / v_min;
    let slack = 1e-12;
    Ok(EntropyBounds { entropy, lower, upper, lower_ok: lower <= entropy + slack, upper_ok: entropy <= upper + slack })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn hand_values() {
        let b = check_entropy_bounds(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(b.entropy, std::f64::consts::LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(b.lower, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(b.upper, 2.0, epsilon = 1e-15);
        assert!(b.lower_ok && b.upper_ok);
        let b = check_entropy_bounds(&[0.2, 0.3, 0.5], &[0.2, 0.3, 0.5]).unwrap();
        assert_eq!((b.entropy, b.lower, b.upper), (0.0, 0.0, 0.0));
    }

    #[test]
    fn errors() {
        assert!(matches!(relative_entropy(&[0.5, 0.5], &[1.0, 0.0]), Err(MartingaleError::ZeroDenominator(1))));
        assert!(relative_entropy(&[1.0], &[0.5, 0.5]).is_err());
    }

    fn simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, k).prop_filter_map("nonzero", |w| {
            let s: f64 = w.iter().sum();
            (s > 1e-9).then(|| w.iter().map(|x| x / s).collect())
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn bounds_hold(
            (u, v) in (2usize..=6).prop_flat_map(|k| (simplex(k), simplex(k)))
        ) {
            prop_assume!(v.iter().all(|&x| x > 0.0));
            let b = check_entropy_bounds(&u, &v).unwrap();
            prop_assert!(b.lower_ok && b.upper_ok, "{b:?}");
        }
    }
}
