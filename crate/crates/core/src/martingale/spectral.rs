//! Eigen-decomposition of a diagonalizable generator and the functional `F`.

use super::MartingaleError;
use crate::mobility::MobilityProfile;
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Eigenvalues closer than this (relative to `‖Q‖`) are treated as equal.
const CLUSTER_TOL: f64 = 1e-7;
/// Allowed `‖ωQ − Jω‖_max`, relative to `‖Q‖`.
pub const RESIDUAL_TOL: f64 = 1e-9;

/// `Q = ω⁻¹ J ω` with `J` diagonal; rows of `ω` are left eigenvectors.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// Distinct eigenvalues; the last one is 0.
    eigenvalues: Vec<Complex64>,
    multiplicities: Vec<usize>,
    /// `K × K`, rows grouped by eigenvalue in the order of `eigenvalues`.
    omega: DMatrix<Complex64>,
    /// First row of each eigenvalue group, `k(i)`.
    first_row: Vec<usize>,
    gamma: f64,
}

impl SpectralDecomposition {
    pub fn new(profile: &MobilityProfile) -> Result<Self, MartingaleError> {
        let q = profile.q();
        let k = q.nrows();
        let scale = q.iter().map(|v| v.abs()).fold(1e-300, f64::max);
        let tol = CLUSTER_TOL * scale;

        let mut raw: Vec<Complex64> = q.clone().complex_eigenvalues().iter().copied().collect();
        raw.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
        let mut groups: Vec<(Complex64, usize)> = Vec::new();
        for z in raw {
            match groups.iter_mut().find(|(c, _)| (*c - z).norm() <= tol) {
                Some((c, m)) => {
                    *c = (*c * *m as f64 + z) / (*m as f64 + 1.0);
                    *m += 1;
                }
                None => groups.push((z, 1)),
            }
        }
        let zero = groups
            .iter()
            .position(|(c, _)| c.norm() <= tol)
            .ok_or_else(|| MartingaleError::Decomposition("no zero eigenvalue".into()))?;
        if groups[zero].1 != 1 {
            return Err(MartingaleError::Decomposition("zero eigenvalue is not simple".into()));
        }
        let z = groups.remove(zero);
        groups.push((Complex64::new(0.0, 0.0), z.1));
        // conjugate pairs: make imaginary parts exact mirrors
        for g in groups.iter_mut() {
            if g.0.im.abs() <= tol {
                g.0.im = 0.0;
            }
        }

        let qc: DMatrix<Complex64> = q.map(|v| Complex64::new(v, 0.0));
        let qt = qc.transpose();
        let mut rows: Vec<Vec<Complex64>> = Vec::with_capacity(k);
        let mut first_row = Vec::with_capacity(groups.len());
        for (i, &(theta, m)) in groups.iter().enumerate() {
            first_row.push(rows.len());
            if i == groups.len() - 1 {
                let pi_max = profile.pi_max();
                rows.push(profile.pi().iter().map(|p| Complex64::new(p / pi_max, 0.0)).collect());
                continue;
            }
            let shifted = &qt - DMatrix::<Complex64>::identity(k, k) * theta;
            let svd = shifted.svd(false, true);
            let v_t = svd.v_t.ok_or_else(|| MartingaleError::Decomposition("SVD failed".into()))?;
            let mut order: Vec<usize> = (0..k).collect();
            order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
            let sigma_max = svd.singular_values.max();
            let null_dim = order.iter().filter(|&&j| svd.singular_values[j] <= 1e-6 * sigma_max.max(scale)).count();
            if null_dim < m {
                return Err(MartingaleError::NotDiagonalizable);
            }
            for &j in order.iter().take(m) {
                rows.push(normalize_row(v_t.row(j).iter().map(|z| z.conj()).collect()));
            }
        }
        let omega = DMatrix::from_fn(k, k, |i, j| rows[i][j]);

        let mut j_diag = Vec::with_capacity(k);
        for &(theta, m) in &groups {
            j_diag.extend(std::iter::repeat_n(theta, m));
        }
        let residual = (&omega * &qc - DMatrix::from_diagonal(&nalgebra::DVector::from_vec(j_diag)) * &omega)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if residual > RESIDUAL_TOL * scale {
            return Err(MartingaleError::Decomposition(format!("residual {residual:e}")));
        }
        let svd = omega.clone().svd(false, false);
        if svd.singular_values.min() <= 1e-10 * svd.singular_values.max() {
            return Err(MartingaleError::NotDiagonalizable);
        }
        let gamma = -groups.iter().map(|(c, m)| c.re * *m as f64).sum::<f64>();
        if (gamma - profile.gamma()).abs() > 1e-9 * scale.max(1.0) {
            return Err(MartingaleError::Decomposition(format!("trace mismatch {gamma} vs {}", profile.gamma())));
        }
        Ok(Self { eigenvalues: groups.iter().map(|g| g.0).collect(), multiplicities: groups.iter().map(|g| g.1).collect(), omega, first_row, gamma })
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicities
    }

    pub fn omega(&self) -> &DMatrix<Complex64> {
        &self.omega
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn nodes(&self) -> usize {
        self.omega.nrows()
    }

    /// `(row of ω, exponent)` for every nonzero eigenvalue.
    pub fn factors(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.eigenvalues.len() - 1;
        self.first_row[..n].iter().copied().zip(self.multiplicities[..n].iter().copied())
    }

    /// `(ωu)_row`.
    pub fn project(&self, row: usize, u: &[f64]) -> Complex64 {
        self.omega.row(row).iter().zip(u).map(|(w, x)| w * x).sum()
    }

    /// `ln F(u)`; `−∞` when `F(u) = 0`.
    pub fn ln_functional(&self, u: &[f64]) -> f64 {
        self.factors().map(|(row, m)| m as f64 * self.project(row, u).norm().ln()).sum()
    }

    /// `F(u) = ∏ |(ωu)_{k(i)}|^{m_i}` over nonzero eigenvalues.
    pub fn functional(&self, u: &[f64]) -> f64 {
        self.factors().map(|(row, m)| self.project(row, u).norm().powi(m as i32)).product()
    }
}

/// Unit ∞-norm, with the first significant entry real and positive.
fn normalize_row(mut row: Vec<Complex64>) -> Vec<Complex64> {
    let max = row.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let lead = row.iter().find(|z| z.norm() > 1e-8 * max).copied().unwrap_or(Complex64::new(1.0, 0.0));
    let phase = lead.conj() / lead.norm();
    for z in row.iter_mut() {
        *z = *z * phase / max;
    }
    row
}

/// `max_t |F(e^{tQ}u) e^{γt} / F(u) − 1|` over `times`.
pub fn check_homogeneity(
    spec: &SpectralDecomposition,
    profile: &MobilityProfile,
    u: &[f64],
    times: &[f64],
) -> Result<f64, MartingaleError> {
    let base = spec.ln_functional(u);
    let size = u.iter().fold(0.0f64, |m, x| m.max(x.abs())) * u.len() as f64;
    let degree: usize = spec.factors().map(|(_, m)| m).sum();
    // rows have unit ∞-norm, so F(u) ≤ (K‖u‖_∞)^{Σm}
    if !(base > (1e-12 * size.powi(degree as i32)).ln()) {
        return Err(MartingaleError::DegenerateU);
    }
    let mut worst: f64 = 0.0;
    for &t in times {
        let p = profile.transition_matrix(t, 1e-15)?;
        let v: Vec<f64> = (0..u.len()).map(|i| (0..u.len()).map(|j| p[(i, j)] * u[j]).sum()).collect();
        let ratio = (spec.ln_functional(&v) + spec.gamma() * t - base).exp_m1();
        worst = worst.max(ratio.abs());
    }
    Ok(worst)
}
