//! The spectral functional `F` of a diagonalizable generator and the integral
//! martingale `M_c` of the closed network.
//!
//! With `S = {u ∈ ℝ^{K−1} : u ≥ 0, Σu ≤ 1}`, `L u = (u, 1 − Σu)` and
//! `Π = diag(π)`,
//!
//! ```text
//! M_c(t) = e^{−cγt} ∫_S ∏_k ((Lu)_k / π_k)^{x_k(t)} F(Π⁻¹Lu)^{c−1} du.
//! ```
//!
//! `F(Π⁻¹Lu)` is a product of moduli of affine functions of `u`, so for
//! `c < 1` the integrand blows up on lines (real eigenvalues) and points
//! (complex pairs). Those sets are located exactly and used as break points,
//! and distances to them are carried through the quadrature as offsets so the
//! singular factors never suffer cancellation.

mod entropy;
mod quadrature;
mod spectral;

pub use entropy::{check_entropy_bounds, relative_entropy, EntropyBounds};
pub use quadrature::{integrate_graded, integrate_interval, integrate_triangles, triangle_area, QuadResult, Triangle};
pub use spectral::{check_homogeneity, SpectralDecomposition, RESIDUAL_TOL};

use crate::mobility::{MobilityError, MobilityProfile};
use crate::path::{PiecewisePath, StatePath};
use num_complex::Complex64;
use statrs::function::gamma::ln_gamma;
use std::cell::RefCell;
use thiserror::Error;

const MAX_CELLS: usize = 20_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MartingaleError {
    #[error("generator is not diagonalizable")]
    NotDiagonalizable,
    #[error("eigen-decomposition failed: {0}")]
    Decomposition(String),
    #[error("F(u) = 0")]
    DegenerateU,
    #[error("quadrature did not converge (value {value}, error estimate {error})")]
    QuadratureFailure { value: f64, error: f64 },
    #[error("quadrature is implemented for K = 2 and K = 3, got K = {0}")]
    DimensionUnsupported(usize),
    #[error("reference probability {0} is zero")]
    ZeroDenominator(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("c must be positive and finite, got {0}")]
    InvalidC(f64),
    #[error(transparent)]
    Mobility(#[from] MobilityError),
}

/// The simplex `S ⊂ ℝ^{K−1}`, its completion map `L` and `Π`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexGeometry {
    pi: Vec<f64>,
}

impl SimplexGeometry {
    pub fn new(pi: &[f64]) -> Result<Self, MartingaleError> {
        if pi.len() < 2 {
            return Err(MartingaleError::DimensionUnsupported(pi.len()));
        }
        if let Some(k) = pi.iter().position(|&p| !(p > 0.0)) {
            return Err(MartingaleError::ZeroDenominator(k));
        }
        Ok(Self { pi: pi.to_vec() })
    }

    pub fn from_profile(profile: &MobilityProfile) -> Self {
        Self { pi: profile.pi().to_vec() }
    }

    pub fn nodes(&self) -> usize {
        self.pi.len()
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// `Lu`: appends `1 − Σu`.
    pub fn lift(&self, u: &[f64]) -> Vec<f64> {
        let mut v = u.to_vec();
        v.push(1.0 - u.iter().sum::<f64>());
        v
    }

    /// Inverse of [`lift`](Self::lift) on the simplex.
    pub fn drop_last(&self, v: &[f64]) -> Vec<f64> {
        v[..v.len() - 1].to_vec()
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        u.len() + 1 == self.pi.len() && u.iter().all(|&x| x >= 0.0) && u.iter().sum::<f64>() <= 1.0
    }
}

/// One factor `|b + Σ_j a_j u_j|^m` of `F(Π⁻¹Lu)`.
#[derive(Debug, Clone)]
struct Factor {
    a: Vec<Complex64>,
    b: Complex64,
    m: f64,
    real: bool,
}

/// A point of an interval piece together with its distances to the ends.
#[derive(Debug, Clone, Copy)]
struct Node {
    x: f64,
    lo: f64,
    hi: f64,
    dl: f64,
    dr: f64,
}

impl Node {
    /// `x − r`, measured from the nearer end of the piece so that roots close
    /// to a break do not cancel.
    fn signed(&self, r: f64) -> f64 {
        if self.dl <= self.dr {
            (self.lo - r) + self.dl
        } else {
            (self.hi - r) - self.dr
        }
    }

    fn dist(&self, r: f64) -> f64 {
        self.signed(r).abs()
    }
}

fn graded<F: Fn(Node) -> f64>(
    f: F,
    breaks: &[f64],
    p: i32,
    rel_tol: f64,
    max_cells: usize,
) -> Result<QuadResult, MartingaleError> {
    let mut total = QuadResult { value: 0.0, error: 0.0, cells: 0 };
    for w in breaks.windows(2).filter(|w| w[1] > w[0]) {
        let (lo, hi) = (w[0], w[1]);
        let r = integrate_graded(
            |x, dl, dr| f(Node { x, lo, hi, dl, dr }),
            &[lo, hi],
            p,
            0.0,
            rel_tol,
            max_cells,
        )?;
        total.value += r.value;
        total.error += r.error;
        total.cells += r.cells;
    }
    Ok(total)
}

fn sorted_breaks(mut v: Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
    v.retain(|x| x.is_finite() && *x > lo && *x < hi);
    v.push(lo);
    v.push(hi);
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// `M_c` for a fixed generator and exponent `c`.
#[derive(Debug, Clone)]
pub struct IntegralMartingale {
    pi: Vec<f64>,
    gamma: f64,
    c: f64,
    factors: Vec<Factor>,
    quad_tol: f64,
}

impl IntegralMartingale {
    pub fn new(
        spec: &SpectralDecomposition,
        geometry: &SimplexGeometry,
        c: f64,
        quad_tol: f64,
    ) -> Result<Self, MartingaleError> {
        let k = geometry.nodes();
        if spec.nodes() != k {
            return Err(MartingaleError::DimensionMismatch { expected: spec.nodes(), got: k });
        }
        if !(k == 2 || k == 3) {
            return Err(MartingaleError::DimensionUnsupported(k));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(MartingaleError::InvalidC(c));
        }
        let pi = geometry.pi();
        let mut factors: Vec<Factor> = Vec::new();
        let raw: Vec<Factor> = spec
            .factors()
            .map(|(row, m)| {
                let w: Vec<Complex64> = (0..k).map(|j| spec.omega()[(row, j)] / pi[j]).collect();
                let b = w[k - 1];
                let a: Vec<Complex64> = w[..k - 1].iter().map(|x| x - b).collect();
                let scale = a.iter().chain(std::iter::once(&b)).map(|z| z.norm()).fold(0.0, f64::max);
                let real = a.iter().chain(std::iter::once(&b)).all(|z| z.im.abs() <= 1e-12 * scale);
                Factor { a, b, m: m as f64, real }
            })
            .collect();
        // |z̄| = |z|: fold each conjugate partner into one factor
        for f in raw {
            let close = |g: &Factor| {
                let d = f.a.iter().zip(&g.a).map(|(x, y)| (x - y.conj()).norm()).sum::<f64>() + (f.b - g.b.conj()).norm();
                let s = f.a.iter().map(|x| x.norm()).sum::<f64>() + f.b.norm();
                d <= 1e-8 * s
            };
            match factors.iter_mut().find(|g| !g.real && !f.real && close(g)) {
                Some(g) => g.m += f.m,
                None => factors.push(f),
            }
        }
        Ok(Self { pi: pi.to_vec(), gamma: spec.gamma(), c, factors, quad_tol })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn nodes(&self) -> usize {
        self.pi.len()
    }

    fn order(&self) -> i32 {
        if self.c < 1.0 {
            ((2.0 / self.c).ceil() as i32).clamp(2, 60)
        } else {
            2
        }
    }

    /// `∫_S exp(ln_weight(Lu)) F(Π⁻¹Lu)^{c−1} du`.
    pub fn integrate(&self, ln_weight: impl Fn(&[f64]) -> f64) -> Result<QuadResult, MartingaleError> {
        match self.nodes() {
            2 => self.integrate_2(&ln_weight),
            _ => self.integrate_3(&ln_weight),
        }
    }

    fn combine(&self, ln_w: f64, ln_f: f64) -> f64 {
        if ln_w == f64::NEG_INFINITY {
            return 0.0;
        }
        if self.c == 1.0 {
            return ln_w.exp();
        }
        (ln_w + (self.c - 1.0) * ln_f).exp()
    }

    fn integrate_2(&self, ln_weight: &dyn Fn(&[f64]) -> f64) -> Result<QuadResult, MartingaleError> {
        // factors are real for K = 2: |a u + b| = |a| |u − r|
        let roots: Vec<Option<f64>> =
            self.factors.iter().map(|f| (f.a[0].re != 0.0).then(|| -f.b.re / f.a[0].re)).collect();
        let breaks = sorted_breaks(roots.iter().flatten().copied().collect(), 0.0, 1.0);
        let f = |n: Node| {
            let v = [n.x, if n.hi == 1.0 { n.dr } else { 1.0 - n.x }];
            let ln_f: f64 = self
                .factors
                .iter()
                .zip(&roots)
                .map(|(f, r)| match r {
                    Some(r) => f.m * (f.a[0].re.abs().ln() + n.dist(*r).ln()),
                    None => f.m * f.b.re.abs().ln(),
                })
                .sum();
            self.combine(ln_weight(&v), ln_f)
        };
        graded(f, &breaks, self.order(), self.quad_tol, MAX_CELLS)
    }

    fn integrate_3(&self, ln_weight: &dyn Fn(&[f64]) -> f64) -> Result<QuadResult, MartingaleError> {
        let tiny = |z: Complex64, f: &Factor| z.norm() <= 1e-12 * (f.a[0].norm() + f.a[1].norm() + f.b.norm());
        // outer break points in u1
        let mut outer = Vec::new();
        // u1 roots of factors that do not depend on u2
        let mut flat_roots: Vec<Option<f64>> = Vec::new();
        // (u1*, κ) for complex factors: Im of the u2-root is κ (u1 − u1*)
        let mut points: Vec<Option<(f64, f64)>> = Vec::new();
        for f in &self.factors {
            let (a1, a2, b) = (f.a[0], f.a[1], f.b);
            let flat = tiny(a2, f);
            flat_roots.push(if flat && f.real && a1.re != 0.0 { Some(-b.re / a1.re) } else { None });
            points.push(None);
            if flat {
                continue;
            }
            if f.real {
                // crossings with u2 = 0 and with u1 + u2 = 1
                if a1.re != 0.0 {
                    outer.push(-b.re / a1.re);
                }
                if a1.re != a2.re {
                    outer.push(-(a2.re + b.re) / (a1.re - a2.re));
                }
            } else {
                // z(u1) = −(a1 u1 + b)/a2, Im z vanishes at u1*
                let p = -a1 / a2;
                let q = -b / a2;
                if p.im != 0.0 {
                    let u1 = -q.im / p.im;
                    outer.push(u1);
                    *points.last_mut().unwrap() = Some((u1, p.im));
                }
            }
        }
        outer.extend(flat_roots.iter().flatten());
        let reals: Vec<&Factor> = self.factors.iter().filter(|f| f.real && !tiny(f.a[1], f)).collect();
        for (i, f) in reals.iter().enumerate() {
            for g in &reals[i + 1..] {
                let det = f.a[0].re * g.a[1].re - f.a[1].re * g.a[0].re;
                if det != 0.0 {
                    outer.push((-f.b.re * g.a[1].re + g.b.re * f.a[1].re) / det);
                }
            }
        }
        let outer = sorted_breaks(outer, 0.0, 1.0);
        let failure: RefCell<Option<MartingaleError>> = RefCell::new(None);
        let p = self.order();
        let inner_tol = 0.1 * self.quad_tol;

        let outer_f = |n1: Node| {
            if failure.borrow().is_some() {
                return 0.0;
            }
            let u1 = n1.x;
            let upper = if n1.hi == 1.0 { n1.dr } else { 1.0 - u1 };
            // per-factor data at this u1
            enum Inner {
                Flat(f64),
                Line(f64, f64),
                Pair(f64, f64, f64),
            }
            let mut inner_breaks = Vec::new();
            let data: Vec<Inner> = self
                .factors
                .iter()
                .zip(&flat_roots)
                .zip(&points)
                .map(|((f, root), point)| {
                    let (a1, a2, b) = (f.a[0], f.a[1], f.b);
                    if tiny(a2, f) {
                        return match root {
                            Some(r) => Inner::Flat(a1.re.abs().ln() + n1.dist(*r).ln()),
                            None => Inner::Flat((a1 * u1 + b).norm().ln()),
                        };
                    }
                    let z = -(a1 * u1 + b) / a2;
                    inner_breaks.push(z.re);
                    if f.real {
                        Inner::Line(a2.norm().ln(), z.re)
                    } else {
                        let im = match point {
                            Some((u1s, kappa)) => kappa * n1.signed(*u1s),
                            None => z.im,
                        };
                        Inner::Pair(a2.norm().ln(), z.re, im)
                    }
                })
                .collect();
            let breaks = sorted_breaks(inner_breaks, 0.0, upper);
            let inner_f = |n2: Node| {
                let third = if n2.hi == upper { n2.dr } else { upper - n2.x };
                let v = [u1, n2.x, third];
                let ln_f: f64 = self
                    .factors
                    .iter()
                    .zip(&data)
                    .map(|(f, d)| {
                        f.m * match *d {
                            Inner::Flat(l) => l,
                            Inner::Line(la, r) => la + n2.dist(r).ln(),
                            Inner::Pair(la, re, im) => {
                                let dx = n2.signed(re);
                                la + 0.5 * (dx * dx + im * im).ln()
                            }
                        }
                    })
                    .sum();
                self.combine(ln_weight(&v), ln_f)
            };
            match graded(inner_f, &breaks, p, inner_tol, MAX_CELLS) {
                Ok(r) => r.value,
                Err(e) => {
                    *failure.borrow_mut() = Some(e);
                    0.0
                }
            }
        };
        let r = graded(outer_f, &outer, p, self.quad_tol, MAX_CELLS)?;
        match failure.into_inner() {
            Some(e) => Err(e),
            None => Ok(r),
        }
    }

    fn ln_state_weight(&self, x: &[u32]) -> impl Fn(&[f64]) -> f64 + '_ {
        let x = x.to_vec();
        move |v: &[f64]| {
            x.iter()
                .zip(v)
                .zip(&self.pi)
                .filter(|((&n, _), _)| n > 0)
                .map(|((&n, &vk), &p)| if vk > 0.0 { n as f64 * (vk / p).ln() } else { f64::NEG_INFINITY })
                .sum()
        }
    }

    /// `∫_S ∏ ((Lu)_k/π_k)^{x_k} F(Π⁻¹Lu)^{c−1} du`.
    pub fn integral(&self, x: &[u32]) -> Result<f64, MartingaleError> {
        if x.len() != self.nodes() {
            return Err(MartingaleError::DimensionMismatch { expected: self.nodes(), got: x.len() });
        }
        Ok(self.integrate(self.ln_state_weight(x))?.value)
    }

    /// `M_c` at state `x` and time `t`.
    pub fn value(&self, x: &[u32], t: f64) -> Result<f64, MartingaleError> {
        Ok((-self.c * self.gamma * t).exp() * self.integral(x)?)
    }

    /// `E_y[M_c(t)]` computed from the transition matrix: independent users
    /// give `e^{−cγt} ∫ ∏_i ((P(t) Π⁻¹ L u)_i)^{y_i} F^{c−1} du`.
    pub fn expected_value(&self, profile: &MobilityProfile, y: &[u32], t: f64) -> Result<f64, MartingaleError> {
        if y.len() != self.nodes() || profile.nodes() != self.nodes() {
            return Err(MartingaleError::DimensionMismatch { expected: self.nodes(), got: y.len() });
        }
        let p = profile.transition_matrix(t, 1e-15)?;
        let k = self.nodes();
        let w = |v: &[f64]| {
            let mut s = 0.0;
            for i in (0..k).filter(|&i| y[i] > 0) {
                let e: f64 = (0..k).map(|j| p[(i, j)] * v[j] / self.pi[j]).sum();
                s += y[i] as f64 * e.ln();
            }
            s
        };
        Ok((-self.c * self.gamma * t).exp() * self.integrate(w)?.value)
    }

    /// `∫_S F(Π⁻¹Lu)^{c−1} du`, finite for every `c > 0`.
    pub fn f_power_integral(&self) -> Result<f64, MartingaleError> {
        Ok(self.integrate(|_| 0.0)?.value)
    }

    /// Deterministic bound `π̲^{−n} ∫ F^{c−1}` on `M_c` over states of size `n`.
    pub fn bound(&self, total: u32) -> Result<f64, MartingaleError> {
        let pi_min = self.pi.iter().copied().fold(f64::INFINITY, f64::min);
        Ok((-(total as f64) * pi_min.ln()).exp() * self.f_power_integral()?)
    }
}

/// `M_c(t)` along a closed-network path.
pub fn martingale_mc(
    spec: &SpectralDecomposition,
    geometry: &SimplexGeometry,
    c: f64,
    path: &StatePath,
    t: f64,
    quad_tol: f64,
) -> Result<f64, MartingaleError> {
    if path.dim() != geometry.nodes() {
        return Err(MartingaleError::DimensionMismatch { expected: geometry.nodes(), got: path.dim() });
    }
    let x: Vec<u32> = path.eval(t).iter().map(|v| v.round() as u32).collect();
    IntegralMartingale::new(spec, geometry, c, quad_tol)?.value(&x, t)
}

/// `ln ∫_S ∏ v_k^{x_k} du = Σ ln x_k! − ln (‖x‖ + K − 1)!`.
pub fn ln_dirichlet_integral(x: &[u32]) -> f64 {
    let n: u32 = x.iter().sum();
    x.iter().map(|&v| ln_gamma(v as f64 + 1.0)).sum::<f64>() - ln_gamma((n as usize + x.len()) as f64)
}
