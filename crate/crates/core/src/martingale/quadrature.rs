//! Adaptive quadrature on intervals and triangles.
//!
//! Both integrators only evaluate the integrand at interior points, so
//! integrable singularities on cell boundaries are handled by refinement.

use super::MartingaleError;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub cells: usize,
}

/// 15-point Kronrod estimate and its difference to the embedded 7-point Gauss rule.
fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Globally adaptive Gauss–Kronrod integration of `f` over each `[breaks[i], breaks[i+1]]`.
pub fn integrate_interval(
    f: impl Fn(f64) -> f64,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_cells: usize,
) -> Result<QuadResult, MartingaleError> {
    let span = breaks.last().copied().unwrap_or(0.0) - breaks.first().copied().unwrap_or(0.0);
    let mut cells: Vec<(f64, f64, f64, f64)> = breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let (v, e) = gk15(&f, w[0], w[1]);
            (w[0], w[1], v, e)
        })
        .collect();
    loop {
        let value: f64 = cells.iter().map(|c| c.2).sum();
        let error: f64 = cells.iter().map(|c| c.3).sum();
        if !value.is_finite() {
            return Err(MartingaleError::QuadratureFailure { value, error });
        }
        if error <= abs_tol.max(rel_tol * value.abs()) {
            return Ok(QuadResult { value, error, cells: cells.len() });
        }
        let (worst, _) = cells
            .iter()
            .enumerate()
            .filter(|(_, c)| c.1 - c.0 > 1e-15 * span)
            .max_by(|a, b| a.1 .3.total_cmp(&b.1 .3))
            .unwrap_or((usize::MAX, &cells[0]));
        if worst == usize::MAX || cells.len() >= max_cells {
            return Err(MartingaleError::QuadratureFailure { value, error });
        }
        let (a, b, _, _) = cells.swap_remove(worst);
        let m = 0.5 * (a + b);
        for (l, r) in [(a, m), (m, b)] {
            let (v, e) = gk15(&f, l, r);
            cells.push((l, r, v, e));
        }
    }
}

/// `w(s) = sᵖ / (sᵖ + (1 − s)ᵖ)` and `w'(s)` for `s ≤ 1/2`.
fn grading(s: f64, p: i32) -> (f64, f64) {
    let a = s.powi(p);
    let b = (1.0 - s).powi(p);
    let w = a / (a + b);
    let dw = p as f64 * (s * (1.0 - s)).powi(p - 1) / ((a + b) * (a + b));
    (w, dw)
}

/// Like [`integrate_interval`], but each piece is first mapped through a
/// polynomial grading of order `p` that clusters nodes at both ends, so that
/// `|x − break|^{-β}` with `pβ ≤ p − 1` becomes bounded. `p = 1` is the identity.
///
/// `f` receives `(x, x − a, b − x)` for the piece `[a, b]`. Each half of the
/// piece is parametrized from its own end, so the offsets keep full relative
/// precision arbitrarily close to the break. Points whose offset underflows
/// contribute 0.
pub fn integrate_graded(
    f: impl Fn(f64, f64, f64) -> f64,
    breaks: &[f64],
    p: i32,
    abs_tol: f64,
    rel_tol: f64,
    max_cells: usize,
) -> Result<QuadResult, MartingaleError> {
    let mut total = QuadResult { value: 0.0, error: 0.0, cells: 0 };
    let pieces: Vec<(f64, f64)> = breaks.windows(2).filter(|w| w[1] > w[0]).map(|w| (w[0], w[1])).collect();
    let budget = (max_cells / (2 * pieces.len()).max(1)).max(1);
    for (a, b) in pieces {
        let h = b - a;
        for from_right in [false, true] {
            let g = |s: f64| {
                let (w, dw) = grading(s, p);
                let near = h * w;
                let far = h * (1.0 - w);
                if !(near > 0.0) || dw == 0.0 {
                    return 0.0;
                }
                let v = if from_right { f(b - near, far, near) } else { f(a + near, near, far) };
                v * h * dw
            };
            let r = integrate_interval(g, &[0.0, 0.5], abs_tol, rel_tol, budget)?;
            total.value += r.value;
            total.error += r.error;
            total.cells += r.cells;
        }
    }
    Ok(total)
}

pub type Triangle = [[f64; 2]; 3];

fn radon7(f: &impl Fn([f64; 2]) -> f64, t: &Triangle) -> f64 {
    let s15 = 15f64.sqrt();
    let a = (6.0 - s15) / 21.0;
    let b = (6.0 + s15) / 21.0;
    let wa = (155.0 - s15) / 1200.0;
    let wb = (155.0 + s15) / 1200.0;
    let point = |l: [f64; 3]| [l[0] * t[0][0] + l[1] * t[1][0] + l[2] * t[2][0], l[0] * t[0][1] + l[1] * t[1][1] + l[2] * t[2][1]];
    let third = 1.0 / 3.0;
    let mut sum = 0.225 * f(point([third, third, third]));
    for (w, p) in [(wa, a), (wb, b)] {
        let q = 1.0 - 2.0 * p;
        sum += w * (f(point([p, p, q])) + f(point([p, q, p])) + f(point([q, p, p])));
    }
    sum * triangle_area(t)
}

pub fn triangle_area(t: &Triangle) -> f64 {
    0.5 * ((t[1][0] - t[0][0]) * (t[2][1] - t[0][1]) - (t[2][0] - t[0][0]) * (t[1][1] - t[0][1])).abs()
}

fn split4(t: &Triangle) -> [Triangle; 4] {
    let mid = |i: usize, j: usize| [0.5 * (t[i][0] + t[j][0]), 0.5 * (t[i][1] + t[j][1])];
    let (m01, m12, m02) = (mid(0, 1), mid(1, 2), mid(0, 2));
    [[t[0], m01, m02], [m01, t[1], m12], [m02, m12, t[2]], [m01, m12, m02]]
}

fn refine(f: &impl Fn([f64; 2]) -> f64, t: Triangle) -> (Triangle, f64, f64) {
    let coarse = radon7(f, &t);
    let fine: f64 = split4(&t).iter().map(|c| radon7(f, c)).sum();
    (t, fine, (fine - coarse).abs())
}

/// Globally adaptive integration over a union of triangles.
pub fn integrate_triangles(
    f: impl Fn([f64; 2]) -> f64,
    triangles: &[Triangle],
    abs_tol: f64,
    rel_tol: f64,
    max_cells: usize,
) -> Result<QuadResult, MartingaleError> {
    let mut cells: Vec<(Triangle, f64, f64)> =
        triangles.iter().filter(|t| triangle_area(t) > 0.0).map(|t| refine(&f, *t)).collect();
    loop {
        let value: f64 = cells.iter().map(|c| c.1).sum();
        let error: f64 = cells.iter().map(|c| c.2).sum();
        if !value.is_finite() {
            return Err(MartingaleError::QuadratureFailure { value, error });
        }
        if error <= abs_tol.max(rel_tol * value.abs()) {
            return Ok(QuadResult { value, error, cells: cells.len() });
        }
        if cells.len() >= max_cells {
            return Err(MartingaleError::QuadratureFailure { value, error });
        }
        let worst = cells.iter().enumerate().max_by(|a, b| a.1 .2.total_cmp(&b.1 .2)).map(|(i, _)| i).unwrap();
        let (t, _, _) = cells.swap_remove(worst);
        for c in split4(&t) {
            cells.push(refine(&f, c));
        }
    }
}
