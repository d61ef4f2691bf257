//! Finite differences, quadrature and small dense solvers.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Width of the radial difference stencils.
pub const STENCIL: usize = 9;
/// Points in the local interpolant behind the product quadrature.
const INTERP: usize = 6;
/// Gauss points per cell in the product quadrature.
const CELL_GAUSS: usize = 16;

/// Fornberg's recursion: weights for derivatives `0..=m` at `z` from nodes `x`.
///
/// Returns `w[order][node]`.
pub fn fornberg(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// First and second derivative stencils on a uniform grid.
#[derive(Debug, Clone)]
pub struct DiffStencils {
    start: Vec<usize>,
    d1: Vec<[f64; STENCIL]>,
    d2: Vec<[f64; STENCIL]>,
}

impl DiffStencils {
    pub fn uniform(n: usize, h: f64) -> Result<Self> {
        if n < STENCIL {
            return Err(Error::config(format!(
                "{n} radial nodes is too coarse for the {STENCIL}-point stencil"
            )));
        }
        if !(h > 0.0) {
            return Err(Error::config("radial spacing must be positive"));
        }
        let half = STENCIL / 2;
        let offsets: Vec<f64> = (0..STENCIL).map(|j| j as f64).collect();
        let mut start = Vec::with_capacity(n);
        let mut d1 = Vec::with_capacity(n);
        let mut d2 = Vec::with_capacity(n);
        for i in 0..n {
            let s = i.saturating_sub(half).min(n - STENCIL);
            let w = fornberg((i - s) as f64, &offsets, 2);
            let mut a = [0.0; STENCIL];
            let mut b = [0.0; STENCIL];
            for j in 0..STENCIL {
                a[j] = w[1][j] / h;
                b[j] = w[2][j] / (h * h);
            }
            start.push(s);
            d1.push(a);
            d2.push(b);
        }
        Ok(Self { start, d1, d2 })
    }

    pub fn len(&self) -> usize {
        self.start.len()
    }

    pub fn is_empty(&self) -> bool {
        self.start.is_empty()
    }

    pub fn first(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.apply(v, &self.d1)
    }

    pub fn second(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.apply(v, &self.d2)
    }

    pub fn second_real(&self, v: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let s = self.start[i];
                self.d2[i].iter().zip(&v[s..s + STENCIL]).map(|(w, x)| w * x).sum()
            })
            .collect()
    }

    fn apply(&self, v: &[Complex64], w: &[[f64; STENCIL]]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.len());
        (0..self.len())
            .map(|i| {
                let s = self.start[i];
                let mut acc = Complex64::new(0.0, 0.0);
                for (wj, x) in w[i].iter().zip(&v[s..s + STENCIL]) {
                    acc += x * *wj;
                }
                acc
            })
            .collect()
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = nf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn interp_start(cell: usize, n: usize, width: usize) -> usize {
    (cell + 1).saturating_sub(width / 2).min(n - width)
}

/// Product-integration weights on a uniform grid over `[a, b]` with `n` nodes.
///
/// `sum_i w_i g(x_i)` approximates `int_a^b g(x) weight(x) dx`; each cell uses a
/// local 6-point interpolant of `g` and integrates it against `weight` exactly
/// up to Gauss-Legendre error.
pub fn product_weights(a: f64, b: f64, n: usize, weight: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut w = vec![0.0; n];
    if n < 2 || b == a {
        return w;
    }
    let h = (b - a) / (n - 1) as f64;
    let width = INTERP.min(n);
    let (gx, gw) = gauss_legendre(CELL_GAUSS);
    let node = |i: usize| a + h * i as f64;
    for cell in 0..n - 1 {
        let s = interp_start(cell, n, width);
        let x0 = node(cell);
        for (xg, wg) in gx.iter().zip(&gw) {
            let x = x0 + 0.5 * (xg + 1.0) * h;
            let q = 0.5 * h * wg * weight(x);
            for j in s..s + width {
                let mut l = 1.0;
                for k in s..s + width {
                    if k != j {
                        l *= (x - node(k)) / (node(j) - node(k));
                    }
                }
                w[j] += q * l;
            }
        }
    }
    w
}

/// Local 6-point Lagrange interpolation of uniform samples at `x`.
pub fn interpolate(a: f64, h: f64, v: &[Complex64], x: f64) -> Complex64 {
    let n = v.len();
    let width = INTERP.min(n);
    let cell = (((x - a) / h).floor().max(0.0) as usize).min(n.saturating_sub(2));
    let s = interp_start(cell, n, width);
    let mut acc = Complex64::new(0.0, 0.0);
    for j in s..s + width {
        let xj = a + h * j as f64;
        let mut l = 1.0;
        for k in s..s + width {
            if k != j {
                let xk = a + h * k as f64;
                l *= (x - xk) / (xj - xk);
            }
        }
        acc += v[j] * l;
    }
    acc
}

/// Solves a tridiagonal system with real coefficients and complex right side.
///
/// `lower[i]` couples row `i` to `i-1`, `upper[i]` to `i+1`.
pub fn thomas(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &[Complex64],
) -> Result<Vec<Complex64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![Complex64::new(0.0, 0.0); n];
    let mut beta = diag[0];
    if beta == 0.0 || !beta.is_finite() {
        return Err(Error::numerical("zero pivot in row 0"));
    }
    c[0] = upper[0] / beta;
    d[0] = rhs[0] / beta;
    for i in 1..n {
        beta = diag[i] - lower[i] * c[i - 1];
        if beta.abs() < 1e-300 || !beta.is_finite() {
            return Err(Error::numerical(format!("zero pivot in row {i}")));
        }
        c[i] = if i + 1 < n { upper[i] / beta } else { 0.0 };
        d[i] = (rhs[i] - d[i - 1] * lower[i]) / beta;
    }
    for i in (0..n - 1).rev() {
        let next = d[i + 1];
        d[i] -= next * c[i];
    }
    Ok(d)
}

/// Least-squares line `y = slope * x + intercept` with RMS residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub rms_residual: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - slope * a - intercept).powi(2))
        .sum();
    Some(LineFit { slope, intercept, rms_residual: (ss / nf).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_central_second_derivative() {
        let w = fornberg(0.0, &[-1.0, 0.0, 1.0], 2);
        assert_eq!(w[2], vec![1.0, -2.0, 1.0]);
        assert_eq!(w[1], vec![-0.5, 0.0, 0.5]);
    }

    #[test]
    fn stencils_differentiate_polynomials_exactly() {
        let n = 20;
        let h = 0.1;
        let st = DiffStencils::uniform(n, h).unwrap();
        let v: Vec<Complex64> = (0..n)
            .map(|i| {
                let x = i as f64 * h;
                Complex64::new(x.powi(7), -x.powi(3))
            })
            .collect();
        let d1 = st.first(&v);
        let d2 = st.second(&v);
        for i in 0..n {
            let x = i as f64 * h;
            assert!((d1[i].re - 7.0 * x.powi(6)).abs() < 1e-8);
            assert!((d2[i].im + 6.0 * x).abs() < 1e-8);
        }
    }

    #[test]
    fn coarse_grid_rejected() {
        assert!(matches!(DiffStencils::uniform(8, 0.1), Err(Error::Config(_))));
    }

    #[test]
    fn gauss_legendre_integrates_degree_2n_minus_1() {
        let (x, w) = gauss_legendre(5);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((s - 2.0 / 9.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn product_weights_exact_on_weighted_quintics() {
        let w = product_weights(0.5, 2.0, 30, |x| 1.0 / (x * x));
        let h = 1.5 / 29.0;
        let s: f64 = w.iter().enumerate().map(|(i, w)| w * (0.5 + h * i as f64).powi(3)).sum();
        assert!((s - (4.0 - 0.25) / 2.0).abs() < 1e-13);
        assert!(w.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn thomas_solves_poisson() {
        let n = 5;
        let lower = vec![-1.0; n];
        let upper = vec![-1.0; n];
        let diag = vec![2.0; n];
        let x_true: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let rhs: Vec<Complex64> = (0..n)
            .map(|i| {
                let mut r = x_true[i] * 2.0;
                if i > 0 {
                    r -= x_true[i - 1];
                }
                if i + 1 < n {
                    r -= x_true[i + 1];
                }
                r
            })
            .collect();
        let x = thomas(&lower, &diag, &upper, &rhs).unwrap();
        for i in 0..n {
            assert!((x[i] - x_true[i]).norm() < 1e-13);
        }
    }

    #[test]
    fn line_fit_recovers_slope() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let f = fit_line(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14);
        assert!(f.rms_residual < 1e-14);
        assert!(fit_line(&[1.0], &[1.0]).is_none());
    }
}
