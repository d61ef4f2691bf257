//! Collars, cusps, plumbing and the grids every collar integral runs on.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{product_weights, DiffStencils, STENCIL};

/// Leading-order collar modulus `-pi / log|t|`.
pub fn u_from_t(t: Complex64) -> Result<f64> {
    let a = t.norm();
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::domain(format!("need 0 < |t| < 1, got |t| = {a}")));
    }
    Ok(-PI / a.ln())
}

/// Inverse of [`u_from_t`] on the positive real axis.
pub fn t_from_u(u: f64) -> f64 {
    (-PI / u).exp()
}

/// Local model `1 / (4 |t|^2 log^2|t|)` of the asymptotic Poincare metric.
pub fn poincare_model_density(t: Complex64) -> Result<f64> {
    let a = t.norm();
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::domain(format!("need 0 < |t| < 1, got |t| = {a}")));
    }
    let l = a.ln();
    Ok(1.0 / (4.0 * a * a * l * l))
}

/// The gluing rule `eta * zeta = t`.
pub fn plumbing_map(eta: Complex64, t: Complex64, c: f64) -> Result<Complex64> {
    let lo = t.norm() / c;
    let r = eta.norm();
    if !(r > lo && r < c) {
        return Err(Error::domain(format!(
            "|eta| = {r} outside the plumbing collar ({lo}, {c})"
        )));
    }
    Ok(t / eta)
}

/// A genuine collar around a short geodesic: `z` ranges over `rho/c < |z| < c`
/// and the hyperbolic density is `u^2 / (2 r^2 sin^2 tau)` with `tau = u log r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollarChart {
    pub u: f64,
    pub c: f64,
}

impl CollarChart {
    pub fn new(u: f64, c: f64) -> Result<Self> {
        if !(u > 0.0 && u.is_finite()) {
            return Err(Error::domain(format!("collar modulus must be positive, got {u}")));
        }
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::domain(format!("collar constant must lie in (0,1), got {c}")));
        }
        if 2.0 * u * c.ln() <= -PI {
            return Err(Error::domain(format!(
                "collar with u = {u}, c = {c} is empty (need u < pi / (2 |log c|))"
            )));
        }
        Ok(Self { u, c })
    }

    pub fn from_t(t: Complex64, c: f64) -> Result<Self> {
        Self::new(u_from_t(t)?, c)
    }

    /// Short geodesic length `2 pi u`.
    pub fn length(&self) -> f64 {
        2.0 * PI * self.u
    }

    /// Inner scale `exp(-pi/u)`; underflows to 0 for very thin collars.
    pub fn rho(&self) -> f64 {
        (-PI / self.u).exp()
    }

    pub fn radius_bounds(&self) -> (f64, f64) {
        (self.rho() / self.c, self.c)
    }

    /// `(tau_min, tau_max) = (-pi - u log c, u log c)`.
    pub fn tau_bounds(&self) -> (f64, f64) {
        let b = self.u * self.c.ln();
        (-PI - b, b)
    }

    pub fn tau(&self, r: f64) -> f64 {
        self.u * r.ln()
    }

    pub fn radius(&self, tau: f64) -> f64 {
        (tau / self.u).exp()
    }

    /// Radius of the core geodesic, `exp(-pi/(2u))`.
    pub fn geodesic_radius(&self) -> f64 {
        (-PI / (2.0 * self.u)).exp()
    }

    fn check_tau(&self, tau: f64) -> Result<()> {
        let (a, b) = self.tau_bounds();
        let slack = 1e-12 * (b - a);
        if tau < a - slack || tau > b + slack || tau.is_nan() {
            return Err(Error::domain(format!("tau = {tau} outside the collar [{a}, {b}]")));
        }
        Ok(())
    }

    /// Density `lambda(r)` of the hyperbolic metric `lambda |dz|^2`.
    pub fn density(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::domain(format!("radius must be positive, got {r}")));
        }
        let tau = self.tau(r);
        self.check_tau(tau)?;
        let s = tau.sin();
        Ok(0.5 * self.u * self.u / (r * r * s * s))
    }

    /// `r^2 lambda = u^2 / (2 sin^2 tau)`, the density in the chart `w = log z`.
    pub fn log_chart_density(&self, tau: f64) -> f64 {
        let s = tau.sin();
        0.5 * self.u * self.u / (s * s)
    }

    /// Hyperbolic circumference of `|z| = r` from `n` samples of `sqrt(2 lambda) |dz|`.
    pub fn circumference(&self, r: f64, n: usize) -> Result<f64> {
        if n < 16 {
            return Err(Error::config(format!("need at least 16 samples, got {n}")));
        }
        let lam = self.density(r)?;
        let dtheta = 2.0 * PI / n as f64;
        Ok((0..n).map(|_| (2.0 * lam).sqrt() * r * dtheta).sum())
    }

    pub fn geodesic_length_numeric(&self, n: usize) -> Result<f64> {
        self.circumference(self.geodesic_radius(), n)
    }

    /// Closed-form area `pi u (cot tau_a - cot tau_b)`.
    pub fn area_between(&self, tau_a: f64, tau_b: f64) -> f64 {
        PI * self.u * (1.0 / tau_a.tan() - 1.0 / tau_b.tan())
    }

    pub fn area(&self) -> f64 {
        let (a, b) = self.tau_bounds();
        self.area_between(a, b)
    }
}

/// Punctured-disc model around a cusp, density `1 / (2 |w|^2 log^2|w|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CuspChart {
    pub c: f64,
}

impl CuspChart {
    pub fn new(c: f64) -> Result<Self> {
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::domain(format!("cusp radius must lie in (0,1), got {c}")));
        }
        Ok(Self { c })
    }

    pub fn density(&self, w: Complex64) -> Result<f64> {
        let r = w.norm();
        if !(r > 0.0 && r < self.c) {
            return Err(Error::domain(format!("|w| = {r} outside the punctured disc (0, {})", self.c)));
        }
        let l = r.ln();
        Ok(1.0 / (2.0 * r * r * l * l))
    }
}

/// Pinching coordinates `(t, s)` near a boundary point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinchingPoint {
    pub t: Vec<Complex64>,
    pub s: Vec<Complex64>,
}

impl PinchingPoint {
    pub fn new(t: Vec<Complex64>, s: Vec<Complex64>, delta: f64) -> Result<Self> {
        for (i, ti) in t.iter().enumerate() {
            let a = ti.norm();
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::domain(format!("t[{i}]: need 0 < |t| < 1, got {a}")));
            }
        }
        let norm = t.iter().chain(&s).map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm < delta) {
            return Err(Error::domain(format!("|(t,s)| = {norm} is not below delta = {delta}")));
        }
        Ok(Self { t, s })
    }

    /// Number of degeneration directions.
    pub fn m(&self) -> usize {
        self.t.len()
    }

    pub fn n(&self) -> usize {
        self.t.len() + self.s.len()
    }

    pub fn moduli(&self) -> Vec<f64> {
        self.t.iter().map(|&t| u_from_t(t).expect("validated")).collect()
    }

    /// `u_0 = sum u_i + sum |s_j|`.
    pub fn u0(&self) -> f64 {
        self.moduli().iter().sum::<f64>() + self.s.iter().map(|s| s.norm()).sum::<f64>()
    }
}

/// Uniform tau-grid over (part of) a collar with angular modes `-kmax..=kmax`.
#[derive(Debug, Clone)]
pub struct CollarGrid {
    pub chart: CollarChart,
    pub tau_a: f64,
    pub tau_b: f64,
    pub n: usize,
    pub kmax: i32,
    /// Weights of `int g_0(tau) dv` (angular integral included).
    pub dv: Vec<f64>,
    /// Weights of `int g(tau) dtau`.
    pub dtau: Vec<f64>,
    stencils: Option<DiffStencils>,
}

impl CollarGrid {
    /// Grid over the whole collar.
    pub fn build(chart: CollarChart, n: usize, kmax: i32) -> Result<Self> {
        let (a, b) = chart.tau_bounds();
        Self::build_range(chart, a, b, n, kmax)
    }

    /// Grid over `[tau_a, tau_b]` inside the collar.
    pub fn build_range(chart: CollarChart, tau_a: f64, tau_b: f64, n: usize, kmax: i32) -> Result<Self> {
        if n < 8 {
            return Err(Error::config(format!("need at least 8 radial nodes, got {n}")));
        }
        if kmax < 0 {
            return Err(Error::config(format!("mode bound must be non-negative, got {kmax}")));
        }
        if tau_b < tau_a {
            return Err(Error::config(format!("empty tau range [{tau_a}, {tau_b}]")));
        }
        chart.check_tau(tau_a)?;
        chart.check_tau(tau_b)?;
        let u = chart.u;
        let dv = product_weights(tau_a, tau_b, n, |t| {
            let s = t.sin();
            PI * u / (s * s)
        });
        let dtau = product_weights(tau_a, tau_b, n, |_| 1.0);
        let h = (tau_b - tau_a) / (n - 1) as f64;
        let stencils = if h > 0.0 && n >= STENCIL { Some(DiffStencils::uniform(n, h)?) } else { None };
        Ok(Self { chart, tau_a, tau_b, n, kmax, dv, dtau, stencils })
    }

    pub fn h(&self) -> f64 {
        (self.tau_b - self.tau_a) / (self.n - 1) as f64
    }

    pub fn tau(&self, i: usize) -> f64 {
        self.tau_a + self.h() * i as f64
    }

    pub fn taus(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.tau(i)).collect()
    }

    pub fn stencils(&self) -> Result<&DiffStencils> {
        self.stencils
            .as_ref()
            .ok_or_else(|| Error::config(format!("grid with {} nodes cannot carry derivatives", self.n)))
    }

    /// Quadrature of the constant 1 against `dv`.
    pub fn area(&self) -> f64 {
        self.dv.iter().sum()
    }

    pub fn same_as(&self, other: &CollarGrid) -> bool {
        self.chart == other.chart
            && self.n == other.n
            && self.kmax == other.kmax
            && self.tau_a == other.tau_a
            && self.tau_b == other.tau_b
    }
}

/// A rotationally invariant density in the chart `w = log z`, sampled
/// uniformly in `x = log |z|`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogChartDensity {
    pub x0: f64,
    pub h: f64,
    pub values: Vec<f64>,
}

impl LogChartDensity {
    pub fn from_fn(x_a: f64, x_b: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if n < 2 || !(x_b > x_a) {
            return Err(Error::config("density lattice needs two nodes and a nonempty range"));
        }
        let h = (x_b - x_a) / (n - 1) as f64;
        Ok(Self { x0: x_a, h, values: (0..n).map(|i| f(x_a + h * i as f64)).collect() })
    }

    /// The collar density over the whole collar.
    pub fn collar(chart: &CollarChart, n: usize) -> Result<Self> {
        let (a, b) = chart.tau_bounds();
        let u = chart.u;
        Self::from_fn(a / u, b / u, n, |x| chart.log_chart_density(u * x))
    }

    /// The cusp density on `r_in <= |w| <= r_out`.
    pub fn cusp(chart: &CuspChart, r_in: f64, r_out: f64, n: usize) -> Result<Self> {
        if !(r_in > 0.0 && r_out < chart.c && r_in < r_out) {
            return Err(Error::domain(format!(
                "cusp annulus [{r_in}, {r_out}] not inside (0, {})",
                chart.c
            )));
        }
        Self::from_fn(r_in.ln(), r_out.ln(), n, |x| 1.0 / (2.0 * x * x))
    }
}

/// Max over the lattice of `| d_w d_wbar log(lambda) - lambda |`.
pub fn ke_residual(density: &LogChartDensity) -> Result<f64> {
    let n = density.values.len();
    if let Some((i, v)) = density.values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::domain(format!("density must be positive, got {v} at node {i}")));
    }
    let st = DiffStencils::uniform(n, density.h)?;
    let logs: Vec<f64> = density.values.iter().map(|v| v.ln()).collect();
    let d2 = st.second_real(&logs);
    Ok(d2
        .iter()
        .zip(&density.values)
        .map(|(d, v)| (0.25 * d - v).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn u_from_t_values() {
        // -pi / (6 ln 10) = 0.2273960590 (printed elsewhere as 0.227395)
        assert_relative_eq!(u_from_t(Complex64::new(1e-6, 0.0)).unwrap(), 0.2273960590, epsilon = 1e-10);
        assert_relative_eq!(u_from_t(Complex64::new(1e-30, 0.0)).unwrap(), 0.0454792118, epsilon = 1e-10);
        assert!(u_from_t(Complex64::new(1.0, 0.0)).is_err());
        assert!(u_from_t(Complex64::new(0.0, 0.0)).is_err());
        assert!(u_from_t(Complex64::new(1.0 - 1e-12, 0.0)).unwrap() > 1e11);
    }

    #[test]
    fn collar_density_at_geodesic() {
        let ch = CollarChart::new(0.2, 0.5).unwrap();
        let r = ch.geodesic_radius();
        assert_relative_eq!(ch.density(r).unwrap() * r * r, 0.02, epsilon = 1e-14);
        let ch = CollarChart::from_t(Complex64::new(1e-6, 0.0), 0.5).unwrap();
        let r = ch.geodesic_radius();
        assert_relative_eq!(ch.density(r).unwrap() * r * r, 0.0258544838, epsilon = 1e-10);
        assert_relative_eq!(ch.density(r).unwrap() * r * r, 0.025856, max_relative = 1e-4);
        assert!(ch.density(0.9).is_err());
    }

    #[test]
    fn cusp_density_values() {
        let ch = CuspChart::new(0.5).unwrap();
        let e = std::f64::consts::E;
        assert_relative_eq!(ch.density(Complex64::new(1.0 / e, 0.0)).unwrap(), 3.69453, epsilon = 1e-5);
        assert_relative_eq!(
            ch.density(Complex64::from_polar(e.powi(-2), 1.3)).unwrap(),
            6.82477,
            epsilon = 1e-5
        );
        assert!(ch.density(Complex64::new(0.0, 0.0)).is_err());
        assert!(ch.density(Complex64::new(0.6, 0.0)).is_err());
    }

    #[test]
    fn poincare_model_values() {
        let e = std::f64::consts::E;
        assert_relative_eq!(poincare_model_density(Complex64::new(1.0 / e, 0.0)).unwrap(), 1.847264, epsilon = 1e-6);
        assert_relative_eq!(
            poincare_model_density(Complex64::new(1e-6, 0.0)).unwrap(),
            1.309803451e9,
            max_relative = 1e-9
        );
        assert!(poincare_model_density(Complex64::new(2.0, 0.0)).is_err());
    }

    #[test]
    fn plumbing_examples() {
        let t = Complex64::new(1e-4, 0.0);
        let z = plumbing_map(Complex64::new(0.1, 0.0), t, 0.5).unwrap();
        assert_relative_eq!(z.re, 1e-3, epsilon = 1e-18);
        let s = t.sqrt();
        assert!((plumbing_map(s, t, 0.5).unwrap() - s).norm() < 1e-16);
        assert!(plumbing_map(Complex64::new(0.7, 0.0), t, 0.5).is_err());
    }

    #[test]
    fn geodesic_lengths() {
        let ch = CollarChart::new(0.2, 0.5).unwrap();
        assert_relative_eq!(ch.geodesic_length_numeric(64).unwrap(), 2.0 * PI * 0.2, max_relative = 1e-10);
        let a = ch.geodesic_length_numeric(64).unwrap();
        let b = ch.geodesic_length_numeric(128).unwrap();
        assert!((a - b).abs() < 1e-12);
        let ch = CollarChart::new(0.5, 0.1).unwrap();
        assert_relative_eq!(ch.geodesic_length_numeric(16).unwrap(), PI, max_relative = 1e-10);
        assert!(ch.geodesic_length_numeric(8).is_err());
    }

    #[test]
    fn grid_area_matches_closed_form() {
        let ch = CollarChart::new(0.2, 0.5).unwrap();
        let g = CollarGrid::build(ch, 512, 8).unwrap();
        assert_relative_eq!(g.area(), ch.area(), max_relative = 1e-6);
        let g0 = CollarGrid::build_range(ch, -1.0, -1.0, 16, 0).unwrap();
        assert_eq!(g0.area(), 0.0);
        assert!(CollarGrid::build(ch, 4, 8).is_err());
    }

    #[test]
    fn ke_residual_constant_density_is_one() {
        let d = LogChartDensity::from_fn(-3.0, -1.0, 64, |_| 1.0).unwrap();
        assert_relative_eq!(ke_residual(&d).unwrap(), 1.0, epsilon = 1e-12);
    }
}
