//! Classical invariant metrics on model domains, Bergman kernels by
//! quadrature, Teichmuller conorms, and comparability reports between metric
//! fields over a degeneration sweep.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::HermitianForm;
use crate::numerics::{fit_line, gauss_legendre, LineFit};
use crate::sections::Section;

type C64 = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DomainKind {
    Ball { r: f64 },
    Disk,
    Annulus { r0: f64, r1: f64 },
    Sandwich { r_in: f64, r_out: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainModel {
    pub kind: DomainKind,
    pub dim: usize,
}

impl DomainModel {
    pub fn new(kind: DomainKind, dim: usize) -> Result<Self> {
        let ok = match kind {
            DomainKind::Ball { r } => r > 0.0,
            DomainKind::Disk => true,
            DomainKind::Annulus { r0, r1 } => r0 > 0.0 && r1 > r0,
            DomainKind::Sandwich { r_in, r_out } => r_in > 0.0 && r_out > r_in,
        };
        if !ok || dim == 0 {
            return Err(Error::domain(format!("invalid domain {kind:?} in dimension {dim}")));
        }
        Ok(Self { kind, dim })
    }

    pub fn disk(r: f64) -> Result<Self> {
        Self::new(if r == 1.0 { DomainKind::Disk } else { DomainKind::Ball { r } }, 1)
    }

    /// Radius when the domain is a round ball or disk.
    fn radius(&self) -> Option<f64> {
        match self.kind {
            DomainKind::Ball { r } => Some(r),
            DomainKind::Disk => Some(1.0),
            _ => None,
        }
    }
}

fn vnorm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Kobayashi norm at the center of the ball of radius `r`: `2|v|/r`.
pub fn kobayashi_ball(r: f64, v: &[C64]) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::domain(format!("ball radius must be positive, got {r}")));
    }
    Ok(2.0 * vnorm(v) / r)
}

/// Caratheodory norm at the center of a ball; equals the Kobayashi norm.
pub fn caratheodory_ball(r: f64, v: &[C64]) -> Result<f64> {
    kobayashi_ball(r, v)
}

/// Kobayashi norm at `z` in a one-dimensional round disk (any point) or at
/// the center of a ball.
pub fn kobayashi_norm(d: &DomainModel, z: &[C64], v: &[C64]) -> Result<f64> {
    let r = d
        .radius()
        .ok_or_else(|| Error::domain(format!("no closed form for {:?}; use sandwich bounds", d.kind)))?;
    if z.len() != d.dim || v.len() != d.dim {
        return Err(Error::domain("point and vector must match the domain dimension"));
    }
    let zn = vnorm(z);
    if zn == 0.0 {
        return kobayashi_ball(r, v);
    }
    if d.dim != 1 {
        return Err(Error::domain("off-center norms only for one-dimensional disks"));
    }
    if zn >= r {
        return Err(Error::domain(format!("|z| = {zn} outside radius {r}")));
    }
    Ok(2.0 * r * v[0].norm() / (r * r - zn * zn))
}

/// Caratheodory norm; on balls and disks it coincides with the Kobayashi norm.
pub fn caratheodory_norm(d: &DomainModel, z: &[C64], v: &[C64]) -> Result<f64> {
    kobayashi_norm(d, z, v)
}

/// Bounds on the Kobayashi norm at the center of any domain between the balls
/// of radius 2 and 6.
pub fn bers_pinch_bounds(v: &[C64]) -> [f64; 2] {
    sandwich_bounds(2.0, 6.0, v)
}

/// `[2|v|/r_out, 2|v|/r_in]`, by inclusion monotonicity.
pub fn sandwich_bounds(r_in: f64, r_out: f64, v: &[C64]) -> [f64; 2] {
    let n = vnorm(v);
    [2.0 * n / r_out, 2.0 * n / r_in]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BergmanValue {
    pub value: f64,
    /// Geometric estimate of the omitted tail.
    pub tail_estimate: f64,
    pub warning: Option<String>,
}

fn basis_exponents(d: &DomainModel, n: usize) -> Vec<i32> {
    match d.kind {
        DomainKind::Annulus { .. } => {
            let lo = -((n / 2) as i32);
            (lo..lo + n as i32).collect()
        }
        _ => (0..n as i32).collect(),
    }
}

fn radial_range(d: &DomainModel) -> Result<(f64, f64)> {
    match d.kind {
        DomainKind::Disk => Ok((0.0, 1.0)),
        DomainKind::Ball { r } => Ok((0.0, r)),
        DomainKind::Annulus { r0, r1 } => Ok((r0, r1)),
        DomainKind::Sandwich { .. } => Err(Error::domain("sandwich domains have no explicit Bergman kernel")),
    }
}

/// Orthonormal basis coefficients (in the monomial basis) from modified
/// Gram-Schmidt under the area pairing, evaluated by polar quadrature.
fn orthonormal_basis(d: &DomainModel, n: usize) -> Result<(Vec<i32>, Vec<Vec<C64>>)> {
    if d.dim != 1 {
        return Err(Error::domain("Bergman quadrature is implemented for planar domains"));
    }
    if n < 4 {
        return Err(Error::domain(format!("basis size must be >= 4, got {n}")));
    }
    let (a, b) = radial_range(d)?;
    let exps = basis_exponents(d, n);
    let (x, w) = gauss_legendre(n + 16);
    let n_theta = 2 * n + 8;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for (xi, wi) in x.iter().zip(&w) {
        let r = 0.5 * (b - a) * xi + 0.5 * (b + a);
        let wr = 0.5 * (b - a) * wi * r * 2.0 * PI / n_theta as f64;
        for q in 0..n_theta {
            nodes.push(C64::from_polar(r, 2.0 * PI * q as f64 / n_theta as f64));
            weights.push(wr);
        }
    }
    let samples: Vec<Vec<C64>> = exps.iter().map(|&k| nodes.iter().map(|z| z.powi(k)).collect()).collect();
    let inner = |f: &[C64], g: &[C64]| -> C64 { f.iter().zip(g).zip(&weights).map(|((a, b), w)| a * b.conj() * *w).sum() };
    let mut vecs: Vec<Vec<C64>> = Vec::new();
    let mut coeffs: Vec<Vec<C64>> = Vec::new();
    for (idx, s) in samples.iter().enumerate() {
        let mut v = s.clone();
        let mut c = vec![C64::new(0.0, 0.0); n];
        c[idx] = C64::new(1.0, 0.0);
        for (q, cq) in vecs.iter().zip(&coeffs) {
            let p = inner(&v, q);
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= p * qi;
            }
            for (ci, qi) in c.iter_mut().zip(cq) {
                *ci -= p * qi;
            }
        }
        let nrm = inner(&v, &v).re.sqrt();
        if !(nrm > 0.0) {
            return Err(Error::numerical("Gram-Schmidt breakdown"));
        }
        vecs.push(v.iter().map(|x| x / nrm).collect());
        coeffs.push(c.iter().map(|x| x / nrm).collect());
    }
    Ok((exps, coeffs))
}

fn kernel_terms(exps: &[i32], coeffs: &[Vec<C64>], z: C64) -> Vec<f64> {
    let pows: Vec<C64> = exps.iter().map(|&k| z.powi(k)).collect();
    coeffs
        .iter()
        .map(|c| c.iter().zip(&pows).map(|(a, p)| a * p).sum::<C64>().norm_sqr())
        .collect()
}

/// Partial sum `sum_j |sigma_j(z)|^2` over an `N`-element orthonormal basis.
pub fn bergman_kernel_numeric(d: &DomainModel, z: C64, n: usize) -> Result<BergmanValue> {
    let (exps, coeffs) = orthonormal_basis(d, n)?;
    Ok(kernel_from(&exps, &coeffs, z))
}

fn kernel_from(exps: &[i32], coeffs: &[Vec<C64>], z: C64) -> BergmanValue {
    let terms = kernel_terms(exps, coeffs, z);
    let value: f64 = terms.iter().sum();
    let tail = |t: &[f64]| -> Option<f64> {
        let (a, b) = (t[t.len() - 2], t[t.len() - 1]);
        if b == 0.0 {
            return Some(0.0);
        }
        let q = b / a;
        (q < 1.0).then(|| b * q / (1.0 - q))
    };
    // Laurent bases grow in both directions; take the worse end.
    let mut ends = Vec::new();
    let pos: Vec<f64> = exps.iter().zip(&terms).filter(|(k, _)| **k >= 0).map(|(_, t)| *t).collect();
    if pos.len() >= 2 {
        ends.push(tail(&pos));
    }
    let neg: Vec<f64> = exps.iter().zip(&terms).filter(|(k, _)| **k < 0).map(|(_, t)| *t).rev().collect();
    if neg.len() >= 2 {
        ends.push(tail(&neg));
    }
    let mut tail_estimate = 0.0;
    let mut warning = None;
    for e in ends {
        match e {
            Some(t) => tail_estimate += t,
            None => {
                tail_estimate = f64::INFINITY;
                warning = Some(format!("series not converging at z = {z}; partial sum over {} terms", terms.len()));
            }
        }
    }
    BergmanValue { value, tail_estimate, warning }
}

/// `d^2 log K / dz dzbar` by a five-point Laplacian of the log kernel.
pub fn bergman_metric_numeric(d: &DomainModel, z: C64, n: usize) -> Result<f64> {
    Ok(bergman_metrics(d, &[z], n)?[0])
}

/// [`bergman_metric_numeric`] at many points, sharing one orthonormal basis.
pub fn bergman_metrics(d: &DomainModel, zs: &[C64], n: usize) -> Result<Vec<f64>> {
    let (exps, coeffs) = orthonormal_basis(d, n)?;
    let h = 1e-3;
    let lk = |w: C64| -> Result<f64> {
        let k = kernel_from(&exps, &coeffs, w).value;
        if !(k > 1e-300) {
            return Err(Error::numerical(format!("Bergman kernel vanishes near {w}")));
        }
        Ok(k.ln())
    };
    zs.iter()
        .map(|&z| {
            let c = lk(z)?;
            let lap =
                (lk(z + h)? + lk(z - h)? + lk(z + C64::new(0.0, h))? + lk(z - C64::new(0.0, h))? - 4.0 * c) / (h * h);
            Ok(0.25 * lap)
        })
        .collect()
}

/// `int |phi| dx dy` over one collar, for `big_phi = z^2 phi`.
pub fn teichmuller_conorm(big_phi: &Section) -> f64 {
    let grid = big_phi.grid();
    let u = grid.chart.u;
    let span = big_phi.mode_range().len();
    if span == 0 {
        return 0.0;
    }
    let n_theta = if span == 1 { 1 } else { 16 * span };
    let mut total = 0.0;
    for i in 0..grid.n {
        let mean: f64 = (0..n_theta)
            .map(|q| big_phi.eval(i, 2.0 * PI * q as f64 / n_theta as f64).norm())
            .sum::<f64>()
            / n_theta as f64;
        total += mean * grid.dtau[i];
    }
    total * 2.0 * PI / u
}

/// Lower bound for the Teichmuller norm `sup Re[mu : phi]` over unit-conorm
/// `phi` restricted to the span of the given basis directions (one at a time).
pub fn teichmuller_lower_bound(pairings: &[C64], conorms: &[f64]) -> f64 {
    pairings
        .iter()
        .zip(conorms)
        .filter(|(_, c)| **c > 0.0)
        .map(|(p, c)| p.norm() / c)
        .fold(0.0, f64::max)
}

/// A metric evaluated at each point of a sweep.
#[derive(Debug, Clone)]
pub struct MetricSeries {
    pub name: String,
    pub u: Vec<f64>,
    pub forms: Vec<HermitianForm>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointRange {
    pub u: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub exponent: f64,
    pub intercept: f64,
    pub residual: f64,
}

impl From<LineFit> for ExponentFit {
    fn from(f: LineFit) -> Self {
        Self { exponent: f.slope, intercept: f.intercept, residual: f.rms_residual }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Equivalent,
    NotEquivalent,
    InsufficientSweep,
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Equivalent => "equivalent",
            Verdict::NotEquivalent => "not equivalent",
            Verdict::InsufficientSweep => "insufficient sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub a: String,
    pub b: String,
    pub points: Vec<PointRange>,
    pub lower: f64,
    pub upper: f64,
    /// Fit of `log lambda_min` and `log lambda_max` against `log u`.
    pub fit_min: Option<ExponentFit>,
    pub fit_max: Option<ExponentFit>,
    /// The fitted exponent of larger magnitude.
    pub exponent: Option<f64>,
    pub c_max: f64,
    pub exponent_threshold: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceRule {
    pub c_max: f64,
    /// `|exponent|` at or above this is read as degeneration.
    pub exponent_threshold: f64,
}

impl Default for EquivalenceRule {
    fn default() -> Self {
        Self { c_max: 32.0, exponent_threshold: 0.75 }
    }
}

fn point_ranges(a: &MetricSeries, b: &MetricSeries) -> Result<Vec<PointRange>> {
    if a.u.len() != b.u.len() || a.forms.len() != a.u.len() || b.forms.len() != b.u.len() {
        return Err(Error::GridMismatch(format!("sweeps of {} and {} differ in length", a.name, b.name)));
    }
    if a.u.iter().zip(&b.u).any(|(x, y)| x != y) {
        return Err(Error::GridMismatch(format!("sweeps of {} and {} differ in u", a.name, b.name)));
    }
    a.forms
        .iter()
        .zip(&b.forms)
        .zip(&a.u)
        .map(|((fa, fb), &u)| {
            let ev = fa.relative_eigenvalues(fb)?;
            Ok(PointRange { u, lambda_min: ev[0], lambda_max: ev[ev.len() - 1] })
        })
        .collect()
}

fn log_fit(u: &[f64], v: &[f64]) -> Option<ExponentFit> {
    if u.len() < 2 || v.iter().any(|x| !(*x > 0.0)) {
        return None;
    }
    let x: Vec<f64> = u.iter().map(|x| x.ln()).collect();
    let y: Vec<f64> = v.iter().map(|x| x.ln()).collect();
    fit_line(&x, &y).map(ExponentFit::from)
}

/// Comparability of `a` against `b`: generalized eigenvalues of `a` relative
/// to `b` at each sweep point.
pub fn equivalence_report(a: &MetricSeries, b: &MetricSeries, rule: EquivalenceRule) -> Result<EquivalenceReport> {
    let points = point_ranges(a, b)?;
    if points.is_empty() {
        return Err(Error::config("equivalence report needs at least one sweep point"));
    }
    let lower = points.iter().map(|p| p.lambda_min).fold(f64::INFINITY, f64::min);
    let upper = points.iter().map(|p| p.lambda_max).fold(f64::NEG_INFINITY, f64::max);
    let u: Vec<f64> = points.iter().map(|p| p.u).collect();
    let fit_min = log_fit(&u, &points.iter().map(|p| p.lambda_min).collect::<Vec<_>>());
    let fit_max = log_fit(&u, &points.iter().map(|p| p.lambda_max).collect::<Vec<_>>());
    let exponent = match (fit_min, fit_max) {
        (Some(x), Some(y)) => Some(if x.exponent.abs() >= y.exponent.abs() { x.exponent } else { y.exponent }),
        _ => None,
    };
    let distinct = {
        let mut v = u.clone();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v.len()
    };
    let verdict = match exponent {
        _ if distinct < 2 => Verdict::InsufficientSweep,
        None => Verdict::NotEquivalent,
        Some(p) => {
            let inside = lower >= 1.0 / rule.c_max && upper <= rule.c_max;
            if inside && p.abs() < rule.exponent_threshold {
                Verdict::Equivalent
            } else {
                Verdict::NotEquivalent
            }
        }
    };
    Ok(EquivalenceReport {
        a: a.name.clone(),
        b: b.name.clone(),
        points,
        lower,
        upper,
        fit_min,
        fit_max,
        exponent,
        c_max: rule.c_max,
        exponent_threshold: rule.exponent_threshold,
        verdict,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchwarzReport {
    pub ratios: Vec<f64>,
    pub sup: f64,
    pub fit: Option<ExponentFit>,
    /// Whether a finite constant `c` with `h <= c g` is supported by the sweep.
    pub bounded: bool,
    pub verdict: String,
}

/// Largest eigenvalue of `h` relative to `g` along the sweep.
pub fn schwarz_check(g: &MetricSeries, h: &MetricSeries, threshold: f64) -> Result<SchwarzReport> {
    let pts = point_ranges(h, g)?;
    for (series, forms) in [(g, &g.forms), (h, &h.forms)] {
        if let Some(k) = forms.iter().position(|f| !f.is_positive_definite()) {
            return Err(Error::numerical(format!("{} is not positive definite at sweep point {k}", series.name)));
        }
    }
    let ratios: Vec<f64> = pts.iter().map(|p| p.lambda_max).collect();
    let sup = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let fit = log_fit(&g.u, &ratios);
    let bounded = sup.is_finite() && fit.map_or(true, |f| f.exponent > -threshold);
    let verdict = if bounded { format!("bounded, c = {sup:.6e}") } else { "no finite c".to_string() };
    Ok(SchwarzReport { ratios, sup, fit, bounded, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_kernel_values() {
        let d = DomainModel::new(DomainKind::Disk, 1).unwrap();
        let k0 = bergman_kernel_numeric(&d, C64::new(0.0, 0.0), 8).unwrap();
        assert!((k0.value - 1.0 / PI).abs() < 1e-12);
        let kh = bergman_kernel_numeric(&d, C64::new(0.5, 0.0), 50).unwrap();
        assert!((kh.value - 16.0 / (9.0 * PI)).abs() < 1e-6);
        assert!(kh.warning.is_none());
        let b = bergman_metric_numeric(&d, C64::new(0.0, 0.0), 32).unwrap();
        assert!((b - 2.0).abs() < 1e-4, "{b}");
    }

    #[test]
    fn ball_norms() {
        let one = [C64::new(1.0, 0.0)];
        assert_eq!(kobayashi_ball(2.0, &one).unwrap(), 1.0);
        assert!((kobayashi_ball(6.0, &one).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(caratheodory_ball(1.0, &[C64::new(3.0, 0.0)]).unwrap(), 6.0);
        assert!(kobayashi_ball(0.0, &one).is_err());
        let b = bers_pinch_bounds(&one);
        assert!((b[0] - 1.0 / 3.0).abs() < 1e-15 && b[1] == 1.0);
    }
}
