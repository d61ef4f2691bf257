//! Weight-p sections on a collar and the Maass/Green operators acting on them.
//!
//! A section is stored through its chart values `sum_k e^{ik theta} g_k(tau)`
//! in the rs-coordinate `z`; `|sigma|` is then the modulus of the chart value.
//! The conformal factor of the Maass operators is `rho^2 = lambda`.

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use num_complex::Complex64;

use crate::collar::CollarGrid;
use crate::error::{Error, Result};
use crate::numerics::thomas;

type C64 = Complex64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone)]
pub struct Section {
    pub weight: i32,
    kmin: i32,
    modes: Vec<Vec<C64>>,
    grid: Arc<CollarGrid>,
}

impl Section {
    pub fn zeros(grid: &Arc<CollarGrid>, weight: i32) -> Self {
        Self { weight, kmin: 0, modes: Vec::new(), grid: grid.clone() }
    }

    /// A single angular mode `e^{ik theta} g(tau)`.
    pub fn mode_fn(grid: &Arc<CollarGrid>, weight: i32, k: i32, g: impl Fn(f64) -> C64) -> Self {
        let values = (0..grid.n).map(|i| g(grid.tau(i))).collect();
        Self { weight, kmin: k, modes: vec![values], grid: grid.clone() }.trimmed()
    }

    /// A rotationally invariant real profile.
    pub fn radial(grid: &Arc<CollarGrid>, weight: i32, g: impl Fn(f64) -> f64) -> Self {
        Self::mode_fn(grid, weight, 0, |t| C64::new(g(t), 0.0))
    }

    pub fn from_modes(grid: &Arc<CollarGrid>, weight: i32, modes: BTreeMap<i32, Vec<C64>>) -> Result<Self> {
        let mut s = Self::zeros(grid, weight);
        for (k, v) in modes {
            if v.len() != grid.n {
                return Err(Error::GridMismatch(format!("mode {k} has {} samples, grid has {}", v.len(), grid.n)));
            }
            s.add_mode(k, &v, C64::new(1.0, 0.0));
        }
        Ok(s.trimmed())
    }

    pub fn grid(&self) -> &Arc<CollarGrid> {
        &self.grid
    }

    /// Present angular modes, ascending.
    pub fn mode_range(&self) -> std::ops::Range<i32> {
        self.kmin..self.kmin + self.modes.len() as i32
    }

    pub fn mode(&self, k: i32) -> Option<&[C64]> {
        let j = k - self.kmin;
        if j < 0 {
            return None;
        }
        self.modes.get(j as usize).map(|v| v.as_slice())
    }

    pub fn is_zero(&self) -> bool {
        self.modes.is_empty()
    }

    fn add_mode(&mut self, k: i32, v: &[C64], a: C64) {
        if k.abs() > self.grid.kmax {
            return;
        }
        if self.modes.is_empty() {
            self.kmin = k;
            self.modes.push(vec![ZERO; self.grid.n]);
        }
        while k < self.kmin {
            self.modes.insert(0, vec![ZERO; self.grid.n]);
            self.kmin -= 1;
        }
        while k >= self.kmin + self.modes.len() as i32 {
            self.modes.push(vec![ZERO; self.grid.n]);
        }
        let row = &mut self.modes[(k - self.kmin) as usize];
        for (r, x) in row.iter_mut().zip(v) {
            *r += x * a;
        }
    }

    fn trimmed(mut self) -> Self {
        let zero = |v: &Vec<C64>| v.iter().all(|x| *x == ZERO);
        while self.modes.last().is_some_and(zero) {
            self.modes.pop();
        }
        while self.modes.first().is_some_and(zero) {
            self.modes.remove(0);
            self.kmin += 1;
        }
        if self.modes.is_empty() {
            self.kmin = 0;
        }
        self
    }

    fn check_grid(&self, other: &Section) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch("sections live on different grids".into()))
        }
    }

    pub fn scale(&self, a: C64) -> Section {
        let mut s = Section::zeros(&self.grid, self.weight);
        for k in self.mode_range() {
            s.add_mode(k, self.mode(k).unwrap(), a);
        }
        s.trimmed()
    }

    fn combine(&self, other: &Section, b: C64) -> Result<Section> {
        self.check_grid(other)?;
        if self.weight != other.weight {
            return Err(Error::Weight { expected: self.weight, got: other.weight });
        }
        let mut s = self.scale(C64::new(1.0, 0.0));
        for k in other.mode_range() {
            s.add_mode(k, other.mode(k).unwrap(), b);
        }
        Ok(s.trimmed())
    }

    pub fn add(&self, other: &Section) -> Result<Section> {
        self.combine(other, C64::new(1.0, 0.0))
    }

    pub fn sub(&self, other: &Section) -> Result<Section> {
        self.combine(other, C64::new(-1.0, 0.0))
    }

    /// Pointwise product; weights add, modes beyond `kmax` are dropped.
    pub fn mul(&self, other: &Section) -> Result<Section> {
        self.check_grid(other)?;
        let mut s = Section::zeros(&self.grid, self.weight + other.weight);
        let n = self.grid.n;
        let mut buf = vec![ZERO; n];
        for ka in self.mode_range() {
            let a = self.mode(ka).unwrap();
            for kb in other.mode_range() {
                let b = other.mode(kb).unwrap();
                for i in 0..n {
                    buf[i] = a[i] * b[i];
                }
                s.add_mode(ka + kb, &buf, C64::new(1.0, 0.0));
            }
        }
        Ok(s.trimmed())
    }

    /// Complex conjugate; mode `k` goes to `-k` and the weight flips sign.
    pub fn conj(&self) -> Section {
        let mut s = Section::zeros(&self.grid, -self.weight);
        for k in self.mode_range() {
            let v: Vec<C64> = self.mode(k).unwrap().iter().map(|x| x.conj()).collect();
            s.add_mode(-k, &v, C64::new(1.0, 0.0));
        }
        s.trimmed()
    }

    pub fn with_weight(mut self, weight: i32) -> Section {
        self.weight = weight;
        self
    }

    pub fn eval(&self, i: usize, theta: f64) -> C64 {
        self.mode_range()
            .map(|k| self.mode(k).unwrap()[i] * C64::from_polar(1.0, k as f64 * theta))
            .sum()
    }

    /// Sup of `|sigma|` over nodes with `tau` in `[a, b]`, sampling enough angles
    /// to resolve the stored modes.
    pub fn sup_abs_on(&self, a: f64, b: f64) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let span = self.mode_range().len();
        let n_theta = if span == 1 { 1 } else { 8 * span };
        let mut best: f64 = 0.0;
        for i in 0..self.grid.n {
            let t = self.grid.tau(i);
            if t < a || t > b {
                continue;
            }
            for j in 0..n_theta {
                let th = 2.0 * PI * j as f64 / n_theta as f64;
                best = best.max(self.eval(i, th).norm());
            }
        }
        best
    }

    pub fn sup_abs(&self) -> f64 {
        self.sup_abs_on(f64::NEG_INFINITY, f64::INFINITY)
    }

    /// `int sigma dv` over the grid's collar piece.
    pub fn integrate(&self) -> C64 {
        match self.mode(0) {
            Some(g) => g.iter().zip(&self.grid.dv).map(|(x, w)| x * *w).sum(),
            None => ZERO,
        }
    }

    /// `int sigma tau dv` without forming the product.
    pub fn integrate_product(&self, other: &Section) -> C64 {
        let mut acc = ZERO;
        for k in self.mode_range() {
            if let (Some(a), Some(b)) = (self.mode(k), other.mode(-k)) {
                for ((x, y), w) in a.iter().zip(b).zip(&self.grid.dv) {
                    acc += x * y * *w;
                }
            }
        }
        acc
    }

    /// Largest modulus of any stored coefficient outside mode `k`.
    pub fn off_mode_max(&self, k: i32) -> f64 {
        self.mode_range()
            .filter(|&j| j != k)
            .flat_map(|j| self.mode(j).unwrap().iter().map(|x| x.norm()))
            .fold(0.0, f64::max)
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.modes.iter().flatten().map(|x| x.norm()).fold(0.0, f64::max)
    }
}

fn check_weight(s: &Section, p: i32) -> Result<()> {
    if s.weight != p {
        Err(Error::Weight { expected: p, got: s.weight })
    } else {
        Ok(())
    }
}

/// `w(tau) / 2` with `w = sqrt(2) |sin tau| / u = 1 / (r rho)`.
fn half_w(u: f64, tau: f64) -> f64 {
    0.5 * SQRT_2 * tau.sin().abs() / u
}

fn maass(p: i32, s: &Section, raise: bool) -> Result<Section> {
    check_weight(s, p)?;
    let grid = s.grid.clone();
    let mut out = Section::zeros(&grid, if raise { p + 1 } else { p - 1 });
    if s.is_zero() {
        return Ok(out);
    }
    let st = grid.stencils()?;
    let u = grid.chart.u;
    let pf = p as f64;
    for k in s.mode_range() {
        let g = s.mode(k).unwrap();
        let dg = st.first(g);
        let v: Vec<C64> = (0..grid.n)
            .map(|i| {
                let t = grid.tau(i);
                let a = u * pf / t.tan() + pf + k as f64;
                let sign = if raise { 1.0 } else { -1.0 };
                (dg[i] * u + g[i] * (sign * a)) * half_w(u, t)
            })
            .collect();
        out.add_mode(if raise { k - 1 } else { k + 1 }, &v, C64::new(1.0, 0.0));
    }
    Ok(out.trimmed())
}

/// `K_p(sigma) = rho^{p-1} d_z (rho^{-p} sigma)`: weight p to p+1.
pub fn maass_k(p: i32, s: &Section) -> Result<Section> {
    maass(p, s, true)
}

/// `L_p(sigma) = rho^{-p-1} d_zbar (rho^p sigma)`: weight p to p-1.
pub fn maass_l(p: i32, s: &Section) -> Result<Section> {
    maass(p, s, false)
}

/// `box = -L_1 K_0 = -lambda^{-1} d_z d_zbar`, applied mode by mode as
/// `-(sin^2 tau / 2)(g'' - k^2 g / u^2)`.
pub fn box_op(f: &Section) -> Result<Section> {
    check_weight(f, 0)?;
    let grid = f.grid.clone();
    let mut out = Section::zeros(&grid, 0);
    if f.is_zero() {
        return Ok(out);
    }
    let st = grid.stencils()?;
    let u = grid.chart.u;
    for k in f.mode_range() {
        let g = f.mode(k).unwrap();
        let d2 = st.second(g);
        let kk = (k * k) as f64 / (u * u);
        let v: Vec<C64> = (0..grid.n)
            .map(|i| {
                let s = grid.tau(i).sin();
                (d2[i] - g[i] * kk) * (-0.5 * s * s)
            })
            .collect();
        out.add_mode(k, &v, C64::new(1.0, 0.0));
    }
    Ok(out.trimmed())
}

/// `P = K_1 K_0`.
pub fn operator_p(f: &Section) -> Result<Section> {
    maass_k(1, &maass_k(0, f)?)
}

/// `Pbar(g) = conj(P(conj g))`.
pub fn operator_pbar(f: &Section) -> Result<Section> {
    check_weight(f, 0)?;
    Ok(operator_p(&f.conj())?.conj())
}

/// `xi(f) = -A P(f)` for a Beltrami coefficient `A` of weight -2.
pub fn xi_with(a: &Section, f: &Section) -> Result<Section> {
    check_weight(a, -2)?;
    Ok(a.mul(&operator_p(f)?)?.scale(C64::new(-1.0, 0.0)))
}

/// `xibar(g) = conj(xi(conj g)) = -Abar Pbar(g)`.
pub fn xibar_with(a: &Section, f: &Section) -> Result<Section> {
    Ok(xi_with(a, &f.conj())?.conj())
}

/// The three terms of `Q(f) = Pbar(e_kl) P(f) - 2 f_kl box f + lambda^{-1} d_z f_kl d_zbar f`.
pub fn q_terms(e_kl: &Section, f_kl: &Section, f: &Section) -> Result<[Section; 3]> {
    check_weight(f, 0)?;
    let t1 = operator_pbar(e_kl)?.mul(&operator_p(f)?)?;
    let t2 = f_kl.mul(&box_op(f)?)?.scale(C64::new(-2.0, 0.0));
    let t3 = maass_k(0, f_kl)?.mul(&maass_l(0, f)?)?;
    Ok([t1, t2, t3])
}

pub fn q_op(e_kl: &Section, f_kl: &Section, f: &Section) -> Result<Section> {
    let [a, b, c] = q_terms(e_kl, f_kl, f)?;
    a.add(&b)?.add(&c)
}

/// `sum over Maass words Q with |Q| <= order of sup |Q sigma|` on `[a, b]`.
pub fn ck_norm(s: &Section, order: usize, a: f64, b: f64) -> Result<f64> {
    if order > 2 {
        return Err(Error::config(format!("C^k norms are supported for k <= 2, got {order}")));
    }
    let mut frontier = vec![s.clone()];
    let mut total = s.sup_abs_on(a, b);
    for _ in 0..order {
        let mut next = Vec::new();
        for sec in &frontier {
            for raise in [true, false] {
                let img = maass(sec.weight, sec, raise)?;
                total += img.sup_abs_on(a, b);
                next.push(img);
            }
        }
        frontier = next;
    }
    Ok(total)
}

/// Dirichlet data per angular mode: `(value at tau_a, value at tau_b)`.
pub type Dirichlet = BTreeMap<i32, (C64, C64)>;

#[derive(Debug, Clone)]
pub struct GreenProblem {
    pub rhs: Section,
    pub boundary: Dirichlet,
}

#[derive(Debug, Clone)]
pub struct GreenSolution {
    pub e: Section,
    /// Relative residual of each per-mode linear system.
    pub residuals: Vec<(i32, f64)>,
}

impl GreenSolution {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().map(|r| r.1).fold(0.0, f64::max)
    }
}

/// Solves `(box + 1) e = f` mode by mode with Numerov's scheme for
/// `g'' = (k^2/u^2 + 2 csc^2 tau) g - 2 csc^2 tau f`.
pub fn green_solve(problem: &GreenProblem) -> Result<GreenSolution> {
    let f = &problem.rhs;
    check_weight(f, 0)?;
    let grid = f.grid.clone();
    let n = grid.n;
    if n < 3 || grid.h() <= 0.0 {
        return Err(Error::config("Green solve needs a grid with positive spacing"));
    }
    let u = grid.chart.u;
    let h2 = grid.h() * grid.h();
    let mut out = Section::zeros(&grid, 0);
    let mut residuals = Vec::new();
    let mut modes: Vec<i32> = f.mode_range().collect();
    for k in problem.boundary.keys() {
        if !modes.contains(k) {
            modes.push(*k);
        }
    }
    modes.sort_unstable();
    let csc2: Vec<f64> = (0..n).map(|i| 1.0 / grid.tau(i).sin().powi(2)).collect();
    for k in modes {
        let kk = (k * k) as f64 / (u * u);
        let q: Vec<f64> = csc2.iter().map(|c| kk + 2.0 * c).collect();
        let src: Vec<C64> = match f.mode(k) {
            Some(g) => g.iter().zip(&csc2).map(|(x, c)| x * (2.0 * c)).collect(),
            None => vec![ZERO; n],
        };
        let (left, right) = problem.boundary.get(&k).copied().unwrap_or((ZERO, ZERO));
        let m = n - 2;
        let mut lower = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m];
        let mut rhs = vec![ZERO; m];
        for r in 0..m {
            let i = r + 1;
            lower[r] = 1.0 - h2 * q[i - 1] / 12.0;
            upper[r] = 1.0 - h2 * q[i + 1] / 12.0;
            diag[r] = -(2.0 + 10.0 * h2 * q[i] / 12.0);
            rhs[r] = -(src[i - 1] + src[i] * 10.0 + src[i + 1]) * (h2 / 12.0);
        }
        rhs[0] -= left * lower[0];
        rhs[m - 1] -= right * upper[m - 1];
        let sol = thomas(&lower, &diag, &upper, &rhs)
            .map_err(|e| Error::numerical(format!("Green solve, mode {k}: {e}")))?;
        let mut scale: f64 = 0.0;
        let mut res: f64 = 0.0;
        for r in 0..m {
            let mut acc = sol[r] * diag[r];
            if r > 0 {
                acc += sol[r - 1] * lower[r];
            }
            if r + 1 < m {
                acc += sol[r + 1] * upper[r];
            }
            res = res.max((acc - rhs[r]).norm());
            scale = scale.max(rhs[r].norm()).max((sol[r] * diag[r]).norm());
        }
        residuals.push((k, if scale > 0.0 { res / scale } else { 0.0 }));
        let mut g = Vec::with_capacity(n);
        g.push(left);
        g.extend(sol);
        g.push(right);
        if !g.iter().all(|x| x.re.is_finite() && x.im.is_finite()) {
            return Err(Error::numerical(format!("Green solve, mode {k}: non-finite solution")));
        }
        out.add_mode(k, &g, C64::new(1.0, 0.0));
    }
    Ok(GreenSolution { e: out.trimmed(), residuals })
}

/// `T f` with zero Dirichlet data.
pub fn green_zero(f: &Section) -> Result<Section> {
    Ok(green_solve(&GreenProblem { rhs: f.clone(), boundary: Dirichlet::new() })?.e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collar::CollarChart;

    fn grid(u: f64, n: usize) -> Arc<CollarGrid> {
        Arc::new(CollarGrid::build(CollarChart::new(u, 0.5).unwrap(), n, 8).unwrap())
    }

    fn max_dev(s: &Section, k: i32, f: impl Fn(f64) -> C64) -> f64 {
        let g = s.grid().clone();
        let v = s.mode(k).unwrap();
        (0..g.n).map(|i| (v[i] - f(g.tau(i))).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn maass_of_constant_vanishes() {
        let g = grid(0.2, 128);
        let one = Section::radial(&g, 0, |_| 1.0);
        assert!(maass_k(0, &one).unwrap().max_abs_coefficient() < 1e-10);
        assert!(maass_l(0, &one).unwrap().max_abs_coefficient() < 1e-10);
        assert!(operator_p(&one).unwrap().max_abs_coefficient() < 1e-9);
        assert!(box_op(&one).unwrap().max_abs_coefficient() < 1e-10);
    }

    #[test]
    fn k0_of_sin_squared_matches_chain_rule() {
        let u = 0.2;
        let g = grid(u, 256);
        let f = Section::radial(&g, 0, |t| t.sin().powi(2));
        let k = maass_k(0, &f).unwrap();
        let dev = max_dev(&k, -1, |t| C64::new(0.5 * SQRT_2 * t.sin().abs() * 2.0 * t.sin() * t.cos(), 0.0));
        assert!(dev < 1e-6, "{dev}");
    }

    #[test]
    fn box_of_sin_squared() {
        let g = grid(0.2, 512);
        let f = Section::radial(&g, 0, |t| t.sin().powi(2));
        let b = box_op(&f).unwrap();
        let dev = max_dev(&b, 0, |t| C64::new(-t.sin().powi(2) * (2.0 * t).cos(), 0.0));
        assert!(dev < 1e-8, "{dev}");
    }

    #[test]
    fn weight_mismatch_rejected() {
        let g = grid(0.2, 64);
        let f = Section::radial(&g, 1, |t| t.sin());
        assert!(matches!(box_op(&f), Err(Error::Weight { .. })));
        assert!(matches!(maass_k(0, &f), Err(Error::Weight { .. })));
    }

    #[test]
    fn green_exact_on_half_sin_squared() {
        let g = grid(0.2, 512);
        let f = Section::radial(&g, 0, |t| t.sin().powi(4));
        let (a, b) = (g.tau_a, g.tau_b);
        let mut bc = Dirichlet::new();
        bc.insert(0, (C64::new(0.5 * a.sin().powi(2), 0.0), C64::new(0.5 * b.sin().powi(2), 0.0)));
        let sol = green_solve(&GreenProblem { rhs: f, boundary: bc }).unwrap();
        let dev = max_dev(&sol.e, 0, |t| C64::new(0.5 * t.sin().powi(2), 0.0));
        assert!(dev < 1e-8, "{dev}");
        assert!(sol.max_residual() < 1e-10);
    }

    #[test]
    fn green_of_zero_is_zero() {
        let g = grid(0.2, 64);
        let z = Section::zeros(&g, 0);
        assert!(green_zero(&z).unwrap().is_zero());
    }

    #[test]
    fn ck_norms() {
        let g = grid(0.2, 513);
        let s = Section::radial(&g, 0, |t| t.sin().powi(2));
        assert!((ck_norm(&s, 0, f64::NEG_INFINITY, 0.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((ck_norm(&s, 0, -PI / 4.0, 0.0).unwrap() - 0.5).abs() < 1e-2);
        assert_eq!(ck_norm(&Section::zeros(&g, 0), 2, -4.0, 0.0).unwrap(), 0.0);
        assert!(ck_norm(&s, 3, -4.0, 0.0).is_err());
    }
}
