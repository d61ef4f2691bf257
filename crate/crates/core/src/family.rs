//! Model degenerating families: Beltrami and quadratic differentials on each
//! collar, the pair fields `f = A_i conj(A_j)`, their Green images `e` and the
//! cut-off approximations `e~`.
//!
//! All differentials are stored in a rescaled frame: direction `i` is divided
//! by `sigma_i = u_i / (pi |t_i|)` (degenerate) or 1 (thick). Beltrami data
//! are `O(1)` in this frame even when `|t|` is far below `1e-50`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::collar::{u_from_t, CollarChart, CollarGrid, PinchingPoint};
use crate::error::{Error, Result};
use crate::numerics::interpolate;
use crate::sections::{green_solve, Dirichlet, GreenProblem, Section};

type C64 = Complex64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// A Laurent tail entry `(k, coefficient)`, `k != 0`.
pub type Tail = (i32, C64);

/// Decorations on top of the leading profile. Every value is expressed in the
/// natural unit of its slot (see [`BeltramiFamily`]); all default to zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Decorations {
    /// `(direction, collar, tail)` entries of the Beltrami polynomials `p`.
    pub beltrami_tails: Vec<(usize, usize, Tail)>,
    /// `(direction, collar, b)` off-diagonal constants `b_i^j`.
    pub beltrami_b: Vec<(usize, usize, C64)>,
    /// `(direction, collar, tail)` entries of the quadratic polynomials `q`.
    pub quadratic_tails: Vec<(usize, usize, Tail)>,
    /// `(direction, collar, beta)` off-diagonal constants `beta_i^j`.
    pub quadratic_beta: Vec<(usize, usize, C64)>,
    /// Relative corrections `b_j = -u_j/(pi conj t_j) (1 + d)`.
    pub diagonal_b: Vec<(usize, C64)>,
    /// Diagonal constants `beta_j` (default 1).
    pub diagonal_beta: Vec<(usize, C64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Profile {
    Leading,
    Decorated(Decorations),
}

/// Parameters of the model family that do not depend on the point `(t, s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyParams {
    pub c: f64,
    pub c1: f64,
    /// Modulus of the core chart standing in for the thick part.
    pub u_core: f64,
    /// Weil-Petersson norm of each thick direction on the core.
    pub thick_wp: f64,
    /// Bound `M` on the Laurent sums.
    pub m_bound: f64,
    /// Exponent slack `eps` in `|beta_i^j| = O(|t_j|^{1/2 - eps})`.
    pub eps: f64,
    /// Radius of the pinching neighbourhood.
    pub delta: f64,
}

impl Default for FamilyParams {
    fn default() -> Self {
        Self { c: 0.5, c1: 0.25, u_core: 0.5, thick_wp: 1.0, m_bound: 10.0, eps: 0.25, delta: 1.0 }
    }
}

/// Constant and tail data of one direction on one chart, rescaled frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChartBeltrami {
    /// Constant coefficient `B`; `A = conj(B) e^{i(2 + shift) theta} sin^2 tau + tails`.
    pub b: C64,
    pub shift: i32,
    /// `(k, a_k)` with `A` gaining `conj(a_k) w_k(tau) e^{i(2-k) theta} sin^2 tau`.
    pub tails: Vec<Tail>,
}

/// Quadratic data of one direction on one collar, rescaled: `z^2 phi = pre * (q + beta)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChartQuadratic {
    pub pre: C64,
    pub beta: C64,
    pub tails: Vec<Tail>,
}

/// A model family at one point `(t, s)`.
///
/// Units of decorated slots (physical coefficients are unit times value):
/// diagonal Beltrami tails `u_j/|t_j|`; thick `i` on collar `j`: tails `u_j^-2`,
/// `b` `u_j`; degenerate `i != j`: tails `u_j^-2 u_i^3/|t_i|`, `b` `u_j u_i^3/|t_i|`;
/// off-diagonal `beta_i^j` in units of `|t_j|^{1/2 - eps}`.
#[derive(Debug, Clone)]
pub struct BeltramiFamily {
    pub point: PinchingPoint,
    pub params: FamilyParams,
    pub profile: Profile,
    pub charts: Vec<CollarChart>,
    pub core: CollarChart,
    /// Frame scales `sigma_i`.
    pub sigma: Vec<f64>,
    /// `beltrami[i][region]`, regions are the collars followed by the core.
    pub beltrami: Vec<Vec<ChartBeltrami>>,
    /// `quadratic[i][collar]`.
    pub quadratic: Vec<Vec<ChartQuadratic>>,
}

fn check_tails(what: &str, tails: &[Tail], c: f64, m: f64) -> Result<()> {
    let neg: f64 = tails.iter().filter(|t| t.0 < 0).map(|t| t.1.norm() * c.powi(-t.0)).sum();
    let pos: f64 = tails.iter().filter(|t| t.0 > 0).map(|t| t.1.norm() * c.powi(t.0)).sum();
    if tails.iter().any(|t| t.0 == 0) {
        return Err(Error::Validation(format!("{what}: Laurent tails exclude k = 0")));
    }
    let slack = m * (1.0 + 1e-12);
    if neg > slack {
        return Err(Error::Validation(format!("{what}: sum_(k<0) |a_k| c^-k = {neg} exceeds M = {m}")));
    }
    if pos > slack {
        return Err(Error::Validation(format!("{what}: sum_(k>0) |a_k| c^k = {pos} exceeds M = {m}")));
    }
    Ok(())
}

fn sin2_integral(a: f64, b: f64) -> f64 {
    0.5 * (b - a) - 0.25 * ((2.0 * b).sin() - (2.0 * a).sin())
}

/// Builds the model family at `(t, s)`.
pub fn make_model_family(
    t: Vec<C64>,
    s: Vec<C64>,
    params: FamilyParams,
    profile: Profile,
) -> Result<BeltramiFamily> {
    if !(params.c1 > 0.0 && params.c1 < params.c) {
        return Err(Error::config(format!("need 0 < c1 < c, got c1 = {}, c = {}", params.c1, params.c)));
    }
    if !(params.thick_wp > 0.0) {
        return Err(Error::config("thick-part WP norm must be positive"));
    }
    let point = PinchingPoint::new(t, s, params.delta)?;
    let m = point.m();
    let n = point.n();
    let u = point.moduli();
    let charts: Vec<CollarChart> = u.iter().map(|&ui| CollarChart::new(ui, params.c)).collect::<Result<_>>()?;
    let core = CollarChart::new(params.u_core, params.c)?;
    let sigma: Vec<f64> = (0..n)
        .map(|i| if i < m { u[i] / (PI * point.t[i].norm()) } else { 1.0 })
        .collect();
    let dec = match &profile {
        Profile::Leading => Decorations::default(),
        Profile::Decorated(d) => d.clone(),
    };
    let u0 = point.u0();
    let mb = params.m_bound;

    for &(i, j, _) in dec.beltrami_tails.iter().chain(&dec.quadratic_tails) {
        if i >= n || j >= m {
            return Err(Error::Validation(format!("tail entry ({i}, {j}) out of range (n = {n}, m = {m})")));
        }
    }
    for &(i, j, _) in dec.beltrami_b.iter().chain(&dec.quadratic_beta) {
        if i >= n || j >= m || i == j {
            return Err(Error::Validation(format!(
                "off-diagonal constant ({i}, {j}) must have i != j, i < {n}, j < {m}"
            )));
        }
    }
    for &(j, _) in dec.diagonal_b.iter().chain(&dec.diagonal_beta) {
        if j >= m {
            return Err(Error::Validation(format!("diagonal entry {j} out of range (m = {m})")));
        }
    }

    let mut beltrami = vec![vec![ChartBeltrami::default(); m + 1]; n];
    let mut quadratic = vec![vec![ChartQuadratic::default(); m]; n];
    for i in 0..n {
        for j in 0..m {
            let tails: Vec<Tail> =
                dec.beltrami_tails.iter().filter(|e| e.0 == i && e.1 == j).map(|e| e.2).collect();
            check_tails(&format!("Beltrami direction {i} on collar {j}"), &tails, params.c, mb)?;
            let (b_unit, tail_unit) = if i == j {
                (0.0, PI)
            } else if i >= m {
                (u[j], u[j].powi(-2))
            } else {
                (u[j] * PI * u[i] * u[i], u[j].powi(-2) * PI * u[i] * u[i])
            };
            let b = if i == j {
                let d = dec.diagonal_b.iter().filter(|e| e.0 == j).map(|e| e.1).sum::<C64>();
                if d.norm() > mb * u0 {
                    return Err(Error::Validation(format!(
                        "diagonal b on collar {j}: relative correction {} exceeds M u0 = {}",
                        d.norm(),
                        mb * u0
                    )));
                }
                let tj = point.t[j];
                -(tj.norm() / tj.conj()) * (ONE + d)
            } else {
                let v = dec.beltrami_b.iter().filter(|e| e.0 == i && e.1 == j).map(|e| e.2).sum::<C64>();
                if v.norm() > mb {
                    return Err(Error::Validation(format!(
                        "Beltrami constant b_{i}^{j}: normalized size {} exceeds M = {mb}",
                        v.norm()
                    )));
                }
                v * b_unit
            };
            beltrami[i][j] = ChartBeltrami {
                b,
                shift: 0,
                tails: tails.iter().map(|&(k, a)| (k, a * tail_unit)).collect(),
            };

            let qt: Vec<Tail> =
                dec.quadratic_tails.iter().filter(|e| e.0 == i && e.1 == j).map(|e| e.2).collect();
            check_tails(&format!("quadratic direction {i} on collar {j}"), &qt, params.c, mb)?;
            let (pre, beta) = if i == j {
                let beta = dec.diagonal_beta.iter().find(|e| e.0 == j).map(|e| e.1).unwrap_or(ONE);
                if (beta - ONE).norm() > mb * u0 {
                    return Err(Error::Validation(format!(
                        "diagonal beta on collar {j}: |beta - 1| = {} exceeds M u0 = {}",
                        (beta - ONE).norm(),
                        mb * u0
                    )));
                }
                (-point.t[j] * (sigma[j] / PI), beta)
            } else {
                let v = dec.quadratic_beta.iter().filter(|e| e.0 == i && e.1 == j).map(|e| e.2).sum::<C64>();
                if v.norm() > mb {
                    return Err(Error::Validation(format!(
                        "quadratic constant beta_{i}^{j}: normalized size {} exceeds M = {mb}",
                        v.norm()
                    )));
                }
                let beta = v * point.t[j].norm().powf(0.5 - params.eps);
                let pre = if i >= m { ONE } else { -point.t[i] * (sigma[i] / PI) };
                (pre, beta)
            };
            quadratic[i][j] = ChartQuadratic { pre, beta, tails: qt };
        }
    }
    let (ca, cb) = core.tau_bounds();
    let amp = (params.thick_wp / (PI * params.u_core * sin2_integral(ca, cb))).sqrt();
    for i in m..n {
        beltrami[i][m] = ChartBeltrami { b: C64::new(amp, 0.0), shift: (i - m) as i32, tails: Vec::new() };
    }
    Ok(BeltramiFamily { point, params, profile, charts, core, sigma, beltrami, quadratic })
}

impl BeltramiFamily {
    pub fn m(&self) -> usize {
        self.point.m()
    }

    pub fn n(&self) -> usize {
        self.point.n()
    }

    pub fn regions(&self) -> usize {
        self.m() + usize::from(self.n() > self.m())
    }

    pub fn region_chart(&self, r: usize) -> CollarChart {
        if r < self.m() {
            self.charts[r]
        } else {
            self.core
        }
    }

    /// Tail weight `w_k(tau)`: `r^k` for `k > 0`, `rho^{|k|} r^k` for `k < 0`.
    fn tail_weight(u: f64, k: i32, tau: f64) -> f64 {
        if k > 0 {
            (k as f64 * tau / u).exp()
        } else {
            (-(k.abs() as f64) * (PI + tau) / u).exp()
        }
    }

    fn check_z(&self, j: usize, z: C64) -> Result<f64> {
        let ch = self
            .charts
            .get(j)
            .ok_or_else(|| Error::domain(format!("no collar {j}")))?;
        let tau = ch.tau(z.norm());
        let (a, b) = ch.tau_bounds();
        if !(tau >= a && tau <= b) {
            return Err(Error::domain(format!("|z| = {} outside collar {j}", z.norm())));
        }
        Ok(tau)
    }

    /// `phi_i(z)` on collar `j` (physical normalization).
    pub fn quadratic_eval(&self, i: usize, j: usize, z: C64) -> Result<C64> {
        let tau = self.check_z(j, z)?;
        let q = &self.quadratic[i][j];
        let u = self.charts[j].u;
        let th = z.arg();
        let mut big = q.beta;
        for &(k, a) in &q.tails {
            big += a * C64::from_polar(Self::tail_weight(u, k, tau), k as f64 * th)
                * if k < 0 { (self.point.t[j] / self.point.t[j].norm()).powi(-k) } else { ONE };
        }
        Ok(q.pre * big / (z * z) / self.sigma[i])
    }

    /// `A_i(z)` on collar `j` (physical normalization).
    pub fn beltrami_eval(&self, i: usize, j: usize, z: C64) -> Result<C64> {
        let tau = self.check_z(j, z)?;
        let bc = &self.beltrami[i][j];
        let u = self.charts[j].u;
        let th = z.arg();
        let mut v = bc.b.conj() * C64::from_polar(1.0, (2 + bc.shift) as f64 * th);
        for &(k, a) in &bc.tails {
            v += a.conj() * C64::from_polar(Self::tail_weight(u, k, tau), (2 - k) as f64 * th);
        }
        Ok(v * tau.sin().powi(2) * self.sigma[i])
    }

    /// `A_i` on a region grid, rescaled frame, weight -2.
    pub fn beltrami_section(&self, i: usize, region: usize, grid: &Arc<CollarGrid>) -> Section {
        let bc = &self.beltrami[i][region];
        let u = grid.chart.u;
        let mut modes: BTreeMap<i32, Vec<C64>> = BTreeMap::new();
        let s2: Vec<f64> = grid.taus().iter().map(|t| t.sin().powi(2)).collect();
        if bc.b != ZERO {
            modes.insert(2 + bc.shift, s2.iter().map(|s| bc.b.conj() * s).collect());
        }
        for &(k, a) in &bc.tails {
            let row = modes.entry(2 - k).or_insert_with(|| vec![ZERO; grid.n]);
            for (idx, r) in row.iter_mut().enumerate() {
                *r += a.conj() * s2[idx] * Self::tail_weight(u, k, grid.tau(idx));
            }
        }
        Section::from_modes(grid, -2, modes).expect("rows sized to grid")
    }

    /// `z^2 phi_i` on collar `j`, rescaled frame.
    pub fn quadratic_section(&self, i: usize, j: usize, grid: &Arc<CollarGrid>) -> Section {
        let q = &self.quadratic[i][j];
        let u = grid.chart.u;
        let tj = self.point.t[j];
        let phase = tj / tj.norm();
        let mut modes: BTreeMap<i32, Vec<C64>> = BTreeMap::new();
        if q.beta != ZERO {
            modes.insert(0, vec![q.pre * q.beta; grid.n]);
        }
        for &(k, a) in &q.tails {
            let ph = if k < 0 { phase.powi(-k) } else { ONE };
            let row = modes.entry(k).or_insert_with(|| vec![ZERO; grid.n]);
            for (idx, r) in row.iter_mut().enumerate() {
                *r += q.pre * a * ph * Self::tail_weight(u, k, grid.tau(idx));
            }
        }
        Section::from_modes(grid, 0, modes).expect("rows sized to grid")
    }

    /// Factor turning a rescaled `e_ij` (or `f_ij`) into the physical one.
    pub fn pair_scale(&self, i: usize, j: usize) -> f64 {
        self.sigma[i] * self.sigma[j]
    }
}

/// One grid per region (collars, then the core when thick directions exist).
#[derive(Debug, Clone)]
pub struct FamilyGrids {
    pub regions: Vec<Arc<CollarGrid>>,
}

impl FamilyGrids {
    pub fn build(family: &BeltramiFamily, n_tau: usize, kmax: i32) -> Result<Self> {
        let regions = (0..family.regions())
            .map(|r| CollarGrid::build(family.region_chart(r), n_tau, kmax).map(Arc::new))
            .collect::<Result<_>>()?;
        Ok(Self { regions })
    }
}

/// `f_ij`, `e_ij` and the Beltrami sections on every region.
#[derive(Debug, Clone)]
pub struct PairFields {
    pub n: usize,
    /// `a[region][i]`.
    pub a: Vec<Vec<Section>>,
    /// `f[region][i][j]`.
    pub f: Vec<Vec<Vec<Section>>>,
    /// `e[region][i][j]`.
    pub e: Vec<Vec<Vec<Section>>>,
    /// Largest per-mode Green residual per region.
    pub green_residual: Vec<f64>,
}

/// `f_ij = A_i conj(A_j)` on one region.
pub fn f_pair(family: &BeltramiFamily, i: usize, j: usize, region: usize, grid: &Arc<CollarGrid>) -> Result<Section> {
    let ai = family.beltrami_section(i, region, grid);
    let aj = family.beltrami_section(j, region, grid);
    ai.mul(&aj.conj())
}

/// Dirichlet data for `e_ij`: the uncut profile `1/2 sin^2 tau conj(B_i) B_j` at both ends.
fn e_boundary(family: &BeltramiFamily, i: usize, j: usize, region: usize, grid: &CollarGrid) -> Dirichlet {
    let bi = &family.beltrami[i][region];
    let bj = &family.beltrami[j][region];
    let mut d = Dirichlet::new();
    let prod = bi.b.conj() * bj.b;
    if prod != ZERO {
        let half = |t: f64| 0.5 * t.sin().powi(2);
        d.insert(bi.shift - bj.shift, (prod * half(grid.tau_a), prod * half(grid.tau_b)));
    }
    d
}

/// `e_ij = T(f_ij)` on one region, with the residual of the solve.
pub fn e_green(
    family: &BeltramiFamily,
    i: usize,
    j: usize,
    region: usize,
    grid: &Arc<CollarGrid>,
) -> Result<(Section, f64)> {
    let f = f_pair(family, i, j, region, grid)?;
    let sol = green_solve(&GreenProblem { rhs: f, boundary: e_boundary(family, i, j, region, grid) })?;
    Ok((sol.e.clone(), sol.max_residual()))
}

pub fn assemble_fields(family: &BeltramiFamily, grids: &FamilyGrids) -> Result<PairFields> {
    let n = family.n();
    let mut a = Vec::new();
    let mut f = Vec::new();
    let mut e = Vec::new();
    let mut green_residual = Vec::new();
    for (r, grid) in grids.regions.iter().enumerate() {
        let ar: Vec<Section> = (0..n).map(|i| family.beltrami_section(i, r, grid)).collect();
        let conj: Vec<Section> = ar.iter().map(|s| s.conj()).collect();
        let mut fr = vec![vec![Section::zeros(grid, 0); n]; n];
        let mut er = vec![vec![Section::zeros(grid, 0); n]; n];
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                let fij = ar[i].mul(&conj[j])?;
                let sol = green_solve(&GreenProblem {
                    rhs: fij.clone(),
                    boundary: e_boundary(family, i, j, r, grid),
                })
                .map_err(|err| Error::numerical(format!("e_{i}{j} on region {r}: {err}")))?;
                worst = worst.max(sol.max_residual());
                if i != j {
                    fr[j][i] = fij.conj();
                    er[j][i] = sol.e.conj();
                }
                fr[i][j] = fij;
                er[i][j] = sol.e;
            }
        }
        a.push(ar);
        f.push(fr);
        e.push(er);
        green_residual.push(worst);
    }
    Ok(PairFields { n, a, f, e, green_residual })
}

/// Quintic smoothstep cut-off: 1 below `log c1`, 0 above `log c`.
pub fn cutoff_eta(x: f64, c: f64, c1: f64) -> f64 {
    let (a, b) = (c1.ln(), c.ln());
    let s = ((x - a) / (b - a)).clamp(0.0, 1.0);
    1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

/// Sup bounds of `|eta'|` and `|eta''|`.
pub fn cutoff_derivative_bounds(c: f64, c1: f64) -> (f64, f64) {
    let l = (c / c1).ln();
    let s = (3.0 - 3f64.sqrt()) / 6.0;
    let d2 = 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s);
    (1.875 / l, d2 / (l * l))
}

/// Both ramps of the cut-off on collar chart `ch`.
fn collar_cut(ch: &CollarChart, c: f64, c1: f64, tau: f64) -> f64 {
    let x = tau / ch.u;
    let log_rho = -PI / ch.u;
    cutoff_eta(x, c, c1).min(cutoff_eta(log_rho - x, c, c1))
}

/// Which approximation regime an index pair falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ApproxCase {
    /// `i <= m < j` (or the reverse).
    Mixed,
    /// `i, j <= m`, `i != j`.
    Degenerate,
    /// `i = j <= m`.
    Diagonal,
}

pub fn approx_case(family: &BeltramiFamily, i: usize, j: usize) -> Option<ApproxCase> {
    let m = family.m();
    match (i < m, j < m) {
        (true, true) if i == j => Some(ApproxCase::Diagonal),
        (true, true) => Some(ApproxCase::Degenerate),
        (true, false) | (false, true) => Some(ApproxCase::Mixed),
        (false, false) => None,
    }
}

/// Amplitude of `e~_ij` on a region, or `None` where it vanishes.
fn e_tilde_amp(family: &BeltramiFamily, i: usize, j: usize, region: usize) -> Option<C64> {
    let m = family.m();
    if region >= m || approx_case(family, i, j).is_none() || (region != i && region != j) {
        return None;
    }
    let bi = &family.beltrami[i][region];
    let bj = &family.beltrami[j][region];
    Some(bi.b.conj() * bj.b)
}

/// Pointwise `e~_ij` at `tau` on a region (rescaled frame).
pub fn e_tilde_value(family: &BeltramiFamily, i: usize, j: usize, region: usize, tau: f64) -> C64 {
    match e_tilde_amp(family, i, j, region) {
        Some(amp) => {
            let ch = family.region_chart(region);
            let (a, b) = ch.tau_bounds();
            if tau < a || tau > b {
                return ZERO;
            }
            let p = &family.params;
            amp * (0.5 * tau.sin().powi(2) * collar_cut(&ch, p.c, p.c1, tau))
        }
        None => ZERO,
    }
}

/// `e~_ij` on a region grid (rescaled frame, weight 0).
pub fn e_tilde(family: &BeltramiFamily, i: usize, j: usize, region: usize, grid: &Arc<CollarGrid>) -> Section {
    Section::mode_fn(grid, 0, 0, |t| e_tilde_value(family, i, j, region, t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxReport {
    pub i: usize,
    pub j: usize,
    pub case: ApproxCase,
    /// Sup of `|e - e~|` in the rescaled frame.
    pub sup_rescaled: f64,
    /// Sup divided by the expected order (`u^4/|t|^2`, `u_i^3 u_j^3/|t_i t_j|`, `u_i^3/|t_i|`).
    pub normalized: f64,
    /// Sup restricted to the band where the cut-off is 1.
    pub interior_rescaled: f64,
}

/// Compares `e_ij` with `e~_ij` on every collar, sampling densely across the ramps.
pub fn approx_residual(
    family: &BeltramiFamily,
    fields: &PairFields,
    grids: &FamilyGrids,
    i: usize,
    j: usize,
) -> Result<ApproxReport> {
    let case = approx_case(family, i, j)
        .ok_or_else(|| Error::config(format!("no approximation for thick pair ({i}, {j})")))?;
    let sub = 8;
    let mut sup: f64 = 0.0;
    let mut interior: f64 = 0.0;
    let p = &family.params;
    for r in 0..family.m() {
        let grid = &grids.regions[r];
        let e = &fields.e[r][i][j];
        let ch = grid.chart;
        let h = grid.h();
        let span = e.mode_range().len().max(1);
        let n_theta = if span == 1 { 1 } else { 4 * span };
        for cell in 0..grid.n - 1 {
            for s in 0..=sub {
                let tau = grid.tau(cell) + h * s as f64 / sub as f64;
                let et = e_tilde_value(family, i, j, r, tau);
                let vals: Vec<(i32, C64)> = e
                    .mode_range()
                    .map(|k| (k, interpolate(grid.tau_a, h, e.mode(k).unwrap(), tau)))
                    .collect();
                for q in 0..n_theta {
                    let th = 2.0 * PI * q as f64 / n_theta as f64;
                    let ev: C64 = vals.iter().map(|(k, v)| v * C64::from_polar(1.0, *k as f64 * th)).sum();
                    let d = (ev - et).norm();
                    sup = sup.max(d);
                    if collar_cut(&ch, p.c, p.c1, tau) == 1.0 {
                        interior = interior.max(d);
                    }
                }
            }
        }
    }
    let u = family.point.moduli();
    let norm = match case {
        ApproxCase::Diagonal => 1.0 / (PI * PI * u[i] * u[i]),
        ApproxCase::Degenerate => 1.0 / (PI * PI * u[i] * u[i] * u[j] * u[j]),
        ApproxCase::Mixed => {
            let d = if i < family.m() { i } else { j };
            1.0 / (PI * u[d] * u[d])
        }
    };
    Ok(ApproxReport { i, j, case, sup_rescaled: sup, normalized: sup * norm, interior_rescaled: interior })
}

/// `[mu : phi] = int mu phi dx dy` over one collar; `mu` rescaled Beltrami
/// (weight -2), `big_phi = z^2 phi`.
pub fn wp_duality_pairing(mu: &Section, big_phi: &Section) -> Result<C64> {
    let prod = mu.mul(big_phi)?;
    let grid = mu.grid();
    let u = grid.chart.u;
    Ok(match prod.mode(2) {
        Some(g) => g.iter().zip(&grid.dtau).map(|(x, w)| x * *w).sum::<C64>() * (2.0 * PI / u),
        None => ZERO,
    })
}

/// `scale * lambda^{-1} conj(phi)` as a Beltrami coefficient on the collar.
pub fn dual_beltrami(big_phi: &Section, scale: f64) -> Section {
    let grid = big_phi.grid().clone();
    let u = grid.chart.u;
    let w = Section::mode_fn(&grid, -2, 2, |t| C64::new(2.0 * scale * t.sin().powi(2) / (u * u), 0.0));
    w.mul(&big_phi.conj()).expect("same grid").with_weight(-2)
}

/// The leading diagonal constant `b_j = -u_j / (pi conj t_j)`, physical.
pub fn leading_b(t: C64) -> Result<C64> {
    let u = u_from_t(t)?;
    Ok(-C64::new(u / PI, 0.0) / t.conj())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(t: f64) -> BeltramiFamily {
        make_model_family(vec![C64::new(t, 0.0)], vec![], FamilyParams::default(), Profile::Leading).unwrap()
    }

    #[test]
    fn leading_b_value() {
        let b = leading_b(C64::new(1e-6, 0.0)).unwrap();
        // -0.2273960590 / (pi 1e-6)
        assert!((b.re + 7.238249e4).abs() < 1.0, "{b}");
        assert_eq!(b.im, 0.0);
    }

    #[test]
    fn leading_evaluators() {
        let fam = single(1e-6);
        let ch = fam.charts[0];
        let z = C64::from_polar(ch.geodesic_radius(), 0.7);
        let a = fam.beltrami_eval(0, 0, z).unwrap();
        let b = leading_b(fam.point.t[0]).unwrap();
        assert!((a.norm() / b.norm() - 1.0).abs() < 1e-12);
        let phi = fam.quadratic_eval(0, 0, z).unwrap();
        let want = -fam.point.t[0] / (PI * z * z);
        assert!((phi - want).norm() < 1e-12 * want.norm());
        assert!(fam.beltrami_eval(0, 0, C64::new(0.9, 0.0)).is_err());
    }

    #[test]
    fn tail_bound_is_inclusive() {
        let p = FamilyParams::default();
        let at = Decorations { beltrami_tails: vec![(0, 0, (1, C64::new(p.m_bound / p.c, 0.0)))], ..Default::default() };
        assert!(make_model_family(vec![C64::new(1e-6, 0.0)], vec![], p.clone(), Profile::Decorated(at)).is_ok());
        let over =
            Decorations { beltrami_tails: vec![(0, 0, (1, C64::new(1.001 * p.m_bound / p.c, 0.0)))], ..Default::default() };
        let err = make_model_family(vec![C64::new(1e-6, 0.0)], vec![], p, Profile::Decorated(over)).unwrap_err();
        assert!(err.to_string().contains("sum_(k>0)"), "{err}");
    }

    #[test]
    fn cutoff_values() {
        let (c, c1) = (0.5f64, 0.25f64);
        assert_eq!(cutoff_eta(c1.ln() - 1.0, c, c1), 1.0);
        assert_eq!(cutoff_eta(c.ln(), c, c1), 0.0);
        let mid = 0.5 * (c.ln() + c1.ln());
        assert!((cutoff_eta(mid, c, c1) - 0.5).abs() < 1e-15);
    }
}
