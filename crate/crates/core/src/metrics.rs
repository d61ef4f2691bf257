//! Weil-Petersson, Ricci, perturbed Ricci and McMullen metrics of a model
//! family, their curvature tensors and holomorphic sectional curvatures.
//!
//! Forms and tensors live in the rescaled frame of the family: a covariant
//! 2-form is `sigma_i sigma_j` times the stored value, a contravariant one is
//! divided by it, and a 4-tensor carries the product of all four scales.
//! Index conventions: `R[i][j][k][l]` is `R_{i jbar k lbar}`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{BeltramiFamily, FamilyGrids, PairFields};
use crate::sections::{box_op, green_zero, maass_k, maass_l, operator_p, operator_pbar, Section};

type C64 = Complex64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FormKind {
    Covariant,
    Contravariant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HermitianForm {
    pub values: DMatrix<C64>,
    pub sigma: Vec<f64>,
    pub kind: FormKind,
}

impl HermitianForm {
    pub fn new(values: DMatrix<C64>, sigma: Vec<f64>, kind: FormKind) -> Result<Self> {
        if values.nrows() != values.ncols() || values.nrows() != sigma.len() {
            return Err(Error::Validation(format!(
                "form is {}x{} with {} frame scales",
                values.nrows(),
                values.ncols(),
                sigma.len()
            )));
        }
        Ok(Self { values, sigma, kind })
    }

    pub fn dim(&self) -> usize {
        self.sigma.len()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.values[(i, j)]
    }

    /// Frame factor turning a stored entry into a physical one.
    pub fn scale(&self, i: usize, j: usize) -> f64 {
        let s = self.sigma[i] * self.sigma[j];
        match self.kind {
            FormKind::Covariant => s,
            FormKind::Contravariant => 1.0 / s,
        }
    }

    /// Physical entry; may over- or underflow for tiny `|t|`.
    pub fn physical(&self, i: usize, j: usize) -> C64 {
        self.get(i, j) * self.scale(i, j)
    }

    pub fn hermitian_defect(&self) -> f64 {
        let d = &self.values - self.values.adjoint();
        d.iter().map(|x| x.norm()).fold(0.0, f64::max) / self.max_abs().max(f64::MIN_POSITIVE)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// Inverse matrix as the dual form; fails when the product with the
    /// original is more than `1e-10` away from the identity.
    pub fn inverse(&self) -> Result<HermitianForm> {
        let n = self.dim();
        let inv = self
            .values
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::numerical("singular Hermitian form"))?;
        let err = (&self.values * &inv - DMatrix::<C64>::identity(n, n))
            .iter()
            .map(|x| x.norm())
            .fold(0.0, f64::max);
        if !(err <= 1e-10) {
            return Err(Error::numerical(format!("inverse check failed: |H H^-1 - I| = {err:e}")));
        }
        let kind = match self.kind {
            FormKind::Covariant => FormKind::Contravariant,
            FormKind::Contravariant => FormKind::Covariant,
        };
        Ok(HermitianForm { values: inv, sigma: self.sigma.clone(), kind })
    }

    /// The contraction matrix `G[p][q] = (H^{-1})[q][p]`.
    pub fn contraction(&self) -> Result<DMatrix<C64>> {
        Ok(self.inverse()?.values.transpose())
    }

    pub fn add(&self, other: &HermitianForm, c: f64) -> Result<HermitianForm> {
        if self.kind != other.kind || self.sigma != other.sigma {
            return Err(Error::GridMismatch("forms live in different frames".into()));
        }
        HermitianForm::new(&self.values + other.values.map(|x| x * c), self.sigma.clone(), self.kind)
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let h = (&self.values + self.values.adjoint()).map(|x| x * 0.5);
        let mut ev: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn is_positive_definite(&self) -> bool {
        self.eigenvalues().first().is_some_and(|&e| e > 0.0)
    }

    /// Eigenvalues of `self` relative to `base` (same frame), ascending.
    pub fn relative_eigenvalues(&self, base: &HermitianForm) -> Result<Vec<f64>> {
        if self.sigma.len() != base.sigma.len() {
            return Err(Error::GridMismatch("forms of different dimension".into()));
        }
        let rescale = |f: &HermitianForm| {
            let n = f.dim();
            DMatrix::from_fn(n, n, |i, j| {
                let r = f.sigma[i] / base.sigma[i] * f.sigma[j] / base.sigma[j];
                f.values[(i, j)] * if f.kind == FormKind::Covariant { r } else { 1.0 / r }
            })
        };
        let a = rescale(self);
        let b = rescale(base);
        let b = (&b + b.adjoint()).map(|x| x * 0.5);
        let chol = nalgebra::Cholesky::new(b).ok_or_else(|| Error::numerical("base form is not positive definite"))?;
        let l = chol.l();
        let linv = l.clone().try_inverse().ok_or_else(|| Error::numerical("singular Cholesky factor"))?;
        let m = &linv * a * linv.adjoint();
        let m = (&m + m.adjoint()).map(|x| x * 0.5);
        let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        Ok(ev)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureTensor {
    pub n: usize,
    pub data: Vec<C64>,
    pub sigma: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryDefects {
    /// `|R_ijkl - R_kjil|`, relative.
    pub swap_holomorphic: f64,
    /// `|R_ijkl - R_ilkj|`, relative.
    pub swap_antiholomorphic: f64,
    /// `|R_ijkl - conj R_jilk|`, relative.
    pub conjugation: f64,
}

impl SymmetryDefects {
    pub fn max(&self) -> f64 {
        self.swap_holomorphic.max(self.swap_antiholomorphic).max(self.conjugation)
    }
}

impl CurvatureTensor {
    pub fn zeros(n: usize, sigma: Vec<f64>) -> Self {
        Self { n, data: vec![ZERO; n * n * n * n], sigma }
    }

    fn from_fn(n: usize, sigma: Vec<f64>, f: impl Fn(usize, usize, usize, usize) -> C64 + Sync) -> Self {
        let data = (0..n * n * n * n)
            .into_par_iter()
            .map(|idx| f(idx / (n * n * n), (idx / (n * n)) % n, (idx / n) % n, idx % n))
            .collect();
        Self { n, data, sigma }
    }

    fn idx(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        ((i * self.n + j) * self.n + k) * self.n + l
    }

    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> C64 {
        self.data[self.idx(i, j, k, l)]
    }

    pub fn physical(&self, i: usize, j: usize, k: usize, l: usize) -> C64 {
        self.get(i, j, k, l) * (self.sigma[i] * self.sigma[j] * self.sigma[k] * self.sigma[l])
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    pub fn add(&self, other: &CurvatureTensor, c: f64) -> CurvatureTensor {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b * c).collect();
        CurvatureTensor { n: self.n, data, sigma: self.sigma.clone() }
    }

    pub fn symmetry_defects(&self) -> SymmetryDefects {
        let n = self.n;
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut d = SymmetryDefects { swap_holomorphic: 0.0, swap_antiholomorphic: 0.0, conjugation: 0.0 };
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let r = self.get(i, j, k, l);
                        d.swap_holomorphic = d.swap_holomorphic.max((r - self.get(k, j, i, l)).norm() / scale);
                        d.swap_antiholomorphic =
                            d.swap_antiholomorphic.max((r - self.get(i, l, k, j)).norm() / scale);
                        d.conjugation = d.conjugation.max((r - self.get(j, i, l, k).conj()).norm() / scale);
                    }
                }
            }
        }
        d
    }
}

fn form_from_fn(n: usize, sigma: &[f64], kind: FormKind, f: impl Fn(usize, usize) -> C64 + Sync) -> HermitianForm {
    let vals: Vec<C64> = (0..n * n).into_par_iter().map(|idx| f(idx / n, idx % n)).collect();
    HermitianForm { values: DMatrix::from_row_slice(n, n, &vals), sigma: sigma.to_vec(), kind }
}

/// `h_ij = int A_i conj(A_j) dv`, summed over the collars and the core.
pub fn wp_metric(family: &BeltramiFamily, fields: &PairFields) -> HermitianForm {
    form_from_fn(fields.n, &family.sigma, FormKind::Covariant, |i, j| {
        fields.f.iter().map(|fr| fr[i][j].integrate()).sum()
    })
}

/// `h^{ij} = int lambda^{-2} phi_i conj(phi_j) dv` over the collars; the
/// thick block on the core is the inverse of the core Weil-Petersson block.
pub fn wp_cometric(family: &BeltramiFamily, grids: &FamilyGrids, fields: &PairFields) -> Result<HermitianForm> {
    let n = family.n();
    let m = family.m();
    let mut vals = DMatrix::from_element(n, n, ZERO);
    for j in 0..m {
        let grid = &grids.regions[j];
        let u = grid.chart.u;
        let phis: Vec<Section> = (0..n).map(|i| family.quadratic_section(i, j, grid)).collect();
        let s2: Vec<f64> = grid.taus().iter().map(|t| t.sin().powi(2)).collect();
        for a in 0..n {
            for b in 0..n {
                let prod = phis[a].mul(&phis[b].conj())?;
                if let Some(g) = prod.mode(0) {
                    let v: C64 = g.iter().zip(&grid.dtau).zip(&s2).map(|((x, w), s)| x * (*w * s)).sum();
                    vals[(a, b)] += v * (4.0 * PI / (u * u * u));
                }
            }
        }
    }
    if n > m {
        let core = &fields.f[m];
        let k = n - m;
        let block = DMatrix::from_fn(k, k, |a, b| core[m + a][m + b].integrate());
        let inv = block.try_inverse().ok_or_else(|| Error::numerical("singular core WP block"))?;
        for a in 0..k {
            for b in 0..k {
                vals[(m + a, m + b)] += inv[(a, b)];
            }
        }
    }
    HermitianForm::new(vals, family.sigma.clone(), FormKind::Contravariant)
}

/// `R_ijkl = int (e_ij f_kl + e_il f_kj) dv`.
pub fn wp_curvature(family: &BeltramiFamily, fields: &PairFields) -> CurvatureTensor {
    let regions = fields.f.len();
    CurvatureTensor::from_fn(fields.n, family.sigma.clone(), |i, j, k, l| {
        (0..regions)
            .map(|r| fields.e[r][i][j].integrate_product(&fields.f[r][k][l]) + fields.e[r][i][l].integrate_product(&fields.f[r][k][j]))
            .sum()
    })
}

/// `tau_ij = h^{kl} R_ijkl`.
pub fn ricci_metric(r: &CurvatureTensor, h: &HermitianForm) -> Result<HermitianForm> {
    let g = h.contraction()?;
    let n = r.n;
    Ok(form_from_fn(n, &h.sigma, FormKind::Covariant, |i, j| {
        let mut acc = ZERO;
        for k in 0..n {
            for l in 0..n {
                acc += g[(k, l)] * r.get(i, j, k, l);
            }
        }
        acc
    }))
}

/// `tau~ = tau + C h`, `C >= 0`.
pub fn perturbed_metric(tau: &HermitianForm, h: &HermitianForm, c: f64) -> Result<HermitianForm> {
    if !(c >= 0.0) {
        return Err(Error::config(format!("perturbation constant must be >= 0, got {c}")));
    }
    tau.add(h, c)
}

/// `-h^{kl} T_ijkl`.
pub fn ricci_contract(t: &CurvatureTensor, h: &HermitianForm) -> Result<HermitianForm> {
    let g = h.contraction()?;
    let n = t.n;
    Ok(form_from_fn(n, &h.sigma, FormKind::Covariant, |i, j| {
        let mut acc = ZERO;
        for k in 0..n {
            for l in 0..n {
                acc -= g[(k, l)] * t.get(i, j, k, l);
            }
        }
        acc
    }))
}

/// `-T(v, vbar, v, vbar) / |v|^4`, with `v` given in the rescaled frame.
pub fn holomorphic_sectional(t: &CurvatureTensor, g: &HermitianForm, v: &[C64]) -> Result<f64> {
    let n = t.n;
    if v.len() != n || g.dim() != n {
        return Err(Error::GridMismatch(format!("vector of length {} for dimension {n}", v.len())));
    }
    let mut num = ZERO;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    num += t.get(i, j, k, l) * v[i] * v[j].conj() * v[k] * v[l].conj();
                }
            }
        }
    }
    let mut norm2 = ZERO;
    for i in 0..n {
        for j in 0..n {
            norm2 += g.get(i, j) * v[i] * v[j].conj();
        }
    }
    if !(norm2.re > 0.0) {
        return Err(Error::numerical("vector has non-positive length"));
    }
    Ok(-num.re / (norm2.re * norm2.re))
}

/// Products and Green images shared by the Ricci-curvature blocks, with all
/// integrals summed over regions.
struct BlockIntegrals {
    n: usize,
    /// `int Y[k][i][j] conj X[l][b][a]`, index `[(k,i,j)][(l,b,a)]`.
    i1: Vec<C64>,
    /// `int Q_bl(e_aj) e_cd`, index `[(b,l,a,j)][(c,d)]`.
    i2: Vec<C64>,
    /// `int X[k][i][q] e_ab`, index `[(k,i,q)][(a,b)]`.
    j: Vec<C64>,
    /// `int conj X[l][j][p] e_ab`, index `[(l,j,p)][(a,b)]`.
    k: Vec<C64>,
}

fn block_integrals(fields: &PairFields) -> Result<BlockIntegrals> {
    let n = fields.n;
    let n2 = n * n;
    let n3 = n2 * n;
    let n4 = n3 * n;
    let mut out = BlockIntegrals {
        n,
        i1: vec![ZERO; n3 * n3],
        i2: vec![ZERO; n4 * n2],
        j: vec![ZERO; n3 * n2],
        k: vec![ZERO; n3 * n2],
    };
    for r in 0..fields.f.len() {
        let a = &fields.a[r];
        let e = &fields.e[r];
        let f = &fields.f[r];
        let pair = |idx: usize| (idx / n, idx % n);
        let p_e: Vec<Section> = (0..n2).into_par_iter().map(|x| operator_p(&e[x / n][x % n])).collect::<Result<_>>()?;
        let x: Vec<Section> = (0..n3)
            .into_par_iter()
            .map(|idx| Ok(a[idx / n2].mul(&p_e[idx % n2])?.scale(C64::new(-1.0, 0.0))))
            .collect::<Result<_>>()?;
        let y: Vec<Section> = x.par_iter().map(green_zero).collect::<Result<_>>()?;
        let xc: Vec<Section> = x.iter().map(|s| s.conj()).collect();
        let i1: Vec<C64> = (0..n3 * n3).into_par_iter().map(|idx| y[idx / n3].integrate_product(&xc[idx % n3])).collect();
        let jj: Vec<C64> = (0..n3 * n2)
            .into_par_iter()
            .map(|idx| {
                let (c, d) = pair(idx % n2);
                x[idx / n2].integrate_product(&e[c][d])
            })
            .collect();
        let kk: Vec<C64> = (0..n3 * n2)
            .into_par_iter()
            .map(|idx| {
                let (c, d) = pair(idx % n2);
                xc[idx / n2].integrate_product(&e[c][d])
            })
            .collect();
        let pbar_e: Vec<Section> = (0..n2).into_par_iter().map(|x| operator_pbar(&e[x / n][x % n])).collect::<Result<_>>()?;
        let box_e: Vec<Section> = (0..n2).into_par_iter().map(|x| box_op(&e[x / n][x % n])).collect::<Result<_>>()?;
        let l0_e: Vec<Section> = (0..n2).into_par_iter().map(|x| maass_l(0, &e[x / n][x % n])).collect::<Result<_>>()?;
        let k0_f: Vec<Section> = (0..n2).into_par_iter().map(|x| maass_k(0, &f[x / n][x % n])).collect::<Result<_>>()?;
        let i2: Vec<C64> = (0..n4)
            .into_par_iter()
            .map(|idx| -> Result<Vec<C64>> {
                let bl = idx / n2;
                let aj = idx % n2;
                let (b, l) = pair(bl);
                let q = pbar_e[bl]
                    .mul(&p_e[aj])?
                    .add(&f[b][l].mul(&box_e[aj])?.scale(C64::new(-2.0, 0.0)))?
                    .add(&k0_f[bl].mul(&l0_e[aj])?)?;
                Ok((0..n2).map(|cd| q.integrate_product(&e[cd / n][cd % n])).collect())
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        for (acc, v) in [(&mut out.i1, i1), (&mut out.i2, i2), (&mut out.j, jj), (&mut out.k, kk)] {
            for (a, b) in acc.iter_mut().zip(v) {
                *a += b;
            }
        }
    }
    Ok(out)
}

fn perms3(a: usize, b: usize, c: usize) -> [(usize, usize, usize); 6] {
    [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]
}

impl BlockIntegrals {
    fn i1(&self, k: usize, i: usize, j: usize, l: usize, b: usize, a: usize) -> C64 {
        let n = self.n;
        self.i1[((k * n + i) * n + j) * n * n * n + (l * n + b) * n + a]
    }

    /// `int Y[k][i][j] (conj X[l][beta][alpha] + conj X[beta][l][alpha])`.
    fn u1(&self, i: usize, k: usize, alpha: usize, j: usize, l: usize, beta: usize) -> C64 {
        self.i1(k, i, j, l, beta, alpha) + self.i1(k, i, j, beta, l, alpha)
    }

    fn i2(&self, b: usize, l: usize, a: usize, j: usize, c: usize, d: usize) -> C64 {
        let n = self.n;
        self.i2[(((b * n + l) * n + a) * n + j) * n * n + c * n + d]
    }

    fn jv(&self, k: usize, i: usize, q: usize, a: usize, b: usize) -> C64 {
        let n = self.n;
        self.j[((k * n + i) * n + q) * n * n + a * n + b]
    }

    fn kv(&self, l: usize, j: usize, p: usize, a: usize, b: usize) -> C64 {
        let n = self.n;
        self.k[((l * n + j) * n + p) * n * n + a * n + b]
    }
}

/// The four blocks of the curvature of the Ricci metric and their sum.
#[derive(Debug, Clone)]
pub struct RicciCurvature {
    pub blocks: [CurvatureTensor; 4],
    pub total: CurvatureTensor,
    /// Largest difference between two accumulation orders of the symmetrized
    /// blocks, relative to the largest block entry.
    pub order_defect: f64,
}

fn ricci_blocks(
    family: &BeltramiFamily,
    ints: &BlockIntegrals,
    h: &HermitianForm,
    r: &CurvatureTensor,
    tau: &HermitianForm,
    inverted: &HermitianForm,
) -> Result<RicciCurvature> {
    let n = ints.n;
    let g = h.contraction()?;
    let t = inverted.contraction()?;
    let sigma = family.sigma.clone();

    let b1 = CurvatureTensor::from_fn(n, sigma.clone(), |i, j, k, l| {
        let mut acc = ZERO;
        for al in 0..n {
            for be in 0..n {
                let mut s = ZERO;
                for (a, b, c) in perms3(i, k, al) {
                    s += ints.u1(a, b, c, j, l, be) + ints.u1(a, b, c, be, l, j);
                }
                acc += g[(al, be)] * s;
            }
        }
        acc
    });
    let b1_alt = CurvatureTensor::from_fn(n, sigma.clone(), |i, j, k, l| {
        let mut acc = ZERO;
        for be in 0..n {
            for al in 0..n {
                for (a, b, c) in perms3(i, k, al) {
                    acc += g[(al, be)] * ints.u1(a, b, c, be, l, j);
                }
            }
        }
        for be in 0..n {
            for al in 0..n {
                for (a, b, c) in perms3(i, k, al) {
                    acc += g[(al, be)] * ints.u1(a, b, c, j, l, be);
                }
            }
        }
        acc
    });
    let b2 = CurvatureTensor::from_fn(n, sigma.clone(), |i, j, k, l| {
        let mut acc = ZERO;
        for al in 0..n {
            for be in 0..n {
                let mut s = ZERO;
                for (a, b, c) in perms3(i, k, al) {
                    s += ints.i2(b, l, a, j, c, be);
                }
                acc += g[(al, be)] * s;
            }
        }
        acc
    });
    let vc = |i: usize, k: usize, q: usize| {
        let mut acc = ZERO;
        for al in 0..n {
            for be in 0..n {
                for (a, b, c) in perms3(i, k, al) {
                    acc += g[(al, be)] * ints.jv(b, a, q, c, be);
                }
            }
        }
        acc
    };
    let wc = |j: usize, l: usize, p: usize| {
        let mut acc = ZERO;
        for ga in 0..n {
            for de in 0..n {
                for (a, b, c) in perms3(j, l, de) {
                    acc += g[(ga, de)] * ints.kv(b, a, p, ga, c);
                }
            }
        }
        acc
    };
    let vtab: Vec<C64> = (0..n * n * n).map(|x| vc(x / (n * n), (x / n) % n, x % n)).collect();
    let wtab: Vec<C64> = (0..n * n * n).map(|x| wc(x / (n * n), (x / n) % n, x % n)).collect();
    let b3 = CurvatureTensor::from_fn(n, sigma.clone(), |i, j, k, l| {
        let mut acc = ZERO;
        for p in 0..n {
            for q in 0..n {
                acc -= t[(p, q)] * vtab[(i * n + k) * n + q] * wtab[(j * n + l) * n + p];
            }
        }
        acc
    });
    let b4 = CurvatureTensor::from_fn(n, sigma.clone(), |i, j, k, l| {
        let mut acc = ZERO;
        for p in 0..n {
            for q in 0..n {
                acc += tau.get(p, j) * g[(p, q)] * r.get(i, q, k, l);
            }
        }
        acc
    });
    let total = b1.add(&b2, 1.0).add(&b3, 1.0).add(&b4, 1.0);
    let scale = [&b1, &b2, &b3, &b4].iter().map(|b| b.max_abs()).fold(f64::MIN_POSITIVE, f64::max);
    let order_defect = b1.data.iter().zip(&b1_alt.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / scale;
    Ok(RicciCurvature { blocks: [b1, b2, b3, b4], total, order_defect })
}

/// Shared state for the Ricci and perturbed Ricci curvatures of one family.
pub struct CurvatureContext<'a> {
    family: &'a BeltramiFamily,
    ints: BlockIntegrals,
}

impl<'a> CurvatureContext<'a> {
    pub fn new(family: &'a BeltramiFamily, fields: &PairFields) -> Result<Self> {
        Ok(Self { family, ints: block_integrals(fields)? })
    }

    /// Curvature `R~` of the Ricci metric `tau`.
    pub fn ricci_curvature(&self, h: &HermitianForm, r: &CurvatureTensor, tau: &HermitianForm) -> Result<RicciCurvature> {
        ricci_blocks(self.family, &self.ints, h, r, tau, tau)
    }

    /// Curvature of `tau + C h`: block 3 uses the inverse of `tau + C h`, plus `C R`.
    pub fn perturbed_curvature(
        &self,
        h: &HermitianForm,
        r: &CurvatureTensor,
        tau: &HermitianForm,
        c: f64,
    ) -> Result<RicciCurvature> {
        let pert = perturbed_metric(tau, h, c)?;
        let mut out = ricci_blocks(self.family, &self.ints, h, r, tau, &pert)?;
        out.total = out.total.add(r, c);
        Ok(out)
    }
}

/// McMullen's cut-off logarithm: 0 on `(0, 1]`, `log x` on `[2, inf)`, a
/// quintic Hermite bridge in between.
pub fn mcmullen_log(x: f64) -> f64 {
    mcmullen_log_jet(x)[0]
}

/// Value, first and second derivative of [`mcmullen_log`].
pub fn mcmullen_log_jet(x: f64) -> [f64; 3] {
    if x <= 1.0 {
        return [0.0; 3];
    }
    if x >= 2.0 {
        return [x.ln(), 1.0 / x, -1.0 / (x * x)];
    }
    let [a3, a4, a5] = log_bridge();
    let s = x - 1.0;
    [
        s * s * s * (a3 + s * (a4 + s * a5)),
        s * s * (3.0 * a3 + s * (4.0 * a4 + s * 5.0 * a5)),
        s * (6.0 * a3 + s * (12.0 * a4 + s * 20.0 * a5)),
    ]
}

fn log_bridge() -> [f64; 3] {
    // p(s) = a3 s^3 + a4 s^4 + a5 s^5 with p, p', p'' = ln 2, 1/2, -1/4 at s = 1.
    let (v, d1, d2) = (2f64.ln(), 0.5, -0.25);
    let a5 = d2 / 2.0 - 3.0 * d1 + 6.0 * v;
    let a4 = d1 - 3.0 * v - 2.0 * a5;
    let a3 = v - a4 - a5;
    [a3, a4, a5]
}

/// Rescaled diagonal correction `-delta Log''(eps/l_j) |d(eps/l_j)|^2` of each direction.
pub fn mcmullen_correction(family: &BeltramiFamily, delta: f64, eps: f64) -> Vec<f64> {
    let u = family.point.moduli();
    (0..family.n())
        .map(|i| {
            if i >= family.m() {
                return 0.0;
            }
            let x = eps / (2.0 * PI * u[i]);
            -delta * mcmullen_log_jet(x)[2] * eps * eps / (16.0 * PI * PI * u[i] * u[i])
        })
        .collect()
}

/// `h + correction` with McMullen's parameters `delta > 0`, `eps > 0`.
pub fn mcmullen_metric(family: &BeltramiFamily, h: &HermitianForm, delta: f64, eps: f64) -> Result<HermitianForm> {
    if !(delta > 0.0 && eps > 0.0) {
        return Err(Error::config(format!("McMullen parameters must be positive, got delta = {delta}, eps = {eps}")));
    }
    let mut out = h.clone();
    for (i, c) in mcmullen_correction(family, delta, eps).into_iter().enumerate() {
        out.values[(i, i)] += c;
    }
    Ok(out)
}

/// Product of the model densities: `1/(4 |t|^2 log^2 |t|)` on degenerate
/// directions (exactly `1/4` rescaled), `thick` on the others.
pub fn poincare_metric(family: &BeltramiFamily, thick: f64) -> HermitianForm {
    let n = family.n();
    let u = family.point.moduli();
    let vals = DMatrix::from_fn(n, n, |i, j| {
        if i != j {
            ZERO
        } else if i < family.m() {
            let l = family.point.t[i].norm().ln();
            C64::new(PI * PI / (4.0 * u[i] * u[i] * l * l), 0.0)
        } else {
            C64::new(thick, 0.0)
        }
    });
    HermitianForm { values: vals, sigma: family.sigma.clone(), kind: FormKind::Covariant }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_bridge_is_c2_and_monotone() {
        let lo = mcmullen_log_jet(1.0 + 1e-12);
        let hi = mcmullen_log_jet(2.0 - 1e-12);
        assert!(lo.iter().all(|x| x.abs() < 1e-10));
        assert!((hi[0] - 2f64.ln()).abs() < 1e-10);
        assert!((hi[1] - 0.5).abs() < 1e-10);
        assert!((hi[2] + 0.25).abs() < 1e-9);
        for k in 0..=1000 {
            assert!(mcmullen_log_jet(1.0 + k as f64 / 1000.0)[1] >= 0.0);
        }
    }
}
