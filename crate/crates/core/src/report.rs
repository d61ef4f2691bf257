//! Sweep orchestration: the full metric pipeline per sweep point, CSV rows of
//! normalized diagnostics and the JSON bundle.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::collar::u_from_t;
use crate::comparison::{equivalence_report, EquivalenceReport, MetricSeries};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::family::{assemble_fields, make_model_family, BeltramiFamily, FamilyGrids};
use crate::metrics::{
    holomorphic_sectional, mcmullen_metric, perturbed_metric, poincare_metric, ricci_contract, ricci_metric,
    wp_cometric, wp_curvature, wp_metric, CurvatureContext, CurvatureTensor, HermitianForm, RicciCurvature,
    SymmetryDefects,
};

type C64 = Complex64;

/// Pipeline options independent of the family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineOptions {
    pub n_tau: usize,
    pub kmax: i32,
    pub perturbation: f64,
    pub mcmullen_delta: f64,
    pub mcmullen_eps: f64,
    pub thick_poincare: f64,
}

impl PipelineOptions {
    pub fn from_config(cfg: &Config) -> Self {
        Self {
            n_tau: cfg.n_tau,
            kmax: cfg.kmax,
            perturbation: cfg.perturbation,
            mcmullen_delta: cfg.mcmullen_delta,
            mcmullen_eps: cfg.mcmullen_eps,
            thick_poincare: cfg.thick_poincare,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StructureChecks {
    /// Largest relative Hermitian defect over the metrics.
    pub hermitian: f64,
    pub kahler_wp: SymmetryDefects,
    pub kahler_ricci: SymmetryDefects,
    pub kahler_perturbed: SymmetryDefects,
    /// `|ricci_contract(R, h) + tau|`, relative to `|tau|`.
    pub identity: f64,
    /// `|ricci_contract(R, h^cometric) + tau|`, relative; `O(u)` by construction.
    pub cometric_identity: f64,
    /// `|h^cometric h^T - I|`.
    pub cometric_inverse: f64,
    /// `tau~ - (tau + C h)` elementwise, exact zero expected.
    pub perturbation_identity: f64,
    pub order_defect: f64,
    pub all_positive_definite: bool,
}

/// Every quantity of the pipeline at one family.
#[derive(Debug, Clone)]
pub struct PointEval {
    pub family: BeltramiFamily,
    pub h: HermitianForm,
    pub cometric: HermitianForm,
    pub r: CurvatureTensor,
    pub tau: HermitianForm,
    pub tau_perturbed: HermitianForm,
    pub ricci_curvature: RicciCurvature,
    pub perturbed_curvature: RicciCurvature,
    pub mcmullen: HermitianForm,
    pub poincare: HermitianForm,
    pub green_residual: f64,
    pub checks: StructureChecks,
}

fn rel_diff(a: &HermitianForm, b: &HermitianForm, sign: f64) -> f64 {
    let d = (&a.values + b.values.map(|x| x * sign)).iter().map(|x| x.norm()).fold(0.0, f64::max);
    d / b.max_abs().max(f64::MIN_POSITIVE)
}

pub fn evaluate_family(family: BeltramiFamily, opts: &PipelineOptions) -> Result<PointEval> {
    let grids = FamilyGrids::build(&family, opts.n_tau, opts.kmax)?;
    let fields = assemble_fields(&family, &grids)?;
    let h = wp_metric(&family, &fields);
    if !h.is_positive_definite() {
        return Err(Error::Validation(format!(
            "Weil-Petersson metric is not positive definite, eigenvalues {:?}",
            h.eigenvalues()
        )));
    }
    let cometric = wp_cometric(&family, &grids, &fields)?;
    let r = wp_curvature(&family, &fields);
    let tau = ricci_metric(&r, &h)?;
    let tau_perturbed = perturbed_metric(&tau, &h, opts.perturbation)?;
    let ctx = CurvatureContext::new(&family, &fields)?;
    let ricci_curvature = ctx.ricci_curvature(&h, &r, &tau)?;
    let perturbed_curvature = ctx.perturbed_curvature(&h, &r, &tau, opts.perturbation)?;
    let mcmullen = mcmullen_metric(&family, &h, opts.mcmullen_delta, opts.mcmullen_eps)?;
    let poincare = poincare_metric(&family, opts.thick_poincare);
    let green_residual = fields.green_residual.iter().copied().fold(0.0, f64::max);

    let ric = ricci_contract(&r, &h)?;
    let identity = rel_diff(&ric, &tau, 1.0);
    let cometric_identity = {
        let g = cometric.values.transpose();
        let n = r.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..n {
                    for l in 0..n {
                        acc += g[(k, l)] * r.get(i, j, k, l);
                    }
                }
                worst = worst.max((acc - tau.get(i, j)).norm());
            }
        }
        worst / tau.max_abs()
    };
    let n = h.dim();
    let cometric_inverse = (&cometric.values * h.values.transpose() - nalgebra::DMatrix::<C64>::identity(n, n))
        .iter()
        .map(|x| x.norm())
        .fold(0.0, f64::max);
    let perturbation_identity = tau_perturbed
        .values
        .iter()
        .zip(tau.values.iter().zip(h.values.iter()))
        .map(|(p, (t, h))| (p - (t + h * opts.perturbation)).norm())
        .fold(0.0, f64::max);
    let metrics = [&h, &tau, &tau_perturbed, &mcmullen, &poincare];
    let checks = StructureChecks {
        hermitian: metrics.iter().map(|m| m.hermitian_defect()).fold(0.0, f64::max),
        kahler_wp: r.symmetry_defects(),
        kahler_ricci: ricci_curvature.total.symmetry_defects(),
        kahler_perturbed: perturbed_curvature.total.symmetry_defects(),
        identity,
        cometric_identity,
        cometric_inverse,
        perturbation_identity,
        order_defect: ricci_curvature.order_defect,
        all_positive_definite: metrics.iter().all(|m| m.is_positive_definite()),
    };
    Ok(PointEval {
        family,
        h,
        cometric,
        r,
        tau,
        tau_perturbed,
        ricci_curvature,
        perturbed_curvature,
        mcmullen,
        poincare,
        green_residual,
        checks,
    })
}

pub fn family_at(cfg: &Config, t: f64) -> Result<BeltramiFamily> {
    make_model_family(
        vec![C64::new(t, 0.0); cfg.collars],
        vec![C64::new(cfg.s, 0.0); cfg.thick],
        cfg.family_params(),
        cfg.profile(),
    )
}

pub fn evaluate_point(cfg: &Config, t: f64) -> Result<PointEval> {
    let family = family_at(cfg, t)?;
    evaluate_family(family, &PipelineOptions::from_config(cfg))
        .map_err(|e| Error::numerical(format!("sweep point t = {t:e}: {e}")))
}

pub struct Sweep {
    pub config: Config,
    pub points: Vec<PointEval>,
}

pub fn run_sweep(cfg: &Config) -> Result<Sweep> {
    cfg.validate()?;
    let points = cfg.sweep_t.par_iter().map(|&t| evaluate_point(cfg, t)).collect::<Result<Vec<_>>>()?;
    Ok(Sweep { config: cfg.clone(), points })
}

/// A CSV column: header (formula) and extractor.
type Column = (&'static str, fn(&PointEval) -> f64);

fn unit(p: &PointEval) -> (f64, f64) {
    (p.family.point.t[0].norm(), p.family.point.moduli()[0])
}

fn hsc(t: &CurvatureTensor, g: &HermitianForm) -> f64 {
    let mut v = vec![C64::new(0.0, 0.0); t.n];
    v[0] = C64::new(1.0, 0.0);
    holomorphic_sectional(t, g, &v).unwrap_or(f64::NAN)
}

fn ratio00(a: &HermitianForm, b: &HermitianForm) -> f64 {
    a.get(0, 0).re / b.get(0, 0).re
}

pub const COLUMNS: &[Column] = &[
    ("t", |p| unit(p).0),
    ("u=-pi/log|t|", |p| unit(p).1),
    ("h11*|t|^2/u^3", |p| p.h.get(0, 0).re / (PI * PI * unit(p).1)),
    ("h^11*u^3/|t|^2", |p| p.cometric.get(0, 0).re * PI * PI * unit(p).1),
    ("tau11*|t|^2/u^2", |p| p.tau.get(0, 0).re / (PI * PI)),
    ("R1111*|t|^4/u^5", |p| p.r.get(0, 0, 0, 0).re / (PI.powi(4) * unit(p).1)),
    ("Rt1111*|t|^4/u^4", |p| p.ricci_curvature.total.get(0, 0, 0, 0).re / PI.powi(4)),
    ("P1111*|t|^4/u^4", |p| p.perturbed_curvature.total.get(0, 0, 0, 0).re / PI.powi(4)),
    ("block1*|t|^4/u^4", |p| p.ricci_curvature.blocks[0].get(0, 0, 0, 0).re / PI.powi(4)),
    ("block2*|t|^4/u^4", |p| p.ricci_curvature.blocks[1].get(0, 0, 0, 0).re / PI.powi(4)),
    ("block3*|t|^4/u^4", |p| p.ricci_curvature.blocks[2].get(0, 0, 0, 0).re / PI.powi(4)),
    ("block4*|t|^4/u^4", |p| p.ricci_curvature.blocks[3].get(0, 0, 0, 0).re / PI.powi(4)),
    ("hsc_wp*u", |p| hsc(&p.r, &p.h) * unit(p).1),
    ("hsc_ricci", |p| hsc(&p.ricci_curvature.total, &p.tau)),
    ("hsc_perturbed", |p| hsc(&p.perturbed_curvature.total, &p.tau_perturbed)),
    ("h11/tau11", |p| ratio00(&p.h, &p.tau)),
    ("taut11/tau11", |p| ratio00(&p.tau_perturbed, &p.tau)),
    ("mcmullen11/tau11", |p| ratio00(&p.mcmullen, &p.tau)),
    ("tau11/poincare11", |p| ratio00(&p.tau, &p.poincare)),
    ("green_residual", |p| p.green_residual),
    ("kahler_defect", |p| {
        p.checks.kahler_wp.max().max(p.checks.kahler_ricci.max()).max(p.checks.kahler_perturbed.max())
    }),
    ("identity_defect", |p| p.checks.identity),
];

pub fn write_csv<W: Write>(sweep: &Sweep, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::numerical(format!("CSV write failed: {e}"));
    w.write_record(COLUMNS.iter().map(|c| c.0)).map_err(io)?;
    for p in &sweep.points {
        w.write_record(COLUMNS.iter().map(|c| format!("{:.16e}", (c.1)(p)))).map_err(io)?;
    }
    w.flush().map_err(|e| Error::numerical(format!("CSV write failed: {e}")))?;
    Ok(())
}

fn c(x: C64) -> Value {
    json!([x.re, x.im])
}

pub fn form_json(f: &HermitianForm) -> Value {
    let n = f.dim();
    json!({
        "dim": n,
        "kind": f.kind,
        "frame": f.sigma,
        "values": (0..n * n).map(|k| c(f.values[(k / n, k % n)])).collect::<Vec<_>>(),
    })
}

pub fn tensor_json(t: &CurvatureTensor) -> Value {
    json!({
        "dim": t.n,
        "frame": t.sigma,
        "values": t.data.iter().copied().map(c).collect::<Vec<_>>(),
    })
}

fn point_json(p: &PointEval) -> Value {
    json!({
        "t": p.family.point.t.iter().copied().map(c).collect::<Vec<_>>(),
        "s": p.family.point.s.iter().copied().map(c).collect::<Vec<_>>(),
        "u": p.family.point.moduli(),
        "wp": form_json(&p.h),
        "wp_cometric": form_json(&p.cometric),
        "wp_curvature": tensor_json(&p.r),
        "ricci": form_json(&p.tau),
        "perturbed_ricci": form_json(&p.tau_perturbed),
        "ricci_curvature": tensor_json(&p.ricci_curvature.total),
        "ricci_curvature_blocks": p.ricci_curvature.blocks.iter().map(tensor_json).collect::<Vec<_>>(),
        "perturbed_curvature": tensor_json(&p.perturbed_curvature.total),
        "mcmullen": form_json(&p.mcmullen),
        "poincare_model": form_json(&p.poincare),
        "green_residual": p.green_residual,
        "checks": p.checks,
    })
}

pub fn bundle_json(sweep: &Sweep) -> Value {
    json!({
        "schema": 1,
        "version": env!("CARGO_PKG_VERSION"),
        "metadata": {
            "cutoff": "quintic smoothstep on [log c1, log c]",
            "frame": "direction i rescaled by u_i/(pi |t_i|) (degenerate) or 1 (thick); covariant forms physical = frame_i frame_j stored",
            "tensor_layout": "index-major R[i][j][k][l] = R_{i jbar k lbar}",
            "complex": "[re, im]",
        },
        "config": sweep.config.resolved(),
        "points": sweep.points.iter().map(point_json).collect::<Vec<_>>(),
    })
}

/// Short names of the metric fields compared by [`equivalence_reports`].
pub const METRIC_NAMES: [&str; 5] = ["wp", "ricci", "perturbed", "mcmullen", "poincare"];

pub fn metric_series(sweep: &Sweep, name: &str) -> Result<MetricSeries> {
    let pick = |p: &PointEval| -> Result<HermitianForm> {
        Ok(match name {
            "wp" => p.h.clone(),
            "ricci" => p.tau.clone(),
            "perturbed" => p.tau_perturbed.clone(),
            "mcmullen" => p.mcmullen.clone(),
            "poincare" => p.poincare.clone(),
            _ => return Err(Error::config(format!("unknown metric {name}"))),
        })
    };
    Ok(MetricSeries {
        name: name.to_string(),
        u: sweep
            .points
            .iter()
            .map(|p| u_from_t(p.family.point.t[0]))
            .collect::<Result<_>>()?,
        forms: sweep.points.iter().map(pick).collect::<Result<_>>()?,
    })
}

/// Reports for every unordered pair of metric fields.
pub fn equivalence_reports(sweep: &Sweep) -> Result<Vec<EquivalenceReport>> {
    let rule = sweep.config.equivalence_rule();
    let series: Vec<MetricSeries> = METRIC_NAMES.iter().map(|n| metric_series(sweep, n)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for a in 0..series.len() {
        for b in a + 1..series.len() {
            out.push(equivalence_report(&series[a], &series[b], rule)?);
        }
    }
    Ok(out)
}

pub fn equivalence_json(r: &EquivalenceReport, cfg: &Config) -> Value {
    json!({
        "schema": 1,
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg.resolved(),
        "report": r,
        "verdict": r.verdict.label(),
    })
}
