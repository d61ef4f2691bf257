use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use collarlab::collar::{CollarChart, CollarGrid};
use collarlab::comparison::{
    bergman_kernel_numeric, equivalence_report, kobayashi_ball, sandwich_bounds, DomainKind, DomainModel,
    EquivalenceRule, MetricSeries,
};
use collarlab::family::{
    assemble_fields, cutoff_eta, make_model_family, wp_duality_pairing, Decorations, FamilyGrids, FamilyParams,
    PairFields, Profile,
};
use collarlab::metrics::{holomorphic_sectional, perturbed_metric, wp_curvature, wp_metric, FormKind, HermitianForm};
use collarlab::sections::Section;
use collarlab::Complex64 as C;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn decorated(b01: f64, b10: f64, t0: f64, t1: f64) -> (collarlab::family::BeltramiFamily, PairFields) {
    let dec = Decorations {
        beltrami_b: vec![(0, 1, C::new(b01, 0.3 * b01)), (1, 0, C::new(b10, -0.2))],
        ..Default::default()
    };
    let fam = make_model_family(
        vec![C::new(t0, 0.0), C::new(t1, 0.0)],
        vec![],
        FamilyParams::default(),
        Profile::Decorated(dec),
    )
    .unwrap();
    let grids = FamilyGrids::build(&fam, 128, 6).unwrap();
    let fields = assemble_fields(&fam, &grids).unwrap();
    (fam, fields)
}

fn two_collar() -> &'static (collarlab::metrics::CurvatureTensor, HermitianForm) {
    static CELL: OnceLock<(collarlab::metrics::CurvatureTensor, HermitianForm)> = OnceLock::new();
    CELL.get_or_init(|| {
        let (fam, fields) = decorated(0.7, 0.4, 1e-6, 1e-9);
        (wp_curvature(&fam, &fields), wp_metric(&fam, &fields))
    })
}

fn pd_form(n: usize, seed: &[f64]) -> HermitianForm {
    let a = DMatrix::from_fn(n, n, |i, j| C::new(seed[(i * n + j) % seed.len()], seed[(i + 3 * j + 1) % seed.len()]));
    let m = &a * a.adjoint() + DMatrix::identity(n, n).map(|x: C| x * 0.5);
    HermitianForm::new(m, vec![1.0; n], FormKind::Covariant).unwrap()
}

fn series(name: &str, u: &[f64], diag: &[(f64, f64)]) -> MetricSeries {
    let forms = diag
        .iter()
        .map(|&(a, b)| {
            let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![C::new(a, 0.0), C::new(b, 0.0)]));
            HermitianForm::new(m, vec![1.0, 1.0], FormKind::Covariant).unwrap()
        })
        .collect();
    MetricSeries { name: name.into(), u: u.to_vec(), forms }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn pair_fields_are_hermitian(b01 in 0.1..1.5f64, b10 in 0.1..1.5f64, e0 in 4.0..12.0f64, e1 in 4.0..12.0f64) {
        let (fam, fields) = decorated(b01, b10, 10f64.powf(-e0), 10f64.powf(-e1));
        for r in 0..fam.regions() {
            for i in 0..fam.n() {
                for j in 0..fam.n() {
                    let (a, b) = (&fields.e[r][i][j], &fields.e[r][j][i]);
                    let (fa, fb) = (&fields.f[r][i][j], &fields.f[r][j][i]);
                    let scale = a.sup_abs().max(fa.sup_abs()).max(1e-300);
                    for node in (0..a.grid().n).step_by(7) {
                        for q in 0..5 {
                            let th = 2.0 * PI * q as f64 / 5.0;
                            prop_assert!((a.eval(node, th) - b.eval(node, th).conj()).norm() <= 1e-12 * scale);
                            prop_assert!((fa.eval(node, th) - fb.eval(node, th).conj()).norm() <= 1e-12 * scale);
                        }
                    }
                }
            }
        }
        prop_assert!(wp_metric(&fam, &fields).hermitian_defect() <= 1e-12);
    }
}

proptest! {
    #[test]
    fn cutoff_is_a_monotone_ramp(x in -12.0..2.0f64, dx in 0.0..3.0f64, c in 0.3..0.9f64, k in 0.1..0.9f64) {
        let c1 = c * k;
        let (a, b) = (cutoff_eta(x, c, c1), cutoff_eta(x + dx, c, c1));
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b <= a);
        prop_assert_eq!(cutoff_eta(c1.ln() - 1e-9, c, c1), 1.0);
        prop_assert_eq!(cutoff_eta(c.ln() + 1e-9, c, c1), 0.0);
    }

    #[test]
    fn holomorphic_sectional_is_scale_invariant(
        v0 in (-2.0..2.0f64, -2.0..2.0f64), v1 in (-2.0..2.0f64, -2.0..2.0f64),
        lam in (0.1..5.0f64, 0.0..6.3f64),
    ) {
        let (r, h) = two_collar();
        let v = [C::new(v0.0, v0.1), C::new(v1.0, v1.1)];
        prop_assume!(v[0].norm() + v[1].norm() > 0.1);
        let l = C::from_polar(lam.0, lam.1);
        let a = holomorphic_sectional(r, h, &v).unwrap();
        let b = holomorphic_sectional(r, h, &[v[0] * l, v[1] * l]).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.abs());
    }

    #[test]
    fn equivalence_constants_are_reciprocal(
        d in prop::collection::vec((0.05..20.0f64, 0.05..20.0f64, 0.05..20.0f64, 0.05..20.0f64), 2..6),
    ) {
        let u: Vec<f64> = (0..d.len()).map(|k| 0.3 / (k + 1) as f64).collect();
        let a = series("a", &u, &d.iter().map(|x| (x.0, x.1)).collect::<Vec<_>>());
        let b = series("b", &u, &d.iter().map(|x| (x.2, x.3)).collect::<Vec<_>>());
        let rule = EquivalenceRule::default();
        let ab = equivalence_report(&a, &b, rule).unwrap();
        let ba = equivalence_report(&b, &a, rule).unwrap();
        prop_assert!((ab.lower * ba.upper - 1.0).abs() <= 1e-10);
        prop_assert!((ab.upper * ba.lower - 1.0).abs() <= 1e-10);
        prop_assert_eq!(ab.verdict, ba.verdict);
        for p in &ab.points {
            prop_assert!(p.lambda_min <= p.lambda_max);
        }
    }

    #[test]
    fn ball_norm_lies_in_sandwich(r_in in 0.5..3.0f64, k in 1.0..4.0f64, s in 0.0..1.0f64, v in (-3.0..3.0f64, -3.0..3.0f64)) {
        let r_out = r_in * k;
        let r = r_in + s * (r_out - r_in);
        let v = [C::new(v.0, v.1), C::new(0.5 * v.1, -v.0)];
        let [lo, hi] = sandwich_bounds(r_in, r_out, &v);
        let val = kobayashi_ball(r, &v).unwrap();
        prop_assert!(lo <= val * (1.0 + 1e-15) && val <= hi * (1.0 + 1e-15));
    }

    #[test]
    fn weyl_monotonicity_of_perturbation(seed in prop::collection::vec(-1.0..1.0f64, 9), seed2 in prop::collection::vec(-1.0..1.0f64, 9), c in 0.0..10.0f64) {
        let tau = pd_form(3, &seed);
        let h = pd_form(3, &seed2);
        let pt = perturbed_metric(&tau, &h, c).unwrap();
        let (a, b) = (tau.eigenvalues(), pt.eigenvalues());
        for k in 0..3 {
            prop_assert!(b[k] >= a[k] - 1e-12 * a[2]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn bergman_kernel_grows_with_basis(x in -0.8..0.8f64, y in -0.5..0.5f64, n in 4usize..20) {
        let disk = DomainModel::new(DomainKind::Disk, 1).unwrap();
        let z = C::new(x, y);
        prop_assume!(z.norm() < 0.9);
        let a = bergman_kernel_numeric(&disk, z, n).unwrap().value;
        let b = bergman_kernel_numeric(&disk, z, n + 1).unwrap().value;
        prop_assert!(b >= a * (1.0 - 1e-12));
        let ann = DomainModel::new(DomainKind::Annulus { r0: 0.3, r1: 1.0 }, 1).unwrap();
        let w = C::from_polar(0.4 + 0.5 * (x + 0.8) / 1.6, y);
        let a = bergman_kernel_numeric(&ann, w, n).unwrap().value;
        let b = bergman_kernel_numeric(&ann, w, n + 1).unwrap().value;
        prop_assert!(b >= a * (1.0 - 1e-12));
    }

    #[test]
    fn duality_pairing_is_bilinear(
        a in (-2.0..2.0f64, -2.0..2.0f64), b in (-2.0..2.0f64, -2.0..2.0f64),
        p in 0.5..3.0f64, q in 0.5..3.0f64,
    ) {
        static GRID: OnceLock<Arc<CollarGrid>> = OnceLock::new();
        let grid = GRID.get_or_init(|| Arc::new(CollarGrid::build(CollarChart::new(0.1, 0.5).unwrap(), 128, 4).unwrap()));
        let mu1 = Section::mode_fn(grid, -2, -2, |t| C::new(t.sin().abs().powf(p), 0.0));
        let mu2 = Section::mode_fn(grid, -2, -2, |t| C::new(0.0, t.sin().abs().powf(q)));
        let phi = Section::mode_fn(grid, 2, 4, |t| C::new(1.0, t.cos()));
        let (a, b) = (C::new(a.0, a.1), C::new(b.0, b.1));
        let combo = mu1.scale(a).add(&mu2.scale(b)).unwrap();
        let lhs = wp_duality_pairing(&combo, &phi).unwrap();
        let rhs = a * wp_duality_pairing(&mu1, &phi).unwrap() + b * wp_duality_pairing(&mu2, &phi).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
    }
}
