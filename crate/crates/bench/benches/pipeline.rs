use std::f64::consts::PI;
use std::hint::black_box;
use std::sync::Arc;

use collarlab::collar::{CollarChart, CollarGrid};
use collarlab::family::{assemble_fields, make_model_family, FamilyGrids, FamilyParams, Profile};
use collarlab::metrics::{ricci_metric, wp_curvature, wp_metric, CurvatureContext};
use collarlab::sections::{green_solve, Dirichlet, GreenProblem, Section};
use collarlab::Complex64;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn green(c: &mut Criterion) {
    let mut g = c.benchmark_group("green_solve");
    for n in [256, 512, 1024] {
        let grid = Arc::new(CollarGrid::build(CollarChart::new(0.2, 0.5).unwrap(), n, 8).unwrap());
        let rhs = Section::radial(&grid, 0, |t| t.sin().powi(4));
        g.bench_with_input(BenchmarkId::from_parameter(n), &rhs, |b, rhs| {
            b.iter(|| {
                let p = GreenProblem { rhs: rhs.clone(), boundary: Dirichlet::new() };
                black_box(green_solve(&p).unwrap())
            })
        });
    }
    g.finish();
}

fn leading(u: f64) -> collarlab::family::BeltramiFamily {
    let t = Complex64::new((-PI / u).exp(), 0.0);
    make_model_family(vec![t], vec![], FamilyParams::default(), Profile::Leading).unwrap()
}

fn wp_pipeline(c: &mut Criterion) {
    let fam = leading(0.05);
    c.bench_function("wp_pipeline/u=0.05", |b| {
        b.iter(|| {
            let grids = FamilyGrids::build(&fam, 512, 8).unwrap();
            let fields = assemble_fields(&fam, &grids).unwrap();
            let h = wp_metric(&fam, &fields);
            let r = wp_curvature(&fam, &fields);
            black_box(ricci_metric(&r, &h).unwrap())
        })
    });
}

fn ricci_curvature(c: &mut Criterion) {
    let fam = leading(0.05);
    let grids = FamilyGrids::build(&fam, 512, 8).unwrap();
    let fields = assemble_fields(&fam, &grids).unwrap();
    let h = wp_metric(&fam, &fields);
    let r = wp_curvature(&fam, &fields);
    let tau = ricci_metric(&r, &h).unwrap();
    c.bench_function("ricci_curvature/u=0.05", |b| {
        b.iter(|| {
            let ctx = CurvatureContext::new(&fam, &fields).unwrap();
            black_box(ctx.ricci_curvature(&h, &r, &tau).unwrap())
        })
    });
}

criterion_group!(benches, green, wp_pipeline, ricci_curvature);
criterion_main!(benches);
