//! Leading single-collar values: closed-form oracles where one exists, frozen
//! pipeline output (default config, t = exp(-pi/u)) elsewhere.

use std::f64::consts::PI;

use collarlab::collar::CollarChart;
use collarlab::config::Config;
use collarlab::report::{evaluate_point, PointEval};

fn at(u: f64) -> PointEval {
    evaluate_point(&Config::default(), (-PI / u).exp()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn wp_metric_matches_sin_squared_integral() {
    // Hat-frame h11 = pi u int sin^2 over the collar, in closed form.
    for u in [0.1, 0.05, 0.033, 0.025] {
        let (a, b) = CollarChart::new(u, 0.5).unwrap().tau_bounds();
        let oracle = PI * u * ((b - a) / 2.0 - ((2.0 * b).sin() - (2.0 * a).sin()) / 4.0);
        assert!(rel(at(u).h.get(0, 0).re, oracle) < 1e-10, "u = {u}");
    }
}

// (u, h, cometric, tau, R, Rt, P), hat frame.
const FROZEN: [(f64, [f64; 6]); 3] = [
    (0.1, [4.9341053852517580e-1, 2.0261375331110996e0, 7.5010551163232386e-1, 3.7010996444520744e-1, 3.7489361549707789e-1, 8.1941234211013780e-1]),
    (0.05, [2.4673575179114940e-1, 4.0527757591857689e0, 7.5001323498277828e-1, 1.8505507938678778e-1, 3.7498674067940024e-1, 6.0645650033768517e-1]),
    (0.025, [1.2336978257380289e-1, 8.1056767915353216e0, 7.5000165587545298e-1, 9.2527541215346773e-2, 3.7499834917573538e-1, 4.9401162661648518e-1]),
];

#[test]
fn frozen_leading_values() {
    for (u, want) in FROZEN {
        let p = at(u);
        let got = [
            p.h.get(0, 0).re,
            p.cometric.get(0, 0).re,
            p.tau.get(0, 0).re,
            p.r.get(0, 0, 0, 0).re,
            p.ricci_curvature.total.get(0, 0, 0, 0).re,
            p.perturbed_curvature.total.get(0, 0, 0, 0).re,
        ];
        for (k, (g, w)) in got.iter().zip(want).enumerate() {
            assert!(rel(*g, w) < 1e-9, "u = {u}, slot {k}: {g} vs {w}");
        }
    }
}

#[test]
fn leading_limits() {
    let p = at(0.025);
    let u = 0.025;
    assert!(rel(p.h.get(0, 0).re, PI * PI * u / 2.0) < 1e-5);
    assert!(rel(p.cometric.get(0, 0).re * p.h.get(0, 0).re, 1.0) < 1e-5);
    assert!(rel(p.tau.get(0, 0).re, 0.75) < 1e-5);
    assert!(rel(p.r.get(0, 0, 0, 0).re, 3.0 * PI * PI * u / 8.0) < 1e-4);
    assert!(rel(p.ricci_curvature.total.get(0, 0, 0, 0).re, 0.375) < 1e-5);
    let blocks: Vec<f64> = p.ricci_curvature.blocks.iter().map(|b| b.get(0, 0, 0, 0).re).collect();
    for (b, w) in blocks.iter().zip([9.0 / 16.0, -9.0 / 16.0, -3.0 / 16.0, 9.0 / 16.0]) {
        assert!((b - w).abs() < 1e-5, "{blocks:?}");
    }
    assert!((p.poincare.get(0, 0).re - 0.25).abs() < 1e-14);
    assert!(p.ricci_curvature.order_defect < 1e-12);
}
