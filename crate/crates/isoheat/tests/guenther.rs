use std::f64::consts::PI;

use isoheat::diagnostics::{holder_norm, GridField};
use isoheat::embedding::{EmbeddingMap, Truncation};
use isoheat::freeness::operator_norm_scan;
use isoheat::geometry::{sym_index, Backend, CurvatureSource, Field, SymTensorField, SyntheticCurvature, TangentField};
use isoheat::guenther::{
    gamma, isometry_residual, nlm_fields, q_quadratic, refine, refine_from, GridMap, RefineOptions,
    ResidualTensor, Smoothers, SmoothingOperator, ThetaPolicy,
};
use isoheat::Error;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn torus(m: usize) -> Backend {
    Backend::torus(vec![2.0 * PI, 2.0 * PI]).unwrap().with_uniform_resolution(m).unwrap()
}

fn circle_map(eps: f64) -> GridMap {
    let b = Backend::circle(1.0).unwrap().with_uniform_resolution(128).unwrap();
    let m = EmbeddingMap::new(&b, 0.05, Truncation::Count(20), true).unwrap();
    GridMap::from_map(&m.scaled(1.0 - eps)).unwrap()
}

/// Random trigonometric polynomial of low degree on a 2π-periodic grid.
fn random_smooth(b: &Backend, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let grid = b.periodic_grid().unwrap();
    let n = grid.dim();
    let terms: Vec<(Vec<f64>, f64, f64)> = (0..6)
        .map(|_| {
            let k: Vec<f64> = (0..n).map(|_| rng.random_range(-4i32..=4) as f64).collect();
            (k, rng.random_range(-1.0..1.0), rng.random_range(0.0..2.0 * PI))
        })
        .collect();
    (0..grid.len())
        .map(|p| {
            let x = grid.point(p);
            terms
                .iter()
                .map(|(k, a, ph)| a * (k.iter().zip(&x).map(|(k, x)| k * x).sum::<f64>() + ph).cos())
                .sum()
        })
        .collect()
}

#[test]
fn smoothing_round_trip_on_random_fields() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let b = torus(16);
    let sc = SyntheticCurvature::space_form(2, 0.5);
    for source in [CurvatureSource::Backend, CurvatureSource::Synthetic(&sc)] {
        for order in [1u8, 2] {
            let op = SmoothingOperator::new(&b, order, -1.0, source).unwrap();
            for _ in 0..20 {
                let comps: Vec<Vec<f64>> = (0..if order == 1 { 2 } else { 3 }).map(|_| random_smooth(&b, &mut rng)).collect();
                let field = if order == 1 {
                    Field::Tangent(TangentField { n: 2, comps: comps.clone() })
                } else {
                    Field::Sym(SymTensorField { n: 2, comps: comps.clone() })
                };
                let back = op.apply(&op.solve(&field).unwrap()).unwrap();
                let got = match back {
                    Field::Tangent(t) => t.comps,
                    Field::Sym(h) => h.comps,
                };
                for (a, b) in got.iter().flatten().zip(comps.iter().flatten()) {
                    assert!((a - b).abs() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn nlm_vanish_for_constant_v() {
    let b = torus(16);
    let s = Smoothers::new(&b, -1.0, CurvatureSource::Backend).unwrap();
    let v = GridField { components: vec![vec![0.3; 256], vec![-1.2; 256]] };
    let nlm = nlm_fields(&v, &s).unwrap();
    for c in nlm.n.comps.iter().chain(&nlm.l.comps).chain(&nlm.m.comps) {
        assert!(c.iter().all(|x| x.abs() < 1e-12));
    }
}

#[test]
fn synthetic_curvature_summands() {
    // v = (cos x, sin y, cos(x+y)) on the 2π torus with unit-sphere constants
    // and an injected ∇Ric; compare against direct contractions.
    let b = torus(16);
    let grid = b.periodic_grid().unwrap();
    let nr: Vec<f64> = (0..8).map(|i| 0.1 * (i as f64 + 1.0)).collect();
    let sc = SyntheticCurvature::space_form(2, 1.0).with_nabla_ricci(nr.clone());
    let flat = Smoothers::new(&b, -1.0, CurvatureSource::Backend).unwrap();
    let curved = Smoothers::new(&b, -1.0, CurvatureSource::Synthetic(&sc)).unwrap();
    let pts: Vec<Vec<f64>> = (0..grid.len()).map(|p| grid.point(p)).collect();
    let v = GridField {
        components: vec![
            pts.iter().map(|x| x[0].cos()).collect(),
            pts.iter().map(|x| x[1].sin()).collect(),
            pts.iter().map(|x| (x[0] + x[1]).cos()).collect(),
        ],
    };
    let a = nlm_fields(&v, &flat).unwrap();
    let c = nlm_fields(&v, &curved).unwrap();
    let nabla = |i: usize, j: usize, l: usize| nr[(i * 2 + j) * 2 + l];
    for (p, x) in pts.iter().enumerate() {
        let d0 = [-x[0].sin(), 0.0, -(x[0] + x[1]).sin()];
        let d1 = [0.0, x[1].cos(), -(x[0] + x[1]).sin()];
        let d = [d0, d1];
        let dot = |a: &[f64; 3], b: &[f64; 3]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let s2 = dot(&d0, &d0) + dot(&d1, &d1);
        for i in 0..2 {
            for j in i..2 {
                // 2R_ikjl ∂_kv·∂_lv = 2(δ_ij|∂v|² − ∂_jv·∂_iv) for unit curvature.
                let expect = 2.0 * (if i == j { s2 } else { 0.0 } - dot(&d[i], &d[j]));
                let s = sym_index(2, i, j);
                assert!((c.l.comps[s][p] - a.l.comps[s][p] - expect).abs() < 1e-10);
                let corr: f64 = (0..2)
                    .map(|l| (nabla(i, j, l) + nabla(j, i, l) - nabla(l, i, j)) * c.smoothed_n.comps[l][p])
                    .sum();
                assert!((c.m.comps[s][p] - 0.5 * c.l.comps[s][p] + corr).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn q_is_homogeneous_of_degree_two() {
    let u = circle_map(0.01);
    let s = Smoothers::new(u.backend(), -1.0, CurvatureSource::Backend).unwrap();
    let f = ResidualTensor::isometry_defect(&u);
    let v = refine(&u, &f, &RefineOptions::default()).unwrap().first_iterate;
    let base = q_quadratic(&u, &v, &s).unwrap();
    let scale = base.components.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    for k in [2.0, -1.0, 0.5] {
        let sv = GridField { components: v.components.iter().map(|c| c.iter().map(|x| k * x).collect()).collect() };
        let q = q_quadratic(&u, &sv, &s).unwrap();
        for (a, b) in q.components.iter().flatten().zip(base.components.iter().flatten()) {
            assert!((a - k * k * b).abs() <= 1e-12 * scale);
        }
    }
    let zero = GridField { components: vec![vec![0.0; u.len()]; u.q()] };
    assert!(q_quadratic(&u, &zero, &s).unwrap().components.iter().flatten().all(|x| *x == 0.0));
}

#[test]
fn q_bound_on_circle() {
    let (k, alpha, t) = (2, 0.5, 0.05);
    let b = Backend::circle(1.0).unwrap().with_uniform_resolution(256).unwrap();
    let m = EmbeddingMap::new(&b, t, Truncation::Cutoff(36.0 / t), true).unwrap();
    let u = GridMap::from_map(&m.scaled(0.99)).unwrap();
    let s = Smoothers::new(&b, -1.0, CurvatureSource::Backend).unwrap();
    let f = ResidualTensor::isometry_defect(&u);
    let v = refine(&u, &f, &RefineOptions::default()).unwrap().first_iterate;
    let q = q_quadratic(&u, &v, &s).unwrap();
    let qn = holder_norm(&q, k, alpha, &b).unwrap().total;
    let vn = holder_norm(&v, k, alpha, &b).unwrap().total;
    let c_e = operator_norm_scan(&b, &[0.05, 0.07, 0.1], k, alpha).unwrap().c_e;
    let bound = c_e * gamma(s.sigma(), 1, k, 0.0, 0.0, -1.0) * t.powf(-(k as f64 + alpha) / 2.0);
    assert!(qn / (vn * vn) <= bound, "{} > {bound}", qn / (vn * vn));
}

#[test]
fn circle_refinement_certificate_and_trace() {
    let u = circle_map(0.01);
    let f = ResidualTensor::isometry_defect(&u);
    let opts = RefineOptions::default();
    let r = refine(&u, &f, &opts).unwrap();
    assert!(r.certificate_residual <= 1e-8 && r.certified);
    assert!(r.certificate_residual <= 10.0 * opts.tol);
    // Contraction: strictly decreasing updates with a stable ratio well below 1.
    for w in r.state.update_norms.windows(2) {
        assert!(w[1] < w[0]);
    }
    assert!(r.state.ratios.iter().all(|&q| q < 0.1), "{:?}", r.state.ratios);
    // Idempotence at the fixed point.
    let again = refine_from(&u, &f, &opts, Some(&r.v)).unwrap();
    assert!(again.state.update_norms[0] < opts.tol);
    // The smallness product is reported, not enforced by default.
    assert!(r.theta.product > 0.0 && r.theta.theta > 0.0);
}

#[test]
fn first_iterate_lies_in_row_space() {
    let u = circle_map(0.01);
    let f = ResidualTensor::isometry_defect(&u);
    let v1 = refine(&u, &f, &RefineOptions::default()).unwrap().first_iterate;
    for p in 0..u.len() {
        let rows = u.jet_rows(p);
        let w = nalgebra::DVector::from_fn(u.q(), |j, _| v1.components[j][p]);
        let gram = rows * rows.transpose();
        let proj = rows.transpose() * gram.try_inverse().unwrap() * (rows * &w);
        assert!((&w - proj).amax() <= 1e-10 * w.amax().max(1e-300));
    }
}

#[test]
fn torus_refinement_certificate() {
    let b = torus(32);
    let m = EmbeddingMap::new(&b, 0.1, Truncation::Cutoff(360.0), true).unwrap();
    let u = GridMap::from_map(&m.scaled(0.995)).unwrap();
    let f = ResidualTensor::isometry_defect(&u);
    let opts = RefineOptions::default();
    let r = refine(&u, &f, &opts).unwrap();
    assert!(r.certified, "{:e}", r.certificate_residual);
    let id = DMatrix::<f64>::identity(2, 2);
    let pb = u.pullback(Some(&r.v));
    for p in 0..u.len() {
        assert!((pb.at(p) - &id).amax() <= 10.0 * opts.tol);
    }
    assert!(isometry_residual(&u, &r.v, &f) <= 10.0 * opts.tol);
}

#[test]
fn theta_enforcement_refuses() {
    let u = circle_map(0.01);
    let f = ResidualTensor::isometry_defect(&u);
    let opts = RefineOptions {
        theta_policy: ThetaPolicy::Enforce,
        ..RefineOptions::default()
    };
    assert!(matches!(refine(&u, &f, &opts), Err(Error::Refused { .. })));
}

#[test]
fn large_defect_diverges() {
    let u = circle_map(0.6);
    let f = ResidualTensor::isometry_defect(&u);
    let r = refine(&u, &f, &RefineOptions::default());
    assert!(matches!(r, Err(Error::Divergence { .. }) | Err(Error::Numerical(_))), "{r:?}");
}
