use std::f64::consts::PI;

use isoheat::embedding::{
    first_order_correction, heat_kernel, modified_map, quadratic_coefficient_fit, EmbeddingMap,
    Truncation,
};
use isoheat::fit::loglog_fit;
use isoheat::geometry::Backend;
use isoheat::spectral::{BasisSize, SpectralBasis};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn s1_s2() -> Backend {
    Backend::product(vec![Backend::circle(1.0).unwrap(), Backend::sphere(1.0).unwrap()]).unwrap()
}

#[test]
fn poisson_summation_pullback_on_circle() {
    // Σ_{k≥1} k²e^{−k²t} = √π/(4t^{3/2}) up to O(e^{−π²/t}), so D ≡ 0 to roundoff.
    let b = Backend::circle(1.0).unwrap();
    let m = EmbeddingMap::new(&b, 0.1, Truncation::Rule { rho: 1.5 }, true).unwrap();
    let rep = m.pullback_report();
    assert!(rep.sup_deviation <= 1e-10, "{:e}", rep.sup_deviation);
    assert!(rep.tail_bound < 1e-10);
}

#[test]
fn golden_circle_rows() {
    let b = Backend::circle(1.0).unwrap();
    let t = 0.05;
    let m = EmbeddingMap::new(&b, t, Truncation::Count(200), true).unwrap();
    let jet = m.jet(&[0.9], false);
    let r1: f64 = jet.grad[0].iter().map(|v| v * v).sum();
    let r2: f64 = jet.hess[0].iter().map(|v| v * v).sum();
    assert!((r1 - 1.0).abs() < 0.01);
    assert!((2.0 * t / 3.0 * r2 - 1.0).abs() < 0.01);
    let dot: f64 = jet.grad[0].iter().zip(&jet.hess[0]).map(|(a, b)| a * b).sum();
    assert!(dot.abs() < 1e-12);
}

#[test]
fn diagonal_identity_and_cauchy_schwarz() {
    for b in [
        Backend::circle(1.0).unwrap(),
        Backend::torus(vec![1.0, 1.3]).unwrap(),
        Backend::sphere(1.0).unwrap(),
    ] {
        let basis = SpectralBasis::analytic(&b, BasisSize::Count(60), false).unwrap();
        let t = 0.05;
        let m = EmbeddingMap::from_basis(basis.clone(), t, false).unwrap();
        let x = vec![0.4; b.dim()];
        let y = vec![1.1; b.dim()];
        let phi = m.evaluate(&x);
        let h = heat_kernel(&basis, t, &x, &x);
        let sq: f64 = phi.iter().map(|v| v * v).sum();
        assert!((sq - h.value).abs() <= 1e-14 * h.value.abs().max(1.0));
        let hxy = heat_kernel(&basis, t, &x, &y).value;
        let hyy = heat_kernel(&basis, t, &y, &y).value;
        assert!(hxy.abs() <= (h.value * hyy).sqrt() * (1.0 + 1e-14));
        assert!((heat_kernel(&basis, t, &y, &x).value - hxy).abs() < 1e-15);
    }
}

#[test]
fn heat_kernel_short_time_normalization() {
    let s = Backend::sphere(1.0).unwrap();
    let t = 0.01;
    let basis = SpectralBasis::analytic(&s, BasisSize::Cutoff(40.0 / t), true).unwrap();
    let h = heat_kernel(&basis, t, &[1.0, 0.3], &[1.0, 0.3]);
    // (4πt)H(t,x,x) = 1 + S t/6 + O(t²) with S = 2.
    let v = 4.0 * PI * t * h.value;
    assert!((v - 1.0).abs() < 0.01, "{v}");
}

#[test]
fn normalization_law() {
    let b = Backend::torus(vec![2.0, 2.0]).unwrap();
    let t = 0.07;
    let raw = EmbeddingMap::new(&b, t, Truncation::Count(30), false).unwrap();
    let psi = EmbeddingMap::new(&b, t, Truncation::Count(30), true).unwrap();
    let c = 2f64.sqrt() * (4.0 * PI).powf(0.5) * t.powf(1.0);
    for (a, p) in raw.evaluate(&[0.3, 0.8]).iter().zip(psi.evaluate(&[0.3, 0.8])) {
        assert!((c * a - p).abs() < 1e-15);
    }
}

#[test]
fn antipodal_circle_points_have_equal_norms() {
    let m = EmbeddingMap::new(&Backend::circle(1.0).unwrap(), 0.1, Truncation::Count(20), true).unwrap();
    let a: f64 = m.evaluate(&[0.3]).iter().map(|v| v * v).sum();
    let b: f64 = m.evaluate(&[0.3 + PI]).iter().map(|v| v * v).sum();
    assert!((a - b).abs() < 1e-15);
}

fn random_cluster_rotation(m: &EmbeddingMap, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let q = m.q();
    let mut r = DMatrix::identity(q, q);
    let entries = m.basis().entries();
    let mut s = 0;
    while s < q {
        let mult = entries[s].multiplicity.min(q - s);
        let a = DMatrix::from_fn(mult, mult, |_, _| rng.random_range(-1.0..1.0));
        let qr = a.qr().q();
        r.view_mut((s, s), (mult, mult)).copy_from(&qr);
        s += mult;
    }
    r
}

#[test]
fn eigenspace_rotation_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for b in [Backend::torus(vec![1.0, 1.0]).unwrap(), Backend::sphere(1.0).unwrap(), s1_s2()] {
        let m = EmbeddingMap::new(&b, 0.1, Truncation::Count(40), true).unwrap();
        let r = random_cluster_rotation(&m, &mut rng);
        let x = vec![0.7; b.dim()];
        let jet = m.jet(&x, false);
        let n = b.dim();
        let rotated: Vec<nalgebra::DVector<f64>> = jet
            .grad
            .iter()
            .map(|g| &r * nalgebra::DVector::from_vec(g.clone()))
            .collect();
        let pb = m.pullback_metric(&x).pullback;
        for i in 0..n {
            for j in 0..n {
                assert!((rotated[i].dot(&rotated[j]) - pb[(i, j)]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn truncation_stability_within_tail_bound() {
    let b = Backend::torus(vec![1.0, 1.0]).unwrap();
    let t = 0.05;
    let m = EmbeddingMap::new(&b, t, Truncation::Rule { rho: 0.5 }, true).unwrap();
    let m2 = EmbeddingMap::new(&b, t, Truncation::Count(2 * m.q()), true).unwrap();
    let bound = m.tail_bound();
    for x in [[0.1, 0.2], [0.5, 0.9], [0.33, 0.71]] {
        let d = m2.pullback_metric(&x).pullback - m.pullback_metric(&x).pullback;
        assert!(d.norm() <= bound, "{} > {bound}", d.norm());
    }
}

fn sup_derivative_norm(m: &EmbeddingMap, x: &[f64], k: usize) -> f64 {
    let jet = m.jet(x, true);
    let rows = match k {
        1 => jet.grad,
        2 => jet.hess,
        _ => jet.third.unwrap(),
    };
    rows.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>()).sum::<f64>().sqrt()
}

#[test]
fn derivative_growth_exponents() {
    // |∇^kΦ_t| ~ t^{−n/4−k/2} and, with c(n,t) ~ t^{(n+2)/4}, |∇^kΨ_t| ~ t^{−(k−1)/2}.
    let b = Backend::circle(1.0).unwrap();
    let ts: Vec<f64> = (0..6).map(|i| 0.01 * 1.5f64.powi(i)).collect();
    for k in 1..=3 {
        let (mut psi, mut phi) = (Vec::new(), Vec::new());
        for &t in &ts {
            let m = EmbeddingMap::new(&b, t, Truncation::Cutoff(40.0 / t), true).unwrap();
            let r = EmbeddingMap::new(&b, t, Truncation::Cutoff(40.0 / t), false).unwrap();
            psi.push(sup_derivative_norm(&m, &[0.4], k));
            phi.push(sup_derivative_norm(&r, &[0.4], k));
        }
        let fp = loglog_fit(&ts, &psi);
        let fr = loglog_fit(&ts, &phi);
        assert!((fp.slope + (k as f64 - 1.0) / 2.0).abs() < 0.1, "k={k}: {}", fp.slope);
        assert!((fr.slope + 0.25 + k as f64 / 2.0).abs() < 0.1, "k={k}: {}", fr.slope);
    }
}

#[test]
fn s1_s2_first_order_defect() {
    let b = s1_s2();
    let x = [0.3, 1.0, 0.5];
    let ts = [0.02, 0.04, 0.06, 0.08, 0.1];
    let mut circ = Vec::new();
    for &t in &ts {
        let m = EmbeddingMap::new(&b, t, Truncation::Cutoff(36.0 / t), true).unwrap();
        circ.push(m.pullback_metric(&x).deviation[(0, 0)]);
    }
    let c = isoheat::fit::proportional_fit(&ts, &circ);
    assert!((c - 1.0 / 3.0).abs() < 0.1 / 3.0, "c = {c}");
}

#[test]
fn modified_map_gains_an_order() {
    let b = s1_s2();
    let plan = first_order_correction(&b).unwrap();
    let x = [0.3, 1.0, 0.5];
    let ts = [0.02, 0.04, 0.06, 0.08, 0.1];
    let (mut plain, mut modi) = (Vec::new(), Vec::new());
    for &t in &ts {
        let m = EmbeddingMap::new(&b, t, Truncation::Cutoff(36.0 / t), true).unwrap();
        let mm = modified_map(&plan, t, Truncation::Cutoff(36.0 / t), true).unwrap();
        plain.push(m.pullback_metric(&x).deviation_norm);
        modi.push(mm.pullback_metric(&x).deviation_norm);
    }
    let sp = loglog_fit(&ts, &plain).slope;
    let sm = loglog_fit(&ts, &modi).slope;
    assert!(sp <= 1.2 && sm >= 1.8, "{sp} {sm}");
}

#[test]
fn quadratic_fit_flat_and_sphere() {
    let ts = [0.02, 0.04, 0.06, 0.08, 0.1];
    // Flat defects are O(e^{−L²/4t}); a 2π-periodic torus makes them negligible.
    let flat = quadratic_coefficient_fit(&Backend::torus(vec![2.0 * PI, 2.0 * PI]).unwrap(), &[0.2, 0.4], &ts, 36.0)
        .unwrap();
    assert!(flat.c1.amax() < 1e-8 && flat.c2.amax() < 1e-8);
    let s = Backend::sphere(1.0).unwrap();
    let a = quadratic_coefficient_fit(&s, &[1.0, 0.3], &ts, 36.0).unwrap();
    let b = quadratic_coefficient_fit(&s, &[2.2, 4.0], &ts, 36.0).unwrap();
    assert!((a.u2 - 1.0 / 15.0).abs() < 1e-14);
    // Homogeneity: c₂ relative to g is the same at both points.
    let ca = a.c2[(0, 0)];
    let cb = b.c2[(0, 0)];
    assert!((ca - cb).abs() <= 0.01 * ca.abs(), "{ca} {cb}");
    assert!(a.c1.amax() < 1e-3);
}
