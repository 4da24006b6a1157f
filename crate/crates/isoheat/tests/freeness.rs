use isoheat::embedding::{EmbeddingMap, Truncation};
use isoheat::freeness::{
    block_perturbation_inverse, gram_and_angles, jet_matrix_at, operator_norm_scan, right_inverse, xi_matrix,
    JetMatrix, ScanPath,
};
use isoheat::geometry::{Backend, FourierWeight};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn backends() -> Vec<Backend> {
    vec![
        Backend::circle(1.0).unwrap(),
        Backend::torus(vec![1.0, 1.0]).unwrap().with_uniform_resolution(24).unwrap(),
        Backend::sphere(1.0).unwrap().with_resolution(&[12, 24]).unwrap(),
    ]
}

#[test]
fn right_inverse_identities() {
    for b in backends() {
        let m = EmbeddingMap::new(&b, 0.05, Truncation::Rule { rho: 1.0 }, true).unwrap();
        let x = vec![0.9; b.dim()];
        let p = jet_matrix_at(&m, &x);
        let e = right_inverse(&p).unwrap();
        let size = JetMatrix::row_count(b.dim());
        assert!((&p.rows * &e.e - DMatrix::identity(size, size)).amax() < 1e-10);
        // Columns of E lie in the row space of P.
        let proj = p.rows.transpose() * (&p.rows * p.rows.transpose()).try_inverse().unwrap() * &p.rows;
        let resid = (DMatrix::identity(m.q(), m.q()) - proj) * &e.e;
        assert!(resid.amax() <= 1e-10 * e.e.amax().max(1.0));
    }
}

#[test]
fn heat_kernel_embedding_is_free_on_every_grid_point() {
    for b in backends() {
        for t in [0.1, 0.05] {
            let m = EmbeddingMap::new(&b, t, Truncation::Rule { rho: 1.0 }, true).unwrap();
            for x in b.grid().points {
                let rep = gram_and_angles(&jet_matrix_at(&m, &x));
                assert!(rep.free, "{} t={t} x={x:?} cond={}", b.label(), rep.condition);
            }
        }
    }
}

#[test]
fn torus_angle_pattern() {
    let b = Backend::torus(vec![1.0, 1.0]).unwrap();
    let t = 0.02;
    let m = EmbeddingMap::new(&b, t, Truncation::Cutoff(36.0 / t), true).unwrap();
    let rep = gram_and_angles(&jet_matrix_at(&m, &[0.3, 0.7]));
    let c = rep.cosines.iter().find(|c| c.row == 2 && c.col == 4).unwrap();
    assert!((c.cosine - 1.0 / 3.0).abs() < 0.05, "{}", c.cosine);
    assert!(rep.gradient_gap < 2.0 * t, "{}", rep.gradient_gap);
    assert!(rep.mixed_gap < 1e-8);
}

#[test]
fn sphere_angle_gaps_shrink_linearly() {
    // Halving sequence: gap(t) ≤ K t with K fitted on the coarsest step.
    let b = Backend::sphere(1.0).unwrap();
    let x = [1.1, 0.4];
    let ts = [0.08, 0.04, 0.02];
    let gaps: Vec<f64> = ts
        .iter()
        .map(|&t| {
            let m = EmbeddingMap::new(&b, t, Truncation::Cutoff(36.0 / t), true).unwrap();
            let r = gram_and_angles(&jet_matrix_at(&m, &x));
            r.hessian_gap.max(r.gradient_gap)
        })
        .collect();
    let k = gaps[0] / ts[0];
    for (g, t) in gaps.iter().zip(ts) {
        assert!(*g <= 1.05 * k * t, "{gaps:?}");
    }
}

#[test]
fn block_inverse_random_spd() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let spd = |m: usize, rng: &mut ChaCha8Rng| {
            let a = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
            &a * a.transpose() + DMatrix::identity(m, m)
        };
        let a1 = spd(2, &mut rng);
        let a2 = spd(3, &mut rng);
        let mut b = DMatrix::from_fn(3, 2, |_, _| rng.random_range(-1.0..1.0));
        b *= 1e-3 / b.clone().svd(false, false).singular_values.max();
        let r = block_perturbation_inverse(&a1, &a2, &b).unwrap();
        let mut full = DMatrix::zeros(5, 5);
        full.view_mut((0, 0), (2, 2)).copy_from(&a1);
        full.view_mut((2, 2), (3, 3)).copy_from(&a2);
        full.view_mut((2, 0), (3, 2)).copy_from(&b);
        full.view_mut((0, 2), (2, 3)).copy_from(&b.transpose());
        let dense = full.try_inverse().unwrap();
        assert!((r.inverse - dense).amax() < 1e-10);
        assert!(r.c_norm <= r.c_bound * (1.0 + 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]
    #[test]
    fn xi_inverse_matches_dense(n in 1usize..8, s in 0.0f64..1.0) {
        let lower = if n > 1 { -1.0 / (n as f64 - 1.0) } else { -0.99 };
        let sigma = lower + (0.99 - lower) * s;
        prop_assume!(sigma > lower + 1e-3);
        let (xi, inv) = xi_matrix(n, sigma).unwrap();
        let dense = xi.clone().try_inverse().unwrap();
        prop_assert!((inv - dense).amax() <= 1e-12 * (1.0 / (1.0 - sigma)).max(1.0 / (1.0 + (n as f64 - 1.0) * sigma)));
    }
}

#[test]
fn operator_norm_scan_circle() {
    let b = Backend::circle(1.0).unwrap();
    let ts: Vec<f64> = (0..6).map(|i| 0.02 * 10f64.powf(i as f64 / 5.0)).collect();
    let s2 = operator_norm_scan(&b, &ts, 2, 0.3).unwrap();
    assert_eq!(s2.path, ScanPath::Equivariant);
    assert!((s2.fit.slope + 1.15).abs() < 0.1, "{}", s2.fit.slope);
    let s3 = operator_norm_scan(&b, &ts, 3, 0.3).unwrap();
    assert!(s3.fit.slope <= s2.fit.slope);
    // ‖E‖_{C⁰} stays bounded as t → 0.
    let c0: Vec<f64> = s2.rows.iter().map(|r| r.c0_norm).collect();
    let (lo, hi) = c0.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    assert!(hi / lo < 1.5, "{c0:?}");
}

#[test]
fn operator_norm_scan_grid_path() {
    let w = FourierWeight::new(1.0, vec![0.2], vec![]);
    let b = Backend::conformal_circle(w).unwrap().with_uniform_resolution(128).unwrap();
    let s = operator_norm_scan(&b, &[0.1, 0.07, 0.05], 2, 0.3).unwrap();
    assert_eq!(s.path, ScanPath::Grid);
    assert!(s.fit.slope < -0.7 && s.fit.slope > -1.6, "{}", s.fit.slope);
}
