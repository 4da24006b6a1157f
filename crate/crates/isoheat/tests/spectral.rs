use isoheat::geometry::{Backend, FourierWeight};
use isoheat::spectral::{
    analytic_basis, galerkin_circle_basis, weyl_constants, BasisSize, GalerkinCircleConfig,
    SpectralBasis,
};
use std::f64::consts::PI;

fn backends() -> Vec<Backend> {
    vec![
        Backend::circle(1.0).unwrap(),
        Backend::circle(0.7).unwrap(),
        Backend::torus(vec![2.0 * PI, 2.0 * PI]).unwrap(),
        Backend::torus(vec![1.0, 1.5]).unwrap(),
        Backend::sphere(1.0).unwrap(),
        Backend::sphere(1.3).unwrap(),
        Backend::product(vec![Backend::circle(1.0).unwrap(), Backend::sphere(1.0).unwrap()]).unwrap(),
    ]
}

#[test]
fn gram_of_first_fifty_is_identity() {
    for b in backends() {
        let basis = analytic_basis(&b, 50).unwrap();
        let g = basis.gram(50);
        for i in 0..50 {
            for j in 0..50 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - e).abs() < 5e-8, "{} ({i},{j}) = {}", b.label(), g[(i, j)]);
            }
        }
    }
}

#[test]
fn analytic_eigen_residuals() {
    for b in backends() {
        let basis = analytic_basis(&b, 40).unwrap();
        let res = basis.laplacian_residuals();
        let worst = res.iter().cloned().fold(0.0, f64::max);
        assert!(worst <= 1e-8, "{}: {worst:e}", b.label());
        let lam = basis.eigenvalues();
        assert!(lam.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn torus_weyl_sandwich() {
    let b = Backend::torus(vec![1.0, 1.0]).unwrap();
    let basis = SpectralBasis::analytic(&b, BasisSize::Count(400), false).unwrap();
    let (a, bb) = weyl_constants(&basis);
    // Weyl: λ_j ~ 4π j / Vol in two dimensions.
    assert!(a > 0.5 * 4.0 * PI && bb < 2.0 * 4.0 * PI, "A = {a}, B = {bb}");
    for (i, e) in basis.entries().iter().enumerate().skip(9) {
        let r = e.lambda / (i + 1) as f64;
        assert!(r >= a * (1.0 - 1e-12) && r <= bb * (1.0 + 1e-12));
    }
}

#[test]
fn galerkin_conformal_circle_matches_length() {
    let w = FourierWeight::new(1.0, vec![0.3], vec![]);
    let cfg = GalerkinCircleConfig::new(w.clone(), 20);
    let basis = galerkin_circle_basis(&cfg).unwrap();
    let len = w.length();
    assert!((len - 2.0 * PI).abs() < 1e-12);
    for (j, lam) in basis.eigenvalues().iter().take(10).enumerate() {
        let k = (j / 2 + 1) as f64;
        let exact = (2.0 * PI * k / len).powi(2);
        assert!((lam - exact).abs() <= 1e-6 * exact, "j={j}: {lam} vs {exact}");
    }
    let res = basis.laplacian_residuals();
    let worst = res.iter().take(10).cloned().fold(0.0, f64::max);
    assert!(worst <= 1e-6, "{worst:e}");
    let g = basis.gram(20);
    for i in 0..20 {
        for j in 0..20 {
            let e = if i == j { 1.0 } else { 0.0 };
            assert!((g[(i, j)] - e).abs() < 5e-8);
        }
    }
}

#[test]
fn galerkin_asymmetric_weight() {
    let w = FourierWeight::new(1.2, vec![0.2, 0.05], vec![0.1]);
    let cfg = GalerkinCircleConfig::new(w.clone(), 12);
    let basis = galerkin_circle_basis(&cfg).unwrap();
    let len = w.length();
    for (j, lam) in basis.eigenvalues().iter().take(6).enumerate() {
        let k = (j / 2 + 1) as f64;
        let exact = (2.0 * PI * k / len).powi(2);
        assert!((lam - exact).abs() <= 1e-6 * exact);
    }
}

#[test]
fn cutoff_basis_contains_full_eigenspaces() {
    let s = Backend::sphere(1.0).unwrap();
    let b = SpectralBasis::analytic(&s, BasisSize::Cutoff(12.0), false).unwrap();
    // l = 1, 2, 3 bands: 3 + 5 + 7.
    assert_eq!(b.len(), 15);
    let p = Backend::product(vec![Backend::circle(1.0).unwrap(), Backend::sphere(1.0).unwrap()]).unwrap();
    let b = SpectralBasis::analytic(&p, BasisSize::Cutoff(2.5), false).unwrap();
    // λ = 1 (2), 2 (3), 3 → beyond; total 5.
    assert_eq!(b.eigenvalues(), vec![1.0, 1.0, 2.0, 2.0, 2.0]);
}
