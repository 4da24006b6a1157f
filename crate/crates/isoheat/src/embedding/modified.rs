//! First-order metric modification `g(t) = g + t·h₁`, `h₁ = −A₁(g)`.
//!
//! On the supported backends `h₁` restricts to each atomic factor as a
//! constant multiple `c_f·g_f`, so `g(t)` is again a model backend with every
//! factor rescaled by `1 + t·c_f` and its eigenbasis stays analytic.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;

use super::{EmbeddingMap, Truncation};
use crate::error::{Error, Result};
use crate::geometry::{curvature_at, Backend, BackendKind};

#[derive(Debug, Clone, PartialEq)]
pub struct ModifiedMetricPlan {
    pub base: Backend,
    /// `h₁ = c_f·g_f` on atomic factor `f`.
    pub factor_coefficients: Vec<f64>,
    /// `h₁` at a reference chart point.
    pub h1: DMatrix<f64>,
}

fn reference_point(backend: &Backend) -> Vec<f64> {
    let mut x = Vec::new();
    for f in backend.factors() {
        match f.kind() {
            BackendKind::RoundSphere2 { .. } => x.extend([FRAC_PI_2, 0.0]),
            _ => x.extend(std::iter::repeat_n(0.0, f.dim())),
        }
    }
    x
}

fn rescale(f: &Backend, s: f64) -> Result<(Backend, Vec<f64>)> {
    let root = s.sqrt();
    let res = f.resolution();
    let (b, chart) = match f.kind() {
        BackendKind::RoundCircle { radius } => (Backend::circle(radius * root)?, vec![1.0]),
        BackendKind::ConformalCircle { weight } => {
            (Backend::conformal_circle(weight.scaled(root))?, vec![1.0])
        }
        BackendKind::FlatTorus { sides } => (
            Backend::torus(sides.iter().map(|l| l * root).collect())?,
            vec![root; sides.len()],
        ),
        BackendKind::RoundSphere2 { radius } => (Backend::sphere(radius * root)?, vec![1.0, 1.0]),
        BackendKind::Product(_) => unreachable!("factors are atomic"),
    };
    Ok((b.with_resolution(&res)?, chart))
}

impl ModifiedMetricPlan {
    /// `h₁ ≡ 0` (flat backends and every surface).
    pub fn is_trivial(&self) -> bool {
        self.factor_coefficients.iter().all(|&c| c.abs() < 1e-14)
    }

    /// Supremum of the times for which `g(t)` is positive definite.
    pub fn threshold(&self) -> f64 {
        self.factor_coefficients
            .iter()
            .filter(|&&c| c < 0.0)
            .map(|&c| -1.0 / c)
            .fold(f64::INFINITY, f64::min)
    }

    /// The model backend carrying `g(t)` and the chart rescaling from `g` to it.
    pub fn metric_at(&self, t: f64) -> Result<(Backend, Vec<f64>)> {
        if t >= self.threshold() {
            return Err(Error::Parameter(format!(
                "g(t) = g + t·h₁ is not positive definite at t = {t} (threshold {})",
                self.threshold()
            )));
        }
        let mut factors = Vec::new();
        let mut chart = Vec::new();
        for (f, c) in self.base.factors().into_iter().zip(&self.factor_coefficients) {
            let (b, s) = rescale(f, 1.0 + t * c)?;
            factors.push(b);
            chart.extend(s);
        }
        let b = if factors.len() == 1 {
            factors.pop().unwrap()
        } else {
            Backend::product(factors)?
        };
        Ok((b, chart))
    }
}

/// `h₁ = (1/3)(Ric − ½S·g)`, split into per-factor multiples of the metric.
pub fn first_order_correction(backend: &Backend) -> Result<ModifiedMetricPlan> {
    let x = reference_point(backend);
    let curv = curvature_at(backend, &x);
    let h1 = -curv.a1();
    let g = &curv.metric;
    let n = backend.dim();
    let mut coeffs = Vec::new();
    let mut offset = 0;
    for f in backend.factors() {
        let d = f.dim();
        let c = h1[(offset, offset)] / g[(offset, offset)];
        for i in offset..offset + d {
            for j in 0..n {
                let inside = j >= offset && j < offset + d;
                let expect = if inside { c * g[(i, j)] } else { 0.0 };
                if (h1[(i, j)] - expect).abs() > 1e-12 * (1.0 + c.abs()) {
                    return Err(Error::Unsupported(format!(
                        "h₁ is not a factorwise multiple of the metric on {}",
                        backend.label()
                    )));
                }
            }
        }
        coeffs.push(c);
        offset += d;
    }
    Ok(ModifiedMetricPlan {
        base: backend.clone(),
        factor_coefficients: coeffs,
        h1,
    })
}

/// `Ψ̃_t := Ψ_{t, g(t)}`, read on the original chart of `(M, g)`.
pub fn modified_map(
    plan: &ModifiedMetricPlan,
    t: f64,
    trunc: Truncation,
    normalized: bool,
) -> Result<EmbeddingMap> {
    let (spectral, chart) = plan.metric_at(t)?;
    EmbeddingMap::with_basis_backend(&plan.base, &spectral, chart, t, trunc, normalized)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn s1_s2_plan() {
        let b = Backend::product(vec![Backend::circle(1.0).unwrap(), Backend::sphere(1.0).unwrap()])
            .unwrap();
        let plan = first_order_correction(&b).unwrap();
        assert!((plan.factor_coefficients[0] + 1.0 / 3.0).abs() < 1e-14);
        assert!(plan.factor_coefficients[1].abs() < 1e-14);
        assert!((plan.threshold() - 3.0).abs() < 1e-12);
        let m = modified_map(&plan, 0.06, Truncation::Count(4), true).unwrap();
        // Circle eigenvalues k²/(1 − t/3).
        assert!((m.eigenvalues()[0] - 1.0 / (1.0 - 0.02)).abs() < 1e-12);
    }

    #[test]
    fn flat_and_surfaces_trivial() {
        for b in [
            Backend::torus(vec![1.0, 2.0]).unwrap(),
            Backend::sphere(1.0).unwrap(),
            Backend::circle(2.0).unwrap(),
        ] {
            let plan = first_order_correction(&b).unwrap();
            assert!(plan.is_trivial(), "{}", b.label());
            let a = modified_map(&plan, 0.1, Truncation::Count(6), true).unwrap();
            let u = super::super::EmbeddingMap::new(&b, 0.1, Truncation::Count(6), true).unwrap();
            let x = vec![0.3; b.dim()];
            assert_eq!(a.evaluate(&x), u.evaluate(&x));
        }
    }

    #[test]
    fn torus_times_sphere_rescales_chart() {
        let b = Backend::product(vec![Backend::torus(vec![1.0]).unwrap(), Backend::sphere(1.0).unwrap()])
            .unwrap();
        let plan = first_order_correction(&b).unwrap();
        let (_, chart) = plan.metric_at(0.3).unwrap();
        assert!((chart[0] - (1.0f64 - 0.1).sqrt()).abs() < 1e-14);
    }
}
