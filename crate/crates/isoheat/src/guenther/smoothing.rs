//! `(Δ₍r₎ − Λ₀)^{-1}` on flat periodic backends, Fourier-diagonal up to a
//! constant curvature endomorphism.

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fourier::PeriodicGrid;
use crate::geometry::{Backend, CurvatureSource, Field, SymTensorField, SyntheticCurvature, TangentField};

/// Smallest admissible distance between `Λ₀` and the spectrum.
pub const SPECTRAL_GAP: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SmoothingOperator {
    order: u8,
    lambda0: f64,
    grid: PeriodicGrid,
    curvature: SyntheticCurvature,
    /// Curvature endomorphism on field components (zero when flat).
    endo: DMatrix<f64>,
    sigma: f64,
}

impl SmoothingOperator {
    pub fn new(backend: &Backend, order: u8, lambda0: f64, curvature: CurvatureSource<'_>) -> Result<Self> {
        if !(order == 1 || order == 2) {
            return Err(Error::Parameter(format!("smoothing order must be 1 or 2, got {order}")));
        }
        if !backend.is_flat() {
            return Err(Error::Unsupported(format!(
                "smoothing operators need a flat periodic backend, got {}",
                backend.label()
            )));
        }
        let grid = backend.periodic_grid().ok_or_else(|| {
            Error::Unsupported(format!("no periodic grid on {}", backend.label()))
        })?;
        let n = backend.dim();
        let curvature = match curvature {
            CurvatureSource::Backend => SyntheticCurvature::flat(n),
            CurvatureSource::Synthetic(s) => {
                if s.n() != n {
                    return Err(Error::Parameter(format!(
                        "synthetic curvature has dimension {}, backend {n}",
                        s.n()
                    )));
                }
                s.clone()
            }
        };
        let endo = if order == 1 {
            curvature.order1_matrix()
        } else {
            curvature.order2_matrix()
        };
        // Spectrum of Δ₍r₎: |ω|² + μ over grid frequencies and curvature eigenvalues μ.
        let mus: Vec<Complex64> = endo
            .clone()
            .complex_eigenvalues()
            .iter()
            .map(|c| Complex64::new(c.re, c.im))
            .collect();
        let mut min_gap = f64::INFINITY;
        for p in 0..grid.len() {
            let w2 = grid.omega_sq(&grid.unravel(p));
            for mu in &mus {
                min_gap = min_gap.min((Complex64::new(w2 - lambda0, 0.0) + mu).norm());
            }
        }
        if min_gap < SPECTRAL_GAP {
            return Err(Error::Config(format!(
                "Λ₀ = {lambda0} lies within {min_gap:e} of the spectrum of Δ₍{order}₎"
            )));
        }
        Ok(SmoothingOperator {
            order,
            lambda0,
            grid,
            curvature,
            endo,
            sigma: 1.0 / min_gap,
        })
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn curvature(&self) -> &SyntheticCurvature {
        &self.curvature
    }

    /// Measured operator norm `σ = sup 1/|λ − Λ₀|` over the resolved
    /// spectrum, i.e. the L² norm of the inverse.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    fn components<'a>(&self, field: &'a Field) -> Result<&'a [Vec<f64>]> {
        let (n, comps) = match (self.order, field) {
            (1, Field::Tangent(t)) => (t.n, &t.comps),
            (2, Field::Sym(h)) => (h.n, &h.comps),
            _ => {
                return Err(Error::Parameter(format!(
                    "order {} smoothing applied to the wrong field kind",
                    self.order
                )))
            }
        };
        if n != self.grid.dim() || comps.iter().any(|c| c.len() != self.grid.len()) {
            return Err(Error::Parameter("field does not match the smoothing grid".into()));
        }
        Ok(comps)
    }

    fn wrap(&self, comps: Vec<Vec<f64>>) -> Field {
        let n = self.grid.dim();
        if self.order == 1 {
            Field::Tangent(TangentField { n, comps })
        } else {
            Field::Sym(SymTensorField { n, comps })
        }
    }

    /// `(Δ₍r₎ − Λ₀)^{-1}` applied modewise.
    pub fn solve(&self, field: &Field) -> Result<Field> {
        let comps = self.components(field)?;
        if self.curvature.is_flat() {
            let out = comps.iter().map(|c| self.grid.solve_shifted(c, self.lambda0)).collect();
            return Ok(self.wrap(out));
        }
        let m = comps.len();
        let specs: Vec<Vec<Complex64>> = comps.iter().map(|c| self.grid.forward(c)).collect();
        let mut out = vec![vec![Complex64::new(0.0, 0.0); self.grid.len()]; m];
        for p in 0..self.grid.len() {
            let w2 = self.grid.omega_sq(&self.grid.unravel(p));
            let a = &self.endo + DMatrix::identity(m, m) * (w2 - self.lambda0);
            let lu = a.lu();
            let re = DVector::from_fn(m, |c, _| specs[c][p].re);
            let im = DVector::from_fn(m, |c, _| specs[c][p].im);
            let (Some(xr), Some(xi)) = (lu.solve(&re), lu.solve(&im)) else {
                return Err(Error::Numerical(format!("singular mode system at bin {p}")));
            };
            for c in 0..m {
                out[c][p] = Complex64::new(xr[c], xi[c]);
            }
        }
        Ok(self.wrap(out.into_iter().map(|s| self.grid.inverse_real(s)).collect()))
    }

    /// `(Δ₍r₎ − Λ₀)` applied to a field.
    pub fn apply(&self, field: &Field) -> Result<Field> {
        let comps = self.components(field)?;
        let m = comps.len();
        let mut out: Vec<Vec<f64>> = comps
            .iter()
            .map(|c| {
                self.grid
                    .laplacian(c)
                    .iter()
                    .zip(c)
                    .map(|(l, v)| l - self.lambda0 * v)
                    .collect()
            })
            .collect();
        for r in 0..m {
            for c in 0..m {
                let w = self.endo[(r, c)];
                if w != 0.0 {
                    for (o, v) in out[r].iter_mut().zip(&comps[c]) {
                        *o += w * v;
                    }
                }
            }
        }
        Ok(self.wrap(out))
    }
}

/// The pair of smoothing operators used by the iteration.
#[derive(Debug, Clone)]
pub struct Smoothers {
    pub first: SmoothingOperator,
    pub second: SmoothingOperator,
}

impl Smoothers {
    pub fn new(backend: &Backend, lambda0: f64, curvature: CurvatureSource<'_>) -> Result<Self> {
        Ok(Smoothers {
            first: SmoothingOperator::new(backend, 1, lambda0, curvature)?,
            second: SmoothingOperator::new(backend, 2, lambda0, curvature)?,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.first.sigma().max(self.second.sigma())
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.first.grid()
    }

    pub fn curvature(&self) -> &SyntheticCurvature {
        self.first.curvature()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn torus() -> Backend {
        Backend::torus(vec![2.0 * PI, 2.0 * PI]).unwrap().with_uniform_resolution(16).unwrap()
    }

    #[test]
    fn eigen_and_constant_cases() {
        let b = Backend::circle(1.0).unwrap();
        let s = SmoothingOperator::new(&b, 1, -1.0, CurvatureSource::Backend).unwrap();
        let grid = s.grid().clone();
        let c: Vec<f64> = (0..grid.len()).map(|p| grid.point(p)[0].sin()).collect();
        let Field::Tangent(out) = s.solve(&Field::Tangent(TangentField { n: 1, comps: vec![c.clone()] })).unwrap() else {
            unreachable!()
        };
        for (o, v) in out.comps[0].iter().zip(&c) {
            assert!((o - v / 2.0).abs() < 1e-14);
        }
        let k = vec![vec![0.7; grid.len()]];
        let Field::Tangent(out) = s.solve(&Field::Tangent(TangentField { n: 1, comps: k.clone() })).unwrap() else {
            unreachable!()
        };
        assert!(out.comps[0].iter().all(|v| (v - 0.7).abs() < 1e-14));
        assert_eq!(s.sigma(), 1.0);
    }

    #[test]
    fn lambda0_on_spectrum_rejected() {
        let b = Backend::circle(1.0).unwrap();
        assert!(matches!(
            SmoothingOperator::new(&b, 1, 4.0, CurvatureSource::Backend),
            Err(Error::Config(_))
        ));
        assert!(SmoothingOperator::new(&Backend::sphere(1.0).unwrap(), 1, -1.0, CurvatureSource::Backend).is_err());
    }

    #[test]
    fn synthetic_round_trip() {
        let b = torus();
        let sc = SyntheticCurvature::space_form(2, 1.0);
        let s = SmoothingOperator::new(&b, 2, -1.0, CurvatureSource::Synthetic(&sc)).unwrap();
        let grid = s.grid().clone();
        let comps: Vec<Vec<f64>> = (0..3)
            .map(|c| {
                (0..grid.len())
                    .map(|p| {
                        let x = grid.point(p);
                        (c as f64 + 1.0) * (x[0] + 2.0 * x[1]).cos() + 0.3 * x[1].sin()
                    })
                    .collect()
            })
            .collect();
        let f = Field::Sym(SymTensorField { n: 2, comps: comps.clone() });
        let Field::Sym(back) = s.apply(&s.solve(&f).unwrap()).unwrap() else { unreachable!() };
        for (a, b) in back.comps.iter().flatten().zip(comps.iter().flatten()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
