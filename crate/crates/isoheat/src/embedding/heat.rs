//! Heat-kernel values, the diagonal Minakshisundaram–Pleijel coefficient
//! `u₂(x,x)` and the fitted `t²` coefficient of the pullback deviation.

use nalgebra::{DMatrix, DVector};
use num_rational::Rational64;

use super::{eigenfunction_bounds, EmbeddingMap, Truncation};
use crate::error::{Error, Result};
use crate::fit::least_squares;
use crate::geometry::{curvature_at, Backend, PointCurvature};
use crate::spectral::{tail_weight, SpectralBasis};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatKernelValue {
    /// `Σ_j e^{−λ_j t}φ_j(x)φ_j(y)` over the basis entries (the constant mode
    /// contributes iff the basis carries it).
    pub value: f64,
    /// Bound on the omitted modes beyond the basis.
    pub tail_bound: f64,
}

pub fn heat_kernel(basis: &SpectralBasis, t: f64, x: &[f64], y: &[f64]) -> HeatKernelValue {
    let (vx, vy) = (basis.values(x), basis.values(y));
    let value = basis
        .entries()
        .iter()
        .zip(vx.iter().zip(&vy))
        .map(|(e, (a, b))| (-e.lambda * t).exp() * a * b)
        .sum();
    let (k, p) = eigenfunction_bounds(basis.backend());
    let q = basis.len() - basis.has_constant() as usize;
    let last = basis.entries().last().map(|e| e.lambda).unwrap_or(1.0).max(1e-300);
    let factor = (1.0 + 1.0 / last).powf(p);
    let tail = tail_weight(basis, t, q, p).remainder;
    HeatKernelValue {
        value,
        tail_bound: k * factor * tail,
    }
}

/// `u₂(x,x) = |R|²/180 − |Ric|²/180 + S²/72 − ΔS/30`.
pub fn u2_diagonal(c: &PointCurvature) -> f64 {
    let r2 = c.riemann.norm_sq(&c.metric_inv);
    r2 / 180.0 - c.ricci_norm_sq() / 180.0 + c.scalar * c.scalar / 72.0 - c.laplacian_scalar / 30.0
}

/// Exact `u₂` on an `n`-dimensional space form of sectional curvature `k`:
/// `|R|² = 2n(n−1)k²`, `|Ric|² = n(n−1)²k²`, `S = n(n−1)k`, `ΔS = 0`.
pub fn u2_constant_curvature(n: i64, k: Rational64) -> Rational64 {
    let k2 = k * k;
    let r2 = Rational64::from_integer(2 * n * (n - 1)) * k2;
    let ric2 = Rational64::from_integer(n * (n - 1) * (n - 1)) * k2;
    let s = Rational64::from_integer(n * (n - 1)) * k;
    r2 / 180 - ric2 / 180 + s * s / 72
}

#[derive(Debug, Clone, PartialEq)]
pub struct MPCoefficients {
    pub x: Vec<f64>,
    pub t_grid: Vec<f64>,
    /// Fitted `c₁` of `D(x,t) ≈ c₁t + c₂t²`, componentwise.
    pub c1: DMatrix<f64>,
    pub c2: DMatrix<f64>,
    /// `u₂(x,x)` from the curvature formula (reported, not asserted).
    pub u2: f64,
    pub condition: f64,
    /// Largest absolute fit residual over components and times.
    pub residual: f64,
}

/// Least-squares fit of the pullback deviation at `x` to `c₁t + c₂t²` using
/// maps truncated at `λ ≤ cutoff_factor/t`.
pub fn quadratic_coefficient_fit(
    backend: &Backend,
    x: &[f64],
    t_grid: &[f64],
    cutoff_factor: f64,
) -> Result<MPCoefficients> {
    if t_grid.len() < 5 || t_grid.iter().any(|&t| !(0.01..=0.2).contains(&t)) {
        return Err(Error::Parameter(
            "quadratic fit needs at least 5 times in [0.01, 0.2]".into(),
        ));
    }
    let n = backend.dim();
    let mut design = DMatrix::zeros(t_grid.len(), 2);
    let mut devs = Vec::new();
    for (r, &t) in t_grid.iter().enumerate() {
        design[(r, 0)] = t;
        design[(r, 1)] = t * t;
        let m = EmbeddingMap::new(backend, t, Truncation::Cutoff(cutoff_factor / t), true)?;
        devs.push(m.pullback_metric(x).deviation);
    }
    let mut c1 = DMatrix::zeros(n, n);
    let mut c2 = DMatrix::zeros(n, n);
    let mut condition: f64 = 1.0;
    let mut residual: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let y = DVector::from_iterator(t_grid.len(), devs.iter().map(|d| d[(i, j)]));
            let (sol, cond) = least_squares(&design, &y);
            condition = condition.max(cond);
            c1[(i, j)] = sol[0];
            c2[(i, j)] = sol[1];
            let fitted = &design * &sol;
            residual = residual.max((fitted - y).amax());
        }
    }
    if condition > 1e10 {
        return Err(Error::Numerical(format!(
            "quadratic coefficient fit ill-conditioned (condition number {condition:e})"
        )));
    }
    Ok(MPCoefficients {
        x: x.to_vec(),
        t_grid: t_grid.to_vec(),
        c1,
        c2,
        u2: u2_diagonal(&curvature_at(backend, x)),
        condition,
        residual,
    })
}
