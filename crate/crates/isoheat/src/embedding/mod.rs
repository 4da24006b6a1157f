//! The truncated heat-kernel map `Ψ_t(x) = c(n,t)(e^{−λ_j t/2}φ_j(x))_{j≤q}`,
//! its jets and its pullback metric.

mod heat;
mod modified;

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

pub use heat::{
    heat_kernel, quadratic_coefficient_fit, u2_constant_curvature, u2_diagonal, HeatKernelValue,
    MPCoefficients,
};
pub use modified::{first_order_correction, modified_map, ModifiedMetricPlan};

use crate::error::{Error, Result};
use crate::geometry::{curvature_at, sym_index, two_tensor_norm_sq, Backend, BackendKind};
use crate::spectral::{
    tail_weight, truncation_dim, BasisSize, MultiIndexTable, SpectralBasis,
};

/// How the number of embedding coordinates is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    /// `q = ⌈t^{−(n/2+ρ)}⌉`, completed to a full eigenspace.
    Rule { rho: f64 },
    /// Exactly `q` coordinates (completed to a full eigenspace).
    Count(usize),
    /// All modes with `λ ≤ cutoff`.
    Cutoff(f64),
}

/// `c(n,t) = √2(4π)^{n/4}t^{(n+2)/4}`.
pub fn normalization(n: usize, t: f64) -> f64 {
    let nf = n as f64;
    2f64.sqrt() * (4.0 * std::f64::consts::PI).powf(nf / 4.0) * t.powf((nf + 2.0) / 4.0)
}

/// Constants `(K, p)` with `sup|φ_j|² ≤ K(1+λ_j)^p` and
/// `sup|∇φ_j|²_g ≤ λ_j K(1+λ_j)^p` for every eigenfunction of the backend.
pub fn eigenfunction_bounds(backend: &Backend) -> (f64, f64) {
    let mut k = 1.0;
    let mut p = 0.0;
    for f in backend.factors() {
        match f.kind() {
            BackendKind::RoundCircle { radius } => k *= 1.0 / (std::f64::consts::PI * radius),
            BackendKind::ConformalCircle { weight } => k *= 2.0 / weight.length(),
            BackendKind::FlatTorus { .. } => k *= 2.0 / f.volume(),
            BackendKind::RoundSphere2 { radius } => {
                // Addition theorem: Σ_m Y_lm² = (2l+1)/(4πr²) and
                // (2l+1)² = 4λr² + 1 ≤ 4max(r², 1/4)(1+λ).
                k *= 2.0 * radius.max(0.5) / (4.0 * std::f64::consts::PI * radius * radius);
                p += 0.5;
            }
            BackendKind::Product(_) => unreachable!("factors are atomic"),
        }
    }
    (k, p)
}

/// Value and covariant derivatives of a map into `ℝ^q` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct JetSample {
    pub x: Vec<f64>,
    pub value: Vec<f64>,
    /// `grad[i][j] = ∇_i u^j`.
    pub grad: Vec<Vec<f64>>,
    /// `hess[sym_index(n,i,j)][·] = ∇_i∇_j u = ∂_i∂_j u − Γ^k_ij ∂_k u`.
    pub hess: Vec<Vec<f64>>,
    /// Chart third partials, indexed by sorted triples `(i ≤ j ≤ k)` in
    /// lexicographic order, when requested.
    pub third: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PullbackSample {
    pub x: Vec<f64>,
    /// `(Ψ*g_can)_ij = ⟨∇_iΨ, ∇_jΨ⟩`.
    pub pullback: DMatrix<f64>,
    /// `D = Ψ*g_can − g`.
    pub deviation: DMatrix<f64>,
    /// First-order predictor `t·A₁`.
    pub predictor: DMatrix<f64>,
    /// `|D|_g`.
    pub deviation_norm: f64,
    /// `|D − t·A₁|_g`.
    pub predictor_gap: f64,
}

/// Grid summary of the pullback deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct PullbackSummary {
    pub samples: Vec<PullbackSample>,
    pub sup_deviation: f64,
    pub sup_predictor_gap: f64,
    /// Bound on the contribution of the discarded modes `j > q` to `|Ψ*g_can|_g`.
    pub tail_bound: f64,
}

/// A truncated (optionally normalized and rescaled) heat-kernel map.
#[derive(Debug, Clone)]
pub struct EmbeddingMap {
    /// Domain manifold `(M, g)`: jets and pullbacks are taken with respect to it.
    base: Backend,
    /// Eigenbasis defining the coordinates (of `g` or of a modified metric).
    basis: Arc<SpectralBasis>,
    /// Basis chart coordinate `y_i = chart_scale_i · x_i`.
    chart_scale: Vec<f64>,
    t: f64,
    normalized: bool,
    scale: f64,
    coeffs: Vec<f64>,
    warnings: Vec<String>,
}

fn build_basis(backend: &Backend, t: f64, trunc: Truncation) -> Result<(SpectralBasis, Vec<String>)> {
    let mut warnings = Vec::new();
    let basis = match trunc {
        Truncation::Rule { rho } => {
            let d = truncation_dim(t, backend.dim(), rho)?;
            warnings.extend(d.warnings.iter().cloned());
            SpectralBasis::analytic(backend, BasisSize::Clusters(d.raw), false)?
        }
        Truncation::Count(q) => {
            if q == 0 {
                return Err(Error::Parameter("embedding needs q ≥ 1".into()));
            }
            SpectralBasis::analytic(backend, BasisSize::Clusters(q), false)?
        }
        Truncation::Cutoff(c) => SpectralBasis::analytic(backend, BasisSize::Cutoff(c), false)?,
    };
    if basis.is_empty() {
        return Err(Error::Parameter("truncation keeps no eigenmodes".into()));
    }
    warnings.extend(basis.warnings().iter().cloned());
    Ok((basis, warnings))
}

impl EmbeddingMap {
    pub fn new(backend: &Backend, t: f64, trunc: Truncation, normalized: bool) -> Result<Self> {
        Self::with_basis_backend(backend, backend, vec![1.0; backend.dim()], t, trunc, normalized)
    }

    /// Map whose coordinates are eigenfunctions of `spectral` (a rescaled copy
    /// of `base`), read through `y = chart_scale · x`.
    pub(crate) fn with_basis_backend(
        base: &Backend,
        spectral: &Backend,
        chart_scale: Vec<f64>,
        t: f64,
        trunc: Truncation,
        normalized: bool,
    ) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::Parameter(format!("diffusion time must be positive, got {t}")));
        }
        let (basis, warnings) = build_basis(spectral, t, trunc)?;
        Ok(Self::from_parts(base.clone(), Arc::new(basis), chart_scale, t, normalized, 1.0, warnings))
    }

    /// Map on an explicit basis (all of its non-constant entries are used).
    pub fn from_basis(basis: SpectralBasis, t: f64, normalized: bool) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::Parameter(format!("diffusion time must be positive, got {t}")));
        }
        let basis = if basis.has_constant() {
            basis.truncated(basis.len() - 1)?
        } else {
            basis
        };
        let base = basis.backend().clone();
        let n = base.dim();
        Ok(Self::from_parts(base, Arc::new(basis), vec![1.0; n], t, normalized, 1.0, Vec::new()))
    }

    fn from_parts(
        base: Backend,
        basis: Arc<SpectralBasis>,
        chart_scale: Vec<f64>,
        t: f64,
        normalized: bool,
        scale: f64,
        warnings: Vec<String>,
    ) -> Self {
        let c = if normalized { normalization(base.dim(), t) } else { 1.0 };
        let coeffs = basis
            .entries()
            .iter()
            .map(|e| scale * c * (-0.5 * e.lambda * t).exp())
            .collect();
        EmbeddingMap {
            base,
            basis,
            chart_scale,
            t,
            normalized,
            scale,
            coeffs,
            warnings,
        }
    }

    /// The map `s·u`.
    pub fn scaled(&self, s: f64) -> Self {
        Self::from_parts(
            self.base.clone(),
            self.basis.clone(),
            self.chart_scale.clone(),
            self.t,
            self.normalized,
            self.scale * s,
            self.warnings.clone(),
        )
    }

    pub fn backend(&self) -> &Backend {
        &self.base
    }

    pub fn basis(&self) -> &SpectralBasis {
        &self.basis
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn q(&self) -> usize {
        self.coeffs.len()
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Per-coordinate factors `scale·c(n,t)·e^{−λ_j t/2}`.
    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.basis.eigenvalues()
    }

    fn basis_point(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.chart_scale).map(|(a, s)| a * s).collect()
    }

    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        let v = self.basis.values(&self.basis_point(x));
        v.iter().zip(&self.coeffs).map(|(a, c)| a * c).collect()
    }

    /// Chart partial derivatives of all coordinates up to `order ≤ 3`.
    pub fn chart_jets(&self, x: &[f64], table: Arc<MultiIndexTable>) -> Vec<Vec<f64>> {
        let jets = self.basis.jets_with(&self.basis_point(x), table.clone());
        table
            .tuples()
            .iter()
            .enumerate()
            .map(|(id, tup)| {
                let s: f64 = tup.iter().map(|&i| self.chart_scale[i]).product();
                jets.row_by_id(id)
                    .iter()
                    .zip(&self.coeffs)
                    .map(|(v, c)| v * c * s)
                    .collect()
            })
            .collect()
    }

    /// Value, covariant gradient and Hessian (and optionally chart third
    /// partials) at `x`.
    pub fn jet(&self, x: &[f64], third: bool) -> JetSample {
        let n = self.dim();
        let order = if third { 3 } else { 2 };
        let table = Arc::new(MultiIndexTable::new(n, order));
        self.jet_with(x, &table)
    }

    pub fn jet_with(&self, x: &[f64], table: &Arc<MultiIndexTable>) -> JetSample {
        let n = self.dim();
        let rows = self.chart_jets(x, table.clone());
        let value = rows[0].clone();
        let grad: Vec<Vec<f64>> = (0..n).map(|i| rows[table.id(&[i])].clone()).collect();
        let gam = self.base.christoffel(x);
        let mut hess = vec![Vec::new(); n * (n + 1) / 2];
        for i in 0..n {
            for j in i..n {
                let mut h = rows[table.id(&[i, j])].clone();
                for (k, gk) in grad.iter().enumerate() {
                    let c = gam[(k * n + i) * n + j];
                    if c != 0.0 {
                        for (hv, gv) in h.iter_mut().zip(gk) {
                            *hv -= c * gv;
                        }
                    }
                }
                hess[sym_index(n, i, j)] = h;
            }
        }
        let third = if table.order() >= 3 {
            Some(
                table
                    .tuples()
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| t.len() == 3)
                    .map(|(id, _)| rows[id].clone())
                    .collect(),
            )
        } else {
            None
        };
        JetSample {
            x: x.to_vec(),
            value,
            grad,
            hess,
            third,
        }
    }

    pub fn pullback_metric(&self, x: &[f64]) -> PullbackSample {
        let n = self.dim();
        let table = Arc::new(MultiIndexTable::new(n, 1));
        let rows = self.chart_jets(x, table.clone());
        let grad: Vec<&Vec<f64>> = (0..n).map(|i| &rows[table.id(&[i])]).collect();
        let mut pb = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v: f64 = grad[i].iter().zip(grad[j]).map(|(a, b)| a * b).sum();
                pb[(i, j)] = v;
                pb[(j, i)] = v;
            }
        }
        let curv = curvature_at(&self.base, x);
        let deviation = &pb - &curv.metric;
        let predictor = curv.a1() * self.t;
        let gap = &deviation - &predictor;
        PullbackSample {
            x: x.to_vec(),
            deviation_norm: two_tensor_norm_sq(&deviation, &curv.metric_inv).max(0.0).sqrt(),
            predictor_gap: two_tensor_norm_sq(&gap, &curv.metric_inv).max(0.0).sqrt(),
            pullback: pb,
            deviation,
            predictor,
        }
    }

    /// Pullback deviation at every point of the backend's sample grid.
    pub fn pullback_report(&self) -> PullbackSummary {
        let grid = self.base.grid();
        self.pullback_report_at(&grid.points)
    }

    pub fn pullback_report_at(&self, points: &[Vec<f64>]) -> PullbackSummary {
        let samples: Vec<PullbackSample> =
            points.par_iter().map(|x| self.pullback_metric(x)).collect();
        let sup_deviation = samples.iter().map(|s| s.deviation_norm).fold(0.0, f64::max);
        let sup_predictor_gap = samples.iter().map(|s| s.predictor_gap).fold(0.0, f64::max);
        PullbackSummary {
            samples,
            sup_deviation,
            sup_predictor_gap,
            tail_bound: self.tail_bound(),
        }
    }

    /// Bound on `Σ_{j>q} a_j²|∇φ_j|²_g`, the pullback contribution of the
    /// discarded modes (exact partial sum over an enlarged basis plus the
    /// Weyl remainder).
    pub fn tail_bound(&self) -> f64 {
        let q = self.q();
        let backend = self.basis.backend();
        let (k, p) = eigenfunction_bounds(backend);
        let c = if self.normalized { normalization(self.dim(), self.t) } else { 1.0 };
        let pre = self.scale * self.scale * c * c * k;
        let chart_max = self.chart_scale.iter().fold(0.0f64, |a, &s| a.max(s * s));
        let big = match backend.kind() {
            BackendKind::ConformalCircle { .. } => None,
            _ => SpectralBasis::analytic(backend, BasisSize::Clusters(2 * q + 16), false).ok(),
        };
        let big = big.as_ref().unwrap_or(&self.basis);
        let lam_floor = big
            .entries()
            .get(q)
            .or(big.entries().last())
            .map(|e| e.lambda)
            .unwrap_or(1.0);
        let factor = (1.0 + 1.0 / lam_floor).powf(p);
        pre * chart_max * factor * tail_weight(big, self.t, q, 1.0 + p).total()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn circle_q2_closed_form() {
        let b = Backend::circle(1.0).unwrap();
        let t = 0.3;
        let m = EmbeddingMap::new(&b, t, Truncation::Count(2), true).unwrap();
        let x = 0.4;
        let v = m.evaluate(&[x]);
        let r = 2f64.sqrt() * (4.0 * PI).powf(0.25) * t.powf(0.75) * (-t / 2.0).exp() / PI.sqrt();
        assert!((v[0] - r * x.cos()).abs() < 1e-15);
        assert!((v[1] - r * x.sin()).abs() < 1e-15);
    }

    #[test]
    fn torus_hessian_component() {
        let b = Backend::torus(vec![2.0 * PI, 2.0 * PI]).unwrap();
        let m = EmbeddingMap::new(&b, 0.1, Truncation::Count(8), false).unwrap();
        let j = m
            .basis()
            .entries()
            .iter()
            .position(|e| e.label == crate::spectral::ModeLabel::Torus { freq: vec![1, 1], sine: false })
            .unwrap();
        let x = [0.3, 1.1];
        let jet = m.jet(&x, false);
        // φ = √(2/vol) cos(x¹+x²), vol = 4π² → φ = cos(·)/(√2 π).
        let expect = -(x[0] + x[1]).cos() * (-0.1f64).exp() / (2f64.sqrt() * PI);
        assert!((jet.hess[sym_index(2, 0, 1)][j] - expect).abs() < 1e-14);
    }

    #[test]
    fn sphere_hessian_symmetric_and_tangent() {
        let b = Backend::sphere(1.0).unwrap();
        let m = EmbeddingMap::new(&b, 0.2, Truncation::Count(15), true).unwrap();
        let jet = m.jet(&[0.7, 2.0], true);
        assert_eq!(jet.hess.len(), 3);
        assert_eq!(jet.third.as_ref().unwrap().len(), 4);
        // The pullback of a full-band map is a multiple of g (homogeneity).
        let pb = m.pullback_metric(&[0.7, 2.0]).pullback;
        let ratio = pb[(1, 1)] / pb[(0, 0)];
        assert!((ratio - 0.7f64.sin().powi(2)).abs() < 1e-12);
        assert!(pb[(0, 1)].abs() < 1e-13);
    }

    #[test]
    fn scaled_map() {
        let b = Backend::circle(1.0).unwrap();
        let m = EmbeddingMap::new(&b, 0.1, Truncation::Count(10), true).unwrap();
        let s = m.scaled(0.99);
        let (a, c) = (m.evaluate(&[1.0]), s.evaluate(&[1.0]));
        for (u, v) in a.iter().zip(&c) {
            assert!((0.99 * u - v).abs() < 1e-16);
        }
    }
}
