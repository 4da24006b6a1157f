//! Refinement of a free map `u` to an isometric one: the fixed point of
//! `v ↦ E(u)(0, −½f) + Q(u)(v, v)` makes `d(u+v)·d(u+v) = du·du + f`.
//!
//! Only flat periodic backends are supported end to end; the curvature
//! terms of `N`, `L`, `M` run against injected synthetic curvature.

mod constants;
mod nlm;
mod smoothing;

use nalgebra::DMatrix;
use rayon::prelude::*;

pub use constants::{constants_report, gamma, ConstantsReport, SmallnessRow};
pub use nlm::{nlm_fields, q_quadratic, v_jets, Nlm, VJets};
pub use smoothing::{Smoothers, SmoothingOperator, SPECTRAL_GAP};

use crate::diagnostics::{holder_norm, GridField};
use crate::embedding::EmbeddingMap;
use crate::error::{Error, Result};
use crate::fourier::PeriodicGrid;
use crate::freeness::{assemble_jet_matrix, right_inverse};
use crate::geometry::{sym_pairs, Backend, CurvatureSource, SymTensorField, TangentField};

/// Default shift, outside the nonnegative spectrum.
pub const DEFAULT_LAMBDA0: f64 = -1.0;

/// A free map sampled on a flat periodic grid: per-point jet matrices
/// `P(u)` (frame rows) and right inverses `E(u)`.
#[derive(Debug, Clone)]
pub struct GridMap {
    backend: Backend,
    grid: PeriodicGrid,
    q: usize,
    rows: Vec<DMatrix<f64>>,
    inverses: Vec<DMatrix<f64>>,
    max_condition: f64,
}

impl GridMap {
    pub fn from_map(map: &EmbeddingMap) -> Result<Self> {
        let backend = map.backend().clone();
        if !backend.is_flat() {
            return Err(Error::Unsupported(format!(
                "refinement needs a flat periodic backend, got {}",
                backend.label()
            )));
        }
        let grid = backend
            .periodic_grid()
            .ok_or_else(|| Error::Unsupported(format!("no periodic grid on {}", backend.label())))?;
        let points = backend.grid().points;
        let solved: Vec<(DMatrix<f64>, DMatrix<f64>, f64)> = points
            .par_iter()
            .map(|x| {
                let p = assemble_jet_matrix(&map.jet(x, false), &backend.metric(x));
                let e = right_inverse(&p)?;
                Ok((p.rows, e.e, e.condition))
            })
            .collect::<Result<Vec<_>>>()?;
        let max_condition = solved.iter().map(|s| s.2).fold(0.0, f64::max);
        let (rows, inverses) = solved.into_iter().map(|(p, e, _)| (p, e)).unzip();
        Ok(GridMap {
            backend,
            grid,
            q: map.q(),
            rows,
            inverses,
            max_condition,
        })
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `P(u)` at grid point `p`.
    pub fn jet_rows(&self, p: usize) -> &DMatrix<f64> {
        &self.rows[p]
    }

    /// `E(u)` at grid point `p`.
    pub fn right_inverse(&self, p: usize) -> &DMatrix<f64> {
        &self.inverses[p]
    }

    pub fn max_condition(&self) -> f64 {
        self.max_condition
    }

    /// `E(u)(a, b)` pointwise.
    pub fn apply_e(&self, a: &TangentField, b: &SymTensorField) -> Result<GridField> {
        let n = self.dim();
        if a.n != n || b.n != n || a.len() != self.len() || b.len() != self.len() {
            return Err(Error::Parameter("E(u) arguments do not match the grid".into()));
        }
        let vals: Vec<Vec<f64>> = (0..self.len())
            .into_par_iter()
            .map(|p| {
                let e = &self.inverses[p];
                let mut out = vec![0.0; self.q];
                for (c, comp) in a.comps.iter().chain(&b.comps).enumerate() {
                    let w = comp[p];
                    if w != 0.0 {
                        for (o, v) in out.iter_mut().zip(e.column(c).iter()) {
                            *o += w * v;
                        }
                    }
                }
                out
            })
            .collect();
        Ok(GridField {
            components: (0..self.q).map(|j| vals.iter().map(|v| v[j]).collect()).collect(),
        })
    }

    /// Frame components of `d(u+v)·d(u+v)`; `v = None` gives `du·du`.
    pub fn pullback(&self, v: Option<&GridField>) -> SymTensorField {
        let n = self.dim();
        let dv: Option<Vec<Vec<Vec<f64>>>> = v.map(|v| {
            (0..n)
                .map(|i| v.components.par_iter().map(|c| self.grid.partial(c, &[i])).collect())
                .collect()
        });
        let mut out = SymTensorField::zeros(n, self.len());
        for (s, (i, j)) in sym_pairs(n).into_iter().enumerate() {
            out.comps[s] = (0..self.len())
                .into_par_iter()
                .map(|p| {
                    let r = &self.rows[p];
                    (0..self.q)
                        .map(|c| {
                            let (mut a, mut b) = (r[(i, c)], r[(j, c)]);
                            if let Some(dv) = &dv {
                                a += dv[i][c][p];
                                b += dv[j][c][p];
                            }
                            a * b
                        })
                        .sum()
                })
                .collect();
        }
        out
    }

    /// `max_c ‖E(u)_c‖_{C^{k,α}}` by the grid estimator.
    pub fn e_norm(&self, k: usize, alpha: f64) -> Result<f64> {
        let cols = self.rows[0].nrows();
        let mut best = 0.0f64;
        for c in 0..cols {
            let field = GridField {
                components: (0..self.q)
                    .map(|j| self.inverses.iter().map(|e| e[(j, c)]).collect())
                    .collect(),
            };
            best = best.max(holder_norm(&field, k, alpha, &self.backend)?.total);
        }
        Ok(best)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Computed from a map: `f = g − u*g_can`.
    Measured,
    Synthetic,
}

/// Target defect `f` (frame components).
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualTensor {
    pub f: SymTensorField,
    pub provenance: Provenance,
}

impl ResidualTensor {
    /// `f = g − u*g_can`, so that `u + v` is isometric at the fixed point.
    pub fn isometry_defect(u: &GridMap) -> Self {
        let mut f = u.pullback(None);
        for (s, (i, j)) in sym_pairs(u.dim()).into_iter().enumerate() {
            let delta = if i == j { 1.0 } else { 0.0 };
            for v in f.comps[s].iter_mut() {
                *v = delta - *v;
            }
        }
        ResidualTensor {
            f,
            provenance: Provenance::Measured,
        }
    }

    pub fn synthetic(f: SymTensorField) -> Self {
        ResidualTensor {
            f,
            provenance: Provenance::Synthetic,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.f.sup_norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThetaPolicy {
    /// Measure and report the smallness product, iterate regardless.
    Report,
    /// Refuse to iterate when the product exceeds θ.
    Enforce,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub lambda0: f64,
    pub theta_policy: ThetaPolicy,
    /// Hölder exponents of the θ-check norms.
    pub k: usize,
    pub alpha: f64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions {
            tol: 1e-10,
            max_iter: 50,
            lambda0: DEFAULT_LAMBDA0,
            theta_policy: ThetaPolicy::Report,
            k: 2,
            alpha: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaCheck {
    pub k: usize,
    pub alpha: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub theta: f64,
    /// `‖E(u)‖_{C^{k,α}}`.
    pub e_norm: f64,
    /// `‖E(u)(0, f)‖_{C^{k,α}}`.
    pub e0f_norm: f64,
    pub product: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationState {
    pub iterations: usize,
    /// `sup_x |v_{m+1} − v_m|`.
    pub update_norms: Vec<f64>,
    /// `sup |d(u+v_m)·d(u+v_m) − (du·du + f)|` after each step.
    pub residuals: Vec<f64>,
    /// `update_norms[m+1]/update_norms[m]`.
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub v: GridField,
    pub state: IterationState,
    pub theta: ThetaCheck,
    /// `v₁ = E(u)(0, −½f)`.
    pub first_iterate: GridField,
    pub certificate_residual: f64,
    /// `certificate_residual ≤ 10·tol`.
    pub certified: bool,
    pub v_sup: f64,
    pub v_holder: f64,
}

fn sup_pointwise(v: &GridField) -> f64 {
    (0..v.len())
        .map(|p| v.components.iter().map(|c| c[p] * c[p]).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

fn difference(a: &GridField, b: &GridField) -> GridField {
    GridField {
        components: a
            .components
            .iter()
            .zip(&b.components)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect())
            .collect(),
    }
}

fn sum(a: &GridField, b: &GridField) -> GridField {
    GridField {
        components: a
            .components
            .iter()
            .zip(&b.components)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect())
            .collect(),
    }
}

/// `sup |d(u+v)·d(u+v) − (du·du + f)|`.
pub fn isometry_residual(u: &GridMap, v: &GridField, f: &ResidualTensor) -> f64 {
    let target = u.pullback(None);
    let got = u.pullback(Some(v));
    let mut worst = 0.0f64;
    for s in 0..got.comps.len() {
        for p in 0..u.len() {
            worst = worst.max((got.comps[s][p] - target.comps[s][p] - f.f.comps[s][p]).abs());
        }
    }
    worst
}

/// Runs the iteration from `v₀ = 0`.
pub fn refine(u: &GridMap, f: &ResidualTensor, opts: &RefineOptions) -> Result<Refinement> {
    refine_from(u, f, opts, None)
}

/// Runs the iteration from a given start (used to verify idempotence).
pub fn refine_from(
    u: &GridMap,
    f: &ResidualTensor,
    opts: &RefineOptions,
    start: Option<&GridField>,
) -> Result<Refinement> {
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::Parameter("refine needs tol > 0 and max_iter ≥ 1".into()));
    }
    let n = u.dim();
    if f.f.n != n || f.f.len() != u.len() {
        return Err(Error::Parameter("f does not match the grid".into()));
    }
    let smoothers = Smoothers::new(u.backend(), opts.lambda0, CurvatureSource::Backend)?;
    let zero = TangentField::zeros(n, u.len());
    let half = SymTensorField {
        n,
        comps: f.f.comps.iter().map(|c| c.iter().map(|v| -0.5 * v).collect()).collect(),
    };
    let v1 = u.apply_e(&zero, &half)?;

    let sigma = smoothers.sigma();
    let g = gamma(sigma, n, opts.k, 0.0, 0.0, opts.lambda0);
    let theta = 1.0 / (8.0 * g);
    let e_norm = u.e_norm(opts.k, opts.alpha)?;
    let ef = u.apply_e(&zero, &f.f)?;
    let e0f_norm = holder_norm(&ef, opts.k, opts.alpha, u.backend())?.total;
    let product = e_norm * e0f_norm;
    let check = ThetaCheck {
        k: opts.k,
        alpha: opts.alpha,
        sigma,
        gamma: g,
        theta,
        e_norm,
        e0f_norm,
        product,
        satisfied: product <= theta,
    };
    if opts.theta_policy == ThetaPolicy::Enforce && !check.satisfied {
        return Err(Error::Refused { product, theta });
    }

    let mut v = start.cloned().unwrap_or_else(|| GridField {
        components: vec![vec![0.0; u.len()]; u.q()],
    });
    let mut state = IterationState {
        iterations: 0,
        update_norms: Vec::new(),
        residuals: Vec::new(),
        ratios: Vec::new(),
    };
    let mut growing = 0;
    loop {
        let next = sum(&v1, &q_quadratic(u, &v, &smoothers)?);
        let d = sup_pointwise(&difference(&next, &v));
        v = next;
        state.iterations += 1;
        if let Some(&prev) = state.update_norms.last() {
            state.ratios.push(d / prev);
            growing = if d > prev { growing + 1 } else { 0 };
        }
        state.update_norms.push(d);
        state.residuals.push(isometry_residual(u, &v, f));
        if !d.is_finite() || growing >= 3 {
            return Err(Error::Divergence {
                steps: state.iterations,
                trace: state.update_norms,
            });
        }
        if d < opts.tol {
            break;
        }
        if state.iterations >= opts.max_iter {
            return Err(Error::Numerical(format!(
                "no convergence in {} iterations; last update {d:e}",
                opts.max_iter
            )));
        }
    }
    let certificate_residual = *state.residuals.last().expect("at least one step");
    let v_sup = sup_pointwise(&v);
    let v_holder = holder_norm(&v, opts.k, opts.alpha, u.backend())?.total;
    Ok(Refinement {
        certified: certificate_residual <= 10.0 * opts.tol,
        certificate_residual,
        first_iterate: v1,
        v,
        state,
        theta: check,
        v_sup,
        v_holder,
    })
}
