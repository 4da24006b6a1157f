//! Constants of the implicit-function argument: `Γ`, `θ`, `C_E`, `G`, `t₀`,
//! and the smallness product `‖E‖·‖E(0,f)‖` along a t-grid.

use super::smoothing::Smoothers;
use super::{GridMap, Provenance};
use crate::diagnostics::holder_norm;
use crate::embedding::{EmbeddingMap, Truncation};
use crate::error::{Error, Result};
use crate::fit::{loglog_fit, LogLogFit};
use crate::freeness::{equivariant_field_norm, jet_matrix_at, operator_norm_scan, right_inverse, OperatorNormScan, SCAN_CUTOFF};
use crate::geometry::{curvature_bundle, sym_pairs, Backend, CurvatureSource, SymTensorField, TangentField};

/// `Γ = σ·n^k·(2 + ‖R‖ + |Λ₀/2|) + σ²·‖∇R‖`.
pub fn gamma(sigma: f64, n: usize, k: usize, r_norm: f64, nabla_r_norm: f64, lambda0: f64) -> f64 {
    sigma * (n as f64).powi(k as i32) * (2.0 + r_norm + (lambda0 / 2.0).abs()) + sigma * sigma * nabla_r_norm
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmallnessRow {
    pub t: f64,
    pub q: usize,
    pub e_norm: f64,
    /// `‖f‖_{C^{k,α}}`.
    pub f_norm: f64,
    pub e0f_norm: f64,
    pub product: f64,
    pub below_theta: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantsReport {
    pub n: usize,
    pub k: usize,
    pub alpha: f64,
    pub l: u32,
    pub lambda0: f64,
    pub sigma: f64,
    pub r_norm: f64,
    pub nabla_r_norm: f64,
    pub gamma: f64,
    pub theta: f64,
    pub c_e: f64,
    pub scan: OperatorNormScan,
    /// Measured `G = max_t ‖f_t‖/t^l`.
    pub g: f64,
    /// Grid estimate of `‖Ric‖ + ‖R‖²` (C⁰ parts), the curvature-side comparison for `G`.
    pub g_curvature_estimate: f64,
    pub t0: f64,
    pub rows: Vec<SmallnessRow>,
    pub smallness_fit: LogLogFit,
    /// `l + ½ − k − α`.
    pub expected_exponent: f64,
    pub f_provenance: Provenance,
}

/// Constants report on a flat backend with the synthetic defect `f = t^l·g`.
/// Measured defects on flat backends are exponentially small in `1/t`, so
/// they cannot exhibit the algebraic `t^l` law.
pub fn constants_report(
    backend: &Backend,
    k: usize,
    alpha: f64,
    l: u32,
    lambda0: f64,
    ts: &[f64],
) -> Result<ConstantsReport> {
    if !(l as f64 + 0.5 > k as f64 + alpha) {
        return Err(Error::Parameter(format!(
            "need l + ½ > k + α, got l = {l}, k = {k}, α = {alpha}"
        )));
    }
    let n = backend.dim();
    let smoothers = Smoothers::new(backend, lambda0, CurvatureSource::Backend)?;
    let sigma = smoothers.sigma();
    let curv = curvature_bundle(backend);
    let (r_norm, nabla_r_norm) = (curv.norms.r_c0, curv.norms.nabla_r_c0);
    let g_curvature_estimate = curv
        .at
        .iter()
        .map(|c| c.ricci_norm_sq().sqrt() + c.riemann_norm().powi(2))
        .fold(0.0, f64::max);
    let gam = gamma(sigma, n, k, r_norm, nabla_r_norm, lambda0);
    let theta = 1.0 / (8.0 * gam);
    let scan = operator_norm_scan(backend, ts, k, alpha)?;
    let c_e = scan.c_e;

    // Frame components of the metric, packed.
    let metric: Vec<f64> = sym_pairs(n).iter().map(|&(i, j)| if i == j { 1.0 } else { 0.0 }).collect();
    let metric_norm = (n as f64).sqrt();
    let mut rows = Vec::with_capacity(ts.len());
    for (&t, srow) in ts.iter().zip(&scan.rows) {
        let tl = t.powi(l as i32);
        let map = EmbeddingMap::new(backend, t, Truncation::Cutoff(SCAN_CUTOFF / t), true)?;
        let e0f_norm = match equivariant_e0f(&map, &metric, k, alpha) {
            Ok(v) => v,
            Err(Error::Unsupported(_)) => grid_e0f(&map, &metric, k, alpha)?,
            Err(e) => return Err(e),
        } * tl;
        let product = srow.ck_alpha_norm * e0f_norm;
        rows.push(SmallnessRow {
            t,
            q: srow.q,
            e_norm: srow.ck_alpha_norm,
            f_norm: metric_norm * tl,
            e0f_norm,
            product,
            below_theta: product <= theta,
        });
    }
    let g = rows
        .iter()
        .map(|r| r.f_norm / r.t.powi(l as i32))
        .fold(0.0, f64::max);
    let xs: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.product).collect();
    let smallness_fit = loglog_fit(&xs, &ys);
    let gap = (l as f64 + 0.5) - (k as f64 + alpha);
    let t0 = (8.0 * c_e.powi(3) * gam * g).powf(-1.0 / gap);
    Ok(ConstantsReport {
        n,
        k,
        alpha,
        l,
        lambda0,
        sigma,
        r_norm,
        nabla_r_norm,
        gamma: gam,
        theta,
        c_e,
        scan,
        g,
        g_curvature_estimate,
        t0,
        rows,
        smallness_fit,
        expected_exponent: gap,
        f_provenance: Provenance::Synthetic,
    })
}

/// `‖E(Ψ)(0, b)‖` for a constant frame tensor `b`, by equivariance.
fn equivariant_e0f(map: &EmbeddingMap, b: &[f64], k: usize, alpha: f64) -> Result<f64> {
    let n = map.dim();
    let e = right_inverse(&jet_matrix_at(map, &vec![0.0; n]))?;
    let w: Vec<f64> = (0..map.q())
        .map(|j| b.iter().enumerate().map(|(s, v)| v * e.e[(j, n + s)]).sum())
        .collect();
    Ok(equivariant_field_norm(map, &w, k, alpha)?.total)
}

fn grid_e0f(map: &EmbeddingMap, b: &[f64], k: usize, alpha: f64) -> Result<f64> {
    let u = GridMap::from_map(map)?;
    let n = map.dim();
    let len = u.len();
    let f = SymTensorField {
        n,
        comps: b.iter().map(|&v| vec![v; len]).collect(),
    };
    let field = u.apply_e(&TangentField::zeros(n, len), &f)?;
    Ok(holder_norm(&field, k, alpha, map.backend())?.total)
}
