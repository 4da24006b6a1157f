//! Growth of `‖E(Ψ_t)‖_{C^{k,α}}` as `t → 0`.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{jet_matrix_at, right_inverse};
use crate::diagnostics::{equivariant_norm, holder_norm, GridField, HolderNorm};
use crate::embedding::{EmbeddingMap, Truncation};
use crate::error::{Error, Result};
use crate::fit::{loglog_fit, LogLogFit};
use crate::geometry::{Backend, BackendKind};
use crate::spectral::ModeLabel;

/// Spectral cutoff `λ ≤ SCAN_CUTOFF/t`; neglected weights are `< e^{−36}`.
pub const SCAN_CUTOFF: f64 = 36.0;

/// RMS log-residual above which a scan is flagged.
pub const RESIDUAL_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub t: f64,
    pub q: usize,
    /// `max_c sup|E_c|`.
    pub c0_norm: f64,
    /// `max_c ‖E_c‖_{C^{k,α}}`.
    pub ck_alpha_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanPath {
    /// Closed-form norms of translation-equivariant columns.
    Equivariant,
    /// Grid estimator over all sample points.
    Grid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorNormScan {
    pub k: usize,
    pub alpha: f64,
    pub rows: Vec<ScanRow>,
    pub fit: LogLogFit,
    pub target_exponent: f64,
    /// `max_t ‖E‖_{C^{k,α}} · t^{(k+α)/2}`.
    pub c_e: f64,
    pub flagged: bool,
    pub path: ScanPath,
}

/// Frequency vector (in frame units) of every embedding coordinate, when
/// the backend acts on `Ψ_t` by translations.
fn frequencies(map: &EmbeddingMap) -> Option<Vec<Vec<f64>>> {
    let backend = map.backend();
    let entries = map.basis().entries();
    match backend.kind() {
        BackendKind::RoundCircle { radius } => Some(
            entries
                .iter()
                .map(|e| match &e.label {
                    ModeLabel::Circle { k, .. } => Some(vec![*k as f64 / radius]),
                    ModeLabel::Constant => Some(vec![0.0]),
                    _ => None,
                })
                .collect::<Option<Vec<_>>>()?,
        ),
        BackendKind::FlatTorus { sides } => Some(
            entries
                .iter()
                .map(|e| match &e.label {
                    ModeLabel::Torus { freq, .. } => Some(
                        freq.iter()
                            .zip(sides)
                            .map(|(&m, l)| 2.0 * std::f64::consts::PI * m as f64 / l)
                            .collect(),
                    ),
                    ModeLabel::Constant => Some(vec![0.0; sides.len()]),
                    _ => None,
                })
                .collect::<Option<Vec<_>>>()?,
        ),
        _ => None,
    }
}

/// `C^{k,α}` norm of a field `x ↦ R(x)w` on a flat backend, where `w ∈ ℝ^q`
/// is its value at the origin and `R(x)` rotates each (cos, sin) coordinate
/// pair of the map's basis by its frequency.
pub fn equivariant_field_norm(map: &EmbeddingMap, w: &[f64], k: usize, alpha: f64) -> Result<HolderNorm> {
    let freqs = frequencies(map).ok_or_else(|| {
        Error::Unsupported(format!(
            "{} is not translation-equivariant",
            map.backend().label()
        ))
    })?;
    let mut groups: BTreeMap<Vec<i64>, (Vec<f64>, f64)> = BTreeMap::new();
    for (f, v) in freqs.iter().zip(w) {
        let key: Vec<i64> = f.iter().map(|x| (x * 1e9).round() as i64).collect();
        groups.entry(key).or_insert((f.clone(), 0.0)).1 += v * v;
    }
    let modes: Vec<(Vec<f64>, f64)> = groups.into_values().collect();
    Ok(equivariant_norm(&modes, k, alpha, map.backend().injectivity_radius()))
}

/// `C^{k,α}` norms of the columns of `E(Ψ)`, using that `E(Ψ)(x + s) =
/// R(s)E(Ψ)(x)`.
pub fn equivariant_holder_norm(map: &EmbeddingMap, k: usize, alpha: f64) -> Result<Vec<HolderNorm>> {
    if frequencies(map).is_none() {
        return Err(Error::Unsupported(format!(
            "{} is not translation-equivariant",
            map.backend().label()
        )));
    }
    let x0 = vec![0.0; map.dim()];
    let e = right_inverse(&jet_matrix_at(map, &x0))?;
    (0..e.e.ncols())
        .map(|c| {
            let col: Vec<f64> = e.e.column(c).iter().copied().collect();
            equivariant_field_norm(map, &col, k, alpha)
        })
        .collect()
}

fn grid_holder_norms(map: &EmbeddingMap, k: usize, alpha: f64) -> Result<Vec<HolderNorm>> {
    let backend = map.backend();
    let points = backend.grid().points;
    let columns: Vec<_> = points
        .par_iter()
        .map(|x| right_inverse(&jet_matrix_at(map, x)).map(|r| r.e))
        .collect::<Result<Vec<_>>>()?;
    let ncols = columns[0].ncols();
    (0..ncols)
        .map(|c| {
            let field = GridField {
                components: (0..map.q())
                    .map(|j| columns.iter().map(|e| e[(j, c)]).collect())
                    .collect(),
            };
            holder_norm(&field, k, alpha, backend)
        })
        .collect()
}

/// Operator-norm scan over `ts` with the map built from all eigenvalues
/// `λ ≤ SCAN_CUTOFF/t`.
pub fn operator_norm_scan(backend: &Backend, ts: &[f64], k: usize, alpha: f64) -> Result<OperatorNormScan> {
    if k > 3 {
        return Err(Error::Parameter(format!("k = {k} > 3 is not supported")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!("α = {alpha} outside (0, 1)")));
    }
    if ts.len() < 2 || ts.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::Parameter("need at least two positive t values".into()));
    }
    let mut rows = Vec::with_capacity(ts.len());
    let mut path = ScanPath::Equivariant;
    for &t in ts {
        let map = EmbeddingMap::new(backend, t, Truncation::Cutoff(SCAN_CUTOFF / t), true)?;
        let norms = match equivariant_holder_norm(&map, k, alpha) {
            Ok(v) => v,
            Err(Error::Unsupported(_)) => {
                path = ScanPath::Grid;
                grid_holder_norms(&map, k, alpha)?
            }
            Err(e) => return Err(e),
        };
        rows.push(ScanRow {
            t,
            q: map.q(),
            c0_norm: norms.iter().map(|h| h.sup_norms[0]).fold(0.0, f64::max),
            ck_alpha_norm: norms.iter().map(|h| h.total).fold(0.0, f64::max),
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.ck_alpha_norm).collect();
    let fit = loglog_fit(&xs, &ys);
    let target_exponent = -(k as f64 + alpha) / 2.0;
    let c_e = rows
        .iter()
        .map(|r| r.ck_alpha_norm * r.t.powf(-target_exponent))
        .fold(0.0, f64::max);
    Ok(OperatorNormScan {
        k,
        alpha,
        flagged: fit.residual > RESIDUAL_THRESHOLD,
        rows,
        fit,
        target_exponent,
        c_e,
        path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equivariant_matches_grid_on_circle() {
        let b = Backend::circle(1.0).unwrap();
        let m = EmbeddingMap::new(&b, 0.1, Truncation::Cutoff(360.0), true).unwrap();
        let eq = equivariant_holder_norm(&m, 1, 0.5).unwrap();
        let grid = grid_holder_norms(&m, 1, 0.5).unwrap();
        for (a, g) in eq.iter().zip(&grid) {
            assert!((a.sup_norms[0] - g.sup_norms[0]).abs() < 1e-9 * a.sup_norms[0]);
            assert!((a.sup_norms[1] - g.sup_norms[1]).abs() < 1e-6 * a.sup_norms[1]);
            assert!((a.seminorm - g.seminorm).abs() < 0.02 * a.seminorm);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let b = Backend::circle(1.0).unwrap();
        assert!(operator_norm_scan(&b, &[0.1, 0.05], 2, 1.0).is_err());
        assert!(operator_norm_scan(&b, &[0.1], 2, 0.3).is_err());
    }
}
