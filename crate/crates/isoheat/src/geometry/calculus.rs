//! Differential operators on flat periodic backends: linearized curvature and
//! the Lichnerowicz Laplacians, plus an injectable constant-curvature hook
//! used to exercise the curvature terms.
//!
//! All Laplacians are positive (Δφ = λφ with λ ≥ 0). In this convention the
//! curvature contractions enter the Lichnerowicz operators with a plus sign:
//! `Δ₍₁₎t_i = Δt_i + Ric_i^l t_l`,
//! `Δ₍₂₎t_ij = Δt_ij + R_ikjl t_kl + Ric_i^l t_lj + Ric_j^l t_il`.

use nalgebra::DMatrix;

use super::backend::Backend;
use super::curvature::Riemann;
use super::fields::{sym_index, sym_pairs, Field, SymTensorField, TangentField};
use crate::error::{Error, Result};
use crate::fourier::PeriodicGrid;

/// Constant curvature data in orthonormal-frame components.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCurvature {
    pub riemann: Riemann,
    pub ricci: DMatrix<f64>,
    /// `∇_i Ric_jl`, flat index `(i·n + j)·n + l`.
    pub nabla_ricci: Vec<f64>,
}

impl SyntheticCurvature {
    pub fn flat(n: usize) -> Self {
        SyntheticCurvature {
            riemann: Riemann::zeros(n),
            ricci: DMatrix::zeros(n, n),
            nabla_ricci: vec![0.0; n * n * n],
        }
    }

    /// Constants of a space form of sectional curvature `k`.
    pub fn space_form(n: usize, k: f64) -> Self {
        let id = DMatrix::identity(n, n);
        let riemann = Riemann::constant_curvature(&id, k);
        let ricci = riemann.ricci(&id);
        SyntheticCurvature {
            riemann,
            ricci,
            nabla_ricci: vec![0.0; n * n * n],
        }
    }

    pub fn with_nabla_ricci(mut self, nabla_ricci: Vec<f64>) -> Self {
        assert_eq!(nabla_ricci.len(), self.n().pow(3));
        self.nabla_ricci = nabla_ricci;
        self
    }

    pub fn n(&self) -> usize {
        self.riemann.n
    }

    pub fn is_flat(&self) -> bool {
        self.riemann.data.iter().all(|&v| v == 0.0)
            && self.ricci.iter().all(|&v| v == 0.0)
            && self.nabla_ricci.iter().all(|&v| v == 0.0)
    }

    #[inline]
    pub fn nabla_ricci(&self, i: usize, j: usize, l: usize) -> f64 {
        let n = self.n();
        self.nabla_ricci[(i * n + j) * n + l]
    }

    /// Curvature endomorphism of `Δ₍₁₎` acting on frame components.
    pub fn order1_matrix(&self) -> DMatrix<f64> {
        self.ricci.clone()
    }

    /// Curvature endomorphism of `Δ₍₂₎` on packed symmetric components.
    pub fn order2_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        let pairs = sym_pairs(n);
        let m = pairs.len();
        let mut out = DMatrix::zeros(m, m);
        // Column c: image of the symmetric basis tensor e_c.
        for (c, &(a, b)) in pairs.iter().enumerate() {
            let mut t = DMatrix::zeros(n, n);
            t[(a, b)] = 1.0;
            t[(b, a)] = 1.0;
            let img = self.order2_terms(&t);
            for (r, &(i, j)) in pairs.iter().enumerate() {
                out[(r, c)] = img[(i, j)];
            }
        }
        out
    }

    /// `R_ikjl t_kl + Ric_il t_lj + Ric_jl t_il` for a full symmetric matrix `t`.
    pub fn order2_terms(&self, t: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n();
        let ric = &self.ricci;
        DMatrix::from_fn(n, n, |i, j| {
            let mut s = 0.0;
            for k in 0..n {
                for l in 0..n {
                    s += self.riemann.get(i, k, j, l) * t[(k, l)];
                }
            }
            for l in 0..n {
                s += ric[(i, l)] * t[(l, j)] + ric[(j, l)] * t[(i, l)];
            }
            s
        })
    }
}

/// Curvature that the operators should use.
#[derive(Debug, Clone, Copy)]
pub enum CurvatureSource<'a> {
    /// The backend's own curvature (zero on the supported flat charts).
    Backend,
    /// Injected constants (unit-test hook).
    Synthetic(&'a SyntheticCurvature),
}

fn flat_grid(backend: &Backend, what: &str) -> Result<PeriodicGrid> {
    if !backend.is_flat() {
        return Err(Error::Unsupported(format!(
            "{what} needs a flat periodic backend, got {}",
            backend.label()
        )));
    }
    backend.periodic_grid().ok_or_else(|| {
        Error::Unsupported(format!("{what}: non-periodic grid on {}", backend.label()))
    })
}

fn check_len(grid: &PeriodicGrid, n: usize, len: usize, fdim: usize) -> Result<()> {
    if n != grid.dim() || len != grid.len() || fdim != grid.dim() {
        return Err(Error::Parameter(format!(
            "field shape (n={n}, points={len}) does not match grid (n={}, points={})",
            grid.dim(),
            grid.len()
        )));
    }
    Ok(())
}

/// First variation of Ricci and scalar curvature at a flat metric:
/// `Ric′h = ½Δ₍₂₎h − δ*(δh) − ½∇d(tr h)`, `S′h = Δ(tr h) + δ(δh) − ⟨Ric, h⟩`,
/// with δ = −div and positive Δ.
pub fn linearized_curvature(
    backend: &Backend,
    h: &SymTensorField,
) -> Result<(SymTensorField, Vec<f64>)> {
    let grid = flat_grid(backend, "linearized curvature")?;
    let n = h.n;
    check_len(&grid, n, h.len(), backend.dim())?;
    let len = h.len();
    let mut trace = vec![0.0; len];
    for i in 0..n {
        for (t, v) in trace.iter_mut().zip(h.get(i, i)) {
            *t += v;
        }
    }
    // div_j = ∂^k h_kj = −(δh)_j
    let mut div = vec![vec![0.0; len]; n];
    for (j, dj) in div.iter_mut().enumerate() {
        for k in 0..n {
            let d = grid.partial(h.get(k, j), &[k]);
            for (a, b) in dj.iter_mut().zip(d) {
                *a += b;
            }
        }
    }
    let mut ric = SymTensorField::zeros(n, len);
    for (i, j) in sym_pairs(n) {
        let lap = grid.laplacian(h.get(i, j));
        let di = grid.partial(&div[j], &[i]);
        let dj = grid.partial(&div[i], &[j]);
        let hess_tr = grid.partial(&trace, &[i, j]);
        let out = ric.get_mut(i, j);
        for p in 0..len {
            out[p] = 0.5 * lap[p] + 0.5 * (di[p] + dj[p]) - 0.5 * hess_tr[p];
        }
    }
    let lap_tr = grid.laplacian(&trace);
    let mut s = lap_tr;
    for (k, dk) in div.iter().enumerate() {
        let d = grid.partial(dk, &[k]);
        for (a, b) in s.iter_mut().zip(d) {
            *a += b;
        }
    }
    Ok((ric, s))
}

/// Applies `Δ₍order₎` to a field on a flat periodic backend.
pub fn lichnerowicz_apply(
    order: u8,
    field: &Field,
    backend: &Backend,
    curvature: CurvatureSource<'_>,
) -> Result<Field> {
    let grid = flat_grid(backend, "Lichnerowicz Laplacian")?;
    let synth = match curvature {
        CurvatureSource::Backend => None,
        CurvatureSource::Synthetic(s) => Some(s),
    };
    match (order, field) {
        (1, Field::Tangent(t)) => {
            check_len(&grid, t.n, t.len(), backend.dim())?;
            let mut out = TangentField {
                n: t.n,
                comps: t.comps.iter().map(|c| grid.laplacian(c)).collect(),
            };
            if let Some(s) = synth {
                add_order1_terms(s, t, &mut out);
            }
            Ok(Field::Tangent(out))
        }
        (2, Field::Sym(h)) => {
            check_len(&grid, h.n, h.len(), backend.dim())?;
            let mut out = SymTensorField {
                n: h.n,
                comps: h.comps.iter().map(|c| grid.laplacian(c)).collect(),
            };
            if let Some(s) = synth {
                add_order2_terms(s, h, &mut out);
            }
            Ok(Field::Sym(out))
        }
        (1, _) | (2, _) => Err(Error::Parameter(format!(
            "order {order} Lichnerowicz Laplacian applied to the wrong field kind"
        ))),
        _ => Err(Error::Parameter(format!(
            "Lichnerowicz order must be 1 or 2, got {order}"
        ))),
    }
}

pub(crate) fn add_order1_terms(s: &SyntheticCurvature, t: &TangentField, out: &mut TangentField) {
    let n = t.n;
    for i in 0..n {
        for l in 0..n {
            let r = s.ricci[(i, l)];
            if r != 0.0 {
                for (o, v) in out.comps[i].iter_mut().zip(&t.comps[l]) {
                    *o += r * v;
                }
            }
        }
    }
}

pub(crate) fn add_order2_terms(s: &SyntheticCurvature, h: &SymTensorField, out: &mut SymTensorField) {
    let m = s.order2_matrix();
    let n = h.n;
    let pairs = sym_pairs(n);
    for (r, &(i, j)) in pairs.iter().enumerate() {
        let ri = sym_index(n, i, j);
        for c in 0..pairs.len() {
            let w = m[(r, c)];
            if w != 0.0 {
                for (o, v) in out.comps[ri].iter_mut().zip(&h.comps[c]) {
                    *o += w * v;
                }
            }
        }
    }
}
