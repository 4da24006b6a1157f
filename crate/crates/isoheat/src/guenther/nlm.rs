//! The nonlinearities `N(v)`, `L(v)`, `M(v)` and the quadratic map `Q(u)(v,v)`.
//!
//! Positive-Laplacian form (`Δv = −Σ∂_l∂_l v`, frame components):
//! `N_i = −Δv·∂_iv`,
//! `L_ij = −2∂_l∂_iv·∂_l∂_jv − 2Δv·∂_i∂_jv + 2R_ikjl ∂_kv·∂_lv − Λ₀∂_iv·∂_jv`,
//! `M_ij = ½L_ij − (∇_iRic_jl + ∇_jRic_il − ∇_lRic_ij)((Δ₍₁₎ − Λ₀)^{-1}N)_l`.

use rayon::prelude::*;

use super::smoothing::Smoothers;
use super::GridMap;
use crate::diagnostics::GridField;
use crate::error::{Error, Result};
use crate::fourier::PeriodicGrid;
use crate::geometry::{sym_index, sym_pairs, Field, SymTensorField, TangentField};

/// Spectral derivatives of a grid field `v`: `grad[i][j][p] = ∂_iv_j`,
/// `hess[sym][j][p]`, `lap[j][p] = Δv_j` (positive).
#[derive(Debug, Clone, PartialEq)]
pub struct VJets {
    pub grad: Vec<Vec<Vec<f64>>>,
    pub hess: Vec<Vec<Vec<f64>>>,
    pub lap: Vec<Vec<f64>>,
}

pub fn v_jets(grid: &PeriodicGrid, v: &GridField) -> VJets {
    let n = grid.dim();
    let grad = (0..n)
        .map(|i| v.components.par_iter().map(|c| grid.partial(c, &[i])).collect())
        .collect();
    let hess = sym_pairs(n)
        .into_iter()
        .map(|(i, j)| v.components.par_iter().map(|c| grid.partial(c, &[i, j])).collect())
        .collect();
    let lap = v.components.par_iter().map(|c| grid.laplacian(c)).collect();
    VJets { grad, hess, lap }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Nlm {
    pub n: TangentField,
    pub l: SymTensorField,
    pub m: SymTensorField,
    /// `(Δ₍₁₎ − Λ₀)^{-1}N`, consumed by `M`.
    pub smoothed_n: TangentField,
}

fn dot_at(a: &[Vec<f64>], b: &[Vec<f64>], p: usize) -> f64 {
    a.iter().zip(b).map(|(x, y)| x[p] * y[p]).sum()
}

pub fn nlm_fields(v: &GridField, smoothers: &Smoothers) -> Result<Nlm> {
    let grid = smoothers.grid();
    if v.len() != grid.len() {
        return Err(Error::Parameter("v does not match the smoothing grid".into()));
    }
    let n = grid.dim();
    let len = grid.len();
    let lambda0 = smoothers.first.lambda0();
    let curv = smoothers.curvature();
    let jets = v_jets(grid, v);
    let pairs = sym_pairs(n);

    let mut nf = TangentField::zeros(n, len);
    for i in 0..n {
        nf.comps[i] = (0..len).into_par_iter().map(|p| -dot_at(&jets.lap, &jets.grad[i], p)).collect();
    }
    let mut l = SymTensorField::zeros(n, len);
    for (s, &(i, j)) in pairs.iter().enumerate() {
        l.comps[s] = (0..len)
            .into_par_iter()
            .map(|p| {
                let mut acc = 0.0;
                for m in 0..n {
                    acc -= 2.0 * dot_at(&jets.hess[sym_index(n, m, i)], &jets.hess[sym_index(n, m, j)], p);
                }
                acc -= 2.0 * dot_at(&jets.lap, &jets.hess[s], p);
                for k in 0..n {
                    for m in 0..n {
                        let r = curv.riemann.get(i, k, j, m);
                        if r != 0.0 {
                            acc += 2.0 * r * dot_at(&jets.grad[k], &jets.grad[m], p);
                        }
                    }
                }
                acc - lambda0 * dot_at(&jets.grad[i], &jets.grad[j], p)
            })
            .collect();
    }
    let Field::Tangent(smoothed_n) = smoothers.first.solve(&Field::Tangent(nf.clone()))? else {
        unreachable!("order-1 solve returns a tangent field")
    };
    let mut m = SymTensorField::zeros(n, len);
    for (s, &(i, j)) in pairs.iter().enumerate() {
        let coef: Vec<f64> = (0..n)
            .map(|k| curv.nabla_ricci(i, j, k) + curv.nabla_ricci(j, i, k) - curv.nabla_ricci(k, i, j))
            .collect();
        m.comps[s] = (0..len)
            .map(|p| {
                let corr: f64 = coef.iter().zip(&smoothed_n.comps).map(|(c, q)| c * q[p]).sum();
                0.5 * l.comps[s][p] - corr
            })
            .collect();
    }
    Ok(Nlm {
        n: nf,
        l,
        m,
        smoothed_n,
    })
}

/// `Q(u)(v,v) = E(u)((Δ₍₁₎ − Λ₀)^{-1}N(v), (Δ₍₂₎ − Λ₀)^{-1}M(v))`.
pub fn q_quadratic(u: &GridMap, v: &GridField, smoothers: &Smoothers) -> Result<GridField> {
    let nlm = nlm_fields(v, smoothers)?;
    let Field::Sym(sm) = smoothers.second.solve(&Field::Sym(nlm.m))? else {
        unreachable!("order-2 solve returns a symmetric field")
    };
    u.apply_e(&nlm.smoothed_n, &sm)
}
