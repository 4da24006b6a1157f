//! Free mappings: the jet matrix `P(u)`, its Gram matrix and cosine pattern,
//! and the canonical right inverse `E(u) = Pᵀ(PPᵀ)^{-1}`.

mod linalg;
mod scan;

use nalgebra::{DMatrix, SymmetricEigen};

pub use linalg::{block_perturbation_inverse, equal_angle_orthogonalize, xi_matrix, BlockInverse};
pub use scan::{equivariant_field_norm, equivariant_holder_norm, operator_norm_scan, OperatorNormScan, ScanPath, ScanRow, SCAN_CUTOFF};

use crate::embedding::{EmbeddingMap, JetSample};
use crate::error::{Error, Result};
use crate::geometry::sym_index;

/// Largest admissible condition number of `PPᵀ`.
pub const MAX_CONDITION: f64 = 1e12;

/// `P(u)(x)`: `n` gradient rows `∇_{V_a}u`, then `n(n+1)/2` Hessian rows
/// `∇²u(V_a, V_b)`, `a ≤ b` lexicographic, in the orthonormal frame
/// `V = L^{−T}` of the Cholesky factorization `g = LLᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct JetMatrix {
    pub x: Vec<f64>,
    pub n: usize,
    pub rows: DMatrix<f64>,
}

impl JetMatrix {
    pub fn row_count(n: usize) -> usize {
        n * (n + 3) / 2
    }

    pub fn q(&self) -> usize {
        self.rows.ncols()
    }

    /// Row label: `"∇1"`, `"∇1∇2"`, … (1-based frame indices).
    pub fn row_labels(n: usize) -> Vec<String> {
        let mut out: Vec<String> = (1..=n).map(|i| format!("∇{i}")).collect();
        for a in 1..=n {
            for b in a..=n {
                out.push(format!("∇{a}∇{b}"));
            }
        }
        out
    }
}

/// Orthonormal frame matrix `F` (columns = frame vectors in chart components).
pub fn orthonormal_frame(metric: &DMatrix<f64>) -> DMatrix<f64> {
    let l = metric.clone().cholesky().expect("metric positive definite").l();
    l.try_inverse().expect("triangular factor invertible").transpose()
}

pub fn assemble_jet_matrix(jet: &JetSample, metric: &DMatrix<f64>) -> JetMatrix {
    let n = jet.grad.len();
    let q = jet.value.len();
    let f = orthonormal_frame(metric);
    let mut rows = DMatrix::zeros(JetMatrix::row_count(n), q);
    for a in 0..n {
        for i in 0..n {
            let c = f[(i, a)];
            if c != 0.0 {
                for j in 0..q {
                    rows[(a, j)] += c * jet.grad[i][j];
                }
            }
        }
    }
    let mut r = n;
    for a in 0..n {
        for b in a..n {
            for i in 0..n {
                for k in 0..n {
                    let c = f[(i, a)] * f[(k, b)];
                    if c != 0.0 {
                        let h = &jet.hess[sym_index(n, i, k)];
                        for j in 0..q {
                            rows[(r, j)] += c * h[j];
                        }
                    }
                }
            }
            r += 1;
        }
    }
    JetMatrix {
        x: jet.x.clone(),
        n,
        rows,
    }
}

/// Jet matrix of an embedding map at `x`.
pub fn jet_matrix_at(map: &EmbeddingMap, x: &[f64]) -> JetMatrix {
    let jet = map.jet(x, false);
    assemble_jet_matrix(&jet, &map.backend().metric(x))
}

/// Which block of the Gram matrix an entry belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GramBlock {
    Gradient,
    Mixed,
    Hessian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CosineEntry {
    pub row: usize,
    pub col: usize,
    pub block: GramBlock,
    pub cosine: f64,
    pub target: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AngleReport {
    pub x: Vec<f64>,
    pub gram: DMatrix<f64>,
    /// Upper-triangle cosines (diagonal excluded) with their limits.
    pub cosines: Vec<CosineEntry>,
    /// Largest `|⟨∇_a u, ∇_b u⟩ − δ_ab|` (raw, not normalized).
    pub gradient_gap: f64,
    pub mixed_gap: f64,
    pub hessian_gap: f64,
    pub eigenvalues: Vec<f64>,
    pub condition: f64,
    pub free: bool,
}

/// Limit of the normalized Hessian cosine between `∇_i∇_j` and `∇_k∇_l`.
pub fn hessian_limit(i: usize, j: usize, k: usize, l: usize) -> f64 {
    if (i == k && j == l) || (i == l && j == k) {
        1.0
    } else if i == j && k == l {
        1.0 / 3.0
    } else {
        0.0
    }
}

fn hessian_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for a in 0..n {
        for b in a..n {
            v.push((a, b));
        }
    }
    v
}

pub fn gram_and_angles(p: &JetMatrix) -> AngleReport {
    let n = p.n;
    let gram = &p.rows * p.rows.transpose();
    let size = gram.nrows();
    let pairs = hessian_pairs(n);
    let mut cosines = Vec::new();
    let (mut gg, mut mg, mut hg) = (0.0f64, 0.0f64, 0.0f64);
    for a in 0..n {
        for b in 0..n {
            let target = if a == b { 1.0 } else { 0.0 };
            gg = gg.max((gram[(a, b)] - target).abs());
        }
    }
    for r in 0..size {
        for c in (r + 1)..size {
            let denom = (gram[(r, r)] * gram[(c, c)]).sqrt();
            let cosine = if denom > 0.0 { gram[(r, c)] / denom } else { 0.0 };
            let (block, target) = if c < n {
                (GramBlock::Gradient, 0.0)
            } else if r < n {
                (GramBlock::Mixed, 0.0)
            } else {
                let (i, j) = pairs[r - n];
                let (k, l) = pairs[c - n];
                (GramBlock::Hessian, hessian_limit(i, j, k, l))
            };
            let gap = (cosine - target).abs();
            match block {
                GramBlock::Gradient => gg = gg.max(gap),
                GramBlock::Mixed => mg = mg.max(gap),
                GramBlock::Hessian => hg = hg.max(gap),
            }
            cosines.push(CosineEntry {
                row: r,
                col: c,
                block,
                cosine,
                target,
                gap,
            });
        }
    }
    let eig = SymmetricEigen::new(gram.clone());
    let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    let (lo, hi) = (eigenvalues[0], eigenvalues[size - 1]);
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    let free = lo > 0.0 && condition <= MAX_CONDITION && gram.clone().cholesky().is_some();
    AngleReport {
        x: p.x.clone(),
        gram,
        cosines,
        gradient_gap: gg,
        mixed_gap: mg,
        hessian_gap: hg,
        eigenvalues,
        condition,
        free,
    }
}

/// `E(u)(x) = Pᵀ(PPᵀ)^{-1}`, a `q × n(n+3)/2` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RightInverse {
    pub x: Vec<f64>,
    pub e: DMatrix<f64>,
    pub condition: f64,
}

pub fn right_inverse(p: &JetMatrix) -> Result<RightInverse> {
    let gram = &p.rows * p.rows.transpose();
    let eig = SymmetricEigen::new(gram.clone());
    let mut spectrum: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    spectrum.sort_by(f64::total_cmp);
    let lo = spectrum[0];
    let hi = *spectrum.last().unwrap();
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    let not_free = || Error::NotFree {
        point: p.x.clone(),
        condition,
        spectrum: spectrum.clone(),
    };
    if !(condition <= MAX_CONDITION) {
        return Err(not_free());
    }
    let chol = gram.cholesky().ok_or_else(not_free)?;
    // E = Pᵀ W with (PPᵀ)W = I, i.e. Eᵀ = (PPᵀ)^{-1}P.
    let et = chol.solve(&p.rows);
    Ok(RightInverse {
        x: p.x.clone(),
        e: et.transpose(),
        condition,
    })
}

impl RightInverse {
    /// `E(u)(a, b)` for a tangent part `a ∈ ℝⁿ` and a symmetric part `b`
    /// packed as `sym_index` (frame components).
    pub fn apply(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let n = a.len();
        let mut out = vec![0.0; self.e.nrows()];
        for (c, &v) in a.iter().chain(b.iter()).enumerate() {
            if v != 0.0 {
                for (o, e) in out.iter_mut().zip(self.e.column(c).iter()) {
                    *o += v * e;
                }
            }
        }
        debug_assert_eq!(b.len(), n * (n + 1) / 2);
        out
    }
}
