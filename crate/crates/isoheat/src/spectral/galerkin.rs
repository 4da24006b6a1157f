//! Galerkin eigenpairs of the conformal circle `w(θ)²dθ²`.
//!
//! Weak form: `∫ φ′ψ′/w dθ = λ ∫ φψ w dθ`, discretized in the real Fourier
//! basis `1, cos θ, sin θ, …, cos Mθ, sin Mθ` with quadrature-assembled
//! stiffness and mass matrices, then solved as a symmetric generalized
//! eigenproblem via the Cholesky factor of the mass matrix.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::geometry::FourierWeight;

#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinCircleConfig {
    pub weight: FourierWeight,
    /// Highest Fourier harmonic `M` in the trial space.
    pub cutoff: usize,
    /// Number of non-constant eigenpairs requested.
    pub count: usize,
}

impl GalerkinCircleConfig {
    /// Default cutoff: four harmonics per requested eigenpair plus the weight's
    /// own bandwidth.
    pub fn new(weight: FourierWeight, count: usize) -> Self {
        let cutoff = 4 * count.max(4) + 2 * weight.degree();
        GalerkinCircleConfig {
            weight,
            cutoff,
            count,
        }
    }
}

/// Real Fourier basis function `b` (0 ↦ 1, 2m−1 ↦ cos mθ, 2m ↦ sin mθ),
/// `order`-th derivative.
pub fn fourier_basis(b: usize, order: usize, theta: f64) -> f64 {
    if b == 0 {
        return if order == 0 { 1.0 } else { 0.0 };
    }
    let m = b.div_ceil(2) as f64;
    let arg = m * theta + order as f64 * PI / 2.0;
    let trig = if b % 2 == 1 { arg.cos() } else { arg.sin() };
    m.powi(order as i32) * trig
}

/// Eigenpairs including the constant mode: eigenvalues ascending and the
/// coefficient matrix (one column per eigenfunction).
pub(crate) struct GalerkinSolution {
    pub lambdas: Vec<f64>,
    pub coeffs: DMatrix<f64>,
}

pub(crate) fn solve(cfg: &GalerkinCircleConfig) -> Result<GalerkinSolution> {
    if cfg.count == 0 {
        return Err(Error::Parameter("Galerkin count must be positive".into()));
    }
    let m = cfg.cutoff;
    let dim = 2 * m + 1;
    if dim < cfg.count + 1 {
        return Err(Error::Parameter(format!(
            "Galerkin cutoff {m} cannot hold {} eigenpairs",
            cfg.count
        )));
    }
    let mut nq = 256;
    while nq < 16 * (m + cfg.weight.degree() + 1) {
        nq *= 2;
    }
    let h = 2.0 * PI / nq as f64;
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    let mut bm = DMatrix::<f64>::zeros(dim, dim);
    let mut vals = vec![0.0; dim];
    let mut ders = vec![0.0; dim];
    for s in 0..nq {
        let th = s as f64 * h;
        let w = cfg.weight.eval(th);
        for b in 0..dim {
            vals[b] = fourier_basis(b, 0, th);
            ders[b] = fourier_basis(b, 1, th);
        }
        for i in 0..dim {
            for j in i..dim {
                a[(i, j)] += h * ders[i] * ders[j] / w;
                bm[(i, j)] += h * vals[i] * vals[j] * w;
            }
        }
    }
    for i in 0..dim {
        for j in 0..i {
            a[(i, j)] = a[(j, i)];
            bm[(i, j)] = bm[(j, i)];
        }
    }
    let chol = bm
        .cholesky()
        .ok_or_else(|| Error::Numerical("Galerkin mass matrix not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular mass factor".into()))?;
    let c = &linv * &a * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let keep = cfg.count + 1;
    let lt_inv = linv.transpose();
    let mut lambdas = Vec::with_capacity(keep);
    let mut coeffs = DMatrix::zeros(dim, keep);
    for (c, &i) in order.iter().take(keep).enumerate() {
        lambdas.push(eig.eigenvalues[i].max(0.0));
        let x = &lt_inv * eig.eigenvectors.column(i);
        coeffs.set_column(c, &x);
    }
    canonicalize_clusters(&lambdas, &mut coeffs);
    Ok(GalerkinSolution { lambdas, coeffs })
}

/// Rotates each eigenspace cluster to a solver-independent basis: the first
/// vector carries the cluster's largest coefficient row, later vectors are
/// orthogonal complements; signs make the first nonzero coefficient positive.
fn canonicalize_clusters(lambdas: &[f64], coeffs: &mut DMatrix<f64>) {
    let mut start = 0;
    while start < lambdas.len() {
        let mut end = start + 1;
        while end < lambdas.len()
            && (lambdas[end] - lambdas[start]).abs() <= 1e-7 * lambdas[start].max(1.0)
        {
            end += 1;
        }
        if end - start == 2 {
            let x = coeffs.columns(start, 2).clone_owned();
            let mut best = 0;
            let mut best_norm = -1.0;
            for r in 0..x.nrows() {
                let nr = x[(r, 0)].hypot(x[(r, 1)]);
                if nr > best_norm * (1.0 + 1e-9) {
                    best_norm = nr;
                    best = r;
                }
            }
            let (u0, u1) = (x[(best, 0)] / best_norm, x[(best, 1)] / best_norm);
            let first = x.column(0) * u0 + x.column(1) * u1;
            let second = x.column(0) * (-u1) + x.column(1) * u0;
            coeffs.set_column(start, &first);
            coeffs.set_column(start + 1, &second);
        }
        for c in start..end {
            let col = coeffs.column(c);
            let big = col.amax();
            if let Some(first) = col.iter().find(|v| v.abs() > 1e-8 * big) {
                if *first < 0.0 {
                    let neg = -coeffs.column(c);
                    coeffs.set_column(c, &neg);
                }
            }
        }
        start = end;
    }
}
