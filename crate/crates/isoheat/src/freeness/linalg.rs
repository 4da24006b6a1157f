//! Equal-angle Gram matrices and the block-perturbation inverse.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `Ξ_n(σ) = (1−σ)I + σJ` and its closed-form inverse
/// `(1/(1−σ))[I − σ/(1+(n−1)σ)·J]`.
pub fn xi_matrix(n: usize, sigma: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if n == 0 {
        return Err(Error::Parameter("Ξ_n needs n ≥ 1".into()));
    }
    let nf = n as f64;
    let lower = if n > 1 { -1.0 / (nf - 1.0) } else { f64::NEG_INFINITY };
    if !(sigma > lower && sigma < 1.0) {
        return Err(Error::Numerical(format!(
            "Ξ_{n}(σ) is singular: σ = {sigma} outside ({lower}, 1)"
        )));
    }
    let xi = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { sigma });
    let s = sigma / (1.0 + (nf - 1.0) * sigma);
    let inv = DMatrix::from_fn(n, n, |i, j| {
        let v = if i == j { 1.0 - s } else { -s };
        v / (1.0 - sigma)
    });
    Ok((xi, inv))
}

/// `α̃_i = α₀ + c(α_i − α₀)` with `α₀` the mean and
/// `c = √((1+(n−1)σ)/(1−σ))`: maps unit vectors with pairwise cosine `σ`
/// to pairwise orthogonal vectors (each of squared length `1+(n−1)σ`).
pub fn equal_angle_orthogonalize(
    vectors: &[DVector<f64>],
    sigma: f64,
    tol: f64,
) -> Result<Vec<DVector<f64>>> {
    let n = vectors.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    xi_matrix(n, sigma)?;
    for (i, a) in vectors.iter().enumerate() {
        if (a.norm() - 1.0).abs() > tol {
            return Err(Error::Parameter(format!("vector {i} is not a unit vector")));
        }
        for (j, b) in vectors.iter().enumerate().skip(i + 1) {
            let c = a.dot(b);
            if (c - sigma).abs() > tol {
                return Err(Error::Parameter(format!(
                    "cosine of vectors {i},{j} is {c}, expected σ = {sigma}"
                )));
            }
        }
    }
    let nf = n as f64;
    let c = ((1.0 + (nf - 1.0) * sigma) / (1.0 - sigma)).sqrt();
    let mean = vectors.iter().fold(DVector::zeros(vectors[0].len()), |acc, v| acc + v) / nf;
    Ok(vectors.iter().map(|a| &mean + (a - &mean) * c).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockInverse {
    pub inverse: DMatrix<f64>,
    /// `‖c‖` with `c = A₂^{-1} b A₁^{-1}` (spectral norm).
    pub c_norm: f64,
    /// `‖A₂^{-1}‖‖b‖‖A₁^{-1}‖`.
    pub c_bound: f64,
    pub b_norm: f64,
    pub neumann_terms: usize,
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Inverse of `[[A₁, bᵀ], [b, A₂]]` through the Schur complement
/// `S = A₁(I − cᵀb)`, whose inverse is a Neumann series in `cᵀb`
/// (convergent when `‖c‖‖b‖ < 1`).
pub fn block_perturbation_inverse(
    a1: &DMatrix<f64>,
    a2: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> Result<BlockInverse> {
    let (m1, m2) = (a1.nrows(), a2.nrows());
    if a1.ncols() != m1 || a2.ncols() != m2 || b.nrows() != m2 || b.ncols() != m1 {
        return Err(Error::Parameter("block shapes do not match".into()));
    }
    let a1i = a1
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("A₁ singular".into()))?;
    let a2i = a2
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("A₂ singular".into()))?;
    let c = &a2i * b * &a1i;
    let c_norm = spectral_norm(&c);
    let b_norm = spectral_norm(b);
    let c_bound = spectral_norm(&a2i) * b_norm * spectral_norm(&a1i);
    if c_norm * b_norm >= 1.0 {
        return Err(Error::Numerical(format!(
            "Neumann condition violated: ‖c‖‖b‖ = {}",
            c_norm * b_norm
        )));
    }
    let k = c.transpose() * b;
    let mut sum = DMatrix::identity(m1, m1);
    let mut term = DMatrix::identity(m1, m1);
    let mut terms = 1;
    while terms < 10_000 {
        term = &term * &k;
        let size = term.amax();
        sum += &term;
        terms += 1;
        if size <= 1e-18 * sum.amax() {
            break;
        }
    }
    let s_inv = sum * &a1i;
    let top_right = -(&s_inv * b.transpose() * &a2i);
    let bottom_left = top_right.transpose();
    let bottom_right = &a2i + &a2i * b * &s_inv * b.transpose() * &a2i;
    let mut inv = DMatrix::zeros(m1 + m2, m1 + m2);
    inv.view_mut((0, 0), (m1, m1)).copy_from(&s_inv);
    inv.view_mut((0, m1), (m1, m2)).copy_from(&top_right);
    inv.view_mut((m1, 0), (m2, m1)).copy_from(&bottom_left);
    inv.view_mut((m1, m1), (m2, m2)).copy_from(&bottom_right);
    Ok(BlockInverse {
        inverse: inv,
        c_norm,
        c_bound,
        b_norm,
        neumann_terms: terms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xi_examples() {
        let (x, inv) = xi_matrix(2, 1.0 / 3.0).unwrap();
        assert_eq!(x[(0, 1)], 1.0 / 3.0);
        let expect = DMatrix::from_row_slice(2, 2, &[1.0, -1.0 / 3.0, -1.0 / 3.0, 1.0]) * (9.0 / 8.0);
        assert!((inv - expect).amax() < 1e-15);
        let (x, _) = xi_matrix(4, 0.0).unwrap();
        assert_eq!(x, DMatrix::identity(4, 4));
        assert!(xi_matrix(2, -1.0).is_err());
        assert!(xi_matrix(3, 1.0).is_err());
    }

    #[test]
    fn equal_angle_triple() {
        let (xi, _) = xi_matrix(3, 1.0 / 3.0).unwrap();
        let l = xi.cholesky().unwrap().l();
        let vs: Vec<DVector<f64>> = (0..3).map(|i| l.row(i).transpose()).collect();
        let out = equal_angle_orthogonalize(&vs, 1.0 / 3.0, 1e-12).unwrap();
        for i in 0..3 {
            for j in (i + 1)..3 {
                assert!(out[i].dot(&out[j]).abs() < 1e-10);
            }
        }
        let unit: Vec<DVector<f64>> = (0..2).map(|i| DVector::from_fn(2, |k, _| (k == i) as u8 as f64)).collect();
        assert!(equal_angle_orthogonalize(&unit, 1.0 / 3.0, 1e-8).is_err());
    }

    #[test]
    fn block_inverse_small_b() {
        let a = DMatrix::identity(2, 2);
        let mut b = DMatrix::zeros(3, 2);
        b[(1, 0)] = 0.1;
        let a2 = DMatrix::identity(3, 3);
        let r = block_perturbation_inverse(&a, &a2, &b).unwrap();
        let mut full = DMatrix::identity(5, 5);
        full[(3, 0)] = 0.1;
        full[(0, 3)] = 0.1;
        let dense = full.try_inverse().unwrap();
        assert!((r.inverse - dense).amax() < 1e-12);
        assert!(r.c_norm <= r.c_bound * (1.0 + 1e-12));
        let z = block_perturbation_inverse(&a, &a2, &DMatrix::zeros(3, 2)).unwrap();
        assert_eq!(z.inverse, DMatrix::identity(5, 5));
    }
}
