//! Extrinsic geometry of the embedded image, injectivity scans and the
//! discrete Hölder norm.

mod holder;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

pub use holder::{equivariant_norm, holder_norm, GridField, HolderNorm};

use crate::embedding::EmbeddingMap;
use crate::error::{Error, Result};
use crate::freeness::{hessian_limit, orthonormal_frame};
use crate::geometry::{sym_index, Backend};

#[derive(Debug, Clone, PartialEq)]
pub struct SffReport {
    pub x: Vec<f64>,
    /// Normal parts `a_ab` of the frame Hessians, packed by `sym_index`.
    pub normal_hessians: Vec<Vec<f64>>,
    /// `2t⟨a_ab, a_cd⟩` in packed × packed layout; tends to
    /// `δ_abδ_cd + δ_acδ_bd + δ_adδ_bc`.
    pub scaled_gram: DMatrix<f64>,
    /// `⟨a_ab, a_cd⟩/(|a_ab||a_cd|)` with limit targets (1, 1/3, 0).
    pub cosines: Vec<(usize, usize, f64, f64)>,
    pub max_cosine_gap: f64,
    pub mean_curvature: Vec<f64>,
    /// `√t|H|`, tending to `√((n+2)/(2n))`.
    pub scaled_mean_curvature: f64,
    pub limit: f64,
    /// Largest `|⟨a_ab, ∇_iΨ⟩|` after projection.
    pub tangential_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean-curvature limit `√((n+2)/(2n))`.
pub fn mean_curvature_limit(n: usize) -> f64 {
    ((n as f64 + 2.0) / (2.0 * n as f64)).sqrt()
}

pub fn second_fundamental_form(map: &EmbeddingMap, x: &[f64]) -> Result<SffReport> {
    let n = map.dim();
    let jet = map.jet(x, false);
    let f = orthonormal_frame(&map.backend().metric(x));
    let q = map.q();
    // Frame gradients and Hessians.
    let grad: Vec<Vec<f64>> = (0..n)
        .map(|a| {
            let mut v = vec![0.0; q];
            for i in 0..n {
                for (o, g) in v.iter_mut().zip(&jet.grad[i]) {
                    *o += f[(i, a)] * g;
                }
            }
            v
        })
        .collect();
    let npack = n * (n + 1) / 2;
    let mut hess = vec![Vec::new(); npack];
    for a in 0..n {
        for b in a..n {
            let mut v = vec![0.0; q];
            for i in 0..n {
                for k in 0..n {
                    let c = f[(i, a)] * f[(k, b)];
                    if c != 0.0 {
                        for (o, h) in v.iter_mut().zip(&jet.hess[sym_index(n, i, k)]) {
                            *o += c * h;
                        }
                    }
                }
            }
            hess[sym_index(n, a, b)] = v;
        }
    }
    let induced = DMatrix::from_fn(n, n, |a, b| dot(&grad[a], &grad[b]));
    let chol = induced.clone().cholesky().ok_or_else(|| {
        Error::Numerical(format!("degenerate tangent frame at x = {x:?}"))
    })?;
    let normal: Vec<Vec<f64>> = hess
        .iter()
        .map(|h| {
            let rhs = DVector::from_fn(n, |a, _| dot(&grad[a], h));
            let coef = chol.solve(&rhs);
            let mut v = h.clone();
            for a in 0..n {
                for (o, g) in v.iter_mut().zip(&grad[a]) {
                    *o -= coef[a] * g;
                }
            }
            v
        })
        .collect();
    let mut tangential_residual = 0.0f64;
    for a in &normal {
        for g in &grad {
            let gn = dot(g, g).sqrt();
            let an = dot(a, a).sqrt().max(1e-300);
            tangential_residual = tangential_residual.max(dot(a, g).abs() / (gn * an));
        }
    }
    let ginv = chol.inverse();
    let mut h = vec![0.0; q];
    for a in 0..n {
        for b in 0..n {
            let c = ginv[(a, b)] / n as f64;
            for (o, v) in h.iter_mut().zip(&normal[sym_index(n, a, b)]) {
                *o += c * v;
            }
        }
    }
    let t = map.t();
    let scaled_gram = DMatrix::from_fn(npack, npack, |r, c| 2.0 * t * dot(&normal[r], &normal[c]));
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a..n).map(move |b| (a, b))).collect();
    let mut cosines = Vec::new();
    let mut max_gap = 0.0f64;
    for r in 0..npack {
        for c in r..npack {
            let cos = scaled_gram[(r, c)] / (scaled_gram[(r, r)] * scaled_gram[(c, c)]).sqrt();
            let (i, j) = pairs[r];
            let (k, l) = pairs[c];
            let target = hessian_limit(i, j, k, l);
            max_gap = max_gap.max((cos - target).abs());
            cosines.push((r, c, cos, target));
        }
    }
    let hn = dot(&h, &h).sqrt();
    Ok(SffReport {
        x: x.to_vec(),
        normal_hessians: normal,
        scaled_gram,
        cosines,
        max_cosine_gap: max_gap,
        mean_curvature: h,
        scaled_mean_curvature: t.sqrt() * hn,
        limit: mean_curvature_limit(n),
        tangential_residual,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OffendingPair {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub distance: f64,
    pub image_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InjectivityReport {
    /// Pairs with `d ≤ near_radius` test the bi-Lipschitz ratio; the others
    /// the image gap.
    pub near_radius: f64,
    /// Minimum `|Ψ(x) − Ψ(y)|` over well-separated pairs.
    pub min_gap: f64,
    /// Minimum `|Ψ(x) − Ψ(y)|/d(x,y)` over near pairs.
    pub min_ratio: f64,
    /// Minimum of the same ratio between each point and its nearest sample.
    pub neighbor_ratio: f64,
    pub pairs: usize,
    pub pass: bool,
    pub offending: Option<OffendingPair>,
}

/// Pairwise scan of precomputed images `images[p]` of `points[p]`.
pub fn injectivity_scan_samples(
    backend: &Backend,
    points: &[Vec<f64>],
    images: &[Vec<f64>],
) -> InjectivityReport {
    let near = backend.injectivity_radius() / 4.0;
    let scale = images
        .iter()
        .map(|v| dot(v, v).sqrt())
        .fold(0.0f64, f64::max)
        .max(1e-300);
    // Per base point: (min gap, its pair, min ratio, its pair, count,
    // nearest distance, ratio there).
    type Best = (f64, usize, f64, usize, usize, f64, f64);
    let per: Vec<Best> = (0..points.len())
        .into_par_iter()
        .map(|a| {
            let mut best: Best = (f64::INFINITY, a, f64::INFINITY, a, 0, f64::INFINITY, f64::INFINITY);
            for b in 0..points.len() {
                if b == a {
                    continue;
                }
                let d = backend.geodesic_distance(&points[a], &points[b]);
                if d <= 0.0 {
                    continue;
                }
                let diff: f64 = images[a]
                    .iter()
                    .zip(&images[b])
                    .map(|(u, v)| (u - v) * (u - v))
                    .sum::<f64>()
                    .sqrt();
                if d < best.5 {
                    best.5 = d;
                    best.6 = diff / d;
                }
                if b < a {
                    continue;
                }
                best.4 += 1;
                if d <= near {
                    let r = diff / d;
                    if r < best.2 {
                        best.2 = r;
                        best.3 = b;
                    }
                } else if diff < best.0 {
                    best.0 = diff;
                    best.1 = b;
                }
            }
            best
        })
        .collect();
    let mut min_gap = (f64::INFINITY, 0, 0);
    let mut min_ratio = (f64::INFINITY, 0, 0);
    let mut pairs = 0;
    for (a, p) in per.iter().enumerate() {
        pairs += p.4;
        if p.0 < min_gap.0 {
            min_gap = (p.0, a, p.1);
        }
        if p.2 < min_ratio.0 {
            min_ratio = (p.2, a, p.3);
        }
    }
    let gap_ok = min_gap.0 > 1e-8 * scale;
    let ratio_ok = min_ratio.0 > 1e-8 * scale;
    let offending = if !gap_ok {
        Some(min_gap)
    } else if !ratio_ok {
        Some(min_ratio)
    } else {
        None
    }
    .map(|(_, a, b)| {
        let d = backend.geodesic_distance(&points[a], &points[b]);
        let img = images[a]
            .iter()
            .zip(&images[b])
            .map(|(u, v)| (u - v) * (u - v))
            .sum::<f64>()
            .sqrt();
        OffendingPair {
            x: points[a].clone(),
            y: points[b].clone(),
            distance: d,
            image_distance: img,
        }
    });
    InjectivityReport {
        near_radius: near,
        min_gap: min_gap.0,
        min_ratio: min_ratio.0,
        neighbor_ratio: per.iter().map(|p| p.6).fold(f64::INFINITY, f64::min),
        pairs,
        pass: offending.is_none(),
        offending,
    }
}

/// Injectivity scan of a map over the backend's sample grid.
pub fn injectivity_scan(map: &EmbeddingMap) -> InjectivityReport {
    let points = map.backend().grid().points;
    let images: Vec<Vec<f64>> = points.par_iter().map(|x| map.evaluate(x)).collect();
    injectivity_scan_samples(map.backend(), &points, &images)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::Truncation;
    use std::f64::consts::PI;

    #[test]
    fn circle_mean_curvature() {
        let b = Backend::circle(1.0).unwrap();
        let m = EmbeddingMap::new(&b, 0.02, Truncation::Cutoff(36.0 / 0.02), true).unwrap();
        let r = second_fundamental_form(&m, &[0.4]).unwrap();
        assert!((r.scaled_mean_curvature - 1.5f64.sqrt()).abs() < 0.02 * 1.5f64.sqrt());
        assert!(r.tangential_residual < 1e-10);
    }

    #[test]
    fn injectivity_examples() {
        let b = Backend::circle(1.0).unwrap();
        let m = EmbeddingMap::new(&b, 0.05, Truncation::Count(2), true).unwrap();
        assert!(injectivity_scan(&m).pass);
        let points = b.grid().points;
        let folded: Vec<Vec<f64>> = points.iter().map(|x| m.evaluate(&[2.0 * x[0]])).collect();
        let rep = injectivity_scan_samples(&b, &points, &folded);
        assert!(!rep.pass);
        let off = rep.offending.unwrap();
        assert!((off.distance - PI).abs() < 1e-12);
    }
}
