//! Discrete `C^{k,α}(M, ℝ^q)` norms.
//!
//! `‖f‖ = Σ_{β≤k} sup|∇^β f| + [∇^k f]_α`, where `|∇^β f|` is the Euclidean
//! norm over all ordered frame multi-indices and all `ℝ^q` components, and the
//! seminorm is a supremum over sample pairs at geodesic distance at most the
//! injectivity radius. Both suprema are taken over finite samples, so every
//! value is an approximation from below.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fourier::PeriodicGrid;
use crate::geometry::{Backend, BackendKind};
use crate::spectral::MultiIndexTable;

#[derive(Debug, Clone, PartialEq)]
pub struct HolderNorm {
    pub k: usize,
    pub alpha: f64,
    /// `sup|∇^β f|` for `β = 0..=k`.
    pub sup_norms: Vec<f64>,
    pub seminorm: f64,
    pub total: f64,
    /// Number of point pairs (or displacement samples) in the seminorm.
    pub pairs: usize,
    /// Always true: suprema are taken over finite samples.
    pub approximate: bool,
}

impl HolderNorm {
    pub(crate) fn assemble(k: usize, alpha: f64, sup_norms: Vec<f64>, seminorm: f64, pairs: usize) -> Self {
        let total = sup_norms.iter().sum::<f64>() + seminorm;
        HolderNorm {
            k,
            alpha,
            sup_norms,
            seminorm,
            total,
            pairs,
            approximate: true,
        }
    }
}

/// A vector-valued field sampled on the backend grid: `components[c][p]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub components: Vec<Vec<f64>>,
}

impl GridField {
    /// Samples `f` at every grid point of `backend`.
    pub fn sample<F>(backend: &Backend, f: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Sync,
    {
        let grid = backend.grid();
        let vals: Vec<Vec<f64>> = grid.points.par_iter().map(|x| f(x)).collect();
        let q = vals.first().map(|v| v.len()).unwrap_or(0);
        let components = (0..q).map(|c| vals.iter().map(|v| v[c]).collect()).collect();
        GridField { components }
    }

    pub fn len(&self) -> usize {
        self.components.first().map(|c| c.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Number of ordered multi-indices that sort to `tuple`.
fn multiplicity(tuple: &[usize]) -> f64 {
    let mut fact = 1.0;
    let mut run = 1;
    for w in 1..=tuple.len() {
        fact *= w as f64;
        if w < tuple.len() && tuple[w] == tuple[w - 1] {
            run += 1;
        } else {
            for r in 2..=run {
                fact /= r as f64;
            }
            run = 1;
        }
    }
    fact
}

/// Frame derivatives of every component up to order `k`:
/// `out[tuple id][component][point]`.
fn frame_derivatives(
    field: &GridField,
    backend: &Backend,
    table: &MultiIndexTable,
) -> Result<Vec<Vec<Vec<f64>>>> {
    match backend.kind() {
        BackendKind::ConformalCircle { weight } => {
            let n = field.len();
            let grid = PeriodicGrid::new(vec![n], vec![2.0 * PI]);
            let inv_w: Vec<f64> = (0..n)
                .map(|i| 1.0 / weight.eval(2.0 * PI * i as f64 / n as f64))
                .collect();
            let mut out = Vec::with_capacity(table.len());
            let mut current: Vec<Vec<f64>> = field.components.clone();
            for tuple in table.tuples() {
                if tuple.len() > 0 && out.len() > 0 {
                    // Orders are consecutive in a 1-D table.
                    current = current
                        .par_iter()
                        .map(|c| {
                            grid.partial(c, &[0])
                                .iter()
                                .zip(&inv_w)
                                .map(|(d, w)| d * w)
                                .collect()
                        })
                        .collect();
                }
                out.push(current.clone());
            }
            Ok(out)
        }
        _ => {
            let grid = backend.periodic_grid().ok_or_else(|| {
                Error::Unsupported(format!(
                    "grid Hölder norm needs a periodic flat chart; {} has none",
                    backend.label()
                ))
            })?;
            if grid.len() != field.len() {
                return Err(Error::Parameter("field does not match the backend grid".into()));
            }
            Ok(table
                .tuples()
                .iter()
                .map(|tuple| {
                    field
                        .components
                        .par_iter()
                        .map(|c| grid.partial(c, tuple))
                        .collect()
                })
                .collect())
        }
    }
}

/// Grid estimator of `‖f‖_{C^{k,α}}` on a periodic (flat or conformal) circle
/// or torus chart; base points for the seminorm are subsampled to at most 64.
pub fn holder_norm(field: &GridField, k: usize, alpha: f64, backend: &Backend) -> Result<HolderNorm> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!("Hölder exponent must lie in (0,1), got {alpha}")));
    }
    let n = backend.dim();
    let table = MultiIndexTable::new(n, k);
    let derivs = frame_derivatives(field, backend, &table)?;
    let npts = field.len();
    let mut sup_norms = vec![0.0f64; k + 1];
    for p in 0..npts {
        let mut per_order = vec![0.0f64; k + 1];
        for (id, tuple) in table.tuples().iter().enumerate() {
            let m = multiplicity(tuple);
            let s: f64 = derivs[id].iter().map(|c| c[p] * c[p]).sum();
            per_order[tuple.len()] += m * s;
        }
        for (s, v) in sup_norms.iter_mut().zip(per_order) {
            *s = s.max(v.sqrt());
        }
    }
    let top: Vec<(usize, f64)> = table
        .tuples()
        .iter()
        .enumerate()
        .filter(|(_, t)| t.len() == k)
        .map(|(id, t)| (id, multiplicity(t)))
        .collect();
    let points = backend.grid().points;
    let inj = backend.injectivity_radius();
    let stride = npts.div_ceil(64).max(1);
    let bases: Vec<usize> = (0..npts).step_by(stride).collect();
    let results: Vec<(f64, usize)> = bases
        .par_iter()
        .map(|&a| {
            let mut best = 0.0f64;
            let mut count = 0;
            for b in 0..npts {
                if b == a {
                    continue;
                }
                let d = backend.geodesic_distance(&points[a], &points[b]);
                if d <= 0.0 || d > inj {
                    continue;
                }
                count += 1;
                let mut s = 0.0;
                for &(id, m) in &top {
                    for c in &derivs[id] {
                        let diff = c[a] - c[b];
                        s += m * diff * diff;
                    }
                }
                best = best.max(s.sqrt() / d.powf(alpha));
            }
            (best, count)
        })
        .collect();
    let pairs: usize = results.iter().map(|r| r.1).sum();
    if pairs == 0 {
        return Err(Error::Parameter("no admissible pairs for the Hölder seminorm (grid too coarse)".into()));
    }
    let seminorm = results.iter().map(|r| r.0).fold(0.0, f64::max);
    Ok(HolderNorm::assemble(k, alpha, sup_norms, seminorm, pairs))
}

/// Translation-equivariant fields on flat charts: every component pair
/// rotates with its frequency `ω`, so `|∇^β f|² = Σ_ω |ω|^{2β} a_ω²` is
/// constant and `|∇^k f(x) − ∇^k f(x+d)|² = Σ_ω |ω|^{2k} a_ω² · 4sin²(ω·d/2)`.
/// The seminorm is maximized over geometric radii in `[10⁻⁴ r, r]` (r the
/// injectivity radius) and sampled directions.
pub fn equivariant_norm(modes: &[(Vec<f64>, f64)], k: usize, alpha: f64, inj: f64) -> HolderNorm {
    let n = modes.first().map(|m| m.0.len()).unwrap_or(1);
    let sup_norms: Vec<f64> = (0..=k)
        .map(|b| {
            modes
                .iter()
                .map(|(w, a2)| w.iter().map(|x| x * x).sum::<f64>().powi(b as i32) * a2)
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let weights: Vec<f64> = modes
        .iter()
        .map(|(w, a2)| w.iter().map(|x| x * x).sum::<f64>().powi(k as i32) * a2)
        .collect();
    let project = |dir: &[f64]| -> Vec<f64> {
        modes
            .iter()
            .map(|(w, _)| 0.5 * w.iter().zip(dir).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    };
    let seminorm_at = |proj: &[f64], r: f64| -> f64 {
        let s: f64 = proj
            .iter()
            .zip(&weights)
            .map(|(p, wt)| {
                let h = (p * r).sin();
                wt * h * h
            })
            .sum();
        2.0 * s.sqrt() / r.powf(alpha)
    };
    let directions: Vec<Vec<f64>> = match n {
        1 => vec![vec![1.0]],
        2 => (0..32).map(|i| angle_dir(PI * i as f64 / 32.0)).collect(),
        _ => diagonal_directions(n),
    };
    // Coarse sweep over geometric radii, then local refinement around the
    // maximizer (radius, and angle when n = 2).
    let nr = 100;
    let ratio = 1e4f64.powf(1.0 / (nr - 1) as f64);
    let radii: Vec<f64> = (0..nr).map(|i| inj * 1e-4 * ratio.powi(i as i32)).collect();
    let coarse: Vec<(f64, usize, usize)> = directions
        .par_iter()
        .enumerate()
        .map(|(d, dir)| {
            let proj = project(dir);
            radii
                .iter()
                .enumerate()
                .map(|(i, &r)| (seminorm_at(&proj, r), d, i))
                .fold((0.0, d, 0), |a, b| if b.0 > a.0 { b } else { a })
        })
        .collect();
    let (mut best, bd, bi) = coarse.iter().copied().fold((0.0, 0, 0), |a, b| if b.0 > a.0 { b } else { a });
    let mut evaluations = directions.len() * nr;
    let (r_lo, r_hi) = (radii[bi] / ratio, (radii[bi] * ratio).min(inj));
    let angles: Vec<f64> = if n == 2 {
        let c = PI * bd as f64 / 32.0;
        (-8..=8).map(|j| c + j as f64 * PI / 32.0 / 8.0).collect()
    } else {
        vec![f64::NAN]
    };
    for &a in &angles {
        let proj = project(&if n == 2 { angle_dir(a) } else { directions[bd].clone() });
        for j in 0..=32 {
            let r = r_lo * (r_hi / r_lo).powf(j as f64 / 32.0);
            best = best.max(seminorm_at(&proj, r));
            evaluations += 1;
        }
    }
    HolderNorm::assemble(k, alpha, sup_norms, best, evaluations)
}

fn angle_dir(th: f64) -> Vec<f64> {
    vec![th.cos(), th.sin()]
}

/// Coordinate axes and all ±1 diagonals, up to sign.
fn diagonal_directions(n: usize) -> Vec<Vec<f64>> {
    let mut v = Vec::new();
    for mask in 1u32..(1 << n) {
        for sign in 0u32..(1 << n) {
            if sign & 1 == 1 {
                continue;
            }
            let d: Vec<f64> = (0..n)
                .map(|i| {
                    if mask >> i & 1 == 0 {
                        0.0
                    } else if sign >> i & 1 == 1 {
                        -1.0
                    } else {
                        1.0
                    }
                })
                .collect();
            let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.push(d.iter().map(|x| x / norm).collect());
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiplicities() {
        assert_eq!(multiplicity(&[]), 1.0);
        assert_eq!(multiplicity(&[0, 1]), 2.0);
        assert_eq!(multiplicity(&[0, 0, 1]), 3.0);
        assert_eq!(multiplicity(&[0, 1, 2]), 6.0);
        assert_eq!(multiplicity(&[1, 1, 1]), 1.0);
    }

    #[test]
    fn constant_field() {
        let b = Backend::circle(1.0).unwrap();
        let f = GridField::sample(&b, |_| vec![3.0, 4.0]);
        let h = holder_norm(&f, 2, 0.5, &b).unwrap();
        assert!((h.sup_norms[0] - 5.0).abs() < 1e-12);
        assert!(h.seminorm < 1e-12);
    }

    #[test]
    fn grid_matches_equivariant_on_circle() {
        let b = Backend::circle(1.0).unwrap().with_resolution(&[256]).unwrap();
        let f = GridField::sample(&b, |x| vec![(3.0 * x[0]).cos(), (3.0 * x[0]).sin(), 0.5 * x[0].cos(), 0.5 * x[0].sin()]);
        let g = holder_norm(&f, 1, 0.4, &b).unwrap();
        let e = equivariant_norm(&[(vec![3.0], 1.0), (vec![1.0], 0.25)], 1, 0.4, PI);
        for (a, c) in g.sup_norms.iter().zip(&e.sup_norms) {
            assert!((a - c).abs() < 1e-10);
        }
        assert!((g.seminorm - e.seminorm).abs() < 0.01 * e.seminorm);
    }

    #[test]
    fn conformal_matches_arclength() {
        use crate::geometry::FourierWeight;
        // With w ≡ 2 the circle has radius 2: D = ½∂θ.
        let b = Backend::conformal_circle(FourierWeight::constant(2.0)).unwrap().with_resolution(&[128]).unwrap();
        let f = GridField::sample(&b, |x| vec![(2.0 * x[0]).sin()]);
        let h = holder_norm(&f, 2, 0.5, &b).unwrap();
        assert!((h.sup_norms[1] - 1.0).abs() < 1e-10);
        assert!((h.sup_norms[2] - 1.0).abs() < 1e-10);
    }
}
