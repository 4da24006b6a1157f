use nalgebra::DMatrix;

use super::backend::{Backend, BackendKind};

/// Riemann tensor with all indices down, flat index `((i·n + j)·n + k)·n + l`,
/// in the convention where constant curvature K reads
/// `R_ijkl = K(g_ik g_jl − g_il g_jk)` and `Ric_jl = g^{ik} R_ijkl`.
#[derive(Debug, Clone, PartialEq)]
pub struct Riemann {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Riemann {
    pub fn zeros(n: usize) -> Self {
        Riemann {
            n,
            data: vec![0.0; n * n * n * n],
        }
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        ((i * self.n + j) * self.n + k) * self.n + l
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.data[self.idx(i, j, k, l)]
    }

    /// Constant sectional curvature `k` with respect to `g`.
    pub fn constant_curvature(g: &DMatrix<f64>, k: f64) -> Self {
        let n = g.nrows();
        let mut r = Riemann::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        let id = r.idx(i, j, a, b);
                        r.data[id] = k * (g[(i, a)] * g[(j, b)] - g[(i, b)] * g[(j, a)]);
                    }
                }
            }
        }
        r
    }

    pub fn ricci(&self, ginv: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |j, l| {
            let mut s = 0.0;
            for i in 0..n {
                for k in 0..n {
                    s += ginv[(i, k)] * self.get(i, j, k, l);
                }
            }
            s
        })
    }

    /// |R|² = R_ijkl R^ijkl.
    pub fn norm_sq(&self, ginv: &DMatrix<f64>) -> f64 {
        let n = self.n;
        // Raise all indices: R^{abcd} = g^{ai} g^{bj} g^{ck} g^{dl} R_ijkl, done
        // one index at a time.
        let mut cur = self.data.clone();
        for slot in 0..4 {
            let mut next = vec![0.0; cur.len()];
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        for d in 0..n {
                            let ids = [a, b, c, d];
                            let mut s = 0.0;
                            for m in 0..n {
                                let mut src = ids;
                                src[slot] = m;
                                s += ginv[(ids[slot], m)]
                                    * cur[((src[0] * n + src[1]) * n + src[2]) * n + src[3]];
                            }
                            next[((a * n + b) * n + c) * n + d] = s;
                        }
                    }
                }
            }
            cur = next;
        }
        self.data.iter().zip(&cur).map(|(a, b)| a * b).sum()
    }
}

/// Scalar curvature `g^{jl} Ric_jl`.
pub fn scalar_from_ricci(ric: &DMatrix<f64>, ginv: &DMatrix<f64>) -> f64 {
    ginv.component_mul(ric).sum()
}

/// `|T|² = g^{ik} g^{jl} T_ij T_kl` for a 2-tensor.
pub fn two_tensor_norm_sq(t: &DMatrix<f64>, ginv: &DMatrix<f64>) -> f64 {
    let raised = ginv * t * ginv;
    raised.component_mul(t).sum()
}

/// Curvature data at a single chart point.
#[derive(Debug, Clone)]
pub struct PointCurvature {
    pub metric: DMatrix<f64>,
    pub metric_inv: DMatrix<f64>,
    pub riemann: Riemann,
    pub ricci: DMatrix<f64>,
    pub scalar: f64,
    /// |∇R|; the supported model spaces are locally symmetric, so this is 0.
    pub nabla_riemann_norm: f64,
    /// ΔS (positive Laplacian); 0 on the model spaces.
    pub laplacian_scalar: f64,
}

impl PointCurvature {
    pub fn riemann_norm(&self) -> f64 {
        self.riemann.norm_sq(&self.metric_inv).max(0.0).sqrt()
    }

    pub fn ricci_norm_sq(&self) -> f64 {
        two_tensor_norm_sq(&self.ricci, &self.metric_inv)
    }

    /// First-order heat-kernel defect `A₁ = (1/3)(½S·g − Ric)`.
    pub fn a1(&self) -> DMatrix<f64> {
        (&self.metric * (0.5 * self.scalar) - &self.ricci) / 3.0
    }
}

/// Closed-form curvature of the model backends at a chart point.
pub fn curvature_at(backend: &Backend, x: &[f64]) -> PointCurvature {
    let g = backend.metric(x);
    let n = g.nrows();
    let ginv = g.clone().try_inverse().expect("metric is positive definite");
    let mut riemann = Riemann::zeros(n);
    let mut offset = 0;
    for f in backend.factors() {
        let d = f.dim();
        if let BackendKind::RoundSphere2 { radius } = f.kind() {
            let block = g.view((offset, offset), (d, d)).clone_owned();
            let local = Riemann::constant_curvature(&block, 1.0 / (radius * radius));
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        for l in 0..d {
                            let id = riemann.idx(offset + i, offset + j, offset + k, offset + l);
                            riemann.data[id] = local.get(i, j, k, l);
                        }
                    }
                }
            }
        }
        offset += d;
    }
    let ricci = riemann.ricci(&ginv);
    let scalar = scalar_from_ricci(&ricci, &ginv);
    PointCurvature {
        metric: g,
        metric_inv: ginv,
        riemann,
        ricci,
        scalar,
        nabla_riemann_norm: 0.0,
        laplacian_scalar: 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureNorms {
    /// Grid maximum of |R|.
    pub r_c0: f64,
    /// Grid maximum of |∇R|.
    pub nabla_r_c0: f64,
    /// `r_c0 + nabla_r_c0`: a lower estimate of the true C¹ norm.
    pub r_c1: f64,
}

#[derive(Debug, Clone)]
pub struct CurvatureBundle {
    pub points: Vec<Vec<f64>>,
    pub at: Vec<PointCurvature>,
    pub norms: CurvatureNorms,
}

/// Curvature on the backend's sample grid.
pub fn curvature_bundle(backend: &Backend) -> CurvatureBundle {
    let grid = backend.grid();
    let at: Vec<PointCurvature> = grid.points.iter().map(|x| curvature_at(backend, x)).collect();
    let r_c0 = at.iter().map(|c| c.riemann_norm()).fold(0.0, f64::max);
    let nabla_r_c0 = at.iter().map(|c| c.nabla_riemann_norm).fold(0.0, f64::max);
    CurvatureBundle {
        points: grid.points,
        at,
        norms: CurvatureNorms {
            r_c0,
            nabla_r_c0,
            r_c1: r_c0 + nabla_r_c0,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn symmetries_hold(c: &PointCurvature) {
        let r = &c.riemann;
        let n = r.n;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let v = r.get(i, j, k, l);
                        assert!((v + r.get(j, i, k, l)).abs() < 1e-10);
                        assert!((v - r.get(k, l, i, j)).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn unit_sphere_values() {
        let b = Backend::sphere(1.0).unwrap();
        let bundle = curvature_bundle(&b);
        for c in &bundle.at {
            symmetries_hold(c);
            assert!((c.scalar - 2.0).abs() < 1e-12);
            assert!((&c.ricci - &c.metric).abs().max() < 1e-12);
            assert!((c.riemann.norm_sq(&c.metric_inv) - 4.0).abs() < 1e-10);
            let two_d = &c.ricci - &c.metric * (c.scalar / 2.0);
            assert!(two_d.abs().max() < 1e-10);
        }
        assert!((bundle.norms.r_c0 - 2.0).abs() < 1e-10);
    }

    #[test]
    fn flat_backends_have_zero_curvature() {
        let b = Backend::torus(vec![1.0, 2.0, 3.0]).unwrap();
        let bundle = curvature_bundle(&b.with_uniform_resolution(4).unwrap());
        assert!(bundle.at.iter().all(|c| c.riemann.data.iter().all(|&v| v == 0.0)));
        assert_eq!(bundle.norms.r_c1, 0.0);
    }

    #[test]
    fn product_blocks() {
        let b = Backend::product(vec![Backend::circle(1.0).unwrap(), Backend::sphere(1.0).unwrap()])
            .unwrap();
        let c = curvature_at(&b, &[0.4, 0.9, 2.0]);
        symmetries_hold(&c);
        assert!((c.scalar - 2.0).abs() < 1e-12);
        assert!(c.ricci[(0, 0)].abs() < 1e-15);
        assert!((c.ricci[(1, 1)] - 1.0).abs() < 1e-12);
        let a1 = c.a1();
        assert!((a1[(0, 0)] - 1.0 / 3.0).abs() < 1e-12);
        assert!(a1[(1, 1)].abs() < 1e-12 && a1[(2, 2)].abs() < 1e-12);
    }
}
