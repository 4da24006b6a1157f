use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::quadrature::gauss_legendre;
use crate::error::{Error, Result};
use crate::fourier::PeriodicGrid;

/// Smooth positive periodic weight `w(θ) = mean + Σ a_m cos mθ + b_m sin mθ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierWeight {
    pub mean: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl FourierWeight {
    pub fn constant(c: f64) -> Self {
        FourierWeight {
            mean: c,
            cos: Vec::new(),
            sin: Vec::new(),
        }
    }

    pub fn new(mean: f64, cos: Vec<f64>, sin: Vec<f64>) -> Self {
        FourierWeight { mean, cos, sin }
    }

    /// Highest harmonic present.
    pub fn degree(&self) -> usize {
        self.cos.len().max(self.sin.len())
    }

    /// `order`-th derivative at θ.
    pub fn derivative(&self, theta: f64, order: u32) -> f64 {
        let mut v = if order == 0 { self.mean } else { 0.0 };
        let shift = order as f64 * PI / 2.0;
        for (m, a) in self.cos.iter().enumerate() {
            let k = (m + 1) as f64;
            v += a * k.powi(order as i32) * (k * theta + shift).cos();
        }
        for (m, b) in self.sin.iter().enumerate() {
            let k = (m + 1) as f64;
            v += b * k.powi(order as i32) * (k * theta + shift).sin();
        }
        v
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.derivative(theta, 0)
    }

    /// Antiderivative `W(θ) = ∫₀^θ w`.
    pub fn primitive(&self, theta: f64) -> f64 {
        let mut v = self.mean * theta;
        for (m, a) in self.cos.iter().enumerate() {
            let k = (m + 1) as f64;
            v += a * (k * theta).sin() / k;
        }
        for (m, b) in self.sin.iter().enumerate() {
            let k = (m + 1) as f64;
            v += b * (1.0 - (k * theta).cos()) / k;
        }
        v
    }

    /// Circumference `∫₀^{2π} w`.
    pub fn length(&self) -> f64 {
        2.0 * PI * self.mean
    }

    pub fn scaled(&self, s: f64) -> Self {
        FourierWeight {
            mean: self.mean * s,
            cos: self.cos.iter().map(|a| a * s).collect(),
            sin: self.sin.iter().map(|b| b * s).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BackendKind {
    RoundCircle { radius: f64 },
    ConformalCircle { weight: FourierWeight },
    FlatTorus { sides: Vec<f64> },
    RoundSphere2 { radius: f64 },
    Product(Vec<Backend>),
}

/// A model manifold together with its sample grid.
///
/// Chart conventions: circles use θ ∈ [0, 2π); tori use x_i ∈ [0, L_i) with
/// the identity metric; the sphere uses (colatitude θ, longitude φ); products
/// concatenate factor charts.
#[derive(Debug, Clone, PartialEq)]
pub struct Backend {
    kind: BackendKind,
    resolution: Vec<usize>,
}

/// Sample points with Riemannian quadrature weights.
#[derive(Debug, Clone)]
pub struct SampleGrid {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub shape: Vec<usize>,
}

impl SampleGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

fn wrap_diff(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).rem_euclid(period);
    d.min(period - d)
}

impl Backend {
    pub fn circle(radius: f64) -> Result<Self> {
        positive("circle radius", radius)?;
        Ok(Backend {
            kind: BackendKind::RoundCircle { radius },
            resolution: vec![64],
        })
    }

    pub fn conformal_circle(weight: FourierWeight) -> Result<Self> {
        let probe = 4096;
        for i in 0..probe {
            let th = 2.0 * PI * i as f64 / probe as f64;
            if weight.eval(th) <= 0.0 {
                return Err(Error::Config(format!(
                    "conformal weight is not positive at θ = {th}"
                )));
            }
        }
        Ok(Backend {
            kind: BackendKind::ConformalCircle { weight },
            resolution: vec![64],
        })
    }

    pub fn torus(sides: Vec<f64>) -> Result<Self> {
        if sides.is_empty() {
            return Err(Error::Config("torus needs at least one side".into()));
        }
        for &s in &sides {
            positive("torus side", s)?;
        }
        let n = sides.len();
        Ok(Backend {
            kind: BackendKind::FlatTorus { sides },
            resolution: vec![32; n],
        })
    }

    pub fn sphere(radius: f64) -> Result<Self> {
        positive("sphere radius", radius)?;
        Ok(Backend {
            kind: BackendKind::RoundSphere2 { radius },
            resolution: vec![16, 32],
        })
    }

    pub fn product(factors: Vec<Backend>) -> Result<Self> {
        if factors.len() < 2 {
            return Err(Error::Config("a product needs at least two factors".into()));
        }
        Ok(Backend {
            kind: BackendKind::Product(factors),
            resolution: Vec::new(),
        })
    }

    /// Sets the sample resolution: `[N]` for circles, one entry per axis for
    /// tori, `[n_lat, n_lon]` for the sphere. Products take the concatenation
    /// of their factors' resolutions.
    pub fn with_resolution(mut self, res: &[usize]) -> Result<Self> {
        if res.iter().any(|&r| r == 0) {
            return Err(Error::Config("grid resolution must be positive".into()));
        }
        match &mut self.kind {
            BackendKind::Product(factors) => {
                let mut offset = 0;
                let expected: usize = factors.iter().map(|f| f.resolution_len()).sum();
                if res.len() != expected {
                    return Err(Error::Config(format!(
                        "product grid needs {expected} resolution entries, got {}",
                        res.len()
                    )));
                }
                for f in factors.iter_mut() {
                    let k = f.resolution_len();
                    *f = f.clone().with_resolution(&res[offset..offset + k])?;
                    offset += k;
                }
            }
            _ => {
                if res.len() != self.resolution.len() {
                    return Err(Error::Config(format!(
                        "grid needs {} resolution entries, got {}",
                        self.resolution.len(),
                        res.len()
                    )));
                }
                self.resolution = res.to_vec();
            }
        }
        Ok(self)
    }

    /// Uniform resolution `m` on every periodic axis (the sphere gets
    /// `m/2` latitudes and `m` longitudes).
    pub fn with_uniform_resolution(self, m: usize) -> Result<Self> {
        let res = self.uniform_resolution(m);
        self.with_resolution(&res)
    }

    fn uniform_resolution(&self, m: usize) -> Vec<usize> {
        match &self.kind {
            BackendKind::RoundSphere2 { .. } => vec![(m / 2).max(2), m],
            BackendKind::Product(fs) => fs.iter().flat_map(|f| f.uniform_resolution(m)).collect(),
            _ => vec![m; self.resolution.len()],
        }
    }

    fn resolution_len(&self) -> usize {
        match &self.kind {
            BackendKind::Product(fs) => fs.iter().map(|f| f.resolution_len()).sum(),
            _ => self.resolution.len(),
        }
    }

    pub fn resolution(&self) -> Vec<usize> {
        match &self.kind {
            BackendKind::Product(fs) => fs.iter().flat_map(|f| f.resolution()).collect(),
            _ => self.resolution.clone(),
        }
    }

    pub fn kind(&self) -> &BackendKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            BackendKind::RoundCircle { .. } | BackendKind::ConformalCircle { .. } => 1,
            BackendKind::FlatTorus { sides } => sides.len(),
            BackendKind::RoundSphere2 { .. } => 2,
            BackendKind::Product(fs) => fs.iter().map(|f| f.dim()).sum(),
        }
    }

    /// Short human-readable tag, e.g. `product(circle(r=1),sphere2(r=1))`.
    pub fn label(&self) -> String {
        match &self.kind {
            BackendKind::RoundCircle { radius } => format!("circle(r={radius})"),
            BackendKind::ConformalCircle { weight } => {
                format!("conformal-circle(L={})", weight.length())
            }
            BackendKind::FlatTorus { sides } => format!(
                "torus({})",
                sides.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("x")
            ),
            BackendKind::RoundSphere2 { radius } => format!("sphere2(r={radius})"),
            BackendKind::Product(fs) => format!(
                "product({})",
                fs.iter().map(|f| f.label()).collect::<Vec<_>>().join(",")
            ),
        }
    }

    /// Factors of a product (a single-element slice otherwise).
    pub fn factors(&self) -> Vec<&Backend> {
        match &self.kind {
            BackendKind::Product(fs) => fs.iter().flat_map(|f| f.factors()).collect(),
            _ => vec![self],
        }
    }

    /// Zero curvature (circles, tori, and products of them).
    pub fn is_flat(&self) -> bool {
        self.factors()
            .iter()
            .all(|f| !matches!(f.kind, BackendKind::RoundSphere2 { .. }))
    }

    /// Constant diagonal metric with periodic chart (round circles, tori and
    /// their products). Returns the frame scale per chart axis: frame
    /// coordinate = scale × chart coordinate.
    pub fn frame_scales(&self) -> Option<Vec<f64>> {
        let mut out = Vec::new();
        for f in self.factors() {
            match &f.kind {
                BackendKind::RoundCircle { radius } => out.push(*radius),
                BackendKind::FlatTorus { sides } => out.extend(std::iter::repeat_n(1.0, sides.len())),
                _ => return None,
            }
        }
        Some(out)
    }

    /// Periodic grid in frame (arclength) units, when the chart is flat.
    pub fn periodic_grid(&self) -> Option<PeriodicGrid> {
        let scales = self.frame_scales()?;
        let mut lengths = Vec::new();
        for f in self.factors() {
            match &f.kind {
                BackendKind::RoundCircle { .. } => lengths.push(2.0 * PI),
                BackendKind::FlatTorus { sides } => lengths.extend(sides.iter().copied()),
                _ => return None,
            }
        }
        let lengths = lengths.iter().zip(&scales).map(|(l, s)| l * s).collect();
        Some(PeriodicGrid::new(self.resolution(), lengths))
    }

    pub fn metric(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let mut g = DMatrix::zeros(n, n);
        let mut offset = 0;
        for f in self.factors() {
            let d = f.dim();
            let xs = &x[offset..offset + d];
            match &f.kind {
                BackendKind::RoundCircle { radius } => g[(offset, offset)] = radius * radius,
                BackendKind::ConformalCircle { weight } => {
                    g[(offset, offset)] = weight.eval(xs[0]).powi(2)
                }
                BackendKind::FlatTorus { .. } => {
                    for i in 0..d {
                        g[(offset + i, offset + i)] = 1.0;
                    }
                }
                BackendKind::RoundSphere2 { radius } => {
                    let r2 = radius * radius;
                    g[(offset, offset)] = r2;
                    g[(offset + 1, offset + 1)] = r2 * xs[0].sin().powi(2);
                }
                BackendKind::Product(_) => unreachable!("factors are atomic"),
            }
            offset += d;
        }
        g
    }

    /// Christoffel symbols Γ^k_ij, flat index `(k·n + i)·n + j`.
    pub fn christoffel(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut c = vec![0.0; n * n * n];
        let idx = |k: usize, i: usize, j: usize| (k * n + i) * n + j;
        let mut offset = 0;
        for f in self.factors() {
            let d = f.dim();
            let o = offset;
            match &f.kind {
                BackendKind::ConformalCircle { weight } => {
                    let th = x[o];
                    c[idx(o, o, o)] = weight.derivative(th, 1) / weight.eval(th);
                }
                BackendKind::RoundSphere2 { .. } => {
                    let th = x[o];
                    let (s, co) = th.sin_cos();
                    c[idx(o, o + 1, o + 1)] = -s * co;
                    c[idx(o + 1, o, o + 1)] = co / s;
                    c[idx(o + 1, o + 1, o)] = co / s;
                }
                _ => {}
            }
            offset += d;
        }
        c
    }

    /// Exact Riemannian volume.
    pub fn volume(&self) -> f64 {
        match &self.kind {
            BackendKind::RoundCircle { radius } => 2.0 * PI * radius,
            BackendKind::ConformalCircle { weight } => weight.length(),
            BackendKind::FlatTorus { sides } => sides.iter().product(),
            BackendKind::RoundSphere2 { radius } => 4.0 * PI * radius * radius,
            BackendKind::Product(fs) => fs.iter().map(|f| f.volume()).product(),
        }
    }

    pub fn injectivity_radius(&self) -> f64 {
        match &self.kind {
            BackendKind::RoundCircle { radius } => PI * radius,
            BackendKind::ConformalCircle { weight } => weight.length() / 2.0,
            BackendKind::FlatTorus { sides } => sides.iter().cloned().fold(f64::INFINITY, f64::min) / 2.0,
            BackendKind::RoundSphere2 { radius } => PI * radius,
            BackendKind::Product(fs) => fs
                .iter()
                .map(|f| f.injectivity_radius())
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Closed-form geodesic distance between chart points.
    pub fn geodesic_distance(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.kind {
            BackendKind::RoundCircle { radius } => radius * wrap_diff(x[0], y[0], 2.0 * PI),
            BackendKind::ConformalCircle { weight } => {
                let l = weight.length();
                let a = (weight.primitive(x[0].rem_euclid(2.0 * PI))
                    - weight.primitive(y[0].rem_euclid(2.0 * PI)))
                .abs();
                let a = a.rem_euclid(l);
                a.min(l - a)
            }
            BackendKind::FlatTorus { sides } => sides
                .iter()
                .enumerate()
                .map(|(i, &l)| wrap_diff(x[i], y[i], l).powi(2))
                .sum::<f64>()
                .sqrt(),
            BackendKind::RoundSphere2 { radius } => {
                let u = sphere_unit(x[0], x[1]);
                let v = sphere_unit(y[0], y[1]);
                let dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
                let cross = [
                    u[1] * v[2] - u[2] * v[1],
                    u[2] * v[0] - u[0] * v[2],
                    u[0] * v[1] - u[1] * v[0],
                ];
                let cn = (cross[0].powi(2) + cross[1].powi(2) + cross[2].powi(2)).sqrt();
                radius * cn.atan2(dot)
            }
            BackendKind::Product(fs) => {
                let mut offset = 0;
                let mut sum = 0.0;
                for f in fs {
                    let d = f.dim();
                    sum += f
                        .geodesic_distance(&x[offset..offset + d], &y[offset..offset + d])
                        .powi(2);
                    offset += d;
                }
                sum.sqrt()
            }
        }
    }

    /// Sample grid with quadrature weights integrating 1 to the volume.
    pub fn grid(&self) -> SampleGrid {
        match &self.kind {
            BackendKind::RoundCircle { radius } => {
                let n = self.resolution[0];
                let points: Vec<Vec<f64>> =
                    (0..n).map(|i| vec![2.0 * PI * i as f64 / n as f64]).collect();
                let weights = vec![2.0 * PI * radius / n as f64; n];
                SampleGrid {
                    points,
                    weights,
                    shape: vec![n],
                }
            }
            BackendKind::ConformalCircle { weight } => {
                let n = self.resolution[0];
                let points: Vec<Vec<f64>> =
                    (0..n).map(|i| vec![2.0 * PI * i as f64 / n as f64]).collect();
                let weights = points
                    .iter()
                    .map(|p| weight.eval(p[0]) * 2.0 * PI / n as f64)
                    .collect();
                SampleGrid {
                    points,
                    weights,
                    shape: vec![n],
                }
            }
            BackendKind::FlatTorus { sides } => {
                let shape = self.resolution.clone();
                let total: usize = shape.iter().product();
                let cell: f64 = sides.iter().zip(&shape).map(|(l, &m)| l / m as f64).product();
                let points = (0..total)
                    .map(|mut p| {
                        let mut x = vec![0.0; shape.len()];
                        for a in (0..shape.len()).rev() {
                            x[a] = sides[a] * (p % shape[a]) as f64 / shape[a] as f64;
                            p /= shape[a];
                        }
                        x
                    })
                    .collect();
                SampleGrid {
                    points,
                    weights: vec![cell; total],
                    shape,
                }
            }
            BackendKind::RoundSphere2 { radius } => {
                let (nlat, nlon) = (self.resolution[0], self.resolution[1]);
                let (nodes, w) = gauss_legendre(nlat);
                let mut points = Vec::with_capacity(nlat * nlon);
                let mut weights = Vec::with_capacity(nlat * nlon);
                // Ascending colatitude: node cos θ descending.
                for a in (0..nlat).rev() {
                    let theta = nodes[a].acos();
                    for b in 0..nlon {
                        points.push(vec![theta, 2.0 * PI * b as f64 / nlon as f64]);
                        weights.push(radius * radius * w[a] * 2.0 * PI / nlon as f64);
                    }
                }
                SampleGrid {
                    points,
                    weights,
                    shape: vec![nlat, nlon],
                }
            }
            BackendKind::Product(fs) => {
                let mut acc = SampleGrid {
                    points: vec![Vec::new()],
                    weights: vec![1.0],
                    shape: Vec::new(),
                };
                for f in fs {
                    let g = f.grid();
                    let mut points = Vec::with_capacity(acc.len() * g.len());
                    let mut weights = Vec::with_capacity(acc.len() * g.len());
                    for (p, w) in acc.points.iter().zip(&acc.weights) {
                        for (q, v) in g.points.iter().zip(&g.weights) {
                            let mut x = p.clone();
                            x.extend_from_slice(q);
                            points.push(x);
                            weights.push(w * v);
                        }
                    }
                    acc.shape.extend_from_slice(&g.shape);
                    acc.points = points;
                    acc.weights = weights;
                }
                acc
            }
        }
    }
}

pub(crate) fn sphere_unit(theta: f64, phi: f64) -> [f64; 3] {
    let (s, c) = theta.sin_cos();
    [s * phi.cos(), s * phi.sin(), c]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn volume_check(b: &Backend) {
        let g = b.grid();
        let q: f64 = g.weights.iter().sum();
        assert!((q - b.volume()).abs() <= 1e-10 * b.volume(), "{}", b.label());
    }

    #[test]
    fn quadrature_weights_integrate_volume() {
        volume_check(&Backend::circle(1.7).unwrap());
        volume_check(&Backend::torus(vec![2.0 * PI, 3.0]).unwrap());
        volume_check(&Backend::sphere(2.0).unwrap());
        volume_check(
            &Backend::conformal_circle(FourierWeight::new(1.0, vec![0.3], vec![0.1])).unwrap(),
        );
        volume_check(
            &Backend::product(vec![Backend::circle(1.0).unwrap(), Backend::sphere(1.0).unwrap()])
                .unwrap(),
        );
    }

    #[test]
    fn distance_examples() {
        let c = Backend::circle(1.0).unwrap();
        assert!((c.geodesic_distance(&[0.0], &[PI]) - PI).abs() < 1e-15);
        let t = Backend::torus(vec![2.0 * PI, 2.0 * PI]).unwrap();
        assert!((t.geodesic_distance(&[0.0, 0.0], &[1.5 * PI, 0.0]) - PI / 2.0).abs() < 1e-14);
        let s = Backend::sphere(1.0).unwrap();
        assert!((s.geodesic_distance(&[0.0, 0.0], &[PI / 2.0, 1.0]) - PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn conformal_distance_uses_arclength() {
        let w = FourierWeight::new(1.0, vec![0.3], vec![]);
        let b = Backend::conformal_circle(w.clone()).unwrap();
        let d = b.geodesic_distance(&[0.0], &[1.0]);
        assert!((d - (1.0 + 0.3 * 1.0f64.sin())).abs() < 1e-14);
    }

    #[test]
    fn nonpositive_weight_rejected() {
        let w = FourierWeight::new(1.0, vec![1.2], vec![]);
        assert!(Backend::conformal_circle(w).is_err());
    }

    #[test]
    fn product_metric_is_block_diagonal() {
        let b = Backend::product(vec![Backend::circle(2.0).unwrap(), Backend::sphere(1.0).unwrap()])
            .unwrap();
        let g = b.metric(&[0.3, 1.0, 0.2]);
        assert_eq!(g[(0, 0)], 4.0);
        assert_eq!(g[(1, 1)], 1.0);
        assert!((g[(2, 2)] - 1.0f64.sin().powi(2)).abs() < 1e-15);
        assert_eq!(g[(0, 1)], 0.0);
    }
}
