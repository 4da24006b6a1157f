//! Laplace–Beltrami eigenbases: closed form for model backends, Galerkin for
//! conformal circles, plus truncation and tail utilities.

mod galerkin;
mod jets;
mod sphere;
mod truncation;

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;

pub use galerkin::{fourier_basis, GalerkinCircleConfig};
pub use jets::{ModeJets, MultiIndexTable};
pub use sphere::{legendre_series, longitude_factor, LegendreSeries, SPHERE_MAX_DEGREE};
pub use truncation::{tail_weight, truncation_dim, weyl_constants, TailWeight, TruncationDim};

use crate::error::{Error, Result};
use crate::geometry::{Backend, BackendKind, FourierWeight};

/// Identity of an eigenfunction within its backend.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModeLabel {
    Constant,
    /// `cos kθ` or `sin kθ` (also used for conformal-circle Galerkin modes,
    /// where `k` is the cluster's harmonic index).
    Circle { k: u64, sine: bool },
    /// `cos(ω·x)` or `sin(ω·x)` with `ω_i = 2πk_i/L_i`; the first nonzero
    /// frequency component is positive.
    Torus { freq: Vec<i64>, sine: bool },
    /// Real spherical harmonic; `m > 0` ↦ cos mφ, `m < 0` ↦ sin |m|φ.
    Sphere { l: u32, m: i32 },
    /// Galerkin eigenvector number (constant mode = 0).
    Galerkin { index: usize },
    /// Index into each factor basis (factor bases contain their constant).
    Product(Vec<usize>),
}

impl ModeLabel {
    /// Tie-breaking key inside an eigenspace: lexicographic in frequency,
    /// cosine before sine.
    fn order_key(&self) -> Vec<i64> {
        match self {
            ModeLabel::Constant => vec![],
            ModeLabel::Circle { k, sine } => vec![*k as i64, *sine as i64],
            ModeLabel::Torus { freq, sine } => {
                let mut v = freq.clone();
                v.push(*sine as i64);
                v
            }
            ModeLabel::Sphere { l, m } => vec![*l as i64, m.unsigned_abs() as i64, (*m < 0) as i64],
            ModeLabel::Galerkin { index } => vec![*index as i64],
            ModeLabel::Product(ix) => ix.iter().map(|&i| i as i64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenEntry {
    /// Position in the basis (0-based; the constant mode, when present, is 0).
    pub index: usize,
    pub lambda: f64,
    /// Size of the eigenspace cluster this entry belongs to.
    pub multiplicity: usize,
    pub label: ModeLabel,
}

/// How many eigenpairs to generate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BasisSize {
    /// Exactly this many non-constant entries.
    Count(usize),
    /// At least this many non-constant entries, completed to a full eigenspace.
    Clusters(usize),
    /// Every eigenpair with `λ ≤ cutoff`.
    Cutoff(f64),
}

#[derive(Debug, Clone)]
enum Evaluator {
    Circle { radius: f64 },
    Torus { sides: Vec<f64> },
    Sphere { radius: f64, series: Vec<Arc<LegendreSeries>>, lmax: usize },
    Galerkin { coeffs: DMatrix<f64> },
    Product { factors: Vec<SpectralBasis>, offsets: Vec<usize> },
}

/// Ordered eigenpairs `(λ_j, φ_j)` with pointwise jets up to order 3.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    backend: Backend,
    entries: Vec<EigenEntry>,
    has_constant: bool,
    eval: Evaluator,
    warnings: Vec<String>,
}

const CLUSTER_TOL: f64 = 1e-9;

fn same_cluster(a: f64, b: f64) -> bool {
    (a - b).abs() <= CLUSTER_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Sorts `(λ, label)` pairs by eigenvalue, groups clusters, orders each cluster
/// by label key and fills indices/multiplicities.
fn order_entries(mut raw: Vec<(f64, ModeLabel)>) -> Vec<EigenEntry> {
    raw.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.order_key().cmp(&b.1.order_key())));
    let mut out = Vec::with_capacity(raw.len());
    let mut start = 0;
    while start < raw.len() {
        let mut end = start + 1;
        while end < raw.len() && same_cluster(raw[end].0, raw[start].0) {
            end += 1;
        }
        let mut cluster: Vec<(f64, ModeLabel)> = raw[start..end].to_vec();
        cluster.sort_by(|a, b| a.1.order_key().cmp(&b.1.order_key()));
        let mult = end - start;
        for (lambda, label) in cluster {
            out.push(EigenEntry {
                index: out.len(),
                lambda,
                multiplicity: mult,
                label,
            });
        }
        start = end;
    }
    out
}

/// Keeps entries according to `size`; the constant mode is not counted.
fn select(entries: Vec<EigenEntry>, size: BasisSize, has_constant: bool) -> Vec<EigenEntry> {
    let skip = has_constant as usize;
    let keep = match size {
        BasisSize::Count(q) => (q + skip).min(entries.len()),
        BasisSize::Clusters(q) => {
            let mut k = (q + skip).min(entries.len());
            while k > 0 && k < entries.len() && same_cluster(entries[k].lambda, entries[k - 1].lambda) {
                k += 1;
            }
            k
        }
        BasisSize::Cutoff(c) => entries
            .iter()
            .take_while(|e| e.lambda <= c * (1.0 + 1e-12) + 1e-12)
            .count(),
    };
    let mut kept: Vec<EigenEntry> = entries.into_iter().take(keep).collect();
    // Multiplicities are those of the complete clusters.
    for (i, e) in kept.iter_mut().enumerate() {
        e.index = i;
    }
    kept
}

/// Candidate modes with `λ ≤ bound` of an atomic analytic backend.
fn atomic_modes(backend: &Backend, bound: f64) -> Vec<(f64, ModeLabel)> {
    let mut out = Vec::new();
    match backend.kind() {
        BackendKind::RoundCircle { radius } => {
            out.push((0.0, ModeLabel::Constant));
            let kmax = (radius * bound.max(0.0).sqrt()).floor() as u64;
            for k in 1..=kmax {
                let lambda = (k * k) as f64 / (radius * radius);
                out.push((lambda, ModeLabel::Circle { k, sine: false }));
                out.push((lambda, ModeLabel::Circle { k, sine: true }));
            }
        }
        BackendKind::FlatTorus { sides } => {
            out.push((0.0, ModeLabel::Constant));
            let n = sides.len();
            let kmax: Vec<i64> = sides
                .iter()
                .map(|l| (l * bound.max(0.0).sqrt() / (2.0 * PI)).floor() as i64)
                .collect();
            let mut freq = vec![0i64; n];
            torus_enumerate(sides, &kmax, bound, 0, &mut freq, &mut out);
        }
        BackendKind::RoundSphere2 { radius } => {
            out.push((0.0, ModeLabel::Constant));
            let mut l = 1u32;
            loop {
                let lambda = (l as f64) * (l as f64 + 1.0) / (radius * radius);
                if lambda > bound || l as usize > SPHERE_MAX_DEGREE {
                    break;
                }
                out.push((lambda, ModeLabel::Sphere { l, m: 0 }));
                for m in 1..=l as i32 {
                    out.push((lambda, ModeLabel::Sphere { l, m }));
                    out.push((lambda, ModeLabel::Sphere { l, m: -m }));
                }
                l += 1;
            }
        }
        _ => unreachable!("atomic analytic backends only"),
    }
    out
}

fn torus_enumerate(
    sides: &[f64],
    kmax: &[i64],
    bound: f64,
    axis: usize,
    freq: &mut Vec<i64>,
    out: &mut Vec<(f64, ModeLabel)>,
) {
    if axis == sides.len() {
        let first = freq.iter().find(|&&k| k != 0);
        if let Some(&f) = first {
            if f > 0 {
                let lambda: f64 = freq
                    .iter()
                    .zip(sides)
                    .map(|(&k, l)| (2.0 * PI * k as f64 / l).powi(2))
                    .sum();
                if lambda <= bound * (1.0 + 1e-12) {
                    out.push((lambda, ModeLabel::Torus { freq: freq.clone(), sine: false }));
                    out.push((lambda, ModeLabel::Torus { freq: freq.clone(), sine: true }));
                }
            }
        }
        return;
    }
    for k in -kmax[axis]..=kmax[axis] {
        freq[axis] = k;
        torus_enumerate(sides, kmax, bound, axis + 1, freq, out);
    }
    freq[axis] = 0;
}

fn max_sphere_degree(entries: &[EigenEntry]) -> usize {
    entries
        .iter()
        .filter_map(|e| match e.label {
            ModeLabel::Sphere { l, .. } => Some(l as usize),
            _ => None,
        })
        .max()
        .unwrap_or(0)
}

impl SpectralBasis {
    /// Analytic eigenbasis (model backends; conformal circles are delegated
    /// to the Galerkin solver with its default cutoff).
    pub fn analytic(backend: &Backend, size: BasisSize, include_constant: bool) -> Result<Self> {
        if let BasisSize::Cutoff(c) = size {
            if !(c >= 0.0) {
                return Err(Error::Parameter(format!("eigenvalue cutoff must be ≥ 0, got {c}")));
            }
        }
        match backend.kind() {
            BackendKind::ConformalCircle { weight } => {
                let count = match size {
                    BasisSize::Count(q) | BasisSize::Clusters(q) => q + 1,
                    BasisSize::Cutoff(c) => {
                        // Isometric to the round circle of the same length.
                        let kmax = (weight.length() / (2.0 * PI) * c.sqrt()).floor() as usize;
                        2 * kmax + 1
                    }
                };
                let cfg = GalerkinCircleConfig::new(weight.clone(), count);
                let full = Self::galerkin(backend.clone(), &cfg)?;
                let entries = select(
                    full.entries.iter().skip(1).cloned().collect(),
                    size,
                    false,
                );
                let q = entries.len();
                let basis = full.restrict(1, q)?;
                if include_constant {
                    return Self::galerkin(backend.clone(), &cfg)?.restrict(0, q + 1);
                }
                Ok(basis)
            }
            BackendKind::Product(factors) => Self::product(backend, factors, size, include_constant),
            _ => {
                let mut bound = match size {
                    BasisSize::Cutoff(c) => c,
                    _ => 1.0 / backend.injectivity_radius().powi(2),
                };
                loop {
                    let raw = atomic_modes(backend, bound);
                    let enough = match size {
                        BasisSize::Cutoff(_) => true,
                        BasisSize::Count(q) | BasisSize::Clusters(q) => raw.len() > q + 1,
                    };
                    let capped = matches!(backend.kind(), BackendKind::RoundSphere2 { .. })
                        && raw.iter().any(|(_, l)| matches!(l, ModeLabel::Sphere { l, .. } if *l as usize == SPHERE_MAX_DEGREE));
                    if enough || capped {
                        let mut warnings = Vec::new();
                        if capped && !enough {
                            warnings.push(format!(
                                "requested basis exceeds harmonic tables (degree ≤ {SPHERE_MAX_DEGREE}); capped at {} entries",
                                raw.len() - 1
                            ));
                        }
                        let mut entries = order_entries(raw);
                        if !include_constant {
                            entries.retain(|e| e.label != ModeLabel::Constant);
                        }
                        let entries = select(entries, size, include_constant);
                        return Ok(Self::assemble(backend, entries, include_constant, warnings));
                    }
                    bound *= 2.0;
                }
            }
        }
    }

    fn assemble(backend: &Backend, entries: Vec<EigenEntry>, has_constant: bool, warnings: Vec<String>) -> Self {
        let eval = match backend.kind() {
            BackendKind::RoundCircle { radius } => Evaluator::Circle { radius: *radius },
            BackendKind::FlatTorus { sides } => Evaluator::Torus { sides: sides.clone() },
            BackendKind::RoundSphere2 { radius } => {
                let lmax = max_sphere_degree(&entries);
                let table = legendre_series(lmax);
                let series = entries
                    .iter()
                    .map(|e| match e.label {
                        ModeLabel::Sphere { l, m } => {
                            Arc::new(table[l as usize][m.unsigned_abs() as usize].clone())
                        }
                        _ => Arc::new(table[0][0].clone()),
                    })
                    .collect();
                Evaluator::Sphere { radius: *radius, series, lmax }
            }
            _ => unreachable!(),
        };
        SpectralBasis {
            backend: backend.clone(),
            entries,
            has_constant,
            eval,
            warnings,
        }
    }

    fn product(
        backend: &Backend,
        factors: &[Backend],
        size: BasisSize,
        include_constant: bool,
    ) -> Result<Self> {
        let mut bound = match size {
            BasisSize::Cutoff(c) => c,
            _ => 1.0 / backend.injectivity_radius().powi(2),
        };
        loop {
            let fbases: Vec<SpectralBasis> = factors
                .iter()
                .map(|f| SpectralBasis::analytic(f, BasisSize::Cutoff(bound), true))
                .collect::<Result<_>>()?;
            let mut raw = Vec::new();
            let mut idx = vec![0usize; fbases.len()];
            product_enumerate(&fbases, bound, 0, 0.0, &mut idx, &mut raw);
            let enough = match size {
                BasisSize::Cutoff(_) => true,
                BasisSize::Count(q) | BasisSize::Clusters(q) => raw.len() > q + 1,
            };
            if enough {
                let mut entries = order_entries(raw);
                if !include_constant {
                    entries.retain(|e| e.label.order_key().iter().any(|&i| i != 0));
                } else {
                    // The all-constant product is the constant mode.
                    for e in entries.iter_mut() {
                        if e.label.order_key().iter().all(|&i| i == 0) {
                            e.label = ModeLabel::Constant;
                        }
                    }
                }
                let entries = select(entries, size, include_constant);
                let mut offsets = Vec::new();
                let mut o = 0;
                for f in factors {
                    offsets.push(o);
                    o += f.dim();
                }
                let warnings = fbases.iter().flat_map(|b| b.warnings.clone()).collect();
                return Ok(SpectralBasis {
                    backend: backend.clone(),
                    entries,
                    has_constant: include_constant,
                    eval: Evaluator::Product { factors: fbases, offsets },
                    warnings,
                });
            }
            bound *= 2.0;
        }
    }

    /// Galerkin basis of a conformal circle, constant mode included at index 0.
    fn galerkin(backend: Backend, cfg: &GalerkinCircleConfig) -> Result<Self> {
        let sol = galerkin::solve(cfg)?;
        let mut entries = Vec::with_capacity(sol.lambdas.len());
        let mut start = 0;
        let lam = &sol.lambdas;
        while start < lam.len() {
            let mut end = start + 1;
            while end < lam.len() && (lam[end] - lam[start]).abs() <= 1e-7 * lam[start].max(1.0) {
                end += 1;
            }
            for i in start..end {
                entries.push(EigenEntry {
                    index: i,
                    lambda: lam[i],
                    multiplicity: end - start,
                    label: if i == 0 {
                        ModeLabel::Constant
                    } else {
                        ModeLabel::Galerkin { index: i }
                    },
                });
            }
            start = end;
        }
        Ok(SpectralBasis {
            backend,
            entries,
            has_constant: true,
            eval: Evaluator::Galerkin { coeffs: sol.coeffs },
            warnings: Vec::new(),
        })
    }

    /// Sub-basis of `len` consecutive entries starting at `start`.
    fn restrict(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.entries.len() {
            return Err(Error::Parameter(format!(
                "basis holds {} entries, requested {}..{}",
                self.entries.len(),
                start,
                start + len
            )));
        }
        let mut entries: Vec<EigenEntry> = self.entries[start..start + len].to_vec();
        for (i, e) in entries.iter_mut().enumerate() {
            e.index = i;
        }
        let eval = match &self.eval {
            Evaluator::Sphere { radius, series, lmax } => Evaluator::Sphere {
                radius: *radius,
                series: series[start..start + len].to_vec(),
                lmax: *lmax,
            },
            Evaluator::Galerkin { coeffs } => Evaluator::Galerkin {
                coeffs: coeffs.columns(start, len).clone_owned(),
            },
            other => other.clone(),
        };
        Ok(SpectralBasis {
            backend: self.backend.clone(),
            entries,
            has_constant: self.has_constant && start == 0,
            eval,
            warnings: self.warnings.clone(),
        })
    }

    /// The first `q` non-constant entries (constant mode dropped).
    pub fn truncated(&self, q: usize) -> Result<Self> {
        let skip = self.has_constant as usize;
        self.restrict(skip, q)
    }

    /// Galerkin eigenbasis (constant mode excluded).
    pub fn galerkin_circle(cfg: &GalerkinCircleConfig) -> Result<Self> {
        let backend = Backend::conformal_circle(cfg.weight.clone())?;
        let full = Self::galerkin(backend, cfg)?;
        full.restrict(1, cfg.count)
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn entries(&self) -> &[EigenEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn has_constant(&self) -> bool {
        self.has_constant
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.lambda).collect()
    }

    /// Smallest index `≥ q` that ends an eigenspace (counted without the
    /// constant mode).
    pub fn cluster_end(&self, q: usize) -> Result<usize> {
        let skip = self.has_constant as usize;
        let avail = self.entries.len() - skip;
        if q > avail {
            return Err(Error::Parameter(format!(
                "truncation q = {q} exceeds available basis size {avail}; build a basis with at least {q} entries"
            )));
        }
        let mut k = q;
        while k > 0 && k < avail && same_cluster(self.entries[k + skip].lambda, self.entries[k - 1 + skip].lambda) {
            k += 1;
        }
        Ok(k)
    }

    /// Chart partial derivatives of all entries at `x`, up to `order ≤ 3`.
    pub fn jets(&self, x: &[f64], order: usize) -> ModeJets {
        let n = self.backend.dim();
        let table = Arc::new(MultiIndexTable::new(n, order));
        self.jets_with(x, table)
    }

    pub fn jets_with(&self, x: &[f64], table: Arc<MultiIndexTable>) -> ModeJets {
        let q = self.entries.len();
        let mut out = ModeJets::zeros(table.clone(), q);
        match &self.eval {
            Evaluator::Circle { radius } => {
                let amp = 1.0 / (PI * radius).sqrt();
                let amp0 = 1.0 / (2.0 * PI * radius).sqrt();
                for (j, e) in self.entries.iter().enumerate() {
                    for (id, t) in table.tuples().iter().enumerate() {
                        let o = t.len();
                        out.data[id * q + j] = match &e.label {
                            ModeLabel::Constant => {
                                if o == 0 {
                                    amp0
                                } else {
                                    0.0
                                }
                            }
                            ModeLabel::Circle { k, sine } => {
                                let kf = *k as f64;
                                let arg = kf * x[0] + o as f64 * PI / 2.0;
                                amp * kf.powi(o as i32) * if *sine { arg.sin() } else { arg.cos() }
                            }
                            _ => unreachable!(),
                        };
                    }
                }
            }
            Evaluator::Torus { sides } => {
                let vol: f64 = sides.iter().product();
                let amp = (2.0 / vol).sqrt();
                let amp0 = 1.0 / vol.sqrt();
                for (j, e) in self.entries.iter().enumerate() {
                    match &e.label {
                        ModeLabel::Constant => out.data[j] = amp0,
                        ModeLabel::Torus { freq, sine } => {
                            let omega: Vec<f64> = freq
                                .iter()
                                .zip(sides)
                                .map(|(&k, l)| 2.0 * PI * k as f64 / l)
                                .collect();
                            let phase: f64 = omega.iter().zip(x).map(|(w, xi)| w * xi).sum();
                            for (id, t) in table.tuples().iter().enumerate() {
                                let o = t.len();
                                let pre: f64 = t.iter().map(|&a| omega[a]).product();
                                let arg = phase + o as f64 * PI / 2.0;
                                out.data[id * q + j] =
                                    amp * pre * if *sine { arg.sin() } else { arg.cos() };
                            }
                        }
                        _ => unreachable!(),
                    }
                }
            }
            Evaluator::Sphere { radius, series, lmax } => {
                let (theta, phi) = (x[0], x[1]);
                let cs: Vec<f64> = (0..=*lmax).map(|s| (s as f64 * theta).cos()).collect();
                let sn: Vec<f64> = (0..=*lmax).map(|s| (s as f64 * theta).sin()).collect();
                let max_order = table.order();
                for (j, e) in self.entries.iter().enumerate() {
                    let m = match e.label {
                        ModeLabel::Sphere { m, .. } => m,
                        ModeLabel::Constant => 0,
                        _ => unreachable!(),
                    };
                    let lat: Vec<f64> = (0..=max_order)
                        .map(|o| series[j].derivative(o, &cs, &sn) / radius)
                        .collect();
                    let lon: Vec<f64> = (0..=max_order).map(|o| longitude_factor(m, o, phi)).collect();
                    for (id, t) in table.tuples().iter().enumerate() {
                        let a = t.iter().filter(|&&i| i == 0).count();
                        let b = t.len() - a;
                        out.data[id * q + j] = lat[a] * lon[b];
                    }
                }
            }
            Evaluator::Galerkin { coeffs } => {
                let dim = coeffs.nrows();
                let max_order = table.order();
                let basis: Vec<Vec<f64>> = (0..=max_order)
                    .map(|o| (0..dim).map(|b| fourier_basis(b, o, x[0])).collect())
                    .collect();
                for j in 0..q {
                    let col = coeffs.column(j);
                    for (id, t) in table.tuples().iter().enumerate() {
                        let o = t.len();
                        out.data[id * q + j] = col.iter().zip(&basis[o]).map(|(c, b)| c * b).sum();
                    }
                }
            }
            Evaluator::Product { factors, offsets } => {
                let order = table.order();
                let fjets: Vec<ModeJets> = factors
                    .iter()
                    .zip(offsets)
                    .map(|(f, &o)| f.jets(&x[o..o + f.backend.dim()], order))
                    .collect();
                // For each product multi-index, the local id inside each factor.
                let split: Vec<Vec<usize>> = table
                    .tuples()
                    .iter()
                    .map(|t| {
                        factors
                            .iter()
                            .zip(offsets)
                            .zip(&fjets)
                            .map(|((f, &o), fj)| {
                                let d = f.backend.dim();
                                let local: Vec<usize> =
                                    t.iter().filter(|&&i| i >= o && i < o + d).map(|&i| i - o).collect();
                                fj.table.id(&local)
                            })
                            .collect()
                    })
                    .collect();
                for (j, e) in self.entries.iter().enumerate() {
                    let ix: Vec<usize> = match &e.label {
                        ModeLabel::Product(ix) => ix.clone(),
                        ModeLabel::Constant => vec![0; factors.len()],
                        _ => unreachable!(),
                    };
                    for (id, locals) in split.iter().enumerate() {
                        let mut v = 1.0;
                        for (f, (&lid, fj)) in locals.iter().zip(&fjets).enumerate() {
                            v *= fj.data[lid * fj.q + ix[f]];
                        }
                        out.data[id * q + j] = v;
                    }
                }
            }
        }
        out
    }

    /// Function values of all entries at `x`.
    pub fn values(&self, x: &[f64]) -> Vec<f64> {
        self.jets(x, 0).data
    }

    /// Sup over the sample grid of |Δφ_j − λ_jφ_j| per entry.
    pub fn laplacian_residuals(&self) -> Vec<f64> {
        let grid = self.backend.grid();
        let n = self.backend.dim();
        let table = Arc::new(MultiIndexTable::new(n, 2));
        let mut res = vec![0.0f64; self.entries.len()];
        for x in &grid.points {
            let jets = self.jets_with(x, table.clone());
            let g = self.backend.metric(x);
            let ginv = g.try_inverse().expect("metric invertible");
            let gam = self.backend.christoffel(x);
            for (j, e) in self.entries.iter().enumerate() {
                let mut lap = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        if ginv[(a, b)] == 0.0 {
                            continue;
                        }
                        let mut h = jets.data[table.id(&[a, b]) * jets.q + j];
                        for k in 0..n {
                            h -= gam[(k * n + a) * n + b] * jets.data[table.id(&[k]) * jets.q + j];
                        }
                        lap -= ginv[(a, b)] * h;
                    }
                }
                let r = (lap - e.lambda * jets.data[j]).abs();
                res[j] = res[j].max(r);
            }
        }
        res
    }

    /// Quadrature Gram matrix of the first `count` entries.
    pub fn gram(&self, count: usize) -> DMatrix<f64> {
        let count = count.min(self.entries.len());
        let grid = self.backend.grid();
        let mut g = DMatrix::zeros(count, count);
        for (x, w) in grid.points.iter().zip(&grid.weights) {
            let v = self.values(x);
            for a in 0..count {
                for b in a..count {
                    g[(a, b)] += w * v[a] * v[b];
                }
            }
        }
        for a in 0..count {
            for b in 0..a {
                g[(a, b)] = g[(b, a)];
            }
        }
        g
    }
}

fn product_enumerate(
    fbases: &[SpectralBasis],
    bound: f64,
    f: usize,
    acc: f64,
    idx: &mut Vec<usize>,
    out: &mut Vec<(f64, ModeLabel)>,
) {
    if f == fbases.len() {
        out.push((acc, ModeLabel::Product(idx.clone())));
        return;
    }
    for (i, e) in fbases[f].entries.iter().enumerate() {
        let s = acc + e.lambda;
        if s > bound * (1.0 + 1e-12) {
            break;
        }
        idx[f] = i;
        product_enumerate(fbases, bound, f + 1, s, idx, out);
    }
    idx[f] = 0;
}

/// Closed-form basis of an analytic backend with `count` entries.
pub fn analytic_basis(backend: &Backend, count: usize) -> Result<SpectralBasis> {
    SpectralBasis::analytic(backend, BasisSize::Count(count), false)
}

/// Galerkin eigenbasis of the conformal circle `w²dθ²`.
///
/// Fails with an accuracy error (reporting the measured eigen-residual) when
/// the cutoff is below four harmonics per requested pair.
pub fn galerkin_circle_basis(cfg: &GalerkinCircleConfig) -> Result<SpectralBasis> {
    let basis = SpectralBasis::galerkin_circle(cfg)?;
    if cfg.cutoff < 4 * cfg.count {
        let res = basis
            .laplacian_residuals()
            .into_iter()
            .fold(0.0, f64::max);
        return Err(Error::Numerical(format!(
            "Galerkin cutoff {} below 4 × count {}; measured eigen-residual {res:e}",
            cfg.cutoff, cfg.count
        )));
    }
    Ok(basis)
}

/// Weight used by the Galerkin tests and CLI examples.
pub fn example_weight() -> FourierWeight {
    FourierWeight::new(1.0, vec![0.3], vec![])
}
