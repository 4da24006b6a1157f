//! Truncation dimension `q(t)` and spectral tail bounds.

use statrs::function::gamma::gamma_ui;

use super::SpectralBasis;
use crate::error::{Error, Result};

/// Raw rule value `⌈t^{−(n/2+ρ)}⌉` plus regime warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationDim {
    pub raw: usize,
    pub warnings: Vec<String>,
}

impl TruncationDim {
    /// Rounds up to the end of an eigenspace of `basis`.
    pub fn rounded(&self, basis: &SpectralBasis) -> Result<usize> {
        basis.cluster_end(self.raw)
    }
}

pub fn truncation_dim(t: f64, n: usize, rho: f64) -> Result<TruncationDim> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Parameter(format!("diffusion time must be positive, got {t}")));
    }
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::Parameter(format!("ρ must be positive, got {rho}")));
    }
    if n == 0 {
        return Err(Error::Parameter("dimension must be positive".into()));
    }
    let exact = t.powf(-(n as f64 / 2.0 + rho));
    if exact > 1e9 {
        return Err(Error::Parameter(format!(
            "truncation t^(-(n/2+ρ)) = {exact:e} is beyond any constructible basis"
        )));
    }
    // Guard against ⌈56.000000001⌉ style roundoff on exact powers.
    let raw = ((exact * (1.0 - 1e-14)).ceil() as usize).max(1);
    let mut warnings = Vec::new();
    if t >= 1.0 {
        warnings.push(format!("t = {t} ≥ 1: asymptotic small-t regime not entered"));
    }
    Ok(TruncationDim { raw, warnings })
}

/// Measured Weyl constants `(A, B)` with `A·j^{2/n} ≤ λ_j ≤ B·j^{2/n}` over the
/// non-constant entries `j ≥ 10` (all entries if fewer are available).
pub fn weyl_constants(basis: &SpectralBasis) -> (f64, f64) {
    let n = basis.backend().dim() as f64;
    let skip = basis.has_constant() as usize;
    let lam: Vec<f64> = basis.entries()[skip..].iter().map(|e| e.lambda).collect();
    let start = if lam.len() >= 20 { 10 } else { 1 };
    let mut a = f64::INFINITY;
    let mut b = 0.0f64;
    for (i, &l) in lam.iter().enumerate().skip(start - 1) {
        let r = l / ((i + 1) as f64).powf(2.0 / n);
        a = a.min(r);
        b = b.max(r);
    }
    (a, b)
}

/// `Σ_{j>q} e^{−λ_j t} λ_j^m`, split into the exact sum over available entries
/// and a bound for the entries beyond the basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailWeight {
    pub computed: f64,
    pub remainder: f64,
}

impl TailWeight {
    pub fn total(&self) -> f64 {
        self.computed + self.remainder
    }
}

/// The remainder uses `λ_j ≥ A j^{2/n}` for `j > J` (the measured Weyl lower
/// constant reduced by 10%) and integral comparison, valid once
/// `e^{−λt}λ^m` is decreasing:
/// `∫_J^∞ e^{−At s^{2/n}}(A s^{2/n})^m ds = (n/2)(At)^{−n/2} t^{−m} Γ(m+n/2, AtJ^{2/n})`.
/// Outside that regime the remainder is reported as `+∞`.
pub fn tail_weight(basis: &SpectralBasis, t: f64, q: usize, m: f64) -> TailWeight {
    let skip = basis.has_constant() as usize;
    let lam: Vec<f64> = basis.entries()[skip..].iter().map(|e| e.lambda).collect();
    let big_j = lam.len();
    let computed: f64 = lam
        .iter()
        .skip(q.min(big_j))
        .map(|&l| (-l * t).exp() * l.powf(m))
        .sum();
    let n = basis.backend().dim() as f64;
    let (a, _) = weyl_constants(basis);
    let a = 0.9 * a;
    let remainder = if !(a > 0.0) || !a.is_finite() {
        f64::INFINITY
    } else {
        let mu_j = a * t * (big_j as f64).powf(2.0 / n);
        if mu_j < m {
            f64::INFINITY
        } else {
            let g = gamma_ui(m + n / 2.0, mu_j);
            (n / 2.0) * (a * t).powf(-n / 2.0) * t.powf(-m) * g
        }
    };
    TailWeight { computed, remainder }
}
