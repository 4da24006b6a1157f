//! Real spherical harmonics with exact colatitude derivatives.
//!
//! With sin θ kept signed, every normalized associated Legendre function
//! `p̄_l^m(θ)` is a trigonometric polynomial of degree `l` (a cosine series for
//! even `m`, a sine series for odd `m`). Its Fourier coefficients are
//! recovered once by an FFT of samples on a uniform θ-grid; derivatives of
//! any order then follow termwise.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Largest degree for which tables are built.
pub const SPHERE_MAX_DEGREE: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct LegendreSeries {
    /// `true`: Σ c_s sin(sθ); `false`: Σ c_s cos(sθ).
    pub sine: bool,
    pub coeffs: Vec<f64>,
}

impl LegendreSeries {
    /// `d^o/dθ^o` using precomputed `cs[s] = cos(sθ)`, `sn[s] = sin(sθ)`.
    pub fn derivative(&self, order: usize, cs: &[f64], sn: &[f64]) -> f64 {
        let mut v = 0.0;
        for (s, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let sf = s as f64;
            let term = match (self.sine, order % 4) {
                (false, 0) => cs[s],
                (false, 1) => -sn[s],
                (false, 2) => -cs[s],
                (false, _) => sn[s],
                (true, 0) => sn[s],
                (true, 1) => cs[s],
                (true, 2) => -sn[s],
                (true, _) => -cs[s],
            };
            v += c * sf.powi(order as i32) * term;
        }
        v
    }
}

/// Normalized associated Legendre values `p̄_l^m(θ)` (no Condon–Shortley
/// phase) for all `m ≤ l ≤ lmax`, indexed `[l][m]`, evaluated with signed sin θ.
fn legendre_table(lmax: usize, theta: f64) -> Vec<Vec<f64>> {
    let (s, c) = theta.sin_cos();
    let mut p = vec![Vec::new(); lmax + 1];
    for (l, row) in p.iter_mut().enumerate() {
        *row = vec![0.0; l + 1];
    }
    let mut pmm = (1.0 / (4.0 * PI)).sqrt();
    for m in 0..=lmax {
        if m > 0 {
            pmm *= ((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * s;
        }
        p[m][m] = pmm;
        if m < lmax {
            p[m + 1][m] = ((2 * m + 3) as f64).sqrt() * c * pmm;
        }
        for l in (m + 2)..=lmax {
            let lf = l as f64;
            let mf = m as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            p[l][m] = a * (c * p[l - 1][m] - b * p[l - 2][m]);
        }
    }
    p
}

/// Trigonometric series of every `p̄_l^m`, indexed `[l][m]`, sign-fixed so the
/// first nonzero coefficient is positive.
pub fn legendre_series(lmax: usize) -> Vec<Vec<LegendreSeries>> {
    let mut msamp = 8;
    while msamp < 2 * lmax + 4 {
        msamp *= 2;
    }
    let samples: Vec<Vec<Vec<f64>>> = (0..msamp)
        .map(|i| legendre_table(lmax, 2.0 * PI * i as f64 / msamp as f64))
        .collect();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(msamp);
    let mut out = Vec::with_capacity(lmax + 1);
    let mut buf = vec![Complex64::new(0.0, 0.0); msamp];
    for l in 0..=lmax {
        let mut row = Vec::with_capacity(l + 1);
        for m in 0..=l {
            for (i, b) in buf.iter_mut().enumerate() {
                *b = Complex64::new(samples[i][l][m], 0.0);
            }
            fft.process(&mut buf);
            let sine = m % 2 == 1;
            let scale = 2.0 / msamp as f64;
            let mut coeffs: Vec<f64> = (0..=l)
                .map(|s| {
                    if sine {
                        -buf[s].im * scale
                    } else if s == 0 {
                        buf[0].re / msamp as f64
                    } else {
                        buf[s].re * scale
                    }
                })
                .collect();
            let big = coeffs.iter().fold(0.0f64, |a, c| a.max(c.abs()));
            for c in coeffs.iter_mut() {
                if c.abs() < 1e-14 * big {
                    *c = 0.0;
                }
            }
            if let Some(first) = coeffs.iter().find(|c| **c != 0.0) {
                if *first < 0.0 {
                    coeffs.iter_mut().for_each(|c| *c = -*c);
                }
            }
            row.push(LegendreSeries { sine, coeffs });
        }
        out.push(row);
    }
    out
}

/// `d^o/dφ^o` of the longitude factor: 1 (m = 0), √2 cos mφ (m > 0),
/// √2 sin |m|φ (m < 0).
pub fn longitude_factor(m: i32, order: usize, phi: f64) -> f64 {
    if m == 0 {
        return if order == 0 { 1.0 } else { 0.0 };
    }
    let k = m.unsigned_abs() as f64;
    let arg = k * phi + order as f64 * PI / 2.0;
    let trig = if m > 0 { arg.cos() } else { arg.sin() };
    std::f64::consts::SQRT_2 * k.powi(order as i32) * trig
}
