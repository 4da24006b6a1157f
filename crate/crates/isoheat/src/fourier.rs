//! Trigonometric (spectral) calculus on uniform periodic grids.
//!
//! Arrays are row-major over `shape` (last axis fastest). Coordinates are in
//! the physical frame units of the chart, so an axis of period `L` carries
//! wavenumbers `2πm/L`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub struct PeriodicGrid {
    shape: Vec<usize>,
    lengths: Vec<f64>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl fmt::Debug for PeriodicGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicGrid")
            .field("shape", &self.shape)
            .field("lengths", &self.lengths)
            .finish()
    }
}

impl PartialEq for PeriodicGrid {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape && self.lengths == other.lengths
    }
}

impl PeriodicGrid {
    pub fn new(shape: Vec<usize>, lengths: Vec<f64>) -> Self {
        assert_eq!(shape.len(), lengths.len());
        let mut planner = FftPlanner::new();
        let forward = shape.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        PeriodicGrid {
            shape,
            lengths,
            forward,
            inverse,
        }
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Multi-index of a flat position.
    pub fn unravel(&self, mut p: usize) -> Vec<usize> {
        let mut idx = vec![0; self.shape.len()];
        for a in (0..self.shape.len()).rev() {
            idx[a] = p % self.shape[a];
            p /= self.shape[a];
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &n)| acc * n + (i % n))
    }

    /// Frame coordinates of a grid point.
    pub fn point(&self, p: usize) -> Vec<f64> {
        self.unravel(p)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.lengths[a] * i as f64 / self.shape[a] as f64)
            .collect()
    }

    /// Signed integer frequency of FFT bin `i` on an axis of size `n`.
    pub fn signed_frequency(i: usize, n: usize) -> i64 {
        if i <= n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    pub fn wavenumber(&self, axis: usize, bin: usize) -> f64 {
        2.0 * PI * Self::signed_frequency(bin, self.shape[axis]) as f64 / self.lengths[axis]
    }

    fn is_nyquist(&self, axis: usize, bin: usize) -> bool {
        self.shape[axis] % 2 == 0 && bin == self.shape[axis] / 2
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let nd = self.shape.len();
        let mut line = Vec::new();
        for axis in 0..nd {
            let n = self.shape[axis];
            let stride: usize = self.shape[axis + 1..].iter().product();
            let outer: usize = self.shape[..axis].iter().product();
            let plan = if inverse {
                &self.inverse[axis]
            } else {
                &self.forward[axis]
            };
            line.resize(n, Complex64::new(0.0, 0.0));
            for o in 0..outer {
                for s in 0..stride {
                    let base = o * n * stride + s;
                    for (i, slot) in line.iter_mut().enumerate() {
                        *slot = data[base + i * stride];
                    }
                    plan.process(&mut line);
                    for (i, v) in line.iter().enumerate() {
                        data[base + i * stride] = *v;
                    }
                }
            }
        }
        if inverse {
            let scale = 1.0 / self.len() as f64;
            for v in data.iter_mut() {
                *v *= scale;
            }
        }
    }

    pub fn forward(&self, f: &[f64]) -> Vec<Complex64> {
        assert_eq!(f.len(), self.len());
        let mut data: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, false);
        data
    }

    pub fn inverse_real(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut spec, true);
        spec.into_iter().map(|c| c.re).collect()
    }

    /// Applies a Fourier multiplier `m(bins)` to a real field.
    pub fn multiply<F>(&self, f: &[f64], mult: F) -> Vec<f64>
    where
        F: Fn(&[usize]) -> Complex64,
    {
        let mut spec = self.forward(f);
        for (p, v) in spec.iter_mut().enumerate() {
            *v *= mult(&self.unravel(p));
        }
        self.inverse_real(spec)
    }

    /// Partial derivative along the axes listed in `axes` (repetition allowed).
    /// Nyquist bins are zeroed for odd total order along an axis.
    pub fn partial(&self, f: &[f64], axes: &[usize]) -> Vec<f64> {
        if axes.is_empty() {
            return f.to_vec();
        }
        let mut count = vec![0usize; self.dim()];
        for &a in axes {
            count[a] += 1;
        }
        self.multiply(f, |bins| {
            let mut m = Complex64::new(1.0, 0.0);
            for (a, &c) in count.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                if c % 2 == 1 && self.is_nyquist(a, bins[a]) {
                    return Complex64::new(0.0, 0.0);
                }
                let k = self.wavenumber(a, bins[a]);
                m *= Complex64::new(0.0, k).powu(c as u32);
            }
            m
        })
    }

    /// Squared wavenumber |ω|² of a bin multi-index.
    pub fn omega_sq(&self, bins: &[usize]) -> f64 {
        bins.iter()
            .enumerate()
            .map(|(a, &b)| self.wavenumber(a, b).powi(2))
            .sum()
    }

    /// Positive Laplacian −Σ∂²f.
    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        self.multiply(f, |bins| Complex64::new(self.omega_sq(bins), 0.0))
    }

    /// Solves (Δ − shift) u = f modewise; the caller guarantees the shift is
    /// off the spectrum.
    pub fn solve_shifted(&self, f: &[f64], shift: f64) -> Vec<f64> {
        self.multiply(f, |bins| Complex64::new(1.0 / (self.omega_sq(bins) - shift), 0.0))
    }

    /// Largest squared wavenumber resolved by the grid.
    pub fn spectrum_bound(&self) -> f64 {
        (0..self.dim())
            .map(|a| (PI * self.shape[a] as f64 / self.lengths[a]).powi(2))
            .sum()
    }
}
