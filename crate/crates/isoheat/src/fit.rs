//! Least-squares fits used by the asymptotic diagnostics.

use nalgebra::{DMatrix, DVector};

/// Ordinary least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
}

impl LogLogFit {
    pub fn prefactor(&self) -> f64 {
        self.intercept.exp()
    }
}

pub fn loglog_fit(x: &[f64], y: &[f64]) -> LogLogFit {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2, "need at least two points for a slope");
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    let (slope, intercept) = line_fit(&lx, &ly);
    let m = lx.len() as f64;
    let rss: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(a, b)| (b - slope * a - intercept).powi(2))
        .sum();
    LogLogFit {
        slope,
        intercept,
        residual: (rss / m).sqrt(),
    }
}

/// Returns `(slope, intercept)`.
pub fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Least-squares coefficient `c` of `y ≈ c·x` (line through the origin).
pub fn proportional_fit(x: &[f64], y: &[f64]) -> f64 {
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    sxy / sxx
}

/// Least-squares solution of `design · c ≈ y` together with the 2-norm
/// condition number of the design matrix.
pub fn least_squares(design: &DMatrix<f64>, y: &DVector<f64>) -> (DVector<f64>, f64) {
    let svd = design.clone().svd(true, true);
    let s = &svd.singular_values;
    let smax = s.max();
    let smin = s.min();
    let sol = svd
        .solve(y, smax * 1e-15)
        .expect("SVD with both factors computed");
    (sol, smax / smin)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_is_recovered() {
        let x = [0.02, 0.04, 0.08, 0.16];
        let y: Vec<f64> = x.iter().map(|t: &f64| 3.0 * t.powf(-1.25)).collect();
        let f = loglog_fit(&x, &y);
        assert!((f.slope + 1.25).abs() < 1e-12);
        assert!((f.prefactor() - 3.0).abs() < 1e-10);
        assert!(f.residual < 1e-12);
    }

    #[test]
    fn quadratic_least_squares() {
        let t: [f64; 5] = [0.01, 0.02, 0.05, 0.1, 0.2];
        let design = DMatrix::from_fn(5, 2, |i, j| t[i].powi(j as i32 + 1));
        let y = DVector::from_iterator(5, t.iter().map(|t| 0.5 * t - 2.0 * t * t));
        let (c, cond) = least_squares(&design, &y);
        assert!((c[0] - 0.5).abs() < 1e-12 && (c[1] + 2.0).abs() < 1e-10);
        assert!(cond > 1.0);
    }
}
