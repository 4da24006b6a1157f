//! The round-circle golden suite: orthogonal first and second derivative rows,
//! their limiting lengths, the closed-form right inverse, and the Riemann-sum
//! limits behind them.

use std::f64::consts::PI;

use isoheat::embedding::{EmbeddingMap, Truncation};
use isoheat::freeness::{jet_matrix_at, right_inverse};
use isoheat::geometry::Backend;
use isoheat::Result;
use serde::Serialize;

pub const GOLDEN_T: f64 = 0.05;
pub const GOLDEN_Q: usize = 200;
const SAMPLES: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub value: f64,
    pub target: f64,
    /// Allowed `|value − target|`, absolute or relative to `|target|`.
    pub tolerance: f64,
    pub relative: bool,
    pub pass: bool,
}

impl Assertion {
    fn new(name: &str, value: f64, target: f64, tolerance: f64, relative: bool) -> Self {
        let scale = if relative { target.abs() } else { 1.0 };
        Assertion {
            name: name.into(),
            value,
            target,
            tolerance,
            relative,
            pass: (value - target).abs() <= tolerance * scale,
        }
    }

    /// One `PASS`/`FAIL` line with the measured difference.
    pub fn line(&self) -> String {
        format!(
            "{} {}: value {:.6e}, target {:.6e}, |diff| {:.3e} (tol {:.1e}{})",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.target,
            (self.value - self.target).abs(),
            self.tolerance,
            if self.relative { " rel" } else { "" }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoldenReport {
    pub t: f64,
    pub q: usize,
    pub assertions: Vec<Assertion>,
    pub pass: bool,
}

/// `t^{(m+1)/2} Σ_{k≥1} k^m e^{−k²t}`, summed until the terms vanish.
pub fn riemann_sum(m: i32, t: f64) -> f64 {
    let mut s = 0.0;
    let mut k = 1.0f64;
    loop {
        let term = k.powi(m) * (-k * k * t).exp();
        s += term;
        if k * k * t > 50.0 + m as f64 * k.ln() {
            break;
        }
        k += 1.0;
    }
    t.powf((m as f64 + 1.0) / 2.0) * s
}

pub fn golden_s1() -> Result<GoldenReport> {
    let b = Backend::circle(1.0)?;
    let t = GOLDEN_T;
    let map = EmbeddingMap::new(&b, t, Truncation::Count(GOLDEN_Q), true)?;
    let xs: Vec<f64> = (0..SAMPLES).map(|i| 2.0 * PI * i as f64 / SAMPLES as f64 + 0.1).collect();
    let (mut dot, mut r1_gap, mut r2_gap, mut e_gap) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut r1_worst, mut r2_worst) = (1.0, 1.0);
    for &x in &xs {
        let p = jet_matrix_at(&map, &[x]);
        let r1 = p.rows.row(0);
        let r2 = p.rows.row(1);
        dot = dot.max(r1.dot(&r2).abs());
        let n1 = r1.norm_squared();
        let n2 = 2.0 * t / 3.0 * r2.norm_squared();
        if (n1 - 1.0).abs() >= r1_gap {
            r1_gap = (n1 - 1.0).abs();
            r1_worst = n1;
        }
        if (n2 - 1.0).abs() >= r2_gap {
            r2_gap = (n2 - 1.0).abs();
            r2_worst = n2;
        }
        let e = right_inverse(&p)?;
        let (s1, s2) = (r1.norm_squared(), r2.norm_squared());
        for j in 0..p.q() {
            e_gap = e_gap.max((e.e[(j, 0)] - r1[j] / s1).abs());
            e_gap = e_gap.max((e.e[(j, 1)] - r2[j] / s2).abs());
        }
    }
    let sqrt_pi = PI.sqrt();
    let assertions = vec![
        Assertion::new("<R1,R2> (max over samples)", dot, 0.0, 1e-12, false),
        Assertion::new("|R1|^2 (worst sample)", r1_worst, 1.0, 0.01, true),
        Assertion::new("(2t/3)|R2|^2 (worst sample)", r2_worst, 1.0, 0.01, true),
        Assertion::new("E(u) vs (R1/|R1|^2, R2/|R2|^2) (max entry gap)", e_gap, 0.0, 1e-10, false),
        Assertion::new("Riemann sum m=2", riemann_sum(2, t), sqrt_pi / 4.0, 0.01, true),
        Assertion::new("Riemann sum m=4", riemann_sum(4, t), 3.0 * sqrt_pi / 8.0, 0.01, true),
    ];
    let pass = assertions.iter().all(|a| a.pass);
    Ok(GoldenReport {
        t,
        q: map.q(),
        assertions,
        pass,
    })
}
