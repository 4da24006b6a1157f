//! Run configuration: flat `key=value` files with dotted keys, overridden by
//! command-line flags, validated before any computation.

use std::f64::consts::PI;
use std::fmt;

use isoheat::embedding::Truncation;
use isoheat::geometry::{Backend, FourierWeight};
use isoheat::guenther::ThetaPolicy;
use serde::{Deserialize, Serialize};

/// Every recognised key, in the order they are reported.
pub const KEYS: &[&str] = &[
    "backend.kind",
    "backend.radius",
    "backend.sides",
    "backend.resolution",
    "backend.weight.mean",
    "backend.weight.cos",
    "backend.weight.sin",
    "t",
    "sweep.t_min",
    "sweep.t_max",
    "sweep.steps",
    "sweep.metric",
    "truncation.rho",
    "truncation.q",
    "truncation.cutoff",
    "truncation.cutoff_factor",
    "embedding.modified",
    "holder.k",
    "holder.alpha",
    "constants.l",
    "refine.lambda0",
    "refine.tol",
    "refine.max_iter",
    "refine.scale",
    "refine.theta_policy",
    "output.path",
    "output.format",
];

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    UnknownKey { key: String, suggestion: Option<String> },
    BadValue { key: String, value: String, reason: String },
    Missing(String),
    Invalid(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::UnknownKey { key, suggestion } => {
                write!(f, "unknown config key '{key}'")?;
                if let Some(s) = suggestion {
                    write!(f, " (did you mean '{s}'?)")?;
                }
                Ok(())
            }
            ConfigError::BadValue { key, value, reason } => write!(f, "invalid value '{value}' for '{key}': {reason}"),
            ConfigError::Missing(what) => write!(f, "missing {what}"),
            ConfigError::Invalid(msg) => f.write_str(msg),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Closest known key by Jaro–Winkler similarity, if reasonably close.
pub fn suggest(key: &str) -> Option<String> {
    KEYS.iter()
        .map(|k| (strsim::jaro_winkler(key, k), *k))
        .filter(|(s, _)| *s >= 0.8)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, k)| k.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKindName {
    Circle,
    ConformalCircle,
    Torus,
    Sphere,
    #[serde(rename = "s1xs2")]
    S1xS2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMetric {
    Pullback,
    Modified,
    OperatorNorm,
    MeanCurvature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThetaPolicyName {
    Report,
    Enforce,
}

/// Fully resolved configuration; embedded verbatim in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub backend: Option<BackendKindName>,
    pub radius: f64,
    pub sides: Vec<f64>,
    pub resolution: Option<Vec<usize>>,
    pub weight_mean: f64,
    pub weight_cos: Vec<f64>,
    pub weight_sin: Vec<f64>,
    pub t: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub steps: usize,
    pub metric: SweepMetric,
    pub rho: Option<f64>,
    pub q: Option<usize>,
    pub cutoff: Option<f64>,
    pub cutoff_factor: f64,
    pub modified: bool,
    pub k: usize,
    pub alpha: f64,
    pub l: u32,
    pub lambda0: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub scale: f64,
    pub theta_policy: ThetaPolicyName,
    pub output: Option<String>,
    pub format: Option<Format>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            backend: None,
            radius: 1.0,
            sides: vec![2.0 * PI, 2.0 * PI],
            resolution: None,
            weight_mean: 1.0,
            weight_cos: Vec::new(),
            weight_sin: Vec::new(),
            t: 0.05,
            t_min: 0.02,
            t_max: 0.2,
            steps: 8,
            metric: SweepMetric::Pullback,
            rho: None,
            q: None,
            cutoff: None,
            cutoff_factor: 36.0,
            modified: false,
            k: 2,
            alpha: 0.5,
            l: 3,
            lambda0: -1.0,
            tol: 1e-10,
            max_iter: 50,
            scale: 0.99,
            theta_policy: ThetaPolicyName::Report,
            output: None,
            format: None,
        }
    }
}

/// A number, optionally written as a multiple of π (`pi`, `2pi`, `0.5*pi`).
fn parse_f64(key: &str, v: &str) -> Result<f64, ConfigError> {
    let s = v.trim();
    let bad = |reason: &str| ConfigError::BadValue {
        key: key.into(),
        value: v.into(),
        reason: reason.into(),
    };
    let x = if let Some(head) = s.strip_suffix("pi") {
        let head = head.trim_end_matches('*').trim();
        let m = if head.is_empty() { 1.0 } else { head.parse::<f64>().map_err(|_| bad("expected a number"))? };
        m * PI
    } else {
        s.parse::<f64>().map_err(|_| bad("expected a number"))?
    };
    if !x.is_finite() {
        return Err(bad("must be finite"));
    }
    Ok(x)
}

fn parse_usize(key: &str, v: &str) -> Result<usize, ConfigError> {
    v.trim().parse().map_err(|_| ConfigError::BadValue {
        key: key.into(),
        value: v.into(),
        reason: "expected a non-negative integer".into(),
    })
}

fn parse_list<T>(key: &str, v: &str, f: impl Fn(&str, &str) -> Result<T, ConfigError>) -> Result<Vec<T>, ConfigError> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| f(key, s)).collect()
}

fn parse_enum<T: for<'de> Deserialize<'de>>(key: &str, v: &str, choices: &str) -> Result<T, ConfigError> {
    serde_json::from_value(serde_json::Value::String(v.trim().to_string())).map_err(|_| ConfigError::BadValue {
        key: key.into(),
        value: v.into(),
        reason: format!("expected one of {choices}"),
    })
}

fn parse_bool(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(ConfigError::BadValue {
            key: key.into(),
            value: v.into(),
            reason: "expected true or false".into(),
        }),
    }
}

impl RunConfig {
    /// Sets one dotted key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "backend.kind" => {
                self.backend = Some(parse_enum(key, value, "circle, conformal-circle, torus, sphere, s1xs2")?)
            }
            "backend.radius" => self.radius = parse_f64(key, value)?,
            "backend.sides" => self.sides = parse_list(key, value, parse_f64)?,
            "backend.resolution" => self.resolution = Some(parse_list(key, value, parse_usize)?),
            "backend.weight.mean" => self.weight_mean = parse_f64(key, value)?,
            "backend.weight.cos" => self.weight_cos = parse_list(key, value, parse_f64)?,
            "backend.weight.sin" => self.weight_sin = parse_list(key, value, parse_f64)?,
            "t" => self.t = parse_f64(key, value)?,
            "sweep.t_min" => self.t_min = parse_f64(key, value)?,
            "sweep.t_max" => self.t_max = parse_f64(key, value)?,
            "sweep.steps" => self.steps = parse_usize(key, value)?,
            "sweep.metric" => {
                self.metric = parse_enum(key, value, "pullback, modified, operator-norm, mean-curvature")?
            }
            "truncation.rho" => self.rho = Some(parse_f64(key, value)?),
            "truncation.q" => self.q = Some(parse_usize(key, value)?),
            "truncation.cutoff" => self.cutoff = Some(parse_f64(key, value)?),
            "truncation.cutoff_factor" => self.cutoff_factor = parse_f64(key, value)?,
            "embedding.modified" => self.modified = parse_bool(key, value)?,
            "holder.k" => self.k = parse_usize(key, value)?,
            "holder.alpha" => self.alpha = parse_f64(key, value)?,
            "constants.l" => {
                self.l = u32::try_from(parse_usize(key, value)?).map_err(|_| ConfigError::BadValue {
                    key: key.into(),
                    value: value.into(),
                    reason: "too large".into(),
                })?
            }
            "refine.lambda0" => self.lambda0 = parse_f64(key, value)?,
            "refine.tol" => self.tol = parse_f64(key, value)?,
            "refine.max_iter" => self.max_iter = parse_usize(key, value)?,
            "refine.scale" => self.scale = parse_f64(key, value)?,
            "refine.theta_policy" => self.theta_policy = parse_enum(key, value, "report, enforce")?,
            "output.path" => self.output = Some(value.trim().to_string()),
            "output.format" => self.format = Some(parse_enum(key, value, "json, csv, text")?),
            _ => {
                return Err(ConfigError::UnknownKey {
                    key: key.into(),
                    suggestion: suggest(key),
                })
            }
        }
        Ok(())
    }

    /// Applies a `key=value` file: `#` starts a comment, blank lines are
    /// ignored. Every unknown key is reported, not just the first.
    pub fn apply_text(&mut self, text: &str) -> Result<(), Vec<ConfigError>> {
        let mut errors = Vec::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                errors.push(ConfigError::Invalid(format!("line {}: expected key=value, got '{line}'", no + 1)));
                continue;
            };
            if let Err(e) = self.set(k.trim(), v) {
                errors.push(e);
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    /// Range and consistency checks shared by every subcommand.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::Invalid(format!("{name} must be positive, got {v}")))
            }
        };
        pos("backend.radius", self.radius)?;
        pos("t", self.t)?;
        pos("sweep.t_min", self.t_min)?;
        pos("sweep.t_max", self.t_max)?;
        pos("truncation.cutoff_factor", self.cutoff_factor)?;
        pos("refine.tol", self.tol)?;
        pos("refine.scale", self.scale)?;
        for s in &self.sides {
            pos("backend.sides", *s)?;
        }
        if self.t_min > self.t_max {
            return Err(ConfigError::Invalid(format!(
                "sweep.t_min = {} exceeds sweep.t_max = {}",
                self.t_min, self.t_max
            )));
        }
        if self.steps < 2 {
            return Err(ConfigError::Invalid("sweep.steps must be at least 2".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(ConfigError::Invalid(format!("holder.alpha must lie in (0,1), got {}", self.alpha)));
        }
        if let Some(r) = self.rho {
            pos("truncation.rho", r)?;
        }
        if let Some(c) = self.cutoff {
            pos("truncation.cutoff", c)?;
        }
        if self.q == Some(0) {
            return Err(ConfigError::Invalid("truncation.q must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(ConfigError::Invalid("refine.max_iter must be positive".into()));
        }
        Ok(())
    }

    /// The manifold backend; `Missing` if no kind was given.
    pub fn backend(&self) -> Result<Backend, ConfigError> {
        let kind = self.backend.ok_or_else(|| ConfigError::Missing("backend (set --backend or backend.kind)".into()))?;
        let lib = |e: isoheat::Error| ConfigError::Invalid(e.to_string());
        let b = match kind {
            BackendKindName::Circle => Backend::circle(self.radius),
            BackendKindName::ConformalCircle => Backend::conformal_circle(FourierWeight::new(
                self.weight_mean,
                self.weight_cos.clone(),
                self.weight_sin.clone(),
            )),
            BackendKindName::Torus => Backend::torus(self.sides.clone()),
            BackendKindName::Sphere => Backend::sphere(self.radius),
            BackendKindName::S1xS2 => Backend::product(vec![Backend::circle(self.radius).map_err(lib)?, Backend::sphere(self.radius).map_err(lib)?]),
        }
        .map_err(lib)?;
        match &self.resolution {
            Some(r) => b.with_resolution(r).map_err(lib),
            None => Ok(b),
        }
    }

    /// `q` override, then explicit cutoff, then the `ρ` rule, else
    /// `λ ≤ cutoff_factor/t`.
    pub fn truncation(&self, t: f64) -> Truncation {
        if let Some(q) = self.q {
            Truncation::Count(q)
        } else if let Some(c) = self.cutoff {
            Truncation::Cutoff(c)
        } else if let Some(rho) = self.rho {
            Truncation::Rule { rho }
        } else {
            Truncation::Cutoff(self.cutoff_factor / t)
        }
    }

    /// Geometric t-grid from `t_min` to `t_max` with `steps` points.
    pub fn t_grid(&self) -> Vec<f64> {
        let r = (self.t_max / self.t_min).ln() / (self.steps - 1) as f64;
        (0..self.steps).map(|i| self.t_min * (r * i as f64).exp()).collect()
    }

    pub fn theta_policy(&self) -> ThetaPolicy {
        match self.theta_policy {
            ThetaPolicyName::Report => ThetaPolicy::Report,
            ThetaPolicyName::Enforce => ThetaPolicy::Enforce,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_override() {
        let mut c = RunConfig::default();
        c.apply_text("# comment\nbackend.kind = torus\nbackend.sides = 2pi, 1\nt=0.1\n").unwrap();
        assert_eq!(c.backend, Some(BackendKindName::Torus));
        assert_eq!(c.sides, vec![2.0 * PI, 1.0]);
        c.set("t", "0.02").unwrap();
        assert_eq!(c.t, 0.02);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn unknown_keys_are_all_listed_with_suggestions() {
        let mut c = RunConfig::default();
        let errs = c.apply_text("backend.knd=circle\nholder.alpa=0.3\nzzz=1\n").unwrap_err();
        assert_eq!(errs.len(), 3);
        assert_eq!(
            errs[0],
            ConfigError::UnknownKey {
                key: "backend.knd".into(),
                suggestion: Some("backend.kind".into())
            }
        );
        assert!(matches!(&errs[1], ConfigError::UnknownKey { suggestion: Some(s), .. } if s == "holder.alpha"));
        assert!(matches!(&errs[2], ConfigError::UnknownKey { suggestion: None, .. }));
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::default();
        assert!(matches!(c.backend(), Err(ConfigError::Missing(_))));
        c.set("holder.alpha", "1.5").unwrap();
        assert!(c.validate().is_err());
        assert!(c.set("t", "abc").is_err());
    }

    #[test]
    fn geometric_grid_endpoints() {
        let c = RunConfig::default();
        let g = c.t_grid();
        assert_eq!(g.len(), 8);
        assert!((g[0] - 0.02).abs() < 1e-15 && (g[7] - 0.2).abs() < 1e-15);
    }
}
