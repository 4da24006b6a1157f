//! Subcommand implementations. Each returns a report body; emission and exit
//! codes are handled by the dispatcher.

use isoheat::diagnostics::{injectivity_scan, mean_curvature_limit, second_fundamental_form};
use isoheat::embedding::{first_order_correction, modified_map, EmbeddingMap};
use isoheat::fit::loglog_fit;
use isoheat::freeness::{gram_and_angles, jet_matrix_at, operator_norm_scan};
use isoheat::geometry::Backend;
use isoheat::guenther::{constants_report, refine, GridMap, Provenance, RefineOptions, ResidualTensor};
use isoheat::spectral::{BasisSize, ModeLabel, SpectralBasis};
use serde_json::{json, Value};

use crate::config::{ConfigError, Format, RunConfig, SweepMetric};
use crate::golden::golden_s1;
use crate::output::CsvTable;

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Lib(isoheat::Error),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<isoheat::Error> for CliError {
    fn from(e: isoheat::Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Lib(e) if e.is_validation() => 2,
            CliError::Lib(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => e.fmt(f),
            CliError::Lib(e) => e.fmt(f),
        }
    }
}

/// A report body in its output format.
#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    Json(Value),
    Csv(CsvTable),
    Text(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub body: Body,
    /// Nonzero only for a failing golden suite.
    pub exit: i32,
}

impl CommandOutput {
    fn ok(body: Body) -> Self {
        CommandOutput { body, exit: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    Embed,
    Pullback,
    Gram,
    Refine,
    Diagnose,
    Constants,
    Sweep,
    GoldenS1,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Embed => "embed",
            Command::Pullback => "pullback",
            Command::Gram => "gram",
            Command::Refine => "refine",
            Command::Diagnose => "diagnose",
            Command::Constants => "constants",
            Command::Sweep => "sweep",
            Command::GoldenS1 => "golden-s1",
        }
    }

    fn default_format(self) -> Format {
        match self {
            Command::Embed | Command::Sweep => Format::Csv,
            Command::GoldenS1 => Format::Text,
            _ => Format::Json,
        }
    }

    fn supports(self, f: Format) -> bool {
        match f {
            Format::Json => true,
            Format::Csv => matches!(
                self,
                Command::Spectrum | Command::Embed | Command::Pullback | Command::Gram | Command::Sweep
            ),
            Format::Text => self == Command::GoldenS1,
        }
    }

    /// Resolved output format, validated against the command.
    pub fn format(self, cfg: &RunConfig) -> Result<Format, ConfigError> {
        let f = cfg.format.unwrap_or(self.default_format());
        if self.supports(f) {
            Ok(f)
        } else {
            Err(ConfigError::Invalid(format!("{} does not support output format {f:?}", self.name())))
        }
    }
}

pub fn run_command(cmd: Command, cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    cfg.validate()?;
    let format = cmd.format(cfg)?;
    match cmd {
        Command::Spectrum => spectrum(cfg, format),
        Command::Embed => embed(cfg, format),
        Command::Pullback => pullback(cfg, format),
        Command::Gram => gram(cfg, format),
        Command::Refine => refine_cmd(cfg),
        Command::Diagnose => diagnose(cfg),
        Command::Constants => constants(cfg),
        Command::Sweep => sweep(cfg, format),
        Command::GoldenS1 => golden(format),
    }
}

fn label(l: &ModeLabel) -> String {
    match l {
        ModeLabel::Constant => "constant".into(),
        ModeLabel::Circle { k, sine } => format!("{}({k}θ)", if *sine { "sin" } else { "cos" }),
        ModeLabel::Torus { freq, sine } => format!("{}{freq:?}", if *sine { "sin" } else { "cos" }),
        ModeLabel::Sphere { l, m } => format!("Y({l},{m})"),
        other => format!("{other:?}"),
    }
}

fn spectrum(cfg: &RunConfig, format: Format) -> Result<CommandOutput, CliError> {
    let b = cfg.backend()?;
    let size = match (cfg.q, cfg.cutoff) {
        (Some(q), _) => BasisSize::Count(q),
        (None, Some(c)) => BasisSize::Cutoff(c),
        (None, None) => BasisSize::Count(20),
    };
    let basis = SpectralBasis::analytic(&b, size, false)?;
    let residuals = basis.laplacian_residuals();
    if format == Format::Csv {
        let mut t = CsvTable::new(&["index", "lambda", "multiplicity", "residual"]);
        for (e, r) in basis.entries().iter().zip(&residuals) {
            t.push(vec![e.index as f64, e.lambda, e.multiplicity as f64, *r]);
        }
        return Ok(CommandOutput::ok(Body::Csv(t)));
    }
    let modes: Vec<Value> = basis
        .entries()
        .iter()
        .zip(&residuals)
        .map(|(e, r)| {
            json!({
                "index": e.index,
                "lambda": e.lambda,
                "multiplicity": e.multiplicity,
                "label": label(&e.label),
                "residual": r,
            })
        })
        .collect();
    Ok(CommandOutput::ok(Body::Json(json!({
        "backend": b.label(),
        "modes": modes,
        "warnings": basis.warnings(),
    }))))
}

fn build_map(cfg: &RunConfig, b: &Backend, t: f64) -> Result<EmbeddingMap, CliError> {
    let trunc = cfg.truncation(t);
    Ok(if cfg.modified {
        modified_map(&first_order_correction(b)?, t, trunc, true)?
    } else {
        EmbeddingMap::new(b, t, trunc, true)?
    })
}

fn embed(cfg: &RunConfig, format: Format) -> Result<CommandOutput, CliError> {
    let b = cfg.backend()?;
    let map = build_map(cfg, &b, cfg.t)?;
    let points = b.grid().points;
    let values: Vec<Vec<f64>> = points.iter().map(|x| map.evaluate(x)).collect();
    if format == Format::Csv {
        let mut header: Vec<String> = (0..b.dim()).map(|i| format!("x{i}")).collect();
        header.extend((0..map.q()).map(|j| format!("psi{j}")));
        let refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut t = CsvTable::new(&refs);
        for (x, v) in points.iter().zip(&values) {
            t.push(x.iter().chain(v).copied().collect());
        }
        return Ok(CommandOutput::ok(Body::Csv(t)));
    }
    Ok(CommandOutput::ok(Body::Json(json!({
        "backend": b.label(),
        "t": cfg.t,
        "q": map.q(),
        "eigenvalues": map.eigenvalues(),
        "points": points,
        "values": values,
        "warnings": map.warnings(),
    }))))
}

fn pullback(cfg: &RunConfig, format: Format) -> Result<CommandOutput, CliError> {
    let b = cfg.backend()?;
    let map = build_map(cfg, &b, cfg.t)?;
    let rep = map.pullback_report();
    if format == Format::Csv {
        let mut header: Vec<String> = (0..b.dim()).map(|i| format!("x{i}")).collect();
        header.extend(["deviation_norm".to_string(), "predictor_gap".to_string()]);
        let refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut t = CsvTable::new(&refs);
        for s in &rep.samples {
            t.push(s.x.iter().copied().chain([s.deviation_norm, s.predictor_gap]).collect());
        }
        return Ok(CommandOutput::ok(Body::Csv(t)));
    }
    let samples: Vec<Value> = rep
        .samples
        .iter()
        .map(|s| {
            json!({
                "x": s.x,
                "deviation": s.deviation.row_iter().map(|r| r.iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>(),
                "deviation_norm": s.deviation_norm,
                "predictor_gap": s.predictor_gap,
            })
        })
        .collect();
    Ok(CommandOutput::ok(Body::Json(json!({
        "backend": b.label(),
        "t": cfg.t,
        "q": map.q(),
        "modified": cfg.modified,
        "sup_deviation": rep.sup_deviation,
        "sup_predictor_gap": rep.sup_predictor_gap,
        "tail_bound": rep.tail_bound,
        "samples": samples,
        "warnings": map.warnings(),
    }))))
}

fn gram(cfg: &RunConfig, format: Format) -> Result<CommandOutput, CliError> {
    let b = cfg.backend()?;
    let map = build_map(cfg, &b, cfg.t)?;
    let reports: Vec<_> = b.grid().points.iter().map(|x| gram_and_angles(&jet_matrix_at(&map, x))).collect();
    let max_cos = |r: &isoheat::freeness::AngleReport| r.cosines.iter().map(|c| c.gap).fold(0.0, f64::max);
    if format == Format::Csv {
        let mut header: Vec<String> = (0..b.dim()).map(|i| format!("x{i}")).collect();
        for h in ["min_eigenvalue", "condition", "gradient_gap", "mixed_gap", "hessian_gap", "max_cosine_gap", "free"] {
            header.push(h.into());
        }
        let refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut t = CsvTable::new(&refs);
        for r in &reports {
            let mut row = r.x.clone();
            row.extend([
                r.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min),
                r.condition,
                r.gradient_gap,
                r.mixed_gap,
                r.hessian_gap,
                max_cos(r),
                if r.free { 1.0 } else { 0.0 },
            ]);
            t.push(row);
        }
        return Ok(CommandOutput::ok(Body::Csv(t)));
    }
    let worst = |f: &dyn Fn(&isoheat::freeness::AngleReport) -> f64| reports.iter().map(f).fold(0.0, f64::max);
    let rows: Vec<Value> = reports
        .iter()
        .map(|r| {
            json!({
                "x": r.x,
                "eigenvalues": r.eigenvalues,
                "condition": r.condition,
                "gradient_gap": r.gradient_gap,
                "mixed_gap": r.mixed_gap,
                "hessian_gap": r.hessian_gap,
                "max_cosine_gap": max_cos(r),
                "free": r.free,
            })
        })
        .collect();
    Ok(CommandOutput::ok(Body::Json(json!({
        "backend": b.label(),
        "t": cfg.t,
        "q": map.q(),
        "all_free": reports.iter().all(|r| r.free),
        "max_condition": worst(&|r| r.condition),
        "max_gradient_gap": worst(&|r| r.gradient_gap),
        "max_hessian_gap": worst(&|r| r.hessian_gap),
        "max_cosine_gap": worst(&|r| max_cos(r)),
        "points": rows,
    }))))
}

fn refine_cmd(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let b = cfg.backend()?;
    let map = EmbeddingMap::new(&b, cfg.t, cfg.truncation(cfg.t), true)?.scaled(cfg.scale);
    let u = GridMap::from_map(&map)?;
    let f = ResidualTensor::isometry_defect(&u);
    let opts = RefineOptions {
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        lambda0: cfg.lambda0,
        theta_policy: cfg.theta_policy(),
        k: cfg.k,
        alpha: cfg.alpha,
    };
    let r = refine(&u, &f, &opts)?;
    let th = &r.theta;
    Ok(CommandOutput::ok(Body::Json(json!({
        "backend": b.label(),
        "t": cfg.t,
        "q": u.q(),
        "scale": cfg.scale,
        "defect_sup": f.sup_norm(),
        "defect_provenance": provenance(f.provenance),
        "theta_check": {
            "k": th.k,
            "alpha": th.alpha,
            "sigma": th.sigma,
            "gamma": th.gamma,
            "theta": th.theta,
            "e_norm": th.e_norm,
            "e0f_norm": th.e0f_norm,
            "product": th.product,
            "satisfied": th.satisfied,
        },
        "iterations": r.state.iterations,
        "update_norms": r.state.update_norms,
        "residuals": r.state.residuals,
        "ratios": r.state.ratios,
        "certificate_residual": r.certificate_residual,
        "certified": r.certified,
        "v_sup": r.v_sup,
        "v_holder": r.v_holder,
        "max_condition": u.max_condition(),
    }))))
}

fn provenance(p: Provenance) -> &'static str {
    match p {
        Provenance::Measured => "measured",
        Provenance::Synthetic => "synthetic",
    }
}

/// Middle sample of the backend grid: away from chart poles.
fn reference_point(b: &Backend) -> Vec<f64> {
    let pts = b.grid().points;
    pts[pts.len() / 2].clone()
}

fn diagnose(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let b = cfg.backend()?;
    let x = reference_point(&b);
    let limit = mean_curvature_limit(b.dim());
    let mut table = Vec::new();
    let mut sff_main = None;
    for t in [cfg.t, cfg.t / 2.0, cfg.t / 4.0] {
        let map = build_map(cfg, &b, t)?;
        let s = second_fundamental_form(&map, &x)?;
        table.push(json!({
            "t": t,
            "q": map.q(),
            "scaled_mean_curvature": s.scaled_mean_curvature,
            "gap": (s.scaled_mean_curvature - limit).abs(),
            "gap_over_t": (s.scaled_mean_curvature - limit).abs() / t,
            "max_cosine_gap": s.max_cosine_gap,
            "tangential_residual": s.tangential_residual,
        }));
        if sff_main.is_none() {
            sff_main = Some(s);
        }
    }
    let s = sff_main.expect("at least one t");
    let map = build_map(cfg, &b, cfg.t)?;
    let inj = injectivity_scan(&map);
    let cosines: Vec<Value> = s
        .cosines
        .iter()
        .map(|&(r, c, cos, target)| json!({ "row": r, "col": c, "cosine": cos, "target": target }))
        .collect();
    Ok(CommandOutput::ok(Body::Json(json!({
        "backend": b.label(),
        "x": x,
        "limit": limit,
        "sff": {
            "t": cfg.t,
            "scaled_gram": s.scaled_gram.row_iter().map(|r| r.iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>(),
            "cosines": cosines,
            "max_cosine_gap": s.max_cosine_gap,
            "mean_curvature_norm": s.mean_curvature.iter().map(|v| v * v).sum::<f64>().sqrt(),
            "scaled_mean_curvature": s.scaled_mean_curvature,
            "tangential_residual": s.tangential_residual,
        },
        "mean_curvature_convergence": table,
        "injectivity": {
            "pass": inj.pass,
            "near_radius": inj.near_radius,
            "min_gap": inj.min_gap,
            "min_ratio": inj.min_ratio,
            "neighbor_ratio": inj.neighbor_ratio,
            "pairs": inj.pairs,
            "offending": inj.offending.map(|o| json!({
                "x": o.x, "y": o.y, "distance": o.distance, "image_distance": o.image_distance,
            })),
        },
    }))))
}

fn constants(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let b = cfg.backend()?;
    let ts = cfg.t_grid();
    let r = constants_report(&b, cfg.k, cfg.alpha, cfg.l, cfg.lambda0, &ts)?;
    let rows: Vec<Value> = r
        .rows
        .iter()
        .map(|s| {
            json!({
                "t": s.t, "q": s.q, "e_norm": s.e_norm, "f_norm": s.f_norm,
                "e0f_norm": s.e0f_norm, "product": s.product, "below_theta": s.below_theta,
            })
        })
        .collect();
    Ok(CommandOutput::ok(Body::Json(json!({
        "backend": b.label(),
        "n": r.n, "k": r.k, "alpha": r.alpha, "l": r.l, "lambda0": r.lambda0,
        "sigma": r.sigma, "r_norm": r.r_norm, "nabla_r_norm": r.nabla_r_norm,
        "gamma": r.gamma, "theta": r.theta, "c_e": r.c_e,
        "operator_norm_fit": { "slope": r.scan.fit.slope, "target": r.scan.target_exponent, "flagged": r.scan.flagged },
        "g": r.g, "g_curvature_estimate": r.g_curvature_estimate, "t0": r.t0,
        "smallness_rows": rows,
        "smallness_slope": r.smallness_fit.slope,
        "expected_exponent": r.expected_exponent,
        "f_provenance": provenance(r.f_provenance),
    }))))
}

fn sweep(cfg: &RunConfig, format: Format) -> Result<CommandOutput, CliError> {
    let b = cfg.backend()?;
    let ts = cfg.t_grid();
    let (header, rows, fit_col): (Vec<&str>, Vec<Vec<f64>>, usize) = match cfg.metric {
        SweepMetric::Pullback | SweepMetric::Modified => {
            let mut c = cfg.clone();
            c.modified = cfg.metric == SweepMetric::Modified || cfg.modified;
            let rows = ts
                .iter()
                .map(|&t| {
                    let m = build_map(&c, &b, t)?;
                    let rep = m.pullback_report();
                    Ok(vec![t, m.q() as f64, rep.sup_deviation, rep.sup_predictor_gap])
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            (vec!["t", "q", "sup_deviation", "sup_predictor_gap"], rows, 2)
        }
        SweepMetric::OperatorNorm => {
            let s = operator_norm_scan(&b, &ts, cfg.k, cfg.alpha)?;
            let rows = s.rows.iter().map(|r| vec![r.t, r.q as f64, r.c0_norm, r.ck_alpha_norm]).collect();
            (vec!["t", "q", "c0_norm", "ck_alpha_norm"], rows, 3)
        }
        SweepMetric::MeanCurvature => {
            let x = reference_point(&b);
            let limit = mean_curvature_limit(b.dim());
            let rows = ts
                .iter()
                .map(|&t| {
                    let m = build_map(cfg, &b, t)?;
                    let s = second_fundamental_form(&m, &x)?;
                    Ok(vec![t, m.q() as f64, s.scaled_mean_curvature, (s.scaled_mean_curvature - limit).abs()])
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            (vec!["t", "q", "scaled_mean_curvature", "gap"], rows, 3)
        }
    };
    let xs: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r[fit_col]).collect();
    let fit = loglog_fit(&xs, &ys);
    if format == Format::Csv {
        let mut h = header.clone();
        h.push("fitted_slope");
        let mut t = CsvTable::new(&h);
        for r in rows {
            t.push(r.into_iter().chain([fit.slope]).collect());
        }
        return Ok(CommandOutput::ok(Body::Csv(t)));
    }
    let rows: Vec<Value> = rows
        .iter()
        .map(|r| Value::Object(header.iter().zip(r).map(|(h, v)| (h.to_string(), json!(v))).collect()))
        .collect();
    Ok(CommandOutput::ok(Body::Json(json!({
        "backend": b.label(),
        "metric": cfg.metric,
        "fitted_column": header[fit_col],
        "fitted_slope": fit.slope,
        "fitted_prefactor": fit.prefactor(),
        "rows": rows,
    }))))
}

fn golden(format: Format) -> Result<CommandOutput, CliError> {
    let rep = golden_s1()?;
    let exit = if rep.pass { 0 } else { 1 };
    let body = match format {
        Format::Text => {
            let mut s: String = rep.assertions.iter().map(|a| a.line() + "\n").collect();
            s.push_str(if rep.pass { "golden-s1: all assertions passed\n" } else { "golden-s1: FAILED\n" });
            Body::Text(s)
        }
        _ => Body::Json(serde_json::to_value(&rep).expect("golden report serializes")),
    };
    Ok(CommandOutput { body, exit })
}
