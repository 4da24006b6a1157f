//! Command-line front end: flag and config-file parsing, subcommand dispatch,
//! report emission and exit codes.
//!
//! Exit codes: 0 success, 1 failing golden suite, 2 validation error,
//! 3 numerical failure (a JSON error body is printed to stdout).

pub mod commands;
pub mod config;
pub mod golden;
pub mod output;

use std::ffi::OsString;
use std::io::Write;

use clap::{Args, Parser, Subcommand};

use commands::{run_command, Body, CliError, Command};
use config::RunConfig;
use output::{envelope, error_body, to_json};

#[derive(Debug, Parser)]
#[command(name = "isoheat", version, about = "Heat-kernel embeddings and their isometric refinement")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Debug, Subcommand, Clone, Copy)]
pub enum Sub {
    /// Laplace–Beltrami eigenvalues of the backend.
    Spectrum,
    /// Ψ_t sampled on the backend grid.
    Embed,
    /// Pullback metric deviation Ψ_t*g_can − g.
    Pullback,
    /// Jet-matrix Gram data and freeness at every grid point.
    Gram,
    /// Refine u = scale·Ψ_t to an isometric map (flat backends).
    Refine,
    /// Second fundamental form, mean-curvature convergence and injectivity.
    Diagnose,
    /// Constants Γ, θ, C_E, G, t₀ and the smallness product (flat backends).
    Constants,
    /// A metric over a geometric t-grid, with its fitted log–log slope.
    Sweep,
    /// The round-circle golden suite.
    GoldenS1,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Spectrum => Command::Spectrum,
            Sub::Embed => Command::Embed,
            Sub::Pullback => Command::Pullback,
            Sub::Gram => Command::Gram,
            Sub::Refine => Command::Refine,
            Sub::Diagnose => Command::Diagnose,
            Sub::Constants => Command::Constants,
            Sub::Sweep => Command::Sweep,
            Sub::GoldenS1 => Command::GoldenS1,
        }
    }
}

/// Flags override values from `--config`; each maps to one dotted key.
#[derive(Debug, Args, Default)]
pub struct Opts {
    /// key=value configuration file.
    #[arg(long, global = true)]
    pub config: Option<String>,
    /// Extra key=value override (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// circle | conformal-circle | torus | sphere | s1xs2
    #[arg(long, global = true)]
    pub backend: Option<String>,
    #[arg(long, global = true)]
    pub radius: Option<String>,
    /// Comma-separated torus side lengths (`2pi` accepted).
    #[arg(long, global = true)]
    pub sides: Option<String>,
    /// Comma-separated grid resolution per chart coordinate.
    #[arg(long, global = true)]
    pub resolution: Option<String>,
    #[arg(long = "weight-mean", global = true, allow_hyphen_values = true)]
    pub weight_mean: Option<String>,
    #[arg(long = "weight-cos", global = true, allow_hyphen_values = true)]
    pub weight_cos: Option<String>,
    #[arg(long = "weight-sin", global = true, allow_hyphen_values = true)]
    pub weight_sin: Option<String>,
    #[arg(long = "t", global = true)]
    pub t: Option<String>,
    #[arg(long = "t-min", global = true)]
    pub t_min: Option<String>,
    #[arg(long = "t-max", global = true)]
    pub t_max: Option<String>,
    #[arg(long, global = true)]
    pub steps: Option<String>,
    /// pullback | modified | operator-norm | mean-curvature
    #[arg(long, global = true)]
    pub metric: Option<String>,
    #[arg(long, global = true)]
    pub rho: Option<String>,
    #[arg(long, global = true)]
    pub q: Option<String>,
    #[arg(long, global = true)]
    pub cutoff: Option<String>,
    #[arg(long = "cutoff-factor", global = true)]
    pub cutoff_factor: Option<String>,
    /// Use the first-order modified map Ψ̃_t.
    #[arg(long, global = true)]
    pub modified: bool,
    #[arg(long, global = true)]
    pub k: Option<String>,
    #[arg(long, global = true)]
    pub alpha: Option<String>,
    #[arg(long, global = true)]
    pub l: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub lambda0: Option<String>,
    #[arg(long, global = true)]
    pub tol: Option<String>,
    #[arg(long = "max-iter", global = true)]
    pub max_iter: Option<String>,
    #[arg(long, global = true)]
    pub scale: Option<String>,
    /// report | enforce
    #[arg(long = "theta-policy", global = true)]
    pub theta_policy: Option<String>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<String>,
    /// json | csv | text
    #[arg(long, global = true)]
    pub format: Option<String>,
}

impl Opts {
    fn pairs(&self) -> Vec<(&'static str, &str)> {
        [
            ("backend.kind", &self.backend),
            ("backend.radius", &self.radius),
            ("backend.sides", &self.sides),
            ("backend.resolution", &self.resolution),
            ("backend.weight.mean", &self.weight_mean),
            ("backend.weight.cos", &self.weight_cos),
            ("backend.weight.sin", &self.weight_sin),
            ("t", &self.t),
            ("sweep.t_min", &self.t_min),
            ("sweep.t_max", &self.t_max),
            ("sweep.steps", &self.steps),
            ("sweep.metric", &self.metric),
            ("truncation.rho", &self.rho),
            ("truncation.q", &self.q),
            ("truncation.cutoff", &self.cutoff),
            ("truncation.cutoff_factor", &self.cutoff_factor),
            ("holder.k", &self.k),
            ("holder.alpha", &self.alpha),
            ("constants.l", &self.l),
            ("refine.lambda0", &self.lambda0),
            ("refine.tol", &self.tol),
            ("refine.max_iter", &self.max_iter),
            ("refine.scale", &self.scale),
            ("refine.theta_policy", &self.theta_policy),
            ("output.path", &self.output),
            ("output.format", &self.format),
        ]
        .into_iter()
        .filter_map(|(k, v): (&'static str, &Option<String>)| v.as_deref().map(|v| (k, v)))
        .collect()
    }

    /// Defaults, then the config file, then `--set`, then dedicated flags.
    pub fn resolve(&self) -> Result<RunConfig, Vec<String>> {
        let mut cfg = RunConfig::default();
        let mut errors = Vec::new();
        if let Some(path) = &self.config {
            match std::fs::read_to_string(path) {
                Ok(text) => {
                    if let Err(es) = cfg.apply_text(&text) {
                        errors.extend(es.iter().map(|e| format!("{path}: {e}")));
                    }
                }
                Err(e) => errors.push(format!("cannot read config {path}: {e}")),
            }
        }
        for s in &self.set {
            match s.split_once('=') {
                Some((k, v)) => {
                    if let Err(e) = cfg.set(k.trim(), v) {
                        errors.push(e.to_string());
                    }
                }
                None => errors.push(format!("--set expects KEY=VALUE, got '{s}'")),
            }
        }
        for (k, v) in self.pairs() {
            if let Err(e) = cfg.set(k, v) {
                errors.push(e.to_string());
            }
        }
        if self.modified {
            cfg.modified = true;
        }
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(errors)
        }
    }
}

/// Caps rayon's global pool from `ISOHEAT_THREADS`.
fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("ISOHEAT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("ISOHEAT_THREADS must be a positive integer, got '{v}'"))?;
    // A pool may already exist when embedded in another process; keep it.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Runs one invocation, writing reports to `out` and diagnostics to `err`.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return if code == 0 { 0 } else { 2 };
        }
    };
    if let Err(msg) = configure_threads() {
        let _ = writeln!(err, "error: {msg}");
        return 2;
    }
    let cfg = match cli.opts.resolve() {
        Ok(c) => c,
        Err(msgs) => {
            for m in msgs {
                let _ = writeln!(err, "error: {m}");
            }
            return 2;
        }
    };
    let cmd: Command = cli.command.into();
    match run_command(cmd, &cfg) {
        Ok(o) => {
            let text = match o.body {
                Body::Json(v) => to_json(&envelope(cmd.name(), &cfg, v)),
                Body::Csv(t) => t.to_csv(),
                Body::Text(s) => s,
            };
            if let Err(code) = emit(&cfg, &text, out, err) {
                return code;
            }
            o.exit
        }
        Err(e) => {
            let code = e.exit_code();
            let _ = writeln!(err, "error: {e}");
            if code == 3 {
                let kind = match &e {
                    CliError::Lib(isoheat::Error::Divergence { .. }) => "divergence",
                    CliError::Lib(isoheat::Error::Refused { .. }) => "refused",
                    CliError::Lib(isoheat::Error::NotFree { .. }) => "not-free",
                    _ => "numerical",
                };
                let _ = write!(out, "{}", to_json(&error_body(cmd.name(), kind, &e.to_string())));
            }
            code
        }
    }
}

fn emit(cfg: &RunConfig, text: &str, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), i32> {
    match &cfg.output {
        Some(path) => std::fs::write(path, text).map_err(|e| {
            let _ = writeln!(err, "error: cannot write {path}: {e}");
            2
        }),
        None => out.write_all(text.as_bytes()).map_err(|_| 3),
    }
}

/// Entry point for the binary.
pub fn dispatch() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
