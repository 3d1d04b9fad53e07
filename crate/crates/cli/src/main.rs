//! `lie-feynman`: batch experiments on finite-energy spaces of U(1), tori and SU(2).
//!
//! Exit status 0 on success, 1 when a numerical certificate or acceptance
//! threshold fails, 2 for unusable input.

mod commands;
mod input;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lie_feynman::chernoff::Variant;
use lie_feynman::Error;

use output::{Format, Sink};

#[derive(Debug)]
pub enum Failure {
    /// Bad flags, files or configs.
    Usage(String),
    /// A numerical certificate refused the result.
    Certificate(String),
}

impl Failure {
    pub fn from_lib(e: Error) -> Self {
        match e {
            Error::Config { .. } | Error::Domain(_) | Error::Structural(_) | Error::DuplicateEigenvalue(_) => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Certificate(other.to_string()),
        }
    }

    pub fn context(self, what: &str) -> Self {
        match self {
            Failure::Usage(m) => Failure::Usage(format!("{what}: {m}")),
            Failure::Certificate(m) => Failure::Certificate(format!("{what}: {m}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RouteChoice {
    Both,
    Simplex,
    Duhamel,
}

#[derive(Parser, Debug)]
#[command(name = "lie-feynman", version, about = "Feynman maps on compact Lie groups via Gaussian matrix integrals")]
struct Cli {
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
    /// Single-threaded reductions and zeroed timing columns.
    #[arg(long, global = true)]
    reproducible: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Structure-constant, bi-invariance and unimodularity residuals.
    Validate {
        #[arg(long)]
        group: String,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Blocks, Casimir eigenvalues and basis labels of a finite-energy space.
    Spectrum {
        #[arg(long)]
        group: String,
        #[arg(long)]
        reps: String,
    },
    /// Regularized oscillatory oracle against the rotated Gaussian step.
    OracleCompare {
        #[arg(long)]
        group: String,
        #[arg(long)]
        reps: String,
        #[arg(long, default_value = "0.1,0.25")]
        tau_list: String,
        /// Width of the Gaussian test function.
        #[arg(long, default_value_t = 1.0)]
        width: f64,
        /// Largest accepted entrywise gap.
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        /// Largest accepted extrapolation residual.
        #[arg(long)]
        oracle_tol: Option<f64>,
    },
    /// Error of the Chernoff product against the free propagator.
    ChernoffConverge {
        #[arg(long)]
        group: String,
        #[arg(long)]
        reps: String,
        #[arg(long, default_value = "lebesgue")]
        variant: Variant,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value = "8,16,32,64,128,256")]
        n_list: String,
        #[arg(long, default_value_t = 1.0)]
        hbar: f64,
        /// Fixed Gauss–Hermite order instead of adaptive refinement.
        #[arg(long)]
        quad_order: Option<usize>,
    },
    /// Phase drift of the Haar-weighted product against the scalar-curvature prediction.
    Curvature {
        #[arg(long, default_value = "su2")]
        group: String,
        #[arg(long, default_value = "spin:1,2,4")]
        reps: String,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value = "16,64,256")]
        n_list: String,
        #[arg(long, default_value_t = 1.0)]
        hbar: f64,
    },
    /// Developed velocities and Jacobian certificates of a piecewise geodesic.
    Develop {
        /// TOML path config: group, t_total, start, velocities, fd_step.
        #[arg(long)]
        config: String,
    },
    /// Chernoff chain against the exact propagator chain for a cylinder function.
    Cylinder {
        #[arg(long)]
        group: String,
        /// Band of the work space holding all factors and their products.
        #[arg(long)]
        band: usize,
        #[arg(long)]
        times: String,
        /// Comma-separated coefficient files, one per time.
        #[arg(long)]
        factors: String,
        /// Evaluation point.
        #[arg(long)]
        x: String,
        /// Path horizon; the last time when absent.
        #[arg(long)]
        t: Option<f64>,
        #[arg(long, default_value = "64,128,256,512")]
        n_list: String,
        #[arg(long, default_value_t = 1.0)]
        hbar: f64,
    },
    /// Dyson series terms by two routes and the summed series against a direct solve.
    Dyson {
        #[arg(long)]
        group: String,
        /// Band of the space the coefficient files refer to.
        #[arg(long)]
        band: usize,
        /// Potential coefficient file.
        #[arg(long = "V")]
        v: String,
        #[arg(long)]
        psi0: String,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 1.0)]
        hbar: f64,
        #[arg(long, default_value_t = 3)]
        m_max: usize,
        #[arg(long, value_enum, default_value = "both")]
        routes: RouteChoice,
        #[arg(long, default_value_t = 24)]
        simplex_order: usize,
        #[arg(long, default_value_t = 64)]
        panels: usize,
        #[arg(long, default_value_t = 12)]
        nodes: usize,
        #[arg(long, default_value_t = 1e-8)]
        route_tol: f64,
    },
    /// Run an experiment described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Flags from an experiment config: `command`, `group`, `[parameters]`, `[output]`.
fn config_to_args(path: &PathBuf) -> Result<Vec<String>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let table: toml::Table = text.parse().map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let command = table
        .get("command")
        .and_then(|v| v.as_str())
        .ok_or_else(|| Failure::Usage("config needs a `command` string".into()))?;
    if command == "run" {
        return Err(Failure::Usage("a config cannot run another config".into()));
    }
    let mut args = vec!["lie-feynman".to_string(), command.to_string()];
    let render = |v: &toml::Value| -> Result<String, Failure> {
        Ok(match v {
            toml::Value::String(s) => s.clone(),
            toml::Value::Integer(i) => i.to_string(),
            toml::Value::Float(f) => f.to_string(),
            toml::Value::Array(items) => items
                .iter()
                .map(|x| match x {
                    toml::Value::String(s) => Ok(s.clone()),
                    toml::Value::Integer(i) => Ok(i.to_string()),
                    toml::Value::Float(f) => Ok(f.to_string()),
                    other => Err(Failure::Usage(format!("unsupported list item {other}"))),
                })
                .collect::<Result<Vec<_>, _>>()?
                .join(","),
            other => return Err(Failure::Usage(format!("unsupported parameter value {other}"))),
        })
    };
    if let Some(group) = table.get("group") {
        args.extend(["--group".to_string(), render(group)?]);
    }
    if let Some(params) = table.get("parameters").and_then(|p| p.as_table()) {
        for (key, value) in params {
            let flag = if key == "V" { "--V".to_string() } else { format!("--{}", key.replace('_', "-")) };
            match value {
                toml::Value::Boolean(true) => args.push(flag),
                toml::Value::Boolean(false) => {}
                v => args.extend([flag, render(v)?]),
            }
        }
    }
    if let Some(out) = table.get("output").and_then(|o| o.as_table()) {
        if let Some(p) = out.get("path") {
            args.extend(["--out".to_string(), render(p)?]);
        }
        if let Some(f) = out.get("format") {
            args.extend(["--format".to_string(), render(f)?]);
        }
    }
    if table.get("reproducible").and_then(|v| v.as_bool()) == Some(true) {
        args.push("--reproducible".to_string());
    }
    Ok(args)
}

fn dispatch(cli: Cli) -> Result<bool, Failure> {
    if cli.reproducible {
        // fails only if a pool exists already, which is then reused as is
        let _ = rayon::ThreadPoolBuilder::new().num_threads(1).build_global();
    }
    let sink = Sink { path: cli.out.clone(), format: cli.format };
    match &cli.command {
        Command::Validate { group, tol } => commands::validate(group, *tol, &sink),
        Command::Spectrum { group, reps } => commands::spectrum(group, reps, &sink),
        Command::OracleCompare { group, reps, tau_list, width, tol, oracle_tol } => commands::oracle_compare(
            &commands::OracleArgs { group, reps, taus: tau_list, width: *width, tol: *tol, oracle_tol: *oracle_tol },
            &sink,
        ),
        Command::ChernoffConverge { group, reps, variant, t, n_list, hbar, quad_order } => commands::chernoff_converge(
            &commands::ConvergeArgs {
                group,
                reps,
                variant: *variant,
                t: *t,
                n_list,
                hbar: *hbar,
                quad_order: *quad_order,
                reproducible: cli.reproducible,
            },
            &sink,
        ),
        Command::Curvature { group, reps, t, n_list, hbar } => commands::curvature(group, reps, *t, n_list, *hbar, &sink),
        Command::Develop { config } => commands::develop_path(config, &sink),
        Command::Cylinder { group, band, times, factors, x, t, n_list, hbar } => commands::cylinder(
            &commands::CylinderArgs { group, band: *band, times, factors, x, t: *t, n_list, hbar: *hbar },
            &sink,
        ),
        Command::Dyson { group, band, v, psi0, t, hbar, m_max, routes, simplex_order, panels, nodes, route_tol } => {
            commands::dyson(
                &commands::DysonArgs {
                    group,
                    band: *band,
                    v,
                    psi0,
                    t: *t,
                    hbar: *hbar,
                    m_max: *m_max,
                    routes: *routes,
                    simplex_order: *simplex_order,
                    panels: *panels,
                    nodes: *nodes,
                    route_tol: *route_tol,
                },
                &sink,
            )
        }
        Command::Run { config } => {
            let args = config_to_args(config)?;
            let inner = Cli::try_parse_from(&args).map_err(|e| Failure::Usage(e.to_string()))?;
            dispatch(inner)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Certificate(m)) => {
            eprintln!("certificate failure: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
