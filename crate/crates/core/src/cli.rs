//! Command-line front end.
//!
//! [`run`] parses arguments, writes results to the supplied streams and
//! returns the process exit code, so the binary is a thin wrapper and the
//! commands can be exercised in tests without spawning processes.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::dynamics::{equilibria, vector_field, EquilibriumLocation};
use crate::error::Error;
use crate::integrate::{integrate, integrate_from, IntegratorConfig, TerminationTag, Trajectory};
use crate::model::{FlowKind, FlowParams, State};
use crate::phase::sample_portrait;
use crate::verify::{verify, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INTEGRATION: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

pub const CSV_HEADER: &str = "t,alpha,beta,volume,energy,f,g,dalpha,dbeta";

#[derive(Debug, Parser)]
#[command(name = "berger-flow", version, about = "Spinor flow on Berger spheres")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one trajectory and write it as CSV.
    Simulate(SimulateArgs),
    /// Sample the vector field on a grid and append integral curves.
    Portrait(PortraitArgs),
    /// List the critical points of the normalized flow as JSON.
    Equilibria(FlowArgs),
    /// Run the verification suite and print a JSON report.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FlowArg {
    Collapse,
    Normalized,
}

impl From<FlowArg> for FlowKind {
    fn from(f: FlowArg) -> Self {
        match f {
            FlowArg::Collapse => FlowKind::Collapse,
            FlowArg::Normalized => FlowKind::Normalized,
        }
    }
}

#[derive(Debug, Clone, clap::Args)]
pub struct FlowArgs {
    #[arg(long, value_enum, default_value = "collapse")]
    pub flow: FlowArg,
    /// Orientation constant, 2 or -2.
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    pub a: f64,
    /// Killing constant: ±1 for collapse, ±1/2 for normalized. Defaults to
    /// the positive value.
    #[arg(long, allow_negative_numbers = true)]
    pub kappa: Option<f64>,
    /// Initial Berger parameter.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub epsilon: f64,
}

#[derive(Debug, Clone, clap::Args)]
pub struct ToleranceArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub rtol: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub atol: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub collapse_tol: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub equilib_tol: Option<f64>,
    /// Stop once the equilibrium threshold is met instead of running to the end.
    #[arg(long)]
    pub stop_on_equilibrium: bool,
}

#[derive(Debug, Clone, clap::Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub flow: FlowArgs,
    #[command(flatten)]
    pub tol: ToleranceArgs,
    #[arg(long, allow_negative_numbers = true)]
    pub t_end: f64,
    /// Write every n-th accepted step.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, clap::Args)]
pub struct PortraitArgs {
    #[command(flatten)]
    pub flow: FlowArgs,
    #[command(flatten)]
    pub tol: ToleranceArgs,
    /// Grid size as `nx,ny`.
    #[arg(long, default_value = "25,25", value_parser = parse_grid)]
    pub grid: (usize, usize),
    #[arg(long, default_value = "0.05,1.5", value_parser = parse_pair, allow_hyphen_values = true)]
    pub x_range: (f64, f64),
    #[arg(long, default_value = "0.05,1.5", value_parser = parse_pair, allow_hyphen_values = true)]
    pub y_range: (f64, f64),
    /// Integral-curve start points `x1,y1;x2,y2`; empty for none. Defaults to
    /// `(1,1)` and `(2/3,1)`.
    #[arg(long, allow_hyphen_values = true)]
    pub seeds: Option<String>,
    /// Time span of the integral curves.
    #[arg(long, default_value_t = 20.0, allow_negative_numbers = true)]
    pub t_end: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, clap::Args)]
pub struct VerifyArgs {
    /// Run only checks whose name contains this text.
    #[arg(long)]
    pub filter: Option<String>,
    /// Error threshold for the closed-form oracle comparisons.
    #[arg(long, allow_negative_numbers = true)]
    pub oracle_tol: Option<f64>,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `lo,hi`, got `{s}`"))?;
    let a = a.trim().parse::<f64>().map_err(|e| format!("`{a}`: {e}"))?;
    let b = b.trim().parse::<f64>().map_err(|e| format!("`{b}`: {e}"))?;
    Ok((a, b))
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `nx,ny`, got `{s}`"))?;
    let a = a
        .trim()
        .parse::<usize>()
        .map_err(|e| format!("`{a}`: {e}"))?;
    let b = b
        .trim()
        .parse::<usize>()
        .map_err(|e| format!("`{b}`: {e}"))?;
    Ok((a, b))
}

fn parse_seeds(s: &str) -> Result<Vec<(f64, f64)>, String> {
    s.split(';')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(parse_pair)
        .collect()
}

/// Failure of a command, carrying its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { name, reason } => {
                Failure::usage(format!("invalid --{}: {reason}", name.replace('_', "-")))
            }
            Error::StepBudget { .. } => Failure {
                code: EXIT_INTEGRATION,
                message: e.to_string(),
            },
            other => Failure::usage(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::usage(format!("i/o error: {e}"))
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::usage(format!("serialization error: {e}"))
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp
                | ErrorKind::DisplayVersion
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = out.write_all(rendered.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = err.write_all(rendered.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Portrait(a) => cmd_portrait(a, out),
        Command::Equilibria(a) => cmd_equilibria(a, out),
        Command::Verify(a) => cmd_verify(a, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn build_params(args: &FlowArgs) -> Result<FlowParams, Failure> {
    let kind = FlowKind::from(args.flow);
    let magnitude = kind.kappa_magnitude();
    let kappa = args.kappa.unwrap_or(magnitude);
    if kappa.abs() != magnitude {
        return Err(Failure::usage(format!(
            "invalid --kappa: |kappa| = {} does not match the {kind} flow, which needs ±{magnitude}",
            kappa.abs()
        )));
    }
    Ok(FlowParams::new(kind, args.a, kappa, args.epsilon)?)
}

fn build_config(tol: &ToleranceArgs, stride: usize) -> Result<IntegratorConfig, Failure> {
    let d = IntegratorConfig::default();
    let config = IntegratorConfig {
        rtol: tol.rtol.unwrap_or(d.rtol),
        atol: tol.atol.unwrap_or(d.atol),
        collapse_tol: tol.collapse_tol.unwrap_or(d.collapse_tol),
        equilib_tol: tol.equilib_tol.unwrap_or(d.equilib_tol),
        output_stride: stride,
        stop_on_equilibrium: tol.stop_on_equilibrium,
        ..d
    };
    if stride == 0 {
        return Err(Failure::usage("invalid --stride: must be at least 1"));
    }
    config.validate()?;
    Ok(config)
}

fn with_output(
    path: &Option<PathBuf>,
    out: &mut dyn Write,
    body: impl FnOnce(&mut dyn Write) -> Result<i32, Failure>,
) -> Result<i32, Failure> {
    match path {
        Some(p) => {
            let file = File::create(p)
                .map_err(|e| Failure::usage(format!("invalid --out {}: {e}", p.display())))?;
            let mut w = BufWriter::new(file);
            let code = body(&mut w)?;
            w.flush()?;
            Ok(code)
        }
        None => body(out),
    }
}

/// Writes a trajectory as CSV with 17 significant digits per value.
pub fn write_trajectory_csv(trajectory: &Trajectory, w: &mut dyn Write) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for s in &trajectory.samples {
        let (dx, dy) = vector_field(&trajectory.params, s.state.alpha, s.state.beta)
            .unwrap_or((f64::NAN, f64::NAN));
        let row = [
            s.state.t,
            s.state.alpha,
            s.state.beta,
            s.scalars.volume,
            s.scalars.energy,
            s.scalars.f,
            s.scalars.g,
            dx,
            dy,
        ];
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    writeln!(
        w,
        "# termination={} t={:.16e}",
        trajectory.termination.tag.name(),
        trajectory.termination.t_event
    )
}

fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let params = build_params(&args.flow)?;
    let config = build_config(&args.tol, args.stride)?;
    let trajectory = integrate(&params, &config, args.t_end)?;
    with_output(&args.out, out, |w| {
        write_trajectory_csv(&trajectory, w)?;
        Ok(
            if trajectory.termination.tag == TerminationTag::StepUnderflow {
                EXIT_INTEGRATION
            } else {
                EXIT_OK
            },
        )
    })
}

fn cmd_portrait(args: &PortraitArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let params = build_params(&args.flow)?;
    let config = build_config(&args.tol, 1)?;
    let seeds = match &args.seeds {
        Some(s) => parse_seeds(s).map_err(|e| Failure::usage(format!("invalid --seeds: {e}")))?,
        None => vec![(1.0, 1.0), (2.0 / 3.0, 1.0)],
    };
    let (nx, ny) = args.grid;
    let grid = sample_portrait(&params, args.x_range, args.y_range, nx, ny)?;
    let mut curves = Vec::with_capacity(seeds.len());
    for &(x, y) in &seeds {
        let start = State::new(0.0, x, y).map_err(|_| {
            Failure::usage(format!(
                "invalid --seeds: ({x},{y}) is not in the open quadrant"
            ))
        })?;
        curves.push(integrate_from(&params, &config, start, args.t_end)?);
    }
    with_output(&args.out, out, |w| {
        writeln!(w, "x,y,ux,uy,mag")?;
        for p in &grid {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                p.x, p.y, p.ux, p.uy, p.magnitude
            )?;
        }
        for (curve, (x, y)) in curves.iter().zip(&seeds) {
            writeln!(w)?;
            writeln!(
                w,
                "# seed={x:.16e},{y:.16e} termination={}",
                curve.termination.tag.name()
            )?;
            writeln!(w, "t,alpha,beta")?;
            for s in curve.states() {
                writeln!(w, "{:.16e},{:.16e},{:.16e}", s.t, s.alpha, s.beta)?;
            }
        }
        Ok(if curves.iter().any(|c| c.termination.is_failure()) {
            EXIT_INTEGRATION
        } else {
            EXIT_OK
        })
    })
}

#[derive(Debug, Serialize)]
struct EquilibriumRecord {
    epsilon_star: f64,
    point: [f64; 2],
    stability: &'static str,
}

fn cmd_equilibria(args: &FlowArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let params = build_params(args)?;
    if params.kind == FlowKind::Collapse {
        return Err(Failure::usage(
            "the collapse flow has no isolated equilibria: its stationary set is the \
             degenerate boundary family (0,k), k > 0, outside the open quadrant; use --flow normalized",
        ));
    }
    let records: Vec<EquilibriumRecord> = equilibria(&params)
        .into_iter()
        .filter_map(|e| match e.location {
            EquilibriumLocation::Curve { epsilon, x, y } => Some(EquilibriumRecord {
                epsilon_star: epsilon,
                point: [x, y],
                stability: e.stability.name(),
            }),
            EquilibriumLocation::AxisLine => None,
        })
        .collect();
    serde_json::to_writer_pretty(&mut *out, &records)?;
    writeln!(out)?;
    Ok(EXIT_OK)
}

fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    if let Some(tol) = args.oracle_tol {
        if !(tol >= 0.0 && tol.is_finite()) {
            return Err(Failure::usage(format!(
                "invalid --oracle-tol: must be non-negative, got {tol}"
            )));
        }
    }
    let report = verify(&VerifyOptions {
        filter: args.filter.clone(),
        oracle_tol: args.oracle_tol,
    })?;
    serde_json::to_writer_pretty(&mut *out, &report)?;
    writeln!(out)?;
    Ok(if report.passed() {
        EXIT_OK
    } else {
        EXIT_VERIFY
    })
}
