//! `capwave`: particle paths beneath small-amplitude capillary-gravity waves.
//!
//! Exit codes: 0 success, 1 invalid input, 2 closed form unsupported for
//! the requested regime, 3 numerical or I/O failure.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use capwave_core::config::{C0Mode, Method, OutputFormat, RunConfig};
use capwave_core::run::{self, write_dispersion, write_field, write_run, write_run_to, write_sweep};
use capwave_core::verify::{run_verify, VerifyOptions};
use capwave_core::{Error, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "capwave",
    version,
    about = "Particle trajectories beneath linear capillary-gravity waves"
)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate the wave speed c over a (delta, weber) grid.
    Dispersion(DispersionArgs),
    /// Snapshot of the linear field (eta, u, v, p) on a regular grid.
    Field(FieldArgs),
    /// Particle trajectory by closed form, integration, or both.
    Trajectory(TrajectoryArgs),
    /// Run the self-verification suite and write a JSON report.
    Verify(VerifyArgs),
    /// Trajectories for a grid of starting points, run in parallel.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct DispersionArgs {
    /// Shallowness values, comma separated.
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    delta: Vec<f64>,
    /// Weber numbers, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    weber: Vec<f64>,
    #[arg(long, default_value = "csv")]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct FieldArgs {
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 0.0)]
    weber: f64,
    /// Current strength, or `equal` for c0 = c.
    #[arg(long, default_value = "0")]
    c0: String,
    /// Time of the snapshot.
    #[arg(long, default_value_t = 0.0)]
    t: f64,
    #[arg(long, default_value_t = 64)]
    nx: usize,
    #[arg(long, default_value_t = 17)]
    nz: usize,
    #[arg(long, default_value = "csv")]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Run settings; each flag overrides the configuration file.
#[derive(Args, Debug, Default)]
struct RunOverrides {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    weber: Option<f64>,
    /// Current strength, or `equal` for c0 = c.
    #[arg(long)]
    c0: Option<String>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    dt_out: Option<f64>,
    /// exact, numeric or both.
    #[arg(long)]
    method: Option<String>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
    /// Relative and absolute integrator tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Accept numerically integrated components under --method exact.
    #[arg(long)]
    allow_fallback: bool,
    /// Also write two-column `x z` files for plotting.
    #[arg(long)]
    plot_data: bool,
    /// Output path; required for --method both.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct TrajectoryArgs {
    #[command(flatten)]
    run: RunOverrides,
    #[arg(long)]
    x0: Option<f64>,
    #[arg(long)]
    z0: Option<f64>,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct SweepArgs {
    #[command(flatten)]
    run: RunOverrides,
    /// Starting x values, comma separated.
    #[arg(
        long,
        value_delimiter = ',',
        required = true,
        num_args = 1,
        allow_hyphen_values = true
    )]
    x0: Vec<f64>,
    /// Starting z values, comma separated.
    #[arg(
        long,
        value_delimiter = ',',
        required = true,
        num_args = 1,
        allow_hyphen_values = true
    )]
    z0: Vec<f64>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Report path (JSON); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Only run checks whose name starts with this prefix.
    #[arg(long)]
    filter: Option<String>,
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T> {
    s.parse()
}

fn build_config(o: &RunOverrides) -> Result<RunConfig> {
    let mut cfg = match &o.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = o.delta {
        cfg.delta = v;
    }
    if let Some(v) = o.weber {
        cfg.weber = v;
    }
    if let Some(v) = &o.c0 {
        cfg.c0 = parse::<C0Mode>(v)?;
    }
    if let Some(v) = o.t_end {
        cfg.t_end = v;
    }
    if let Some(v) = o.dt_out {
        cfg.dt_out = v;
    }
    if let Some(v) = &o.method {
        cfg.method = parse::<Method>(v)?;
    }
    if let Some(v) = &o.format {
        cfg.format = parse::<OutputFormat>(v)?;
    }
    if let Some(v) = o.tol {
        cfg.rel_tol = v;
        cfg.abs_tol = v;
    }
    if o.allow_fallback {
        cfg.allow_fallback = true;
    }
    if o.plot_data {
        cfg.plot_data = true;
    }
    if o.out.is_some() {
        cfg.out = o.out.clone();
    }
    Ok(cfg)
}

/// Runs `write` against `out` or stdout.
fn with_output(out: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            let mut w = BufWriter::new(fs::File::create(path)?);
            write(&mut w)?;
            w.flush()?;
            Ok(())
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            write(&mut w)
        }
    }
}

fn cmd_dispersion(a: &DispersionArgs) -> Result<()> {
    let format = parse::<OutputFormat>(&a.format)?;
    let rows = run::run_dispersion(&a.delta, &a.weber)?;
    with_output(a.out.as_deref(), |w| write_dispersion(&rows, format, w))
}

fn cmd_field(a: &FieldArgs) -> Result<()> {
    let format = parse::<OutputFormat>(&a.format)?;
    let wp = RunConfig {
        delta: a.delta,
        weber: a.weber,
        c0: parse(&a.c0)?,
        ..Default::default()
    }
    .wave_parameters()?;
    let rows = run::run_field(&wp, a.t, a.nx, a.nz)?;
    with_output(a.out.as_deref(), |w| write_field(&rows, format, w))
}

fn cmd_trajectory(a: &TrajectoryArgs) -> Result<()> {
    let mut cfg = build_config(&a.run)?;
    if let Some(v) = a.x0 {
        cfg.x0 = v;
    }
    if let Some(v) = a.z0 {
        cfg.z0 = v;
    }
    cfg.validate()?;
    if cfg.method == Method::Both && cfg.out.is_none() {
        return Err(Error::Configuration(
            "--method both writes several files; pass --out <path>".into(),
        ));
    }
    let result = run::run_trajectory(&cfg)?;
    if let Some((dx, dz)) = result.max_difference() {
        eprintln!("max |exact - numeric|: dx = {dx:.3e}, dz = {dz:.3e}");
    }
    match &cfg.out {
        Some(out) => {
            for path in write_run(&result, &cfg, out)? {
                eprintln!("wrote {}", path.display());
            }
            Ok(())
        }
        None => with_output(None, |w| write_run_to(&result, cfg.format, w)),
    }
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let cfg = build_config(&a.run)?;
    let starts: Vec<(f64, f64)> = a.x0.iter().flat_map(|&x| a.z0.iter().map(move |&z| (x, z))).collect();
    let rows = run::sweep(&cfg, &starts)?;
    let failed = rows.iter().filter(|r| r.exit_code != 0).count();
    if failed > 0 {
        eprintln!("{failed} of {} runs failed; see the exit_code column", rows.len());
    }
    with_output(cfg.out.as_deref(), |w| write_sweep(&rows, cfg.format, w))
}

/// Returns whether every check passed; the report is written either way.
fn cmd_verify(a: &VerifyArgs) -> Result<bool> {
    let report = run_verify(&VerifyOptions {
        perturbation: None,
        filter: a.filter.clone(),
    });
    for c in &report.checks {
        eprintln!(
            "{:<36} {:>11.3e} <= {:<9.1e} {}",
            c.name,
            c.measured,
            c.tolerance,
            if c.passed { "ok" } else { "FAILED" }
        );
    }
    eprintln!(
        "{} of {} checks passed in {:.2} s",
        report.checks.iter().filter(|c| c.passed).count(),
        report.checks.len(),
        report.seconds
    );
    let json = report.to_json()?;
    with_output(a.out.as_deref(), |w| {
        writeln!(w, "{json}")?;
        Ok(())
    })?;
    Ok(report.passed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let outcome = match &cli.command {
        Command::Dispersion(a) => cmd_dispersion(a),
        Command::Field(a) => cmd_field(a),
        Command::Trajectory(a) => cmd_trajectory(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Verify(a) => match cmd_verify(a) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(3),
            Err(e) => Err(e),
        },
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
