//! Argument parsing and dispatch, with output going to caller-supplied
//! writers so the whole tool can run in-process.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use stackel_core::scalarfield::Backend;

use crate::commands::{self, FlowOptions, SampleOptions};
use crate::report::Report;
use crate::CliError;

#[derive(Parser)]
#[command(name = "stackel", version, about = "Verify quadratic integrals of geodesic flows and Stäckel systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Sampling {
    #[arg(long, default_value_t = 16)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// exact or numeric; default exact when the expressions allow it
    #[arg(long)]
    backend: Option<Backend>,
    /// Also write the report here
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Killing equations, involution and pointwise diagonalization of a system file
    Verify {
        file: PathBuf,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Build a system file from a Stäckel matrix file
    Generate {
        file: PathBuf,
        /// Where to write the system file (stdout when absent)
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        backend: Option<Backend>,
        /// 1-based row of the inverse matrix used as 2H
        #[arg(long)]
        hamiltonian_row: Option<usize>,
    },
    /// Restriction rank, eigenvalue distinctness and the derivative-system lab
    Theorem1 {
        file: PathBuf,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Integrate the geodesic flow and monitor the integrals
    Flow {
        file: PathBuf,
        /// Initial state x1..xn,p1..pn
        #[arg(long, allow_hyphen_values = true)]
        init: String,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 10_000)]
        steps: usize,
        /// Largest accepted relative drift per integral
        #[arg(long, default_value_t = 1e-8)]
        drift_tol: f64,
        #[arg(long)]
        backend: Option<Backend>,
        /// Trajectory CSV path
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn emit(report: &Report, path: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    let text = report.to_json();
    if let Some(path) = path {
        fs::write(path, &text)?;
    }
    out.write_all(text.as_bytes())?;
    Ok(())
}

fn sample_options(s: &Sampling) -> SampleOptions {
    SampleOptions { samples: s.samples, seed: s.seed, tol: s.tol, backend: s.backend }
}

fn dispatch(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, CliError> {
    match cli.command {
        Command::Verify { file, sampling } => {
            let report = commands::verify(&read(&file)?, &sample_options(&sampling))?;
            emit(&report, sampling.out.as_deref(), stdout)?;
            Ok(report.exit_code())
        }
        Command::Theorem1 { file, sampling } => {
            let report = commands::theorem1(&read(&file)?, &sample_options(&sampling))?;
            emit(&report, sampling.out.as_deref(), stdout)?;
            Ok(report.exit_code())
        }
        Command::Generate { file, out, backend, hamiltonian_row } => {
            let (report, system) = commands::generate(&read(&file)?, backend, hamiltonian_row)?;
            let system_json = system.map(|s| serde_json::to_string_pretty(&s).expect("system serializes") + "\n");
            match (&out, &system_json) {
                (Some(path), Some(text)) => {
                    fs::write(path, text)?;
                    stdout.write_all(report.to_json().as_bytes())?;
                }
                (None, Some(text)) => {
                    stdout.write_all(text.as_bytes())?;
                    stderr.write_all(report.to_json().as_bytes())?;
                }
                (_, None) => stdout.write_all(report.to_json().as_bytes())?,
            }
            if !report.passed {
                for c in report.checks.iter().filter(|c| !c.pass) {
                    writeln!(stderr, "{}: {}", c.name, c.details)?;
                }
            }
            Ok(report.exit_code())
        }
        Command::Flow { file, init, dt, steps, drift_tol, backend, out } => {
            let opts = FlowOptions { init, dt, steps, drift_tol, backend };
            let (report, csv) = commands::flow(&read(&file)?, &opts)?;
            if let Some(path) = out {
                fs::write(path, csv)?;
            }
            stdout.write_all(report.to_json().as_bytes())?;
            Ok(report.exit_code())
        }
    }
}

/// Runs the tool on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return e.exit_code();
        }
    };
    match dispatch(cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            e.exit_code()
        }
    }
}
