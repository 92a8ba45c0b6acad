//! `nctorus`: batch front end for the noncommutative torus library.
//!
//! Each run reads one JSON config, writes `<command>.json` (and any
//! companion files) to the output directory and prints the report.
//! Exit status: 0 success, 1 numerical failure, 2 config error.

mod commands;
mod config;
mod failure;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::Overrides;
use crate::failure::Failure;

/// Overrides `--out` when the flag is absent.
const OUT_DIR_ENV: &str = "NCTORUS_OUT_DIR";

#[derive(Parser)]
#[command(name = "nctorus", version, about = "Yang-Mills functional on the noncommutative torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check theta, the projection, the potentials and compatibility.
    Validate(Common),
    /// Dynamical and spectral Yang-Mills values and their ratio.
    Ym(Common),
    /// Turn an idempotent into a similar self-adjoint projection.
    MakeProjection(Common),
    /// Gradient descent on the dynamical Yang-Mills functional.
    Optimize(Common),
}

#[derive(Args)]
struct Common {
    /// Job config (JSON).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; defaults to $NCTORUS_OUT_DIR, then ".".
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Residual tolerance, overriding the config.
    #[arg(long, value_name = "FLOAT")]
    tol: Option<f64>,
    /// Random seed, overriding the config.
    #[arg(long, value_name = "INT")]
    seed: Option<u64>,
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn write_all(dir: &Path, out: &commands::Output) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(format!("{}.json", out.command)), &out.report)?;
    for (name, text) in &out.files {
        std::fs::write(dir.join(name), text)?;
    }
    Ok(())
}

type Runner = fn(&config::Job) -> Result<commands::Output, Failure>;

fn run(cli: Cli) -> Result<bool, Failure> {
    let (common, runner): (Common, Runner) = match cli.command {
        Command::Validate(c) => (c, commands::validate),
        Command::Ym(c) => (c, commands::ym),
        Command::MakeProjection(c) => (c, commands::make_projection),
        Command::Optimize(c) => (c, commands::optimize),
    };
    let overrides = Overrides {
        tol: common.tol,
        seed: common.seed,
    };
    let job = config::read(&common.config, overrides)?;
    let out = runner(&job)?;
    write_all(&out_dir(common.out), &out)?;
    print!("{}", out.report);
    Ok(out.passed)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("nctorus: {f}");
            f.exit_code()
        }
    }
}
