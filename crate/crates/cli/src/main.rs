//! `polyfront` command-line driver.

mod commands;
mod config;
mod error;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use error::{CliError, Result};

#[derive(Parser)]
#[command(name = "polyfront", version, about = "Solvers for a nonlocal reaction-diffusion model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML or JSON configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: $POLYFRONT_OUT, else ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for independent runs.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Allow steady-state balls below the safe radius.
    #[arg(long = "unsafe-small-R", global = true)]
    unsafe_small_r: bool,
}

#[derive(Subcommand, Clone)]
enum Command {
    /// Evolve the one-dimensional equation and record the trajectory.
    Simulate1d,
    /// Solve the rescaled equation for `h` directly.
    Rescaled,
    /// Sweep the planar steady state over ball radii.
    Steady2d,
    /// Radial convergence to the Gaussian in `d >= 2`.
    Gaussconv,
    /// Log-log fit of a CSV column.
    Fit,
    /// Run the acceptance suite.
    Accept {
        #[arg(long, default_value = "primary")]
        suite: String,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate1d => "simulate1d",
            Command::Rescaled => "rescaled",
            Command::Steady2d => "steady2d",
            Command::Gaussconv => "gaussconv",
            Command::Fit => "fit",
            Command::Accept { .. } => "accept",
        }
    }
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| std::env::var_os("POLYFRONT_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn execute(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let dir = out_dir(cli);
    let cfg = cli.config.as_deref();
    let start = Instant::now();
    let mut failed = None;
    let (echo, mut out) = match &cli.command {
        Command::Simulate1d => commands::simulate1d(cfg, &dir)?,
        Command::Rescaled => commands::rescaled(cfg, &dir)?,
        Command::Steady2d => commands::steady2d(cfg, &dir, cli.unsafe_small_r)?,
        Command::Gaussconv => commands::gaussconv(cfg, &dir)?,
        Command::Fit => commands::fit(cfg, &dir)?,
        Command::Accept { suite } => {
            let (echo, out, verdicts) = commands::accept(suite, &dir)?;
            for v in &verdicts {
                println!("{v}");
            }
            let n_failed = verdicts.iter().filter(|v| !v.pass).count();
            println!("{}/{} criteria pass", verdicts.len() - n_failed, verdicts.len());
            if n_failed > 0 {
                failed = Some(CliError::AcceptanceFailed {
                    failed: n_failed,
                    total: verdicts.len(),
                });
            }
            (echo, out)
        }
    };
    let files = out.files().to_vec();
    out.json(
        "manifest.json",
        &json!({
            "command": cli.command.name(),
            "config": echo,
            "config_path": cli.config.as_deref().map(Path::display).map(|p| p.to_string()),
            "versions": { "polyfront": polyfront::VERSION, "polyfront-cli": env!("CARGO_PKG_VERSION") },
            "wall_seconds": start.elapsed().as_secs_f64(),
            "files": files,
        }),
    )?;
    failed.map_or(Ok(()), Err)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("polyfront {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
