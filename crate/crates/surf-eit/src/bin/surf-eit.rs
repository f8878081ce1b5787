//! `surf-eit` command-line front end.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use surf_eit::experiments::{run_forward, run_reconstruct, run_stability_sweep, run_topology_probe, run_traces, ExperimentConfig};
use surf_eit::{par, Result, SurfError};

#[derive(Parser)]
#[command(name = "surf-eit", version, about = "Boundary-data experiments for impedance tomography on surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the DN map and check it against known oracles.
    Forward(Common),
    /// Compute embedding traces and the null set of the trace equations.
    Traces(Common),
    /// Reconstruct the embedded double cover from boundary traces.
    Reconstruct(Common),
    /// Decide orientability and Euler characteristic from the DN map.
    Topology(Common),
    /// Run a perturbation sweep through the whole pipeline.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `out` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed (overrides `seed` in the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    jobs: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if self.jobs == Some(0) {
            return Err(SurfError::Config("--jobs must be positive".into()));
        }
        Ok(cfg)
    }
}

fn print<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(command: &Command) -> Result<ExitCode> {
    let (Command::Forward(c) | Command::Traces(c) | Command::Reconstruct(c) | Command::Topology(c) | Command::Sweep(c)) = command;
    let cfg = c.load()?;
    par::with_jobs(c.jobs, || -> Result<ExitCode> {
        match command {
            Command::Forward(_) => print(&run_forward(&cfg)?)?,
            Command::Traces(_) => print(&run_traces(&cfg)?)?,
            Command::Reconstruct(_) => print(&run_reconstruct(&cfg)?)?,
            Command::Topology(_) => print(&run_topology_probe(&cfg)?)?,
            Command::Sweep(_) => {
                let result = run_stability_sweep(&cfg)?;
                for v in &result.verdicts {
                    let value = v.value.map(|x| format!("{x:.4e}")).unwrap_or_else(|| "n/a".into());
                    println!("{:<22} {:>12} threshold {:.3e}  {}", v.name, value, v.threshold, if v.pass { "pass" } else { "FAIL" });
                }
                if !result.within_failure_budget() {
                    eprintln!("error: {:.0}% of sweep rows failed", 100.0 * result.failed_fraction());
                    return Ok(ExitCode::from(1));
                }
            }
        }
        Ok(ExitCode::SUCCESS)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
