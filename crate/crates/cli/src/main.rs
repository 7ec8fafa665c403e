use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use palign::config::{parse_config, ExperimentConfig};
use palign::experiments::{cmd_isothermal, cmd_limit_sweep, cmd_run, Options, Outcome};

/// Particle, kinetic and hydrodynamic p-alignment experiments.
#[derive(Parser)]
#[command(name = "palign", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single particle, kinetic or hydro run.
    Run(Common),
    /// ε-sweep toward the hydrodynamic limit.
    Sweep(Common),
    /// Table of the isothermal map Ψ.
    Isothermal(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config and PALIGN_OUT.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the ε-sweep and force loops.
    #[arg(long)]
    threads: Option<usize>,
    /// Check conservation and the analytic inequalities; violations give exit code 1.
    #[arg(long)]
    check_invariants: bool,
    /// Default output directory when neither --out nor the config sets one.
    #[arg(long = "default-out", env = "PALIGN_OUT", default_value = "palign-out", hide = true)]
    default_out: PathBuf,
}

fn out_dir(c: &Common, cfg: &ExperimentConfig) -> PathBuf {
    c.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| c.default_out.clone())
}

fn execute(cmd: &Command) -> Result<Outcome> {
    let (c, f): (&Common, fn(&ExperimentConfig, &Path, Options) -> palign::Result<Outcome>) = match cmd {
        Command::Run(c) => (c, cmd_run),
        Command::Sweep(c) => (c, cmd_limit_sweep),
        Command::Isothermal(c) => (c, cmd_isothermal),
    };
    if let Some(n) = c.threads {
        anyhow::ensure!(n >= 1, "--threads must be at least 1");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    let cfg = parse_config(&c.config).with_context(|| format!("reading {}", c.config.display()))?;
    let dir = out_dir(c, &cfg);
    let opts = Options { check_invariants: c.check_invariants };
    Ok(f(&cfg, &dir, opts)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(o) => {
            println!("{}", o.summary);
            for v in &o.violations {
                eprintln!("invariant violated: {v}");
            }
            if o.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
