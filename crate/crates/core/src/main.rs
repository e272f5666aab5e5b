//! `vpl`: command-line front end for the vortex-pair toolkit.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use vortexpair::cli::{
    default_out_dir, run_evolve, run_solve, run_stability_cmd, run_sweep, validate, RunConfig,
};

#[derive(Parser)]
#[command(name = "vpl", version, about = "Steady vortex pairs in the half plane")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the variational solver and dump the maximizer, trace, and summary.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: ./runs/<timestamp>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Advect a state with the self-induced velocity, auditing conservation.
    Evolve {
        #[arg(long)]
        config: PathBuf,
        /// Initial state CSV; defaults to solving first.
        #[arg(long)]
        state: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve, perturb, evolve, and track the distance to the travelling orbit.
    Stability {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve across a comma-separated ascending list of lambda values.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// e.g. --lambdas 0.02,0.05,0.1
        #[arg(long)]
        lambdas: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config and list every violated precondition.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn out_dir(cfg: &RunConfig, flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(default_out_dir)
}

fn parse_lambdas(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| format!("bad lambda {t:?}: {e}"))
        })
        .collect()
}

fn dispatch(cmd: Cmd) -> Result<(), vortexpair::Error> {
    match cmd {
        Cmd::Solve { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let dir = out_dir(&cfg, out);
            run_solve(&cfg, &dir)?;
            println!("solve artifacts written to {}", dir.display());
        }
        Cmd::Evolve { config, state, out } => {
            let cfg = RunConfig::load(&config)?;
            let dir = out_dir(&cfg, out);
            run_evolve(&cfg, state.as_deref(), &dir)?;
            println!("evolve artifacts written to {}", dir.display());
        }
        Cmd::Stability { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let dir = out_dir(&cfg, out);
            run_stability_cmd(&cfg, &dir)?;
            println!("stability artifacts written to {}", dir.display());
        }
        Cmd::Sweep {
            config,
            lambdas,
            out,
        } => {
            let cfg = RunConfig::load(&config)?;
            let ls = parse_lambdas(&lambdas)
                .map_err(vortexpair::Error::Validation)?;
            let dir = out_dir(&cfg, out);
            run_sweep(&cfg, &ls, &dir)?;
            println!("sweep artifacts written to {}", dir.display());
        }
        Cmd::Validate { config } => {
            let cfg = RunConfig::load(&config)?;
            let diags = validate(&cfg);
            if diags.is_empty() {
                println!("ok");
            } else {
                for d in &diags {
                    println!("{d}");
                }
                if diags.iter().any(|d| !d.starts_with("warning:")) {
                    return Err(vortexpair::Error::Validation(format!(
                        "{} violated precondition(s)",
                        diags.iter().filter(|d| !d.starts_with("warning:")).count()
                    )));
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
