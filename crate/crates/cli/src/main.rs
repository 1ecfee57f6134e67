//! `diht` — experiment driver for the distributed hard-thresholding
//! solver.
//!
//! Exit codes: 0 converged, 2 stopped at the iteration cap, 3 diverged,
//! 64 usage error, 1 internal failure.

mod config;
mod error;
mod gen;
mod plot;
mod run;
mod runner;
mod sweep;
mod trace;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::CliResult;

#[derive(Parser)]
#[command(
    name = "diht",
    version,
    about = "Sparse recovery experiments over a simulated agent network"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one experiment config and write its run directory
    Run {
        /// Flat key=value config file
        config: PathBuf,
        /// Run directory (defaults to out_dir, then $DIHT_OUT_ROOT/<run id>, then runs/<run id>)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute a topology × algorithm grid and tabulate the results
    Sweep {
        /// Run-config keys plus `topologies = ...` and optional `algorithms = ...`
        config: PathBuf,
        /// Sweep directory (same fallbacks as `run`)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the built-in worked selection trace as CSV
    TraceTa {
        /// How many objects to select
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Write to a file instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Derive plot-ready series from a finished run directory
    PlotData {
        /// Directory holding summary.csv and metrics.csv
        run_dir: PathBuf,
    },
    /// Generate a seeded problem instance file
    GenProblem {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        agents: usize,
        #[arg(long)]
        sparsity: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        noise_sigma: f64,
        /// `auto` or a positive number
        #[arg(long, default_value = "auto")]
        step_size: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a connected topology file
    GenTopology {
        /// er, geometric, path or complete
        #[arg(long)]
        kind: String,
        #[arg(long)]
        agents: usize,
        /// Edge probability (er) or radius (geometric)
        #[arg(long)]
        param: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap exits 2 by default, which this tool reserves for
            // runs stopped at max_iter.
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("{err}");
            std::process::exit(err.exit_code());
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Command::Run { config, out } => run::cmd_run(&config, out.as_deref()),
        Command::Sweep { config, out } => sweep::cmd_sweep(&config, out.as_deref()),
        Command::TraceTa { k, out } => trace::cmd_trace(k, out.as_deref()),
        Command::PlotData { run_dir } => plot::cmd_plot(&run_dir),
        Command::GenProblem {
            n,
            m,
            agents,
            sparsity,
            seed,
            noise_sigma,
            step_size,
            out,
        } => gen::cmd_gen_problem(n, m, agents, sparsity, seed, noise_sigma, &step_size, &out),
        Command::GenTopology {
            kind,
            agents,
            param,
            seed,
            out,
        } => gen::cmd_gen_topology(&kind, agents, param, seed, &out),
    }
}
