//! Turns one [`ExperimentConfig`] into a finished run plus its
//! artifacts: `config.resolved`, `metrics.csv`, `summary.csv`.
//!
//! Every artifact byte is a function of the config — reruns produce
//! identical files. Wall time is printed, never persisted.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use diht_core::diht::{diht_run, naive_diht_run, DihtOptions, DihtRun, RunStatus};
use diht_core::recovery::{centralized_iht, IhtOptions, ProblemConfig};
use diht_core::Error;

use crate::config::{Algorithm, ExperimentConfig};
use crate::error::{CliError, CliResult};

pub const OUT_ROOT_ENV: &str = "DIHT_OUT_ROOT";

pub const METRICS_SCHEMA: &str = "# schema: diht-metrics-v1";
pub const METRICS_HEADER: &str = "iteration,sums,cumulative_messages,cumulative_ticks,relative_error";
pub const SUMMARY_SCHEMA: &str = "# schema: diht-summary-v1";
pub const SUMMARY_HEADER: &str = "run_id,config_hash,algorithm,status,iterations,\
                                  total_messages,preprocessing_messages,clock_ticks,\
                                  total_sums,final_relative_error";

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Converged,
    MaxIterations,
    Diverged { iteration: usize, step_size: f64 },
}

impl Outcome {
    pub fn name(&self) -> &'static str {
        match self {
            Outcome::Converged => "converged",
            Outcome::MaxIterations => "max-iterations",
            Outcome::Diverged { .. } => "diverged",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Converged => 0,
            Outcome::MaxIterations => 2,
            Outcome::Diverged { .. } => 3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MetricsRow {
    pub iteration: usize,
    pub sums: u64,
    pub cumulative_messages: u64,
    pub cumulative_ticks: u64,
    pub relative_error: f64,
}

/// A finished run, ready to be written or tabulated.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub run_id: String,
    pub config_hash: String,
    pub algorithm: Algorithm,
    pub outcome: Outcome,
    pub iterations: usize,
    pub total_messages: u64,
    pub preprocessing_messages: u64,
    /// Whole-run clock, spanning-tree preprocessing included.
    pub clock_ticks: u64,
    pub total_sums: u64,
    pub final_error: f64,
    pub rows: Vec<MetricsRow>,
    pub wall: Duration,
}

/// Runs the configured experiment to completion in-process.
pub fn execute(config: &ExperimentConfig) -> CliResult<RunOutput> {
    let started = Instant::now();
    let problem_config = ProblemConfig {
        n: config.n,
        m: config.m,
        agents: if config.algorithm == Algorithm::Centralized {
            1
        } else {
            config.agents
        },
        sparsity: config.sparsity,
        seed: config.problem_seed,
        noise_sigma: config.noise_sigma,
        step_size: config.step_size,
    };
    let problem = problem_config.generate::<f64>().map_err(|e| match e {
        Error::InvalidArgument(msg) => CliError::usage(msg),
        other => CliError::Run(other),
    })?;

    let mut output = match config.algorithm {
        Algorithm::Centralized => {
            let mut options = IhtOptions::new(problem.step_size());
            options.tolerance = config.tol;
            options.max_iterations = config.max_iter;
            match centralized_iht(&problem, &options) {
                Ok(run) => centralized_output(config, &run),
                Err(Error::Diverged { iteration, step_size }) => {
                    diverged_output(config, iteration, step_size)
                }
                Err(other) => return Err(other.into()),
            }
        }
        Algorithm::Diht | Algorithm::Naive => {
            let topology = config.topology.build(config.agents)?;
            let options = DihtOptions {
                tolerance: config.tol,
                max_iterations: config.max_iter,
                data: Default::default(),
                delivery: config.delivery,
                record_iterates: false,
            };
            let result = if config.algorithm == Algorithm::Diht {
                diht_run(&problem, &topology, &options)
            } else {
                naive_diht_run(&problem, &topology, &options)
            };
            match result {
                Ok(run) => distributed_output(config, &run),
                Err(Error::Diverged { iteration, step_size }) => {
                    diverged_output(config, iteration, step_size)
                }
                Err(other) => return Err(other.into()),
            }
        }
    };
    output.wall = started.elapsed();
    Ok(output)
}

fn distributed_output(config: &ExperimentConfig, run: &DihtRun<f64>) -> RunOutput {
    let m = &run.metrics;
    let edge_messages = 3 * (config.agents as u64 - 1);
    let mut cumulative = m.preprocessing_messages;
    let rows = (0..m.iterations)
        .map(|t| {
            cumulative += edge_messages * m.sums_per_iteration[t];
            MetricsRow {
                iteration: t + 1,
                sums: m.sums_per_iteration[t],
                cumulative_messages: cumulative,
                cumulative_ticks: m.preprocessing_ticks + m.iteration_ticks[t],
                relative_error: m.errors[t],
            }
        })
        .collect();
    RunOutput {
        run_id: config.run_id(),
        config_hash: config.config_hash(),
        algorithm: config.algorithm,
        outcome: match run.status {
            RunStatus::Converged => Outcome::Converged,
            RunStatus::MaxIterations => Outcome::MaxIterations,
        },
        iterations: m.iterations,
        total_messages: m.total_messages,
        preprocessing_messages: m.preprocessing_messages,
        clock_ticks: m.preprocessing_ticks + m.clock_ticks,
        total_sums: m.sums_per_iteration.iter().sum(),
        final_error: m.errors.last().copied().unwrap_or(0.0),
        rows,
        wall: Duration::ZERO,
    }
}

fn centralized_output(
    config: &ExperimentConfig,
    run: &diht_core::recovery::IhtRun<f64>,
) -> RunOutput {
    let rows = run
        .errors
        .iter()
        .enumerate()
        .map(|(t, &err)| MetricsRow {
            iteration: t + 1,
            sums: 0,
            cumulative_messages: 0,
            cumulative_ticks: 0,
            relative_error: err,
        })
        .collect();
    RunOutput {
        run_id: config.run_id(),
        config_hash: config.config_hash(),
        algorithm: config.algorithm,
        outcome: if run.converged {
            Outcome::Converged
        } else {
            Outcome::MaxIterations
        },
        iterations: run.iterations,
        total_messages: 0,
        preprocessing_messages: 0,
        clock_ticks: 0,
        total_sums: 0,
        final_error: run.errors.last().copied().unwrap_or(0.0),
        rows,
        wall: Duration::ZERO,
    }
}

fn diverged_output(config: &ExperimentConfig, iteration: usize, step_size: f64) -> RunOutput {
    RunOutput {
        run_id: config.run_id(),
        config_hash: config.config_hash(),
        algorithm: config.algorithm,
        outcome: Outcome::Diverged { iteration, step_size },
        iterations: iteration,
        total_messages: 0,
        preprocessing_messages: 0,
        clock_ticks: 0,
        total_sums: 0,
        final_error: f64::NAN,
        rows: Vec::new(),
        wall: Duration::ZERO,
    }
}

/// `--out` flag beats the config's `out_dir` beats `$DIHT_OUT_ROOT/<id>`
/// beats `./runs/<id>`.
pub fn resolve_out_dir(flag: Option<&Path>, config: &ExperimentConfig) -> PathBuf {
    if let Some(dir) = flag {
        return dir.to_path_buf();
    }
    if let Some(dir) = &config.out_dir {
        return dir.clone();
    }
    if let Some(root) = std::env::var_os(OUT_ROOT_ENV) {
        return PathBuf::from(root).join(config.run_id());
    }
    PathBuf::from("runs").join(config.run_id())
}

pub fn summary_line(output: &RunOutput) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        output.run_id,
        output.config_hash,
        output.algorithm.name(),
        output.outcome.name(),
        output.iterations,
        output.total_messages,
        output.preprocessing_messages,
        output.clock_ticks,
        output.total_sums,
        output.final_error,
    )
}

/// Writes `config.resolved`, `metrics.csv` and `summary.csv` into `dir`.
pub fn write_artifacts(
    dir: &Path,
    config: &ExperimentConfig,
    output: &RunOutput,
) -> CliResult<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.resolved"), config.canonical_string())?;

    let mut metrics = String::new();
    metrics.push_str(METRICS_SCHEMA);
    metrics.push('\n');
    metrics.push_str(METRICS_HEADER);
    metrics.push('\n');
    for row in &output.rows {
        metrics.push_str(&format!(
            "{},{},{},{},{}\n",
            row.iteration,
            row.sums,
            row.cumulative_messages,
            row.cumulative_ticks,
            row.relative_error
        ));
    }
    std::fs::write(dir.join("metrics.csv"), metrics)?;

    let summary = format!("{SUMMARY_SCHEMA}\n{SUMMARY_HEADER}\n{}\n", summary_line(output));
    std::fs::write(dir.join("summary.csv"), summary)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RawConfig;

    fn config(text: &str) -> ExperimentConfig {
        let mut raw = RawConfig::from_str(text).unwrap();
        let config = ExperimentConfig::from_raw(&mut raw).unwrap();
        raw.ensure_empty().unwrap();
        config
    }

    const SMALL: &str = "\
        n = 60\n\
        m = 30\n\
        agents = 3\n\
        sparsity = 4\n\
        step_size = 0.5\n\
        problem_seed = 11\n\
        topology = complete\n\
        max_iter = 60\n\
    ";

    #[test]
    fn metrics_rows_accumulate_the_documented_identities() {
        let output = execute(&config(SMALL)).unwrap();
        assert!(matches!(output.outcome, Outcome::Converged));
        assert_eq!(output.rows.len(), output.iterations);
        let last = output.rows.last().unwrap();
        assert_eq!(last.cumulative_messages, output.total_messages);
        assert!(last.cumulative_ticks <= output.clock_ticks);
        assert_eq!(
            output.total_sums,
            output.rows.iter().map(|r| r.sums).sum::<u64>()
        );
        assert_eq!(last.relative_error, output.final_error);
        assert!(output.final_error <= 1e-2);
    }

    #[test]
    fn centralized_runs_report_no_communication() {
        let text = SMALL.replace("topology = complete", "topology = path\nalgorithm = centralized");
        let output = execute(&config(&text)).unwrap();
        assert_eq!(output.total_messages, 0);
        assert_eq!(output.clock_ticks, 0);
        assert!(output.rows.iter().all(|r| r.sums == 0));
        assert!(matches!(output.outcome, Outcome::Converged));
    }

    #[test]
    fn naive_runs_sum_every_object_every_iteration() {
        let text = SMALL.replace("topology = complete", "topology = complete\nalgorithm = naive");
        let output = execute(&config(&text)).unwrap();
        assert!(output.rows.iter().all(|r| r.sums == 60));
        assert_eq!(
            output.total_messages,
            output.preprocessing_messages + 3 * 2 * 60 * output.iterations as u64
        );
    }

    #[test]
    fn divergence_is_an_outcome_not_an_error() {
        let text = SMALL.replace("step_size = 0.5", "step_size = 10000");
        let output = execute(&config(&text)).unwrap();
        assert!(matches!(output.outcome, Outcome::Diverged { .. }));
        assert_eq!(output.outcome.exit_code(), 3);
        assert!(output.final_error.is_nan());
    }

    #[test]
    fn uneven_divisibility_is_a_usage_error() {
        let text = SMALL.replace("agents = 3", "agents = 4");
        match execute(&config(&text)) {
            Err(CliError::Usage(msg)) => assert!(msg.contains("divide"), "{msg}"),
            other => panic!("expected usage error, got {other:?}"),
        }
    }
}
