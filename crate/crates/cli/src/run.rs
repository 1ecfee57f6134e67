//! `diht run`: one config file, one run directory, exit code by result.

use std::path::Path;

use crate::config::ExperimentConfig;
use crate::error::CliResult;
use crate::runner::{execute, resolve_out_dir, write_artifacts, Outcome};

pub fn cmd_run(config_path: &Path, out_flag: Option<&Path>) -> CliResult<i32> {
    let config = ExperimentConfig::from_file(config_path)?;
    let output = execute(&config)?;
    let dir = resolve_out_dir(out_flag, &config);
    write_artifacts(&dir, &config, &output)?;

    println!("run {}", output.run_id);
    println!("config hash {}", output.config_hash);
    println!("status {}", output.outcome.name());
    if let Outcome::Diverged { iteration, step_size } = &output.outcome {
        println!("diverged at iteration {iteration} with step size {step_size}");
    }
    println!("iterations {}", output.iterations);
    println!(
        "total messages {} (preprocessing {})",
        output.total_messages, output.preprocessing_messages
    );
    println!("clock ticks {}", output.clock_ticks);
    println!("total sums {}", output.total_sums);
    println!("final relative error {}", output.final_error);
    println!("wall time {:.3} s", output.wall.as_secs_f64());
    println!("artifacts {}", dir.display());
    Ok(output.outcome.exit_code())
}
