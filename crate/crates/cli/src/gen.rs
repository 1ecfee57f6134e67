//! `diht gen-problem` and `diht gen-topology`: write instance files
//! for later runs or external tools.

use std::path::Path;

use diht_core::recovery::{save_problem, ProblemConfig, StepSizeRule};
use diht_core::{Error, Topology};

use crate::error::{CliError, CliResult};

#[allow(clippy::too_many_arguments)]
pub fn cmd_gen_problem(
    n: usize,
    m: usize,
    agents: usize,
    sparsity: usize,
    seed: u64,
    noise_sigma: f64,
    step_size: &str,
    out: &Path,
) -> CliResult<i32> {
    let step_size = match step_size {
        "auto" => StepSizeRule::Auto,
        text => {
            let v: f64 = text.parse().map_err(|_| {
                CliError::usage(format!(
                    "--step-size: `{text}` is neither `auto` nor a number"
                ))
            })?;
            StepSizeRule::Fixed(v)
        }
    };
    let config = ProblemConfig {
        n,
        m,
        agents,
        sparsity,
        seed,
        noise_sigma,
        step_size,
    };
    let problem = config.generate::<f64>().map_err(usage_if_invalid)?;
    save_problem(&problem, out)?;
    println!(
        "wrote {} ({m}\u{d7}{n} over {agents} agents, sparsity {sparsity}, alpha {})",
        out.display(),
        problem.step_size()
    );
    Ok(0)
}

pub fn cmd_gen_topology(
    kind: &str,
    agents: usize,
    param: Option<f64>,
    seed: u64,
    out: &Path,
) -> CliResult<i32> {
    let needs_param = |name: &str| {
        param.ok_or_else(|| CliError::usage(format!("--param: required for kind = {name}")))
    };
    let reject_param = |name: &str| -> CliResult<()> {
        if param.is_some() {
            Err(CliError::usage(format!(
                "--param: kind = {name} takes no parameter"
            )))
        } else {
            Ok(())
        }
    };
    let topology = match kind {
        "er" => Topology::erdos_renyi(agents, needs_param("er")?, seed),
        "geometric" => Topology::random_geometric(agents, needs_param("geometric")?, seed),
        "path" => {
            reject_param("path")?;
            Topology::path(agents)
        }
        "complete" => {
            reject_param("complete")?;
            Topology::complete(agents)
        }
        other => {
            return Err(CliError::usage(format!(
                "--kind: `{other}` is not one of er, geometric, path, complete"
            )))
        }
    }
    .map_err(usage_if_invalid)?;
    topology.save(out)?;
    println!(
        "wrote {} ({} agents, {} edges)",
        out.display(),
        topology.agents(),
        topology.edge_count()
    );
    Ok(0)
}

fn usage_if_invalid(err: Error) -> CliError {
    match err {
        Error::InvalidArgument(msg) => CliError::usage(msg),
        other => CliError::Run(other),
    }
}
