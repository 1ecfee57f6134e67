//! `diht trace-ta`: the built-in worked example of centralized
//! sorted-access selection, emitted as a step-by-step CSV.
//!
//! Three agents hold ten signed values each; the default run selects
//! the top 2 by |sum|. Threshold cells read: a number where that
//! agent's threshold was updated this step, `-` where it is known but
//! unchanged, `?` where it is still unknown. The global threshold
//! column stays `?` until every per-agent threshold is known.

use std::path::Path;

use diht_core::topk::{demo_lists, ta_topk, TaStep};
use diht_core::Error;

use crate::error::{CliError, CliResult};

pub const TRACE_SCHEMA: &str = "# schema: ta-trace-v1";

pub fn cmd_trace(k: usize, out: Option<&Path>) -> CliResult<i32> {
    let text = render_trace(k)?;
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(0)
}

pub fn render_trace(k: usize) -> CliResult<String> {
    let lists = demo_lists::<f64>();
    let agents = lists.len();
    let run = ta_topk(&lists, k).map_err(|e| match e {
        Error::InvalidArgument(msg) => CliError::usage(format!("k: {msg}")),
        other => CliError::Run(other),
    })?;

    let mut text = String::from(TRACE_SCHEMA);
    text.push('\n');
    text.push_str("step,agent,object,sum");
    for p in 1..=agents {
        text.push_str(&format!(",tau_{p}"));
    }
    text.push_str(",tau,top_k\n");
    for step in &run.steps {
        text.push_str(&render_step(step, agents));
        text.push('\n');
    }
    Ok(text)
}

fn render_step(step: &TaStep<f64>, agents: usize) -> String {
    let mut line = format!(
        "{},{},{},{}",
        step.step,
        step.agent.0,
        step.object,
        fmt(step.sum)
    );
    for p in 1..=agents {
        line.push(',');
        if p == step.agent.0 {
            line.push_str(&fmt(step.taus[p - 1].expect("accessed agent's threshold is known")));
        } else {
            match step.taus[p - 1] {
                Some(_) => line.push('-'),
                None => line.push('?'),
            }
        }
    }
    line.push(',');
    match step.tau {
        Some(tau) => line.push_str(&fmt(tau)),
        None => line.push('?'),
    }
    line.push(',');
    line.push('{');
    for (i, (object, sum)) in step.topk.iter().enumerate() {
        if i > 0 {
            line.push(';');
        }
        line.push_str(&format!("({object},{})", fmt(*sum)));
    }
    line.push('}');
    line
}

fn fmt(value: f64) -> String {
    value.to_string()
}
