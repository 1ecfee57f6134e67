//! `diht sweep`: a topology × algorithm grid over one problem.
//!
//! The config reuses the run-config keys, minus the per-run `topology*`
//! and `algorithm` keys, plus two lists:
//!
//! ```text
//! topologies = er:0.25:1, er:0.75:1, geometric:0.5:2
//! algorithms = diht, naive          # optional, defaults to diht
//! ```
//!
//! Cells run in parallel threads and own their simulators exclusively.
//! A failing cell is recorded in its row and never stops the others;
//! the sweep itself exits 0 once the table is written.

use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use crate::config::{fnv1a64, Algorithm, CommonFields, ExperimentConfig, RawConfig, TopologySpec};
use crate::error::{CliError, CliResult};
use crate::runner::{execute, write_artifacts, RunOutput, OUT_ROOT_ENV};

pub const SWEEP_SCHEMA: &str = "# schema: diht-sweep-v1";
pub const SWEEP_HEADER: &str = "run_id,config_hash,algorithm,topology,status,iterations,\
total_messages,preprocessing_messages,clock_ticks,total_sums,final_relative_error,detail";

struct Cell {
    config: ExperimentConfig,
    topology_label: String,
}

enum CellResult {
    Done(RunOutput),
    Failed(String),
}

pub fn cmd_sweep(config_path: &Path, out_flag: Option<&Path>) -> CliResult<i32> {
    let started = Instant::now();
    let mut raw = RawConfig::from_file(config_path)?;
    for key in ["topology", "topology_param", "topology_seed", "topology_file"] {
        if raw.take(key)?.is_some() {
            return Err(CliError::usage(format!(
                "{key}: per-run key; a sweep lists its graphs under `topologies`"
            )));
        }
    }
    if raw.take("algorithm")?.is_some() {
        return Err(CliError::usage(
            "algorithm: per-run key; a sweep lists its solvers under `algorithms`",
        ));
    }
    let topologies_text = raw
        .take("topologies")?
        .ok_or_else(|| CliError::usage("topologies: required in a sweep config"))?;
    let algorithms_text = raw.take("algorithms")?;
    let common = CommonFields::from_raw(&mut raw)?;
    raw.ensure_empty()?;

    let topologies: Vec<TopologySpec> = split_list(&topologies_text)
        .map(TopologySpec::parse_compact)
        .collect::<CliResult<_>>()?;
    let algorithms: Vec<Algorithm> = match &algorithms_text {
        None => vec![Algorithm::Diht],
        Some(text) => split_list(text)
            .map(|cell| match cell {
                "diht" => Ok(Algorithm::Diht),
                "naive" => Ok(Algorithm::Naive),
                "centralized" => Ok(Algorithm::Centralized),
                other => Err(CliError::usage(format!(
                    "algorithms: `{other}` is not one of diht, naive, centralized"
                ))),
            })
            .collect::<CliResult<_>>()?,
    };

    let cells: Vec<Cell> = topologies
        .iter()
        .flat_map(|topology| {
            algorithms.iter().map(|&algorithm| Cell {
                config: common
                    .clone()
                    .assemble(topology.clone(), algorithm),
                topology_label: topology.label(),
            })
        })
        .collect();

    let out_root = resolve_sweep_dir(out_flag, &common, &cells);
    std::fs::create_dir_all(&out_root)?;

    // One thread per cell; each owns its simulator, results collect
    // through the mutex in whatever order they finish.
    let results: Vec<(usize, CellResult)> = {
        let collected = Mutex::new(Vec::with_capacity(cells.len()));
        std::thread::scope(|scope| {
            for (index, cell) in cells.iter().enumerate() {
                let collected = &collected;
                let out_root = &out_root;
                scope.spawn(move || {
                    let result = run_cell(cell, out_root);
                    collected.lock().expect("no panics hold the lock").push((index, result));
                });
            }
        });
        collected.into_inner().expect("threads joined")
    };

    let mut rows: Vec<(String, String, String)> = results
        .into_iter()
        .map(|(index, result)| {
            let cell = &cells[index];
            let hash = cell.config.config_hash();
            let (line, note) = match result {
                CellResult::Done(output) => (
                    format!(
                        "{},{},{},{},{},{},{},{},{},{},{},",
                        output.run_id,
                        hash,
                        output.algorithm.name(),
                        cell.topology_label,
                        output.outcome.name(),
                        output.iterations,
                        output.total_messages,
                        output.preprocessing_messages,
                        output.clock_ticks,
                        output.total_sums,
                        output.final_error
                    ),
                    format!(
                        "{} {} → {} in {} iterations, {} messages",
                        output.algorithm.name(),
                        cell.topology_label,
                        output.outcome.name(),
                        output.iterations,
                        output.total_messages
                    ),
                ),
                CellResult::Failed(message) => (
                    format!(
                        "{},{},{},{},failed,,,,,,,{}",
                        cell.config.run_id(),
                        hash,
                        cell.config.algorithm.name(),
                        cell.topology_label,
                        sanitize(&message)
                    ),
                    format!(
                        "{} {} → FAILED: {message}",
                        cell.config.algorithm.name(),
                        cell.topology_label
                    ),
                ),
            };
            (hash, line, note)
        })
        .collect();
    rows.sort();

    let mut table = format!("{SWEEP_SCHEMA}\n{SWEEP_HEADER}\n");
    for (_, line, _) in &rows {
        table.push_str(line);
        table.push('\n');
    }
    let table_path = out_root.join("results.csv");
    std::fs::write(&table_path, table)?;

    for (_, _, note) in &rows {
        println!("cell {note}");
    }
    println!(
        "sweep table {} ({} cells, {:.3} s)",
        table_path.display(),
        rows.len(),
        started.elapsed().as_secs_f64()
    );
    Ok(0)
}

fn run_cell(cell: &Cell, out_root: &Path) -> CellResult {
    match execute(&cell.config) {
        Ok(output) => {
            let dir = out_root.join(&output.run_id);
            match write_artifacts(&dir, &cell.config, &output) {
                Ok(()) => CellResult::Done(output),
                Err(err) => CellResult::Failed(err.to_string()),
            }
        }
        Err(err) => CellResult::Failed(err.to_string()),
    }
}

fn split_list(text: &str) -> impl Iterator<Item = &str> {
    text.split(',').map(str::trim).filter(|cell| !cell.is_empty())
}

/// Commas and line breaks would corrupt the CSV row.
fn sanitize(message: &str) -> String {
    message
        .chars()
        .map(|c| match c {
            ',' => ';',
            '\n' | '\r' => ' ',
            other => other,
        })
        .collect()
}

/// `--out` beats the config's `out_dir` beats `$DIHT_OUT_ROOT/<id>`
/// beats `./runs/<id>`, with `<id>` hashed from the cell grid.
fn resolve_sweep_dir(flag: Option<&Path>, common: &CommonFields, cells: &[Cell]) -> PathBuf {
    if let Some(dir) = flag {
        return dir.to_path_buf();
    }
    if let Some(dir) = &common.out_dir {
        return dir.clone();
    }
    let mut hashes: Vec<String> = cells.iter().map(|c| c.config.config_hash()).collect();
    hashes.sort();
    let id = format!("sweep-{:08x}", fnv1a64(hashes.concat().as_bytes()) as u32);
    if let Some(root) = std::env::var_os(OUT_ROOT_ENV) {
        return PathBuf::from(root).join(id);
    }
    PathBuf::from("runs").join(id)
}
