//! `diht plot-data`: re-derives plot-ready series from a run directory.
//!
//! Reads `summary.csv` and `metrics.csv`, writes
//! `sums_per_iteration.csv` and `relative_error.csv` next to them. A
//! centralized run computes no group sums, so its sums series is
//! deliberately empty (header only).

use std::path::Path;

use crate::error::{CliError, CliResult};

pub const SUMS_SCHEMA: &str = "# schema: diht-sums-v1";
pub const ERROR_SCHEMA: &str = "# schema: diht-error-v1";

pub fn cmd_plot(run_dir: &Path) -> CliResult<i32> {
    if !run_dir.is_dir() {
        return Err(CliError::usage(format!(
            "run directory {} does not exist",
            run_dir.display()
        )));
    }
    let summary = read_csv(run_dir, "summary.csv")?;
    let metrics = read_csv(run_dir, "metrics.csv")?;

    let algorithm = single_row_field(&summary, "algorithm", run_dir)?;
    let iteration_col = column(&metrics, "iteration", "metrics.csv")?;
    let sums_col = column(&metrics, "sums", "metrics.csv")?;
    let error_col = column(&metrics, "relative_error", "metrics.csv")?;

    let mut sums_text = format!("{SUMS_SCHEMA}\niteration,sums\n");
    let mut error_text = format!("{ERROR_SCHEMA}\niteration,relative_error\n");
    let mut points = 0usize;
    for row in &metrics.rows {
        error_text.push_str(&format!("{},{}\n", row[iteration_col], row[error_col]));
        if algorithm != "centralized" {
            sums_text.push_str(&format!("{},{}\n", row[iteration_col], row[sums_col]));
            points += 1;
        }
    }
    std::fs::write(run_dir.join("sums_per_iteration.csv"), sums_text)?;
    std::fs::write(run_dir.join("relative_error.csv"), error_text)?;
    println!(
        "wrote sums_per_iteration.csv ({points} points) and relative_error.csv ({} points) in {}",
        metrics.rows.len(),
        run_dir.display()
    );
    Ok(0)
}

struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_csv(run_dir: &Path, name: &str) -> CliResult<Csv> {
    let path = run_dir.join(name);
    let text = std::fs::read_to_string(&path).map_err(|_| {
        CliError::usage(format!(
            "run directory {} is missing {name}",
            run_dir.display()
        ))
    })?;
    let mut lines = text.lines().filter(|l| !l.trim_start().starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| CliError::usage(format!("{name}: no header row")))?
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    Ok(Csv { header, rows })
}

fn column(csv: &Csv, name: &str, file: &str) -> CliResult<usize> {
    csv.header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::usage(format!("{file}: no `{name}` column")))
}

fn single_row_field(csv: &Csv, name: &str, run_dir: &Path) -> CliResult<String> {
    let col = column(csv, name, "summary.csv")?;
    let row = csv.rows.first().ok_or_else(|| {
        CliError::usage(format!(
            "summary.csv in {} has no data row",
            run_dir.display()
        ))
    })?;
    Ok(row[col].clone())
}
