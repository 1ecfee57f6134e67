//! Problem instances: the rows of a global system `b = A x + e` split
//! into per-agent blocks, plus seeded generation and a line-oriented
//! file format.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{concatenate, Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::float::{cast, Float};
use crate::recovery::max_step_size;

/// A `K`-sparse recovery instance with its rows distributed over agents.
///
/// Block `i` holds rows of the global measurement matrix `A` together
/// with the matching measurements `b` and noise `e`; stacking the blocks
/// in index order reassembles the global system.
#[derive(Clone, Debug)]
pub struct RecoveryProblem<T> {
    matrices: Vec<Array2<T>>,
    measurements: Vec<Array1<T>>,
    noise: Vec<Array1<T>>,
    planted: Array1<T>,
    sparsity: usize,
    step_size: T,
    seed: u64,
    noise_sigma: f64,
}

impl<T: Float> RecoveryProblem<T> {
    /// Assembles a problem from per-agent blocks, validating shapes.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        matrices: Vec<Array2<T>>,
        measurements: Vec<Array1<T>>,
        noise: Vec<Array1<T>>,
        planted: Array1<T>,
        sparsity: usize,
        step_size: T,
        seed: u64,
        noise_sigma: f64,
    ) -> Result<Self> {
        if matrices.is_empty() {
            return Err(Error::invalid("at least one agent block is required"));
        }
        if matrices.len() != measurements.len() || matrices.len() != noise.len() {
            return Err(Error::invalid("per-agent block counts disagree"));
        }
        let n = planted.len();
        if n == 0 {
            return Err(Error::invalid("signal dimension must be positive"));
        }
        for (i, block) in matrices.iter().enumerate() {
            if block.nrows() == 0 {
                return Err(Error::invalid(format!("agent block {i} has no rows")));
            }
            if block.ncols() != n {
                return Err(Error::invalid(format!(
                    "agent block {i} has {} columns, expected {n}",
                    block.ncols()
                )));
            }
            if measurements[i].len() != block.nrows() || noise[i].len() != block.nrows() {
                return Err(Error::invalid(format!(
                    "agent block {i}: measurement/noise lengths do not match its rows"
                )));
            }
        }
        if sparsity > n {
            return Err(Error::invalid(format!(
                "sparsity {sparsity} exceeds dimension {n}"
            )));
        }
        if step_size <= T::zero() || !step_size.is_finite() {
            return Err(Error::invalid("step size must be positive and finite"));
        }
        Ok(RecoveryProblem {
            matrices,
            measurements,
            noise,
            planted,
            sparsity,
            step_size,
            seed,
            noise_sigma,
        })
    }

    pub fn n(&self) -> usize {
        self.planted.len()
    }

    pub fn m(&self) -> usize {
        self.matrices.iter().map(|a| a.nrows()).sum()
    }

    pub fn agents(&self) -> usize {
        self.matrices.len()
    }

    pub fn rows_of(&self, agent: usize) -> usize {
        self.matrices[agent].nrows()
    }

    pub fn matrix(&self, agent: usize) -> &Array2<T> {
        &self.matrices[agent]
    }

    pub fn measurements(&self, agent: usize) -> &Array1<T> {
        &self.measurements[agent]
    }

    pub fn noise(&self, agent: usize) -> &Array1<T> {
        &self.noise[agent]
    }

    pub fn planted(&self) -> &Array1<T> {
        &self.planted
    }

    pub fn sparsity(&self) -> usize {
        self.sparsity
    }

    pub fn step_size(&self) -> T {
        self.step_size
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    /// Overrides the stored step size (experiment configs may pin α).
    pub fn set_step_size(&mut self, step_size: T) -> Result<()> {
        if !(step_size > T::zero()) || !step_size.is_finite() {
            return Err(Error::invalid("step size must be positive and finite"));
        }
        self.step_size = step_size;
        Ok(())
    }

    /// The global matrix, blocks stacked in agent order.
    pub fn full_matrix(&self) -> Array2<T> {
        let views: Vec<_> = self.matrices.iter().map(|a| a.view()).collect();
        concatenate(Axis(0), &views).expect("blocks validated at construction")
    }

    /// The global measurement vector, blocks stacked in agent order.
    pub fn full_measurements(&self) -> Array1<T> {
        let views: Vec<_> = self.measurements.iter().map(|b| b.view()).collect();
        concatenate(Axis(0), &views).expect("blocks validated at construction")
    }

}

#[cfg(test)]
impl RecoveryProblem<f64> {
    /// Fixed 4×4 identity instance split over two agents; converges in
    /// one IHT step and makes hand-checking easy.
    pub(crate) fn identity_for_tests() -> RecoveryProblem<f64> {
        let a1 = ndarray::array![[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]];
        let a2 = ndarray::array![[0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]];
        let planted = ndarray::array![0.0, 0.0, 5.0, 0.0];
        RecoveryProblem::new(
            vec![a1, a2],
            vec![ndarray::array![0.0, 0.0], ndarray::array![5.0, 0.0]],
            vec![Array1::zeros(2), Array1::zeros(2)],
            planted,
            1,
            1.0,
            0,
            0.0,
        )
        .unwrap()
    }
}

/// How the stored step size is chosen at generation time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSizeRule {
    /// 0.9 times the convergence bound `1 / (2 λ_max(AᵀA))`.
    Auto,
    Fixed(f64),
}

#[derive(Clone, Debug)]
pub struct ProblemConfig {
    pub n: usize,
    pub m: usize,
    pub agents: usize,
    pub sparsity: usize,
    pub seed: u64,
    /// Standard deviation of additive measurement noise; 0 for exact
    /// measurements.
    pub noise_sigma: f64,
    pub step_size: StepSizeRule,
}

impl ProblemConfig {
    /// Draws a problem instance. Fully determined by the config: the
    /// seeded stream is consumed in a fixed order (matrix entries
    /// row-major and agent-major, support indices, support values,
    /// noise entries).
    pub fn generate<T: Float>(&self) -> Result<RecoveryProblem<T>> {
        let ProblemConfig {
            n,
            m,
            agents,
            sparsity,
            seed,
            noise_sigma,
            step_size,
        } = *self;
        if n == 0 || m == 0 || agents == 0 {
            return Err(Error::invalid("n, m and agents must be positive"));
        }
        if m % agents != 0 {
            return Err(Error::invalid(format!(
                "agent count {agents} must divide the measurement count {m}"
            )));
        }
        if sparsity > n {
            return Err(Error::invalid(format!(
                "sparsity {sparsity} exceeds dimension {n}"
            )));
        }
        if noise_sigma < 0.0 {
            return Err(Error::invalid("noise sigma must be non-negative"));
        }

        let rows = m / agents;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = cast::<T>((1.0 / m as f64).sqrt());

        // Matrix entries have variance 1/m, so columns have unit norm in
        // expectation.
        let mut matrices = Vec::with_capacity(agents);
        for _ in 0..agents {
            let block =
                Array2::from_shape_fn((rows, n), |_| T::standard_normal(&mut rng) * scale);
            matrices.push(block);
        }

        let mut support = rand::seq::index::sample(&mut rng, n, sparsity).into_vec();
        support.sort_unstable();
        let mut planted: Array1<T> = Array1::zeros(n);
        for &i in &support {
            planted[i] = T::standard_normal(&mut rng);
        }

        let sigma = cast::<T>(noise_sigma);
        let mut noise = Vec::with_capacity(agents);
        for _ in 0..agents {
            let e: Array1<T> = if noise_sigma > 0.0 {
                (0..rows).map(|_| T::standard_normal(&mut rng) * sigma).collect()
            } else {
                Array1::zeros(rows)
            };
            noise.push(e);
        }

        let measurements: Vec<Array1<T>> = matrices
            .iter()
            .zip(&noise)
            .map(|(a, e)| a.dot(&planted) + e)
            .collect();

        let alpha = match step_size {
            StepSizeRule::Fixed(v) => cast::<T>(v),
            StepSizeRule::Auto => {
                let views: Vec<_> = matrices.iter().map(|a| a.view()).collect();
                let full = concatenate(Axis(0), &views).expect("shapes match");
                cast::<T>(0.9) * max_step_size(full.view())?
            }
        };

        RecoveryProblem::new(
            matrices,
            measurements,
            noise,
            planted,
            sparsity,
            alpha,
            seed,
            noise_sigma,
        )
    }
}

/// Draws a noiseless instance with the automatic step size.
pub fn generate_problem<T: Float>(
    n: usize,
    m: usize,
    agents: usize,
    sparsity: usize,
    seed: u64,
) -> Result<RecoveryProblem<T>> {
    ProblemConfig {
        n,
        m,
        agents,
        sparsity,
        seed,
        noise_sigma: 0.0,
        step_size: StepSizeRule::Auto,
    }
    .generate()
}

const PROBLEM_MAGIC: &str = "diht-problem v1";

/// Writes a problem in the `diht-problem v1` text format:
///
/// ```text
/// diht-problem v1
/// n 4
/// m 4
/// agents 2
/// sparsity 1
/// alpha 1
/// seed 42
/// noise-sigma 0
/// signal 0 0 5 0
/// agent 1
/// row 1 0 0 0
/// row 0 1 0 0
/// measurements 0 0
/// noise 0 0
/// agent 2
/// ...
/// ```
///
/// Values use the shortest decimal form that parses back to the same
/// float, so a save/load round trip is exact.
pub fn save_problem<T: Float>(problem: &RecoveryProblem<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_problem(problem, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_problem<T: Float>(problem: &RecoveryProblem<T>, w: &mut impl Write) -> Result<()> {
    writeln!(w, "{PROBLEM_MAGIC}")?;
    writeln!(w, "n {}", problem.n())?;
    writeln!(w, "m {}", problem.m())?;
    writeln!(w, "agents {}", problem.agents())?;
    writeln!(w, "sparsity {}", problem.sparsity())?;
    writeln!(w, "alpha {}", problem.step_size())?;
    writeln!(w, "seed {}", problem.seed())?;
    writeln!(w, "noise-sigma {}", problem.noise_sigma())?;
    writeln!(w, "signal {}", join(problem.planted().iter()))?;
    for p in 0..problem.agents() {
        writeln!(w, "agent {}", p + 1)?;
        for row in problem.matrix(p).rows() {
            writeln!(w, "row {}", join(row.iter()))?;
        }
        writeln!(w, "measurements {}", join(problem.measurements(p).iter()))?;
        writeln!(w, "noise {}", join(problem.noise(p).iter()))?;
    }
    Ok(())
}

fn join<'a, T: Float + 'a>(values: impl Iterator<Item = &'a T>) -> String {
    values
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn load_problem<T: Float>(path: impl AsRef<Path>) -> Result<RecoveryProblem<T>> {
    let mut r = BufReader::new(File::open(path)?);
    read_problem(&mut r)
}

pub fn read_problem<T: Float>(r: &mut impl Read) -> Result<RecoveryProblem<T>> {
    let reader = BufReader::new(r);
    let mut lines = reader.lines().peekable();
    let magic = next_line(&mut lines)?;
    if magic.trim() != PROBLEM_MAGIC {
        return Err(Error::format(format!(
            "expected `{PROBLEM_MAGIC}` header, found `{magic}`"
        )));
    }

    let n: usize = parse_field(&next_line(&mut lines)?, "n")?;
    let m: usize = parse_field(&next_line(&mut lines)?, "m")?;
    let agents: usize = parse_field(&next_line(&mut lines)?, "agents")?;
    let sparsity: usize = parse_field(&next_line(&mut lines)?, "sparsity")?;
    let alpha: f64 = parse_field(&next_line(&mut lines)?, "alpha")?;
    let seed: u64 = parse_field(&next_line(&mut lines)?, "seed")?;
    let noise_sigma: f64 = parse_field(&next_line(&mut lines)?, "noise-sigma")?;
    if agents == 0 {
        return Err(Error::format("agent count must be positive"));
    }

    let signal_line = next_line(&mut lines)?;
    let planted = Array1::from_vec(parse_floats::<T>(&signal_line, "signal", n)?);

    // Agent blocks may hold different row counts; each block's rows run
    // until its `measurements` line.
    let mut matrices = Vec::with_capacity(agents);
    let mut measurements = Vec::with_capacity(agents);
    let mut noise = Vec::with_capacity(agents);
    for p in 1..=agents {
        let header = next_line(&mut lines)?;
        let expect = format!("agent {p}");
        if header.trim() != expect {
            return Err(Error::format(format!(
                "expected `{expect}`, found `{header}`"
            )));
        }
        let mut rows = Vec::new();
        while matches!(lines.peek(), Some(Ok(l)) if l.trim_start().starts_with("row")) {
            rows.push(parse_floats::<T>(&next_line(&mut lines)?, "row", n)?);
        }
        if rows.is_empty() {
            return Err(Error::format(format!("agent {p} block has no rows")));
        }
        let mut block = Array2::zeros((rows.len(), n));
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                block[[i, j]] = v;
            }
        }
        let count = block.nrows();
        matrices.push(block);
        measurements.push(Array1::from_vec(parse_floats::<T>(
            &next_line(&mut lines)?,
            "measurements",
            count,
        )?));
        noise.push(Array1::from_vec(parse_floats::<T>(
            &next_line(&mut lines)?,
            "noise",
            count,
        )?));
    }
    let total: usize = matrices.iter().map(|a| a.nrows()).sum();
    if total != m {
        return Err(Error::format(format!(
            "agent blocks hold {total} rows in total, header says m = {m}"
        )));
    }

    RecoveryProblem::new(
        matrices,
        measurements,
        noise,
        planted,
        sparsity,
        cast::<T>(alpha),
        seed,
        noise_sigma,
    )
}

fn next_line(lines: &mut impl Iterator<Item = std::io::Result<String>>) -> Result<String> {
    match lines.next() {
        Some(line) => Ok(line?),
        None => Err(Error::format("unexpected end of file")),
    }
}

fn parse_field<V: std::str::FromStr>(line: &str, key: &str) -> Result<V> {
    let rest = line
        .trim()
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix(' '))
        .ok_or_else(|| Error::format(format!("expected `{key} <value>`, found `{line}`")))?;
    rest.trim()
        .parse()
        .map_err(|_| Error::format(format!("cannot parse `{rest}` as {key}")))
}

fn parse_floats<T: Float>(line: &str, key: &str, expect: usize) -> Result<Vec<T>> {
    let rest = line
        .trim()
        .strip_prefix(key)
        .ok_or_else(|| Error::format(format!("expected `{key} ...`, found `{line}`")))?;
    let values: Vec<T> = rest
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map(cast::<T>)
                .map_err(|_| Error::format(format!("cannot parse `{tok}` as a float")))
        })
        .collect::<Result<_>>()?;
    if values.len() != expect {
        return Err(Error::format(format!(
            "{key}: expected {expect} values, found {}",
            values.len()
        )));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recovery::relative_error;

    #[test]
    fn generation_is_deterministic_and_consistent() {
        let p1 = generate_problem::<f64>(40, 20, 4, 5, 9).unwrap();
        let p2 = generate_problem::<f64>(40, 20, 4, 5, 9).unwrap();
        assert_eq!(p1.full_matrix(), p2.full_matrix());
        assert_eq!(p1.planted(), p2.planted());
        assert_eq!(p1.step_size(), p2.step_size());

        assert_eq!(p1.agents(), 4);
        for p in 0..4 {
            assert_eq!(p1.rows_of(p), 5);
            // noiseless: b = A x exactly
            let b = p1.matrix(p).dot(p1.planted());
            assert_eq!(&b, p1.measurements(p));
        }
        let nnz = p1.planted().iter().filter(|&&x| x != 0.0).count();
        assert_eq!(nnz, 5);
    }

    #[test]
    fn generation_rejects_uneven_split() {
        assert!(matches!(
            generate_problem::<f64>(10, 10, 3, 2, 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn generation_rejects_oversized_support() {
        assert!(generate_problem::<f64>(4, 4, 2, 5, 0).is_err());
    }

    #[test]
    fn noisy_generation_perturbs_measurements() {
        let config = ProblemConfig {
            n: 30,
            m: 12,
            agents: 3,
            sparsity: 4,
            seed: 5,
            noise_sigma: 0.1,
            step_size: StepSizeRule::Fixed(0.05),
        };
        let p = config.generate::<f64>().unwrap();
        for i in 0..3 {
            let clean = p.matrix(i).dot(p.planted());
            let stored = p.measurements(i);
            assert_eq!(&(clean + p.noise(i)), stored);
            assert!(p.noise(i).iter().any(|&e| e != 0.0));
        }
    }

    #[test]
    fn save_load_round_trip_is_exact() {
        let problem = generate_problem::<f64>(17, 8, 2, 3, 123).unwrap();
        let dir = std::env::temp_dir().join(format!("diht-problem-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("round_trip.problem");
        save_problem(&problem, &path).unwrap();
        let loaded = load_problem::<f64>(&path).unwrap();
        std::fs::remove_dir_all(&dir).ok();

        assert_eq!(problem.full_matrix(), loaded.full_matrix());
        assert_eq!(problem.full_measurements(), loaded.full_measurements());
        assert_eq!(problem.planted(), loaded.planted());
        assert_eq!(problem.step_size(), loaded.step_size());
        assert_eq!(problem.sparsity(), loaded.sparsity());
        assert_eq!(problem.seed(), loaded.seed());
        for p in 0..2 {
            assert_eq!(problem.noise(p), loaded.noise(p));
        }
    }

    #[test]
    fn uneven_blocks_survive_a_round_trip() {
        let full = generate_problem::<f64>(12, 7, 1, 3, 31).unwrap();
        let a = full.full_matrix();
        let b = full.full_measurements();
        let split = [0usize, 3, 5, 7];
        let problem = RecoveryProblem::new(
            (0..3)
                .map(|i| a.slice(ndarray::s![split[i]..split[i + 1], ..]).to_owned())
                .collect(),
            (0..3)
                .map(|i| b.slice(ndarray::s![split[i]..split[i + 1]]).to_owned())
                .collect(),
            (0..3)
                .map(|i| Array1::zeros(split[i + 1] - split[i]))
                .collect(),
            full.planted().clone(),
            3,
            full.step_size(),
            31,
            0.0,
        )
        .unwrap();
        assert_eq!(problem.rows_of(0), 3);
        assert_eq!(problem.rows_of(2), 2);

        let mut bytes = Vec::new();
        write_problem(&problem, &mut bytes).unwrap();
        let loaded = read_problem::<f64>(&mut bytes.as_slice()).unwrap();
        assert_eq!(problem.full_matrix(), loaded.full_matrix());
        assert_eq!(loaded.rows_of(0), 3);
        assert_eq!(loaded.rows_of(2), 2);
        assert_eq!(problem.full_measurements(), loaded.full_measurements());
    }

    #[test]
    fn load_rejects_malformed_input() {
        let mut bytes = "not a problem\n".as_bytes();
        assert!(matches!(
            read_problem::<f64>(&mut bytes),
            Err(Error::Format(_))
        ));

        let truncated = "diht-problem v1\nn 4\nm 4\n";
        assert!(read_problem::<f64>(&mut truncated.as_bytes()).is_err());
    }

    #[test]
    fn relative_error_of_planted_is_zero() {
        let p = generate_problem::<f64>(25, 10, 2, 3, 77).unwrap();
        let err = relative_error(p.planted().view(), p.planted().view()).unwrap();
        assert_eq!(err, 0.0);
    }
}
