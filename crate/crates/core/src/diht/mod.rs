//! Distributed iterative hard thresholding.
//!
//! Measurement rows live split across agents. Each iteration, every
//! agent computes its local gradient contribution, the network selects
//! the K globally largest-magnitude entries of the summed contributions
//! — via the two-sided threshold protocol, or by exchanging every
//! entry in the naive baseline — and every agent applies the same
//! update. All agents hold identical estimates at every iteration, so
//! the run needs no coordinator.

mod compare;
mod naive;
mod solver;

use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::float::{cast, Float};
use crate::netsim::{AgentId, DeliveryModel};
use crate::topk::DataConfig;

pub use compare::{equivalence_check, EquivalenceReport};
pub use naive::naive_diht_run;
pub use solver::diht_run;

/// One agent's contribution to the gradient step:
/// `α (Aᵖ)ᵀ(bᵖ − Aᵖ x̂)`, plus `x̂` itself at agent 1 so the
/// contributions sum to the full update argument `x̂ + α Aᵀ(b − A x̂)`.
pub fn local_intermediate<T: Float>(
    me: AgentId,
    matrix: ArrayView2<'_, T>,
    measurements: ArrayView1<'_, T>,
    estimate: ArrayView1<'_, T>,
    step: T,
) -> Result<Array1<T>> {
    let (rows, n) = matrix.dim();
    if measurements.len() != rows {
        return Err(Error::invalid(format!(
            "{} measurements for {rows} local rows",
            measurements.len()
        )));
    }
    if estimate.len() != n {
        return Err(Error::invalid(format!(
            "estimate has {} entries, matrix has {n} columns",
            estimate.len()
        )));
    }
    let residual = &measurements.to_owned() - &matrix.dot(&estimate);
    let z = matrix.t().dot(&residual) * step;
    if me == AgentId(1) {
        Ok(z + &estimate)
    } else {
        Ok(z)
    }
}

#[derive(Clone, Debug)]
pub struct DihtOptions<T> {
    /// Stop once the error against the planted signal drops to this level.
    pub tolerance: T,
    pub max_iterations: usize,
    pub data: DataConfig,
    pub delivery: DeliveryModel,
    /// Keep every iterate (for trajectory comparisons).
    pub record_iterates: bool,
}

impl<T: Float> Default for DihtOptions<T> {
    fn default() -> Self {
        DihtOptions {
            tolerance: cast(1e-2),
            max_iterations: 2000,
            data: DataConfig::default(),
            delivery: DeliveryModel::Synchronous,
            record_iterates: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    MaxIterations,
}

/// Communication and convergence accounting for one run.
///
/// `total_messages` always equals
/// `preprocessing_messages + 3(P−1) · Σ sums_per_iteration`: every
/// group sum crosses each of the P−1 tree edges three times and
/// nothing else is ever sent.
#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics<T> {
    /// Group sums per iteration (`S_j`).
    pub sums_per_iteration: Vec<u64>,
    pub preprocessing_messages: u64,
    pub protocol_messages: u64,
    pub total_messages: u64,
    pub preprocessing_ticks: u64,
    /// Simulator ticks spent on the iterations themselves.
    pub clock_ticks: u64,
    /// `iteration_ticks[t]` is the clock when the last agent finished
    /// iteration `t + 1` (event time under asynchronous delivery).
    pub iteration_ticks: Vec<u64>,
    /// `errors[t]` is the error against the planted signal after
    /// iteration `t + 1`.
    pub errors: Vec<T>,
    pub iterations: usize,
}

impl<T> RunMetrics<T> {
    fn empty() -> Self {
        RunMetrics {
            sums_per_iteration: Vec::new(),
            preprocessing_messages: 0,
            protocol_messages: 0,
            total_messages: 0,
            preprocessing_ticks: 0,
            clock_ticks: 0,
            iteration_ticks: Vec::new(),
            errors: Vec::new(),
            iterations: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DihtRun<T> {
    pub estimate: Array1<T>,
    pub status: RunStatus,
    pub metrics: RunMetrics<T>,
    /// Present when `record_iterates` was set; `iterates[t]` is the
    /// estimate after iteration `t + 1`.
    pub iterates: Option<Vec<Array1<T>>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recovery::generate_problem;
    use ndarray::array;

    #[test]
    fn contributions_sum_to_the_update_argument() {
        let problem = generate_problem::<f64>(30, 15, 3, 4, 2).unwrap();
        let estimate = {
            let mut x = Array1::zeros(30);
            x[3] = 1.5;
            x[17] = -2.0;
            x
        };
        let alpha = problem.step_size();
        let mut total: Array1<f64> = Array1::zeros(30);
        for a in 0..3 {
            let z = local_intermediate(
                AgentId(a + 1),
                problem.matrix(a).view(),
                problem.measurements(a).view(),
                estimate.view(),
                alpha,
            )
            .unwrap();
            total += &z;
        }
        let a = problem.full_matrix();
        let b = problem.full_measurements();
        let residual = &b - &a.dot(&estimate);
        let expected = &estimate + &(a.t().dot(&residual) * alpha);
        let diff = (&total - &expected).iter().map(|d| d.abs()).fold(0.0, f64::max);
        let scale = expected.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-12 * scale.max(1.0), "drift {diff:e}");
    }

    #[test]
    fn only_the_first_agent_carries_the_estimate() {
        let matrix = array![[0.0, 0.0], [0.0, 0.0]];
        let b = array![0.0, 0.0];
        let x = array![3.0, -1.0];
        let z1 =
            local_intermediate(AgentId(1), matrix.view(), b.view(), x.view(), 0.5).unwrap();
        let z2 =
            local_intermediate(AgentId(2), matrix.view(), b.view(), x.view(), 0.5).unwrap();
        assert_eq!(z1, x);
        assert_eq!(z2, Array1::zeros(2));
    }

    #[test]
    fn dimension_mismatches_are_rejected() {
        let matrix = array![[1.0, 0.0], [0.0, 1.0]];
        let b = array![1.0];
        let x = array![0.0, 0.0];
        assert!(local_intermediate(AgentId(1), matrix.view(), b.view(), x.view(), 1.0).is_err());
        let b = array![1.0, 2.0];
        let x = array![0.0];
        assert!(local_intermediate(AgentId(1), matrix.view(), b.view(), x.view(), 1.0).is_err());
    }
}
