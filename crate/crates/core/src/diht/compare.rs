//! Trajectory comparison between the selecting solver and the
//! full-exchange baseline.

use crate::diht::{diht_run, naive_diht_run, DihtOptions};
use crate::error::Result;
use crate::float::Float;
use crate::netsim::Topology;
use crate::recovery::{l2_norm, RecoveryProblem};

#[derive(Clone, Debug)]
pub struct EquivalenceReport<T> {
    /// Iterations compared (the shorter of the two runs).
    pub iterations: usize,
    pub max_rel_diff: T,
    /// `per_iteration[t]` compares the estimates after iteration `t + 1`.
    pub per_iteration: Vec<T>,
    /// Human-readable account of the first violation, `None` when the
    /// trajectories agree within the threshold.
    pub first_divergence: Option<String>,
}

/// Runs both solvers on the same instance and compares their iterates:
/// `‖x_sel − x_full‖ / ‖x_full‖` per iteration (absolute when the
/// baseline iterate is zero), flagging the first excess over
/// `threshold`.
pub fn equivalence_check<T: Float>(
    problem: &RecoveryProblem<T>,
    topology: &Topology,
    options: &DihtOptions<T>,
    threshold: T,
) -> Result<EquivalenceReport<T>> {
    let mut options = options.clone();
    options.record_iterates = true;
    let selecting = diht_run(problem, topology, &options)?;
    let full = naive_diht_run(problem, topology, &options)?;
    let a = selecting.iterates.expect("recording requested");
    let b = full.iterates.expect("recording requested");

    let iterations = a.len().min(b.len());
    let mut per_iteration = Vec::with_capacity(iterations);
    let mut max_rel_diff = T::zero();
    let mut first_divergence = None;
    for t in 0..iterations {
        let diff = l2_norm((&a[t] - &b[t]).view());
        let scale = l2_norm(b[t].view());
        let rel = if scale > T::zero() { diff / scale } else { diff };
        per_iteration.push(rel);
        if rel > max_rel_diff {
            max_rel_diff = rel;
        }
        if rel > threshold && first_divergence.is_none() {
            first_divergence = Some(format!(
                "iteration {}: estimates differ by {rel:e} (threshold {threshold:e})",
                t + 1
            ));
        }
    }
    if first_divergence.is_none() && a.len() != b.len() {
        first_divergence = Some(format!(
            "iteration counts differ: {} with selection, {} with full exchange",
            a.len(),
            b.len()
        ));
    }
    Ok(EquivalenceReport {
        iterations,
        max_rel_diff,
        per_iteration,
        first_divergence,
    })
}
