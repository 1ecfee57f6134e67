//! Dense recovery problems and the centralized IHT solver.

mod iht;
mod problem;

pub use iht::{
    centralized_iht, hard_threshold, largest_gram_eigenvalue, max_step_size, relative_error,
    IhtOptions, IhtRun,
};
pub(crate) use iht::{convergence_error, l2_norm, DIVERGENCE_FACTOR};
pub use problem::{
    generate_problem, load_problem, save_problem, ProblemConfig, RecoveryProblem, StepSizeRule,
};
