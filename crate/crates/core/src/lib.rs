//! Sparse signal recovery by distributed iterative hard thresholding.
//!
//! A measurement system `b = A x + e` with a `K`-sparse signal `x` is
//! solved by iterative hard thresholding (IHT). The distributed variant
//! splits the rows of `A` over `P` networked agents; each iteration the
//! agents compute local gradient pieces and then agree on the global
//! top-`K` entries of the summed update with a communication-efficient
//! threshold protocol instead of exchanging full vectors.
//!
//! Module map:
//!
//! * [`recovery`] – dense problems, hard thresholding, centralized IHT,
//!   step-size and error utilities.
//! * [`netsim`] – deterministic tick-based message transport, topology
//!   generators, broadcast-tree preprocessing.
//! * [`aggregate`] – broadcast/convergecast group sums over the trees.
//! * [`topk`] – sorted-access top-K selection: a centralized leader
//!   protocol and the decentralized two-sided threshold protocol.
//! * [`diht`] – the distributed IHT loop, a naive full-exchange
//!   baseline, and the centralized-equivalence check.

pub mod aggregate;
pub mod diht;
pub mod error;
pub mod float;
pub mod netsim;
pub mod recovery;
pub mod topk;

pub use error::{Error, Result};
pub use float::Float;
pub use netsim::{AgentId, DeliveryModel, Topology};

/// Concrete `f64` aliases for the common case.
pub type Problem = recovery::RecoveryProblem<f64>;
pub type ProblemConfig = recovery::ProblemConfig;
pub type SortedList = topk::SortedList<f64>;
pub type TopKList = topk::TopKList<f64>;
pub type RunMetrics = diht::RunMetrics<f64>;
