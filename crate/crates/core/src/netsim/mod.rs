//! Deterministic message-passing network simulation: topologies, the
//! tick-based transport, and broadcast-tree preprocessing.

mod sim;
mod topology;
mod tree;

pub use sim::{AgentLogic, DeliveryModel, Message, Outbox, Payload, Simulator};
pub use topology::Topology;
pub use tree::{build_broadcast_trees, BroadcastTree, TreeBuild, TreeSet};

/// Agent identifier; agents are numbered `1..=P`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct AgentId(pub usize);

impl AgentId {
    /// Position in 0-based per-agent storage.
    pub fn index(self) -> usize {
        self.0 - 1
    }

    pub fn from_index(index: usize) -> Self {
        AgentId(index + 1)
    }
}

impl std::fmt::Display for AgentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}
