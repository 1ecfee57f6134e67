//! Broadcast-tree preprocessing.
//!
//! Before any aggregation runs, every agent floods the network once so
//! that each agent ends up with its parent and children in a
//! breadth-first spanning tree rooted at every possible initiator.
//! Ties between equally close parents go to the lowest id. Each flood
//! costs strictly fewer than two messages per edge: a request may
//! cross an edge in both directions, but an agent that already has a
//! parent swallows later requests, agents never forward back to
//! senders they heard from in the adoption tick, and the root's
//! neighbors skip their acknowledgments entirely — the root's request
//! is the only one in flight on the first tick, so every neighbor
//! adopts the root and the root can take its child set straight from
//! its neighbor list.
//!
//! Tree construction always runs on the synchronous transport so that
//! the resulting trees — and everything computed over them — do not
//! depend on the delivery model chosen for the main protocol.

use crate::error::{Error, Result};
use crate::netsim::sim::{AgentLogic, DeliveryModel, Message, Outbox, Payload, Simulator};
use crate::netsim::{AgentId, Topology};

#[derive(Clone, Debug)]
pub(crate) enum TreeMsg {
    Request { root: AgentId },
    Ack { root: AgentId },
}

impl Payload for TreeMsg {
    fn kind(&self) -> &'static str {
        match self {
            TreeMsg::Request { .. } => "TREE_REQ",
            TreeMsg::Ack { .. } => "TREE_ACK",
        }
    }
}

struct Phase {
    root: AgentId,
    parent: Option<AgentId>,
    children: Vec<AgentId>,
}

struct TreeAgent {
    me: AgentId,
    neighbors: Vec<AgentId>,
    phase: Option<Phase>,
}

impl TreeAgent {
    fn new(me: AgentId, neighbors: Vec<AgentId>) -> Self {
        TreeAgent {
            me,
            neighbors,
            phase: None,
        }
    }

    fn begin_phase(&mut self, root: AgentId) {
        // The root's neighbors always adopt the root (its request is
        // the only one in flight on the first tick), so the root knows
        // its children without waiting for acknowledgments.
        let children = if root == self.me {
            self.neighbors.clone()
        } else {
            Vec::new()
        };
        self.phase = Some(Phase {
            root,
            parent: None,
            children,
        });
    }

    fn end_phase(&mut self) -> Result<(Option<AgentId>, Vec<AgentId>)> {
        let phase = self
            .phase
            .take()
            .ok_or_else(|| Error::internal("tree phase harvested twice"))?;
        if phase.parent.is_none() && phase.root != self.me {
            return Err(Error::internal(format!(
                "agent {} was never reached by the flood from {}",
                self.me, phase.root
            )));
        }
        let mut children = phase.children;
        children.sort_unstable();
        Ok((phase.parent, children))
    }
}

impl AgentLogic<TreeMsg> for TreeAgent {
    fn on_tick(&mut self, msgs: Vec<Message<TreeMsg>>, out: &mut Outbox<TreeMsg>) -> Result<()> {
        let phase = self.phase.as_mut().ok_or_else(|| Error::Protocol {
            agent: self.me.0,
            detail: "tree message outside a build phase".into(),
        })?;
        let mut requesters: Vec<AgentId> = Vec::new();
        for m in msgs {
            let msg_root = match m.payload {
                TreeMsg::Request { root } => {
                    requesters.push(m.src);
                    root
                }
                TreeMsg::Ack { root } => {
                    phase.children.push(m.src);
                    root
                }
            };
            if msg_root != phase.root {
                return Err(Error::Protocol {
                    agent: self.me.0,
                    detail: format!(
                        "message for root {msg_root} during the {} phase",
                        phase.root
                    ),
                });
            }
        }
        if phase.parent.is_none() && self.me != phase.root {
            if let Some(&parent) = requesters.first() {
                phase.parent = Some(parent);
                if parent != phase.root {
                    out.send(parent, TreeMsg::Ack { root: phase.root });
                }
                for &n in &self.neighbors {
                    if !requesters.contains(&n) {
                        out.send(n, TreeMsg::Request { root: phase.root });
                    }
                }
            }
        }
        Ok(())
    }
}

/// One breadth-first spanning tree, stored as flat per-agent arrays.
#[derive(Clone, Debug)]
pub struct BroadcastTree {
    root: AgentId,
    parent: Vec<Option<AgentId>>,
    children: Vec<Vec<AgentId>>,
    depth: Vec<usize>,
}

impl BroadcastTree {
    pub fn root(&self) -> AgentId {
        self.root
    }

    pub fn agents(&self) -> usize {
        self.parent.len()
    }

    /// `None` exactly at the root.
    pub fn parent_of(&self, agent: AgentId) -> Option<AgentId> {
        self.parent[agent.index()]
    }

    /// Sorted ascending.
    pub fn children_of(&self, agent: AgentId) -> &[AgentId] {
        &self.children[agent.index()]
    }

    pub fn depth_of(&self, agent: AgentId) -> usize {
        self.depth[agent.index()]
    }

    pub fn height(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0)
    }
}

/// All trees for a topology, indexed by root.
#[derive(Clone, Debug)]
pub struct TreeSet {
    trees: Vec<BroadcastTree>,
}

impl TreeSet {
    pub fn agents(&self) -> usize {
        self.trees.len()
    }

    pub fn tree(&self, root: AgentId) -> &BroadcastTree {
        &self.trees[root.index()]
    }
}

/// Outcome of the preprocessing floods.
pub struct TreeBuild {
    pub trees: TreeSet,
    /// Total messages over all floods.
    pub messages: u64,
    /// Messages per flood, indexed like the roots.
    pub per_root_messages: Vec<u64>,
    /// Ticks consumed by the sequential floods.
    pub ticks: u64,
}

/// Floods the network once per root and harvests the resulting trees.
pub fn build_broadcast_trees(topology: &Topology) -> Result<TreeBuild> {
    let count = topology.agents();
    let agents: Vec<TreeAgent> = topology
        .agent_ids()
        .map(|a| TreeAgent::new(a, topology.neighbors(a).to_vec()))
        .collect();
    let mut sim = Simulator::new(topology.clone(), agents, DeliveryModel::Synchronous)?;
    let tick_cap = 2 * count as u64 + 8;

    let mut trees = Vec::with_capacity(count);
    let mut per_root_messages = Vec::with_capacity(count);
    for root in topology.agent_ids() {
        let sent_before = sim.messages_sent();
        for a in topology.agent_ids() {
            sim.agent_mut(a).begin_phase(root);
        }
        for &n in topology.neighbors(root) {
            sim.inject(root, n, TreeMsg::Request { root })?;
        }
        sim.run_until_quiescent(tick_cap)?;

        let mut parent = vec![None; count];
        let mut children = vec![Vec::new(); count];
        for a in topology.agent_ids() {
            let (p, c) = sim.agent_mut(a).end_phase()?;
            parent[a.index()] = p;
            children[a.index()] = c;
        }
        let depth = depths_from_parents(root, &parent)?;
        trees.push(BroadcastTree {
            root,
            parent,
            children,
            depth,
        });
        per_root_messages.push(sim.messages_sent() - sent_before);
    }
    Ok(TreeBuild {
        trees: TreeSet { trees },
        messages: sim.messages_sent(),
        per_root_messages,
        ticks: sim.clock(),
    })
}

fn depths_from_parents(root: AgentId, parent: &[Option<AgentId>]) -> Result<Vec<usize>> {
    let count = parent.len();
    let mut depth = vec![usize::MAX; count];
    depth[root.index()] = 0;
    for start in 0..count {
        if depth[start] != usize::MAX {
            continue;
        }
        let mut chain = vec![start];
        let mut cursor = start;
        loop {
            let p = parent[cursor]
                .ok_or_else(|| Error::internal("non-root agent without a parent"))?
                .index();
            if depth[p] != usize::MAX {
                let base = depth[p];
                for (offset, &a) in chain.iter().rev().enumerate() {
                    depth[a] = base + offset + 1;
                }
                break;
            }
            if chain.len() > count {
                return Err(Error::internal("parent pointers form a cycle"));
            }
            chain.push(p);
            cursor = p;
        }
    }
    Ok(depth)
}
