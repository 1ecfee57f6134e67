//! Broadcast-convergecast group sums.
//!
//! Any agent can initiate a sum of one value per agent: a request
//! floods down the initiator's broadcast tree, values fold upward
//! (children in ascending id order, then self), and the root floods
//! the finished sum back down. Every agent learns the identical
//! result, and every computation costs exactly `3(P−1)` messages —
//! request, contribution, and result each cross every tree edge once.
//!
//! The fold order is fixed by the tree, not by arrival order, so sums
//! are bit-identical across delivery schedules. An agent's own
//! contribution is pinned when the request reaches it.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::float::Float;
use crate::netsim::{
    AgentId, AgentLogic, DeliveryModel, Message, Outbox, Payload, Simulator, Topology, TreeSet,
};

/// Identifies one group-sum computation network-wide.
pub trait SumKey: Clone + Eq + Ord + std::hash::Hash + std::fmt::Debug {
    /// The agent whose broadcast tree carries this computation.
    fn initiator(&self) -> AgentId;
}

#[derive(Clone, Debug)]
pub enum SumMsg<K, Q, T> {
    Request { key: K, query: Q },
    Up { key: K, value: T },
    Result { key: K, value: T },
}

impl<K, Q, T> Payload for SumMsg<K, Q, T>
where
    K: Clone + std::fmt::Debug,
    Q: Clone + std::fmt::Debug,
    T: Clone + std::fmt::Debug,
{
    fn kind(&self) -> &'static str {
        match self {
            SumMsg::Request { .. } => "SUM_REQ",
            SumMsg::Up { .. } => "SUM_UP",
            SumMsg::Result { .. } => "SUM_RESULT",
        }
    }
}

/// A finished computation as seen by one agent.
#[derive(Clone, Debug, PartialEq)]
pub struct CompletedSum<K, Q, T> {
    pub key: K,
    pub query: Q,
    pub value: T,
}

struct PendingSum<Q, T> {
    query: Q,
    own: T,
    /// Slots aligned with the sorted children list.
    child_values: Vec<Option<T>>,
    missing: usize,
}

/// Per-agent state machine for any number of in-flight sums.
pub struct GroupSumEngine<K: SumKey, Q, T> {
    me: AgentId,
    trees: Arc<TreeSet>,
    pending: HashMap<K, PendingSum<Q, T>>,
}

impl<K: SumKey, Q: Clone, T: Float> GroupSumEngine<K, Q, T> {
    pub fn new(me: AgentId, trees: Arc<TreeSet>) -> Self {
        GroupSumEngine {
            me,
            trees,
            pending: HashMap::new(),
        }
    }

    pub fn me(&self) -> AgentId {
        self.me
    }

    pub fn trees(&self) -> &Arc<TreeSet> {
        &self.trees
    }

    /// Starts a computation rooted here. With a single agent the sum
    /// completes immediately; otherwise the request goes out and the
    /// result arrives later through [`Self::handle`].
    pub fn initiate(
        &mut self,
        key: K,
        query: Q,
        own: T,
        out: &mut Outbox<SumMsg<K, Q, T>>,
    ) -> Result<Option<CompletedSum<K, Q, T>>> {
        if key.initiator() != self.me {
            return Err(Error::internal(format!(
                "agent {} initiating {key:?} owned by {}",
                self.me,
                key.initiator()
            )));
        }
        if self.pending.contains_key(&key) {
            return Err(Error::Protocol {
                agent: self.me.0,
                detail: format!("second initiation of {key:?}"),
            });
        }
        let children = self.trees.tree(self.me).children_of(self.me);
        if children.is_empty() {
            return Ok(Some(CompletedSum {
                key,
                query,
                value: own,
            }));
        }
        for &c in children {
            out.send(
                c,
                SumMsg::Request {
                    key: key.clone(),
                    query: query.clone(),
                },
            );
        }
        let missing = children.len();
        self.pending.insert(
            key,
            PendingSum {
                query,
                own,
                child_values: vec![None; missing],
                missing,
            },
        );
        Ok(None)
    }

    /// Feeds one delivered message through the state machine.
    /// `resolve` supplies this agent's contribution and runs only for
    /// requests.
    pub fn handle(
        &mut self,
        msg: Message<SumMsg<K, Q, T>>,
        resolve: impl FnOnce(&Q) -> Result<T>,
        out: &mut Outbox<SumMsg<K, Q, T>>,
    ) -> Result<Option<CompletedSum<K, Q, T>>> {
        match msg.payload {
            SumMsg::Request { key, query } => {
                let tree = self.trees.tree(key.initiator());
                if tree.parent_of(self.me) != Some(msg.src) {
                    return Err(Error::Protocol {
                        agent: self.me.0,
                        detail: format!("request for {key:?} from non-parent {}", msg.src),
                    });
                }
                if self.pending.contains_key(&key) {
                    return Err(Error::Protocol {
                        agent: self.me.0,
                        detail: format!("duplicate request for {key:?}"),
                    });
                }
                let own = resolve(&query)?;
                let children = tree.children_of(self.me);
                if children.is_empty() {
                    out.send(
                        msg.src,
                        SumMsg::Up {
                            key: key.clone(),
                            value: own,
                        },
                    );
                } else {
                    for &c in children {
                        out.send(
                            c,
                            SumMsg::Request {
                                key: key.clone(),
                                query: query.clone(),
                            },
                        );
                    }
                }
                let missing = children.len();
                self.pending.insert(
                    key,
                    PendingSum {
                        query,
                        own,
                        child_values: vec![None; missing],
                        missing,
                    },
                );
                Ok(None)
            }
            SumMsg::Up { key, value } => {
                let tree = self.trees.tree(key.initiator());
                let children = tree.children_of(self.me);
                let slot = children.binary_search(&msg.src).map_err(|_| Error::Protocol {
                    agent: self.me.0,
                    detail: format!("contribution for {key:?} from non-child {}", msg.src),
                })?;
                let entry = self.pending.get_mut(&key).ok_or_else(|| Error::Protocol {
                    agent: self.me.0,
                    detail: format!("contribution for unknown computation {key:?}"),
                })?;
                if entry.child_values[slot].is_some() {
                    return Err(Error::Protocol {
                        agent: self.me.0,
                        detail: format!("duplicate contribution for {key:?} from {}", msg.src),
                    });
                }
                entry.child_values[slot] = Some(value);
                entry.missing -= 1;
                if entry.missing > 0 {
                    return Ok(None);
                }
                let mut sum = T::zero();
                for v in &entry.child_values {
                    sum = sum + v.expect("no contribution missing");
                }
                sum = sum + entry.own;
                match tree.parent_of(self.me) {
                    Some(parent) => {
                        out.send(parent, SumMsg::Up { key, value: sum });
                        Ok(None)
                    }
                    None => {
                        let entry = self.pending.remove(&key).expect("entry just updated");
                        for &c in children {
                            out.send(
                                c,
                                SumMsg::Result {
                                    key: key.clone(),
                                    value: sum,
                                },
                            );
                        }
                        Ok(Some(CompletedSum {
                            key,
                            query: entry.query,
                            value: sum,
                        }))
                    }
                }
            }
            SumMsg::Result { key, value } => {
                let tree = self.trees.tree(key.initiator());
                if tree.parent_of(self.me) != Some(msg.src) {
                    return Err(Error::Protocol {
                        agent: self.me.0,
                        detail: format!("result for {key:?} from non-parent {}", msg.src),
                    });
                }
                let entry = self.pending.remove(&key).ok_or_else(|| Error::Protocol {
                    agent: self.me.0,
                    detail: format!("result for unknown computation {key:?}"),
                })?;
                for &c in tree.children_of(self.me) {
                    out.send(
                        c,
                        SumMsg::Result {
                            key: key.clone(),
                            value,
                        },
                    );
                }
                Ok(Some(CompletedSum {
                    key,
                    query: entry.query,
                    value,
                }))
            }
        }
    }
}

/// Key for the standalone drivers: one slot per batched request.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SlotKey {
    pub initiator: AgentId,
    pub slot: u32,
}

impl SumKey for SlotKey {
    fn initiator(&self) -> AgentId {
        self.initiator
    }
}

struct DriverAgent<T: Float> {
    engine: GroupSumEngine<SlotKey, u32, T>,
    /// This agent's contribution per batched request.
    contributions: Vec<T>,
    completed: Vec<CompletedSum<SlotKey, u32, T>>,
}

impl<T: Float> AgentLogic<SumMsg<SlotKey, u32, T>> for DriverAgent<T> {
    fn on_tick(
        &mut self,
        msgs: Vec<Message<SumMsg<SlotKey, u32, T>>>,
        out: &mut Outbox<SumMsg<SlotKey, u32, T>>,
    ) -> Result<()> {
        for msg in msgs {
            let contributions = &self.contributions;
            let done = self.engine.handle(
                msg,
                |&slot| {
                    contributions
                        .get(slot as usize)
                        .copied()
                        .ok_or_else(|| Error::internal(format!("no contribution for slot {slot}")))
                },
                out,
            )?;
            if let Some(done) = done {
                self.completed.push(done);
            }
        }
        Ok(())
    }
}

/// Outcome of [`group_sum`] / [`concurrent_group_sums`].
pub struct GroupSumRun<T> {
    /// Per request, in batch order: the sum every agent holds.
    pub values: Vec<T>,
    pub messages: u64,
    pub ticks: u64,
    /// Messages sent per agent.
    pub sent_by: Vec<u64>,
}

/// One request for the concurrent driver: who initiates, and each
/// agent's contribution (indexed by agent).
pub struct SumRequest<T> {
    pub initiator: AgentId,
    pub contributions: Vec<T>,
}

/// Runs a single group sum over a simulated network and checks that
/// every agent saw the same result.
pub fn group_sum<T: Float>(
    topology: &Topology,
    trees: &Arc<TreeSet>,
    delivery: DeliveryModel,
    initiator: AgentId,
    contributions: &[T],
) -> Result<GroupSumRun<T>> {
    concurrent_group_sums(
        topology,
        trees,
        delivery,
        vec![SumRequest {
            initiator,
            contributions: contributions.to_vec(),
        }],
    )
}

/// Runs a batch of group sums concurrently, at most one per initiator.
pub fn concurrent_group_sums<T: Float>(
    topology: &Topology,
    trees: &Arc<TreeSet>,
    delivery: DeliveryModel,
    requests: Vec<SumRequest<T>>,
) -> Result<GroupSumRun<T>> {
    let count = topology.agents();
    for r in &requests {
        if r.contributions.len() != count {
            return Err(Error::invalid(format!(
                "{} contributions for {count} agents",
                r.contributions.len()
            )));
        }
    }
    for (i, r) in requests.iter().enumerate() {
        if requests[..i].iter().any(|p| p.initiator == r.initiator) {
            return Err(Error::Protocol {
                agent: r.initiator.0,
                detail: "two initiations by one agent in one batch".into(),
            });
        }
    }

    let agents: Vec<DriverAgent<T>> = topology
        .agent_ids()
        .map(|a| DriverAgent {
            engine: GroupSumEngine::new(a, Arc::clone(trees)),
            contributions: requests
                .iter()
                .map(|r| r.contributions[a.index()])
                .collect(),
            completed: Vec::new(),
        })
        .collect();
    let mut sim = Simulator::new(topology.clone(), agents, delivery)?;

    for (slot, request) in requests.iter().enumerate() {
        let key = SlotKey {
            initiator: request.initiator,
            slot: slot as u32,
        };
        let own = request.contributions[request.initiator.index()];
        sim.with_agent(request.initiator, |agent, out| {
            if let Some(done) = agent.engine.initiate(key, slot as u32, own, out)? {
                agent.completed.push(done);
            }
            Ok(())
        })?;
    }
    sim.run_until_quiescent(16 * (count as u64 + 2) * (requests.len() as u64 + 1))?;

    let mut values = Vec::with_capacity(requests.len());
    for (slot, request) in requests.iter().enumerate() {
        let key = SlotKey {
            initiator: request.initiator,
            slot: slot as u32,
        };
        let mut seen: Option<T> = None;
        for a in topology.agent_ids() {
            let agent = sim.agent(a);
            let found = agent
                .completed
                .iter()
                .find(|c| c.key == key)
                .ok_or_else(|| {
                    Error::internal(format!("agent {a} never completed {key:?}"))
                })?;
            match seen {
                None => seen = Some(found.value),
                Some(v) if v == found.value => {}
                Some(v) => {
                    return Err(Error::internal(format!(
                        "agents disagree on {key:?}: {v} vs {}",
                        found.value
                    )))
                }
            }
        }
        values.push(seen.expect("at least one agent"));
    }
    let sent_by = topology.agent_ids().map(|a| sim.sent_by(a)).collect();
    Ok(GroupSumRun {
        values,
        messages: sim.messages_sent(),
        ticks: sim.clock(),
        sent_by,
    })
}
