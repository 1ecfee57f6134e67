//! Tick-based message transport.
//!
//! Synchronous mode models one value-sized message per link direction
//! per tick with FIFO order, so tick counts are a meaningful measure of
//! protocol latency. Asynchronous mode delivers each message after a
//! seeded random delay without ordering guarantees; it exists to check
//! protocol correctness under reordering, and tick counts there carry
//! no meaning.
//!
//! Delivery within a tick is batched per receiving agent, so an agent
//! observes everything arriving in a tick at once, in deterministic
//! order.

use std::collections::{BinaryHeap, VecDeque};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::netsim::{AgentId, Topology};

pub trait Payload: Clone + std::fmt::Debug {
    /// Short tag for trace output.
    fn kind(&self) -> &'static str;
}

#[derive(Clone, Debug)]
pub struct Message<P> {
    pub src: AgentId,
    pub dst: AgentId,
    pub payload: P,
}

/// Per-agent protocol logic, driven by message delivery.
pub trait AgentLogic<P: Payload> {
    /// Handles one tick's deliveries to this agent. `msgs` is non-empty
    /// and sorted by sender.
    fn on_tick(&mut self, msgs: Vec<Message<P>>, out: &mut Outbox<P>) -> Result<()>;
}

/// Collects an agent's outgoing messages during a handler call.
pub struct Outbox<P> {
    agent: AgentId,
    tick: u64,
    sends: Vec<(AgentId, P)>,
}

impl<P> Outbox<P> {
    pub fn send(&mut self, to: AgentId, payload: P) {
        self.sends.push((to, payload));
    }

    /// The agent this outbox belongs to.
    pub fn agent(&self) -> AgentId {
        self.agent
    }

    /// Current simulation clock.
    pub fn tick(&self) -> u64 {
        self.tick
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DeliveryModel {
    /// One message per link direction per tick, FIFO per direction.
    Synchronous,
    /// Seeded per-message delays in `1..=max_delay` ticks (geometric,
    /// halving odds per extra tick); link order is not preserved.
    Asynchronous { seed: u64, max_delay: u64 },
}

struct AsyncMessage<P> {
    deliver_at: u64,
    seq: u64,
    msg: Message<P>,
}

impl<P> PartialEq for AsyncMessage<P> {
    fn eq(&self, other: &Self) -> bool {
        self.deliver_at == other.deliver_at && self.seq == other.seq
    }
}
impl<P> Eq for AsyncMessage<P> {}
impl<P> PartialOrd for AsyncMessage<P> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<P> Ord for AsyncMessage<P> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // BinaryHeap is a max-heap; reverse for earliest-first.
        (other.deliver_at, other.seq).cmp(&(self.deliver_at, self.seq))
    }
}

enum Transport<P> {
    Sync {
        /// Directed links sorted by (src, dst); queue per link.
        links: Vec<(AgentId, AgentId)>,
        queues: Vec<VecDeque<P>>,
    },
    Async {
        rng: ChaCha8Rng,
        max_delay: u64,
        heap: BinaryHeap<AsyncMessage<P>>,
        seq: u64,
    },
}

pub struct Simulator<P: Payload, A: AgentLogic<P>> {
    topology: Topology,
    agents: Vec<A>,
    transport: Transport<P>,
    clock: u64,
    sent: u64,
    delivered: u64,
    sent_by_agent: Vec<u64>,
    trace: Option<Box<dyn Write>>,
}

impl<P: Payload, A: AgentLogic<P>> Simulator<P, A> {
    pub fn new(topology: Topology, agents: Vec<A>, model: DeliveryModel) -> Result<Self> {
        if agents.len() != topology.agents() {
            return Err(Error::invalid(format!(
                "{} agents supplied for a {}-agent topology",
                agents.len(),
                topology.agents()
            )));
        }
        let transport = match model {
            DeliveryModel::Synchronous => {
                let mut links = Vec::with_capacity(2 * topology.edge_count());
                for a in topology.agent_ids() {
                    for &b in topology.neighbors(a) {
                        links.push((a, b));
                    }
                }
                links.sort_unstable();
                let queues = links.iter().map(|_| VecDeque::new()).collect();
                Transport::Sync { links, queues }
            }
            DeliveryModel::Asynchronous { seed, max_delay } => {
                if max_delay == 0 {
                    return Err(Error::invalid("max_delay must be at least 1"));
                }
                Transport::Async {
                    rng: ChaCha8Rng::seed_from_u64(seed),
                    max_delay,
                    heap: BinaryHeap::new(),
                    seq: 0,
                }
            }
        };
        let count = topology.agents();
        Ok(Simulator {
            topology,
            agents,
            transport,
            clock: 0,
            sent: 0,
            delivered: 0,
            sent_by_agent: vec![0; count],
            trace: None,
        })
    }

    /// Streams one line per delivery: `tick src dst kind`.
    pub fn set_trace(&mut self, sink: Box<dyn Write>) {
        self.trace = Some(sink);
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn messages_sent(&self) -> u64 {
        self.sent
    }

    pub fn messages_delivered(&self) -> u64 {
        self.delivered
    }

    pub fn sent_by(&self, agent: AgentId) -> u64 {
        self.sent_by_agent[agent.index()]
    }

    pub fn pending(&self) -> u64 {
        self.sent - self.delivered
    }

    pub fn agent(&self, id: AgentId) -> &A {
        &self.agents[id.index()]
    }

    pub fn agent_mut(&mut self, id: AgentId) -> &mut A {
        &mut self.agents[id.index()]
    }

    pub fn agents(&self) -> &[A] {
        &self.agents
    }

    pub fn into_agents(self) -> Vec<A> {
        self.agents
    }

    /// Queues a message from outside the normal handler flow (protocol
    /// start-up). Counted like any other send.
    pub fn inject(&mut self, from: AgentId, to: AgentId, payload: P) -> Result<()> {
        self.enqueue(from, to, payload)
    }

    /// Runs a closure against one agent with a live outbox, outside
    /// message delivery. Used to start protocols.
    pub fn with_agent<R>(
        &mut self,
        id: AgentId,
        f: impl FnOnce(&mut A, &mut Outbox<P>) -> Result<R>,
    ) -> Result<R> {
        let mut out = Outbox {
            agent: id,
            tick: self.clock,
            sends: Vec::new(),
        };
        let result = f(&mut self.agents[id.index()], &mut out)?;
        for (to, payload) in out.sends {
            self.enqueue(id, to, payload)?;
        }
        Ok(result)
    }

    fn enqueue(&mut self, from: AgentId, to: AgentId, payload: P) -> Result<()> {
        if !self.topology.contains_edge(from, to) {
            return Err(Error::Protocol {
                agent: from.0,
                detail: format!("send to non-neighbor {to}"),
            });
        }
        self.sent += 1;
        self.sent_by_agent[from.index()] += 1;
        match &mut self.transport {
            Transport::Sync { links, queues } => {
                let idx = links
                    .binary_search(&(from, to))
                    .expect("validated edge has a link slot");
                queues[idx].push_back(payload);
            }
            Transport::Async {
                rng,
                max_delay,
                heap,
                seq,
            } => {
                let mut delay = 1;
                while delay < *max_delay && rng.random::<bool>() {
                    delay += 1;
                }
                heap.push(AsyncMessage {
                    deliver_at: self.clock + delay,
                    seq: *seq,
                    msg: Message {
                        src: from,
                        dst: to,
                        payload,
                    },
                });
                *seq += 1;
            }
        }
        Ok(())
    }

    /// Advances the clock one tick and delivers whatever is due.
    pub fn step_tick(&mut self) -> Result<()> {
        self.clock += 1;
        let mut batch: Vec<Message<P>> = Vec::new();
        match &mut self.transport {
            Transport::Sync { links, queues } => {
                for (idx, queue) in queues.iter_mut().enumerate() {
                    if let Some(payload) = queue.pop_front() {
                        let (src, dst) = links[idx];
                        batch.push(Message { src, dst, payload });
                    }
                }
                batch.sort_by_key(|m| (m.dst, m.src));
            }
            Transport::Async { heap, .. } => {
                while heap
                    .peek()
                    .is_some_and(|pending| pending.deliver_at <= self.clock)
                {
                    batch.push(heap.pop().expect("peeked").msg);
                }
                // stable: preserves (deliver_at, seq) order within a dst
                batch.sort_by_key(|m| m.dst);
            }
        }

        let mut groups: Vec<(AgentId, Vec<Message<P>>)> = Vec::new();
        for msg in batch {
            match groups.last_mut() {
                Some((dst, list)) if *dst == msg.dst => list.push(msg),
                _ => groups.push((msg.dst, vec![msg])),
            }
        }

        for (dst, msgs) in groups {
            if let Some(sink) = self.trace.as_mut() {
                for m in &msgs {
                    writeln!(sink, "{} {} {} {}", self.clock, m.src, m.dst, m.payload.kind())?;
                }
            }
            self.delivered += msgs.len() as u64;
            let mut out = Outbox {
                agent: dst,
                tick: self.clock,
                sends: Vec::new(),
            };
            self.agents[dst.index()].on_tick(msgs, &mut out)?;
            for (to, payload) in out.sends {
                self.enqueue(dst, to, payload)?;
            }
        }
        Ok(())
    }

    /// Runs until no message is in flight; errors if that takes more
    /// than `max_ticks` additional ticks.
    pub fn run_until_quiescent(&mut self, max_ticks: u64) -> Result<()> {
        let deadline = self.clock + max_ticks;
        while self.pending() > 0 {
            if self.clock >= deadline {
                return Err(Error::internal(format!(
                    "no quiescence within {max_ticks} ticks ({} messages in flight)",
                    self.pending()
                )));
            }
            self.step_tick()?;
        }
        Ok(())
    }
}
