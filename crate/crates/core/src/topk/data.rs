//! Distributed two-sided threshold selection for signed lists.
//!
//! Every agent walks its own sorted list from both ends. Per round,
//! each agent picks the side whose threshold bound currently has the
//! larger magnitude, consumes entries from that side up to its next
//! not-yet-summed object, and initiates a group sum for it; agent 1
//! additionally initiates a threshold sum — every agent's most
//! recently consumed value from that side — tagged with the side so
//! receivers know which bound to update. A round ends when an agent
//! holds all P object results plus the threshold result; it processes
//! them in ascending initiator order (the first result wins when two
//! agents summed the same object), updates the tagged bound, and
//! stops once K kept sums all reach `max(|τ_top|, |τ_bot|)` in
//! magnitude — no unsummed object can beat that — or once every
//! object has been summed.
//!
//! All agents see identical results and make identical decisions, so
//! no coordination messages exist beyond the sums themselves.
//! Requests that outrun a receiver (a threshold request for a round it
//! has not reached, or any request for a future iteration of an outer
//! loop) are held back and answered when the receiver arrives at that
//! point, pinning every contribution to the same protocol state under
//! any delivery schedule.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::aggregate::{GroupSumEngine, SumMsg};
use crate::error::{Error, Result};
use crate::float::Float;
use crate::netsim::{
    build_broadcast_trees, AgentId, AgentLogic, DeliveryModel, Message, Outbox, Simulator,
    Topology, TreeSet,
};
use crate::topk::{CompKey, CompKind, ObjectId, Query, Side, SortedList, TopKList};

pub(crate) type DataMsg<T> = SumMsg<CompKey, Query, T>;

/// How an agent picks the side to consume from next.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SideRule {
    /// Top when `|τ_top| ≥ |τ_bot|`, unprobed sides counting as ∞.
    /// Drives whichever bound currently blocks termination.
    #[default]
    Magnitude,
    /// Top when `τ_top > τ_bot` (signed comparison, unprobed = +∞).
    /// Kept for comparison; termination still uses magnitudes.
    Signed,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct DataConfig {
    pub side_rule: SideRule,
    /// Keep the per-round (round, side, τ) history in the outcome.
    pub record_thresholds: bool,
}

struct RoundBuf<T> {
    /// Object results by initiator index.
    objects: Vec<Option<(ObjectId, T)>>,
    threshold: Option<(Side, T)>,
}

impl<T> RoundBuf<T> {
    fn new(agents: usize) -> Self {
        RoundBuf {
            objects: (0..agents).map(|_| None).collect(),
            threshold: None,
        }
    }

    fn complete(&self) -> bool {
        self.threshold.is_some() && self.objects.iter().all(Option::is_some)
    }
}

/// What one agent decided to start in a round.
struct RoundPlan<T> {
    round: u32,
    side: Side,
    object: ObjectId,
    own_value: T,
}

/// One agent's protocol state for a single selection, independent of
/// the transport.
pub(crate) struct DataCore<T> {
    agents: usize,
    config: DataConfig,
    list: SortedList<T>,
    /// Rounds whose selection has happened, 0 before the first.
    round: u32,
    side: Side,
    summed: Vec<bool>,
    distinct: usize,
    topk: TopKList<T>,
    tau_top: Option<T>,
    tau_bot: Option<T>,
    bufs: BTreeMap<u32, RoundBuf<T>>,
    sums: u64,
    thresholds: Vec<(u32, Side, T)>,
    done: bool,
}

impl<T: Float> DataCore<T> {
    fn new(agents: usize, k: usize, config: DataConfig, list: SortedList<T>) -> Self {
        let n = list.len();
        DataCore {
            agents,
            config,
            list,
            round: 0,
            side: Side::Top,
            summed: vec![false; n],
            distinct: 0,
            topk: TopKList::new(k),
            tau_top: None,
            tau_bot: None,
            bufs: BTreeMap::new(),
            sums: 0,
            thresholds: Vec::new(),
            done: false,
        }
    }

    fn round(&self) -> u32 {
        self.round
    }

    fn choose_side(&self) -> Side {
        let top = self.tau_top.unwrap_or_else(T::infinity);
        let bot = self.tau_bot.unwrap_or_else(T::infinity);
        let pick_top = match self.config.side_rule {
            SideRule::Magnitude => top.abs() >= bot.abs(),
            SideRule::Signed => top > bot,
        };
        if pick_top {
            Side::Top
        } else {
            Side::Bottom
        }
    }

    /// Starts the next round: pick a side, consume up to the next
    /// unsummed object, and report what to initiate.
    fn begin_round(&mut self) -> Result<RoundPlan<T>> {
        self.round += 1;
        if self.round as usize > self.list.len() {
            // every round sums at least one new object
            return Err(Error::internal(format!(
                "selection still running after {} rounds over {} objects",
                self.round,
                self.list.len()
            )));
        }
        let side = self.choose_side();
        self.side = side;
        loop {
            match self.list.consume(side) {
                Some((object, value)) if !self.summed[object.index()] => {
                    return Ok(RoundPlan {
                        round: self.round,
                        side,
                        object,
                        own_value: value,
                    });
                }
                Some(_) => continue,
                None => {
                    // a spent list means every object was summed, which
                    // ends the protocol before any next selection
                    return Err(Error::internal(
                        "selection scan ran past the end of a list",
                    ));
                }
            }
        }
    }

    fn record(&mut self, key: &CompKey, query: &Query, value: T) -> Result<()> {
        let buf = self
            .bufs
            .entry(key.round)
            .or_insert_with(|| RoundBuf::new(self.agents));
        match (key.kind, query) {
            (CompKind::Object, Query::Object(object)) => {
                let slot = key.initiator.index();
                if buf.objects[slot].replace((*object, value)).is_some() {
                    return Err(Error::internal(format!("duplicate result for {key:?}")));
                }
            }
            (CompKind::Threshold, Query::Threshold(side)) => {
                if buf.threshold.replace((*side, value)).is_some() {
                    return Err(Error::internal(format!("duplicate result for {key:?}")));
                }
            }
            _ => {
                return Err(Error::internal(format!(
                    "result for {key:?} answers the wrong query kind"
                )))
            }
        }
        Ok(())
    }

    /// Whether the current round's buffer is complete.
    fn ready(&self) -> bool {
        !self.done
            && self
                .bufs
                .get(&self.round)
                .is_some_and(RoundBuf::complete)
    }

    /// Absorbs the current round. `Some` carries the final list.
    fn process_round(&mut self) -> Result<Option<TopKList<T>>> {
        let buf = self
            .bufs
            .remove(&self.round)
            .ok_or_else(|| Error::internal("processing an unbuffered round"))?;
        self.sums += self.agents as u64 + 1;
        for entry in &buf.objects {
            let (object, sum) = entry.expect("round buffer complete");
            if !self.summed[object.index()] {
                self.summed[object.index()] = true;
                self.distinct += 1;
                self.topk.offer(object, sum);
            }
        }
        let (side, tau) = buf.threshold.expect("round buffer complete");
        if side != self.side {
            return Err(Error::internal(format!(
                "round {} threshold tagged {side}, but this round reads from {}",
                self.round, self.side
            )));
        }
        match side {
            Side::Top => {
                debug_assert!(self.tau_top.is_none_or(|old| tau <= old));
                self.tau_top = Some(tau);
            }
            Side::Bottom => {
                debug_assert!(self.tau_bot.is_none_or(|old| tau >= old));
                self.tau_bot = Some(tau);
            }
        }
        if self.config.record_thresholds {
            self.thresholds.push((self.round, side, tau));
        }

        if self.distinct == self.list.len() {
            self.done = true;
            return Ok(Some(self.topk.clone()));
        }
        if self.topk.is_full() {
            if let (Some(top), Some(bot)) = (self.tau_top, self.tau_bot) {
                let bound = top.abs().max(bot.abs());
                if self.topk.min_abs().expect("full list") >= bound {
                    self.done = true;
                    return Ok(Some(self.topk.clone()));
                }
            }
        }
        Ok(None)
    }
}

/// One finished selection, as seen by one agent.
#[derive(Clone, Debug, PartialEq)]
pub struct DataOutcome<T> {
    pub list: TopKList<T>,
    /// Group sums executed, threshold sums included.
    pub sums: u64,
    pub rounds: u32,
    pub distinct_objects: usize,
    /// Simulator clock when this agent learned the final list.
    pub completion_tick: u64,
    /// (round, side, τ) history when recording is on.
    pub thresholds: Vec<(u32, Side, T)>,
}

/// Network-facing wrapper: one engine plus one selection at a time,
/// reusable across iterations of an outer loop.
pub(crate) struct DataDriver<T: Float> {
    engine: GroupSumEngine<CompKey, Query, T>,
    deferred: Vec<Message<DataMsg<T>>>,
    core: Option<DataCore<T>>,
    iteration: u32,
    config: DataConfig,
    agents: usize,
}

impl<T: Float> DataDriver<T> {
    pub(crate) fn new(me: AgentId, trees: Arc<TreeSet>, config: DataConfig) -> Self {
        let agents = trees.agents();
        DataDriver {
            engine: GroupSumEngine::new(me, trees),
            deferred: Vec::new(),
            core: None,
            iteration: 0,
            config,
            agents,
        }
    }

    fn me(&self) -> AgentId {
        self.engine.me()
    }

    /// Begins a selection over `list`. Completes on the spot for a
    /// single agent; otherwise the outcome arrives via
    /// [`Self::on_message`].
    pub(crate) fn start_iteration(
        &mut self,
        iteration: u32,
        list: SortedList<T>,
        k: usize,
        out: &mut Outbox<DataMsg<T>>,
    ) -> Result<Option<DataOutcome<T>>> {
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        self.iteration = iteration;
        if self.agents == 1 {
            let topk = TopKList::from_scores(k, list.entries());
            return Ok(Some(DataOutcome {
                list: topk,
                sums: 0,
                rounds: 0,
                distinct_objects: 0,
                completion_tick: out.tick(),
                thresholds: Vec::new(),
            }));
        }
        let mut core = DataCore::new(self.agents, k, self.config, list);
        let plan = core.begin_round()?;
        self.core = Some(core);
        self.initiate_plan(plan, out)?;
        self.replay_deferred(out)?;
        Ok(None)
    }

    fn initiate_plan(&mut self, plan: RoundPlan<T>, out: &mut Outbox<DataMsg<T>>) -> Result<()> {
        let me = self.me();
        let started = self.engine.initiate(
            CompKey {
                iteration: self.iteration,
                round: plan.round,
                initiator: me,
                kind: CompKind::Object,
                slot: 0,
            },
            Query::Object(plan.object),
            plan.own_value,
            out,
        )?;
        debug_assert!(started.is_none(), "multi-agent sums never finish instantly");
        if me == AgentId(1) {
            let own = self
                .core
                .as_ref()
                .expect("selection active")
                .list
                .threshold_contribution(plan.side)?;
            let started = self.engine.initiate(
                CompKey {
                    iteration: self.iteration,
                    round: plan.round,
                    initiator: me,
                    kind: CompKind::Threshold,
                    slot: 0,
                },
                Query::Threshold(plan.side),
                own,
                out,
            )?;
            debug_assert!(started.is_none());
        }
        Ok(())
    }

    /// True when a request must wait for this agent to catch up: the
    /// contribution it asks for is defined by state this agent has not
    /// reached yet.
    fn must_defer(&self, msg: &Message<DataMsg<T>>) -> bool {
        let SumMsg::Request { key, .. } = &msg.payload else {
            return false;
        };
        if key.iteration != self.iteration {
            return key.iteration > self.iteration;
        }
        if key.kind != CompKind::Threshold {
            return false;
        }
        match &self.core {
            Some(core) => key.round > core.round(),
            None => true,
        }
    }

    /// Feeds one delivered message through; `Some` when this agent
    /// just learned the final list.
    pub(crate) fn on_message(
        &mut self,
        msg: Message<DataMsg<T>>,
        out: &mut Outbox<DataMsg<T>>,
    ) -> Result<Option<DataOutcome<T>>> {
        if self.must_defer(&msg) {
            self.deferred.push(msg);
            return Ok(None);
        }
        self.dispatch(msg, out)
    }

    fn dispatch(
        &mut self,
        msg: Message<DataMsg<T>>,
        out: &mut Outbox<DataMsg<T>>,
    ) -> Result<Option<DataOutcome<T>>> {
        let me = self.me();
        let core = &self.core;
        let completed = self.engine.handle(
            msg,
            |query| {
                let core = core.as_ref().ok_or_else(|| Error::Protocol {
                    agent: me.0,
                    detail: format!("no selection running to answer {query}"),
                })?;
                match query {
                    Query::Object(object) => {
                        core.list.value(*object).ok_or_else(|| Error::Protocol {
                            agent: me.0,
                            detail: format!("cannot resolve {query}"),
                        })
                    }
                    Query::Threshold(side) => core.list.threshold_contribution(*side),
                }
            },
            out,
        )?;
        let Some(completed) = completed else {
            return Ok(None);
        };
        if completed.key.iteration != self.iteration {
            return Err(Error::internal(format!(
                "result for {:?} while running iteration {}",
                completed.key, self.iteration
            )));
        }
        self.core
            .as_mut()
            .ok_or_else(|| Error::internal("result without a running selection"))?
            .record(&completed.key, &completed.query, completed.value)?;
        self.drain_rounds(out)
    }

    fn drain_rounds(&mut self, out: &mut Outbox<DataMsg<T>>) -> Result<Option<DataOutcome<T>>> {
        loop {
            let core = self.core.as_mut().expect("selection active");
            if !core.ready() {
                return Ok(None);
            }
            if let Some(list) = core.process_round()? {
                let outcome = DataOutcome {
                    list,
                    sums: core.sums,
                    rounds: core.round(),
                    distinct_objects: core.distinct,
                    completion_tick: out.tick(),
                    thresholds: std::mem::take(&mut core.thresholds),
                };
                self.core = None;
                return Ok(Some(outcome));
            }
            let plan = core.begin_round()?;
            self.initiate_plan(plan, out)?;
            self.replay_deferred(out)?;
        }
    }

    fn replay_deferred(&mut self, out: &mut Outbox<DataMsg<T>>) -> Result<()> {
        if self.deferred.is_empty() {
            return Ok(());
        }
        let pending = std::mem::take(&mut self.deferred);
        let (mut eligible, keep): (Vec<_>, Vec<_>) =
            pending.into_iter().partition(|m| !self.must_defer(m));
        self.deferred = keep;
        eligible.sort_by_key(|m| match &m.payload {
            SumMsg::Request { key, .. } => *key,
            _ => unreachable!("only requests are deferred"),
        });
        for msg in eligible {
            if self.dispatch(msg, out)?.is_some() {
                return Err(Error::internal("a replayed request completed a sum"));
            }
        }
        Ok(())
    }
}

struct DataAgent<T: Float> {
    driver: DataDriver<T>,
    outcome: Option<DataOutcome<T>>,
}

impl<T: Float> AgentLogic<DataMsg<T>> for DataAgent<T> {
    fn on_tick(&mut self, msgs: Vec<Message<DataMsg<T>>>, out: &mut Outbox<DataMsg<T>>) -> Result<()> {
        for msg in msgs {
            if let Some(outcome) = self.driver.on_message(msg, out)? {
                if self.outcome.replace(outcome).is_some() {
                    return Err(Error::internal("selection finished twice"));
                }
            }
        }
        Ok(())
    }
}

/// A whole-network selection run.
#[derive(Clone, Debug)]
pub struct DataRun<T> {
    /// The agreed top-K list.
    pub result: TopKList<T>,
    /// Each agent's copy, for agreement checks.
    pub per_agent: Vec<TopKList<T>>,
    /// Group sums executed, threshold sums included.
    pub sums: u64,
    pub rounds: u32,
    pub distinct_objects: usize,
    /// Protocol messages (tree preprocessing excluded).
    pub messages: u64,
    pub preprocessing_messages: u64,
    pub preprocessing_ticks: u64,
    /// Protocol ticks under synchronous delivery; meaningless under
    /// asynchronous delivery.
    pub ticks: u64,
    /// (round, side, τ) history when recording is on.
    pub thresholds: Vec<(u32, Side, T)>,
}

/// Runs the full protocol over a simulated network. Lists live one
/// per agent, in agent order, over a shared object universe.
pub fn data_topk<T: Float>(
    topology: &Topology,
    lists: &[SortedList<T>],
    k: usize,
    config: DataConfig,
    delivery: DeliveryModel,
) -> Result<DataRun<T>> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let agents = topology.agents();
    if lists.len() != agents {
        return Err(Error::invalid(format!(
            "{} lists for {agents} agents",
            lists.len()
        )));
    }
    let n = lists[0].len();
    for (i, list) in lists.iter().enumerate() {
        if list.len() != n {
            return Err(Error::Protocol {
                agent: i + 1,
                detail: format!("list covers {} objects, others cover {n}", list.len()),
            });
        }
    }

    if agents == 1 {
        let topk = TopKList::from_scores(k, lists[0].entries());
        return Ok(DataRun {
            result: topk.clone(),
            per_agent: vec![topk],
            sums: 0,
            rounds: 0,
            distinct_objects: 0,
            messages: 0,
            preprocessing_messages: 0,
            preprocessing_ticks: 0,
            ticks: 0,
            thresholds: Vec::new(),
        });
    }

    let build = build_broadcast_trees(topology)?;
    let trees = Arc::new(build.trees);
    let sim_agents: Vec<DataAgent<T>> = topology
        .agent_ids()
        .map(|a| DataAgent {
            driver: DataDriver::new(a, Arc::clone(&trees), config),
            outcome: None,
        })
        .collect();
    let mut sim = Simulator::new(topology.clone(), sim_agents, delivery)?;
    for a in topology.agent_ids() {
        let list = lists[a.index()].clone();
        sim.with_agent(a, |agent, out| {
            agent.driver.start_iteration(0, list, k, out)?;
            Ok(())
        })?;
    }
    sim.run_until_quiescent(64 * (n as u64 + 2) * (agents as u64 + 2))?;

    let mut per_agent = Vec::with_capacity(agents);
    let mut reference: Option<&DataOutcome<T>> = None;
    for a in topology.agent_ids() {
        let outcome = sim.agent(a).outcome.as_ref().ok_or_else(|| {
            Error::internal(format!("agent {a} never finished the selection"))
        })?;
        match reference {
            None => reference = Some(outcome),
            Some(first) => {
                if first.list != outcome.list
                    || first.sums != outcome.sums
                    || first.rounds != outcome.rounds
                    || first.distinct_objects != outcome.distinct_objects
                {
                    return Err(Error::internal(format!(
                        "agent {a} disagrees with agent 1 on the outcome"
                    )));
                }
            }
        }
        per_agent.push(outcome.list.clone());
    }
    let first = reference.expect("at least one agent");
    Ok(DataRun {
        result: first.list.clone(),
        sums: first.sums,
        rounds: first.rounds,
        distinct_objects: first.distinct_objects,
        thresholds: sim.agent(AgentId(1)).outcome.as_ref().expect("checked").thresholds.clone(),
        per_agent,
        messages: sim.messages_sent(),
        preprocessing_messages: build.messages,
        preprocessing_ticks: build.ticks,
        ticks: sim.clock(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topk::{brute_force_topk, demo_lists, exact_sums};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn run_sync<T: Float>(
        topology: &Topology,
        lists: &[SortedList<T>],
        k: usize,
    ) -> DataRun<T> {
        data_topk(
            topology,
            lists,
            k,
            DataConfig::default(),
            DeliveryModel::Synchronous,
        )
        .unwrap()
    }

    /// Integer-valued signed lists whose N absolute sums are all
    /// distinct, so protocol and oracle results must match exactly.
    fn signed_instance(agents: usize, n: usize, seed: u64) -> Vec<SortedList<f64>> {
        let mut seed = seed;
        loop {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let lists: Vec<SortedList<f64>> = (0..agents)
                .map(|_| {
                    let values: Vec<f64> = (0..n)
                        .map(|_| rng.random_range(-1000..=1000) as f64)
                        .collect();
                    SortedList::from_values(&values).unwrap()
                })
                .collect();
            let mut magnitudes: Vec<f64> = exact_sums(&lists)
                .unwrap()
                .into_iter()
                .map(|(_, s)| s.abs())
                .collect();
            magnitudes.sort_by(|a, b| a.partial_cmp(b).unwrap());
            if magnitudes.windows(2).all(|w| w[0] != w[1]) {
                return lists;
            }
            seed = seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
        }
    }

    #[test]
    fn demo_lists_agree_on_any_topology() {
        let lists = demo_lists::<f64>();
        for topology in [
            Topology::path(3).unwrap(),
            Topology::complete(3).unwrap(),
        ] {
            let run = run_sync(&topology, &lists, 2);
            assert_eq!(
                run.result.entries(),
                &[(ObjectId(4), 72.0), (ObjectId(3), 67.0)]
            );
            for copy in &run.per_agent {
                assert_eq!(copy.entries(), run.result.entries());
            }
            // every computation costs 3(P−1) messages, nothing else
            assert_eq!(run.messages, 3 * 2 * run.sums);
            assert_eq!(run.sums, u64::from(run.rounds) * 4);
        }
    }

    #[test]
    fn single_agent_selects_locally_without_messages() {
        let t = Topology::from_edges(1, []).unwrap();
        let list = SortedList::from_values(&[3.0, -9.0, 4.0, -1.0]).unwrap();
        let run = run_sync(&t, std::slice::from_ref(&list), 2);
        assert_eq!(
            run.result.entries(),
            &[(ObjectId(2), -9.0), (ObjectId(3), 4.0)]
        );
        assert_eq!(run.messages, 0);
        assert_eq!(run.sums, 0);
    }

    #[test]
    fn signed_instances_match_the_oracle_exactly() {
        let mut checked = 0;
        for (agents, n) in [(2, 20), (3, 35), (5, 40)] {
            let topology = Topology::erdos_renyi(agents, 0.7, 99).unwrap();
            for seed in 0..8 {
                let lists = signed_instance(agents, n, seed * 31 + agents as u64);
                for k in [1, 3, 7] {
                    let run = run_sync(&topology, &lists, k);
                    let oracle = brute_force_topk(&lists, k).unwrap();
                    assert_eq!(
                        run.result.entries(),
                        oracle.entries(),
                        "P={agents} N={n} K={k} seed={seed}"
                    );
                    for copy in &run.per_agent {
                        assert_eq!(copy.entries(), oracle.entries());
                    }
                    checked += 1;
                }
            }
        }
        assert!(checked >= 70);
    }

    #[test]
    fn unsummed_objects_never_beat_the_returned_list() {
        for seed in 0..10 {
            let lists = signed_instance(4, 30, 1000 + seed);
            let topology = Topology::erdos_renyi(4, 0.6, 7).unwrap();
            let run = run_sync(&topology, &lists, 3);
            if run.distinct_objects == 30 {
                continue; // exhausted: nothing unsummed to check
            }
            let floor = run.result.min_abs().unwrap();
            for (object, sum) in exact_sums(&lists).unwrap() {
                if !run.result.contains(object) {
                    assert!(sum.abs() <= floor, "object {object} at seed {seed}");
                }
            }
        }
    }

    #[test]
    fn thresholds_move_monotonically_toward_zero_magnitude() {
        let config = DataConfig {
            record_thresholds: true,
            ..DataConfig::default()
        };
        let lists = signed_instance(5, 40, 4242);
        let topology = Topology::erdos_renyi(5, 0.5, 13).unwrap();
        let run = data_topk(&topology, &lists, 4, config, DeliveryModel::Synchronous).unwrap();
        assert!(!run.thresholds.is_empty());
        let mut last_top: Option<f64> = None;
        let mut last_bot: Option<f64> = None;
        for &(_, side, tau) in &run.thresholds {
            match side {
                Side::Top => {
                    if let Some(prev) = last_top {
                        assert!(tau <= prev);
                    }
                    last_top = Some(tau);
                }
                Side::Bottom => {
                    if let Some(prev) = last_bot {
                        assert!(tau >= prev);
                    }
                    last_bot = Some(tau);
                }
            }
        }
    }

    #[test]
    fn dominant_objects_end_the_scan_in_three_rounds() {
        // two huge opposite-sign objects; every other sum is tiny
        let n = 30;
        let mut values = vec![vec![0.0; n]; 3];
        let big = [[350.0, 340.0, 330.0], [-330.0, -340.0, -351.0]];
        for (agent, row) in values.iter_mut().enumerate() {
            row[0] = big[0][agent];
            row[1] = big[1][agent];
            for (j, slot) in row.iter_mut().enumerate().skip(2) {
                *slot = ((agent + j) % 3) as f64 - 1.0;
            }
        }
        let lists: Vec<SortedList<f64>> = values
            .iter()
            .map(|v| SortedList::from_values(v).unwrap())
            .collect();
        let topology = Topology::complete(3).unwrap();
        let run = run_sync(&topology, &lists, 2);
        assert_eq!(
            run.result.entries(),
            &[(ObjectId(2), -1021.0), (ObjectId(1), 1020.0)]
        );
        assert_eq!(run.rounds, 3);
        assert_eq!(run.sums, 12); // (P + 1) per round
        assert!(run.distinct_objects < n);
    }

    #[test]
    fn k_of_n_sums_everything_and_returns_all_objects() {
        let lists = signed_instance(3, 12, 5);
        let topology = Topology::path(3).unwrap();
        let run = run_sync(&topology, &lists, 12);
        assert_eq!(run.distinct_objects, 12);
        assert!(run.rounds <= 12);
        let oracle = brute_force_topk(&lists, 12).unwrap();
        assert_eq!(run.result.entries(), oracle.entries());
    }

    #[test]
    fn signed_side_rule_still_matches_the_oracle() {
        let config = DataConfig {
            side_rule: SideRule::Signed,
            ..DataConfig::default()
        };
        for seed in 0..6 {
            let lists = signed_instance(4, 25, 900 + seed);
            let topology = Topology::erdos_renyi(4, 0.8, 3).unwrap();
            let run =
                data_topk(&topology, &lists, 3, config, DeliveryModel::Synchronous).unwrap();
            let oracle = brute_force_topk(&lists, 3).unwrap();
            assert_eq!(run.result.entries(), oracle.entries(), "seed {seed}");
        }
    }

    #[test]
    fn async_delivery_reproduces_synchronous_outcomes_bitwise() {
        let lists = demo_lists::<f64>();
        let topology = Topology::complete(3).unwrap();
        let sync = run_sync(&topology, &lists, 2);
        for seed in 0..6 {
            let run = data_topk(
                &topology,
                &lists,
                2,
                DataConfig::default(),
                DeliveryModel::Asynchronous {
                    seed,
                    max_delay: 7,
                },
            )
            .unwrap();
            assert_eq!(run.result, sync.result);
            assert_eq!(run.per_agent, sync.per_agent);
            assert_eq!(run.sums, sync.sums);
            assert_eq!(run.rounds, sync.rounds);
            assert_eq!(run.messages, sync.messages);
        }
    }

    #[test]
    fn mismatched_universes_are_a_protocol_error() {
        let t = Topology::path(2).unwrap();
        let lists = vec![
            SortedList::from_values(&[1.0, 2.0]).unwrap(),
            SortedList::from_values(&[1.0, 2.0, 3.0]).unwrap(),
        ];
        match data_topk(
            &t,
            &lists,
            1,
            DataConfig::default(),
            DeliveryModel::Synchronous,
        ) {
            Err(Error::Protocol { agent: 2, .. }) => {}
            other => panic!("expected protocol error, got {:?}", other.map(|r| r.sums)),
        }
    }
}
