//! Baseline solver that exchanges every entry every iteration.
//!
//! Object `o` is summed by agent `((o − 1) mod P) + 1`; once an agent
//! holds all N sums it thresholds the assembled vector locally. Same
//! trajectory as the selecting solver, with a flat `S_j = N` per
//! iteration.

use std::sync::Arc;

use ndarray::{Array1, Array2};

use crate::aggregate::GroupSumEngine;
use crate::aggregate::SumMsg;
use crate::diht::solver::{run_distributed, AgentRecord, DistributedAgent};
use crate::diht::{local_intermediate, DihtOptions, DihtRun, RunStatus};
use crate::error::{Error, Result};
use crate::float::{cast, Float};
use crate::netsim::{AgentId, AgentLogic, Message, Outbox, Topology, TreeSet};
use crate::recovery::{
    convergence_error, hard_threshold, l2_norm, RecoveryProblem, DIVERGENCE_FACTOR,
};
use crate::topk::{CompKey, CompKind, DataMsg, ObjectId, Query};

struct NaiveAgent<T: Float> {
    engine: GroupSumEngine<CompKey, Query, T>,
    deferred: Vec<Message<DataMsg<T>>>,
    me: AgentId,
    agents: usize,
    matrix: Array2<T>,
    measurements: Array1<T>,
    reference: Array1<T>,
    ref_norm: T,
    guard: T,
    n: usize,
    k: usize,
    alpha: T,
    tolerance: T,
    max_iterations: usize,
    estimate: Array1<T>,
    iteration: u32,
    /// Local contribution for the iteration in flight.
    z: Array1<T>,
    /// Completed sums for the iteration in flight, by object index.
    received: Vec<Option<T>>,
    received_count: usize,
    sums_log: Vec<u64>,
    ticks_log: Vec<u64>,
    errors: Vec<T>,
    iterates: Option<Vec<Array1<T>>>,
    finished: Option<RunStatus>,
}

impl<T: Float> NaiveAgent<T> {
    fn new(
        me: AgentId,
        problem: &RecoveryProblem<T>,
        options: &DihtOptions<T>,
        reference: Array1<T>,
        ref_norm: T,
        trees: Arc<TreeSet>,
    ) -> Self {
        let n = problem.n();
        NaiveAgent {
            agents: trees.agents(),
            engine: GroupSumEngine::new(me, trees),
            deferred: Vec::new(),
            me,
            matrix: problem.matrix(me.index()).clone(),
            measurements: problem.measurements(me.index()).clone(),
            reference,
            ref_norm,
            guard: cast::<T>(DIVERGENCE_FACTOR) * ref_norm,
            n,
            k: problem.sparsity(),
            alpha: problem.step_size(),
            tolerance: options.tolerance,
            max_iterations: options.max_iterations,
            estimate: Array1::zeros(n),
            iteration: 0,
            z: Array1::zeros(n),
            received: Vec::new(),
            received_count: 0,
            sums_log: Vec::new(),
            ticks_log: Vec::new(),
            errors: Vec::new(),
            iterates: options.record_iterates.then(Vec::new),
            finished: None,
        }
    }

    fn advance(&mut self, out: &mut Outbox<DataMsg<T>>) -> Result<()> {
        loop {
            if self.finished.is_some() {
                return Ok(());
            }
            if self.sums_log.len() >= self.max_iterations {
                self.finished = Some(RunStatus::MaxIterations);
                return Ok(());
            }
            self.iteration = self.sums_log.len() as u32;
            if !self.begin_iteration(out)? {
                return Ok(());
            }
            self.finish_iteration(out.tick())?;
        }
    }

    /// Starts one iteration; true when every sum completed on the spot
    /// (single agent).
    fn begin_iteration(&mut self, out: &mut Outbox<DataMsg<T>>) -> Result<bool> {
        self.z = local_intermediate(
            self.me,
            self.matrix.view(),
            self.measurements.view(),
            self.estimate.view(),
            self.alpha,
        )?;
        self.received = vec![None; self.n];
        self.received_count = 0;
        let mut completed = Vec::new();
        for (slot, index) in (self.me.index()..self.n).step_by(self.agents).enumerate() {
            let key = CompKey {
                iteration: self.iteration,
                round: 1,
                initiator: self.me,
                kind: CompKind::Object,
                slot: slot as u32,
            };
            let object = ObjectId::from_index(index);
            if let Some(done) =
                self.engine
                    .initiate(key, Query::Object(object), self.z[index], out)?
            {
                completed.push(done);
            }
        }
        for done in completed {
            self.record(done.query, done.value)?;
        }
        self.replay_deferred(out)?;
        Ok(self.received_count == self.n)
    }

    fn record(&mut self, query: Query, value: T) -> Result<()> {
        let Query::Object(object) = query else {
            return Err(Error::internal(format!(
                "full exchange received a result for {query}"
            )));
        };
        if self.received[object.index()].replace(value).is_some() {
            return Err(Error::internal(format!("duplicate sum for {query}")));
        }
        self.received_count += 1;
        Ok(())
    }

    fn finish_iteration(&mut self, now: u64) -> Result<()> {
        let sums: Array1<T> = self
            .received
            .iter()
            .map(|v| v.expect("iteration complete"))
            .collect();
        self.estimate = hard_threshold(sums.view(), self.k);
        self.sums_log.push(self.n as u64);
        self.ticks_log.push(now);
        let err = convergence_error(self.estimate.view(), self.reference.view(), self.ref_norm);
        self.errors.push(err);
        if let Some(trace) = self.iterates.as_mut() {
            trace.push(self.estimate.clone());
        }
        if self.ref_norm > T::zero() && l2_norm(self.estimate.view()) > self.guard {
            return Err(Error::Diverged {
                iteration: self.sums_log.len(),
                step_size: self.alpha.to_f64().unwrap_or(f64::NAN),
            });
        }
        if err <= self.tolerance {
            self.finished = Some(RunStatus::Converged);
        }
        Ok(())
    }

    fn dispatch(
        &mut self,
        msg: Message<DataMsg<T>>,
        out: &mut Outbox<DataMsg<T>>,
    ) -> Result<()> {
        let me = self.me;
        let z = &self.z;
        let n = self.n;
        let completed = self.engine.handle(
            msg,
            |query| match query {
                Query::Object(object) if object.index() < n => Ok(z[object.index()]),
                _ => Err(Error::Protocol {
                    agent: me.0,
                    detail: format!("cannot resolve {query}"),
                }),
            },
            out,
        )?;
        let Some(done) = completed else {
            return Ok(());
        };
        if done.key.iteration != self.iteration || self.finished.is_some() {
            return Err(Error::internal(format!(
                "result for {:?} outside iteration {}",
                done.key, self.iteration
            )));
        }
        self.record(done.query, done.value)?;
        if self.received_count == self.n {
            self.finish_iteration(out.tick())?;
            self.advance(out)?;
        }
        Ok(())
    }

    fn replay_deferred(&mut self, out: &mut Outbox<DataMsg<T>>) -> Result<()> {
        if self.deferred.is_empty() {
            return Ok(());
        }
        let pending = std::mem::take(&mut self.deferred);
        let (mut eligible, keep): (Vec<_>, Vec<_>) = pending
            .into_iter()
            .partition(|m| !self.must_defer(m));
        self.deferred = keep;
        eligible.sort_by_key(|m| match &m.payload {
            SumMsg::Request { key, .. } => *key,
            _ => unreachable!("only requests are deferred"),
        });
        for msg in eligible {
            self.dispatch(msg, out)?;
        }
        Ok(())
    }

    /// Requests for a future iteration wait until this agent gets there.
    fn must_defer(&self, msg: &Message<DataMsg<T>>) -> bool {
        match &msg.payload {
            SumMsg::Request { key, .. } => key.iteration > self.iteration,
            _ => false,
        }
    }
}

impl<T: Float> AgentLogic<DataMsg<T>> for NaiveAgent<T> {
    fn on_tick(
        &mut self,
        msgs: Vec<Message<DataMsg<T>>>,
        out: &mut Outbox<DataMsg<T>>,
    ) -> Result<()> {
        for msg in msgs {
            if self.must_defer(&msg) {
                self.deferred.push(msg);
            } else {
                self.dispatch(msg, out)?;
            }
        }
        Ok(())
    }
}

impl<T: Float> DistributedAgent<T> for NaiveAgent<T> {
    fn start(&mut self, out: &mut Outbox<DataMsg<T>>) -> Result<()> {
        self.advance(out)
    }

    fn into_record(self) -> Result<AgentRecord<T>> {
        let status = self
            .finished
            .ok_or_else(|| Error::internal(format!("agent {} never finished", self.me)))?;
        Ok(AgentRecord {
            status,
            estimate: self.estimate,
            sums_log: self.sums_log,
            ticks_log: self.ticks_log,
            errors: self.errors,
            iterates: self.iterates,
        })
    }
}

/// Distributed IHT with the full-exchange baseline instead of the
/// selection protocol. Same interface and accounting as [`diht_run`].
///
/// [`diht_run`]: crate::diht::diht_run
pub fn naive_diht_run<T: Float>(
    problem: &RecoveryProblem<T>,
    topology: &Topology,
    options: &DihtOptions<T>,
) -> Result<DihtRun<T>> {
    run_distributed(problem, topology, options, |me, ctx| {
        NaiveAgent::new(me, problem, options, ctx.0, ctx.1, ctx.2)
    })
}
