//! Centralized threshold scan for non-negative lists.
//!
//! A leader performs one sorted access per step, rotating over agents
//! in ascending id order, sums each newly seen object across all
//! agents, and tracks the threshold τ — the sum of every agent's last
//! accessed value. Since the lists are sorted, no unseen object can
//! score above τ, so the scan stops as soon as K summed objects score
//! at least τ.

use crate::error::{Error, Result};
use crate::float::Float;
use crate::netsim::AgentId;
use crate::topk::{ObjectId, Side, SortedList, TopKList};

/// One sorted access and its aftermath.
#[derive(Clone, Debug, PartialEq)]
pub struct TaStep<T> {
    /// 1-based step number.
    pub step: usize,
    /// Agent whose list was accessed.
    pub agent: AgentId,
    /// Object summed at this step.
    pub object: ObjectId,
    pub sum: T,
    /// Last accessed value per agent, after this step; `None` until an
    /// agent's list has been accessed.
    pub taus: Vec<Option<T>>,
    /// Σ of `taus` once every agent has been accessed.
    pub tau: Option<T>,
    /// Best K entries after this step.
    pub topk: Vec<(ObjectId, T)>,
}

#[derive(Clone, Debug)]
pub struct TaRun<T> {
    pub result: TopKList<T>,
    /// Distinct objects summed.
    pub sums_computed: usize,
    pub steps: Vec<TaStep<T>>,
}

/// Runs the centralized scan. Lists must share one universe and hold
/// only non-negative values; signed inputs belong to [`data_topk`].
///
/// [`data_topk`]: crate::topk::data_topk
pub fn ta_topk<T: Float>(lists: &[SortedList<T>], k: usize) -> Result<TaRun<T>> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if lists.is_empty() {
        return Err(Error::invalid("no lists supplied"));
    }
    let n = lists[0].len();
    if lists.iter().any(|l| l.len() != n) {
        return Err(Error::invalid("lists cover different object universes"));
    }
    for (i, list) in lists.iter().enumerate() {
        if let Some(&(o, v)) = list.entries().last() {
            if v < T::zero() {
                return Err(Error::invalid(format!(
                    "agent {} holds a negative value ({v} for object {o}); \
                     the threshold scan needs non-negative lists — use the \
                     signed two-sided protocol instead",
                    i + 1
                )));
            }
        }
    }

    let mut lists: Vec<SortedList<T>> = lists.to_vec();
    let agents = lists.len();
    let mut summed = vec![false; n];
    let mut topk = TopKList::new(k);
    let mut steps: Vec<TaStep<T>> = Vec::new();
    let mut distinct = 0usize;

    let mut step = 0usize;
    while distinct < n {
        step += 1;
        let agent_index = (step - 1) % agents;

        // sorted access: skip past already summed objects
        let mut picked = None;
        while let Some((o, _)) = lists[agent_index].consume(Side::Top) {
            if !summed[o.index()] {
                picked = Some(o);
                break;
            }
        }
        let Some(object) = picked else {
            // this list is spent, so every object has been summed
            break;
        };

        let mut sum = T::zero();
        for list in &lists {
            sum = sum + list.value(object).expect("object in universe");
        }
        summed[object.index()] = true;
        distinct += 1;
        topk.offer(object, sum);

        let taus: Vec<Option<T>> = lists.iter().map(|l| l.last_consumed(Side::Top)).collect();
        let tau = taus
            .iter()
            .try_fold(T::zero(), |acc, t| t.map(|v| acc + v));
        steps.push(TaStep {
            step,
            agent: AgentId(agent_index + 1),
            object,
            sum,
            taus,
            tau,
            topk: topk.entries().to_vec(),
        });

        if let Some(tau) = tau {
            if topk.is_full() && topk.min_abs().expect("full list") >= tau {
                break;
            }
        }
    }

    Ok(TaRun {
        result: topk,
        sums_computed: distinct,
        steps,
    })
}
