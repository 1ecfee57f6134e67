//! Top-K selection over per-agent value lists.
//!
//! Every agent holds one value per object; an object's score is the
//! sum of its values across agents, and the goal is the K objects with
//! the largest |score|, found while summing as few objects as
//! possible. Three routes exist: the brute-force oracle (sum
//! everything), a centralized threshold scan for non-negative lists
//! ([`ta_topk`]), and the distributed two-sided threshold protocol for
//! signed lists ([`data_topk`]) built on group sums.

mod data;
mod oracle;
mod sorted_list;
mod ta;

pub use data::{data_topk, DataConfig, DataOutcome, DataRun, SideRule};
pub(crate) use data::{DataDriver, DataMsg};
pub use oracle::{brute_force_topk, exact_sums};
pub use sorted_list::{finalize_estimate, SortedList, TopKList};
pub use ta::{ta_topk, TaRun, TaStep};

use crate::aggregate::SumKey;
use crate::netsim::AgentId;

/// 1-based object index into the signal dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjectId(pub usize);

impl ObjectId {
    pub fn index(self) -> usize {
        self.0 - 1
    }

    pub fn from_index(index: usize) -> Self {
        ObjectId(index + 1)
    }
}

impl std::fmt::Display for ObjectId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Which end of a sorted list an access reads from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Top,
    Bottom,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Top => f.write_str("top"),
            Side::Bottom => f.write_str("bottom"),
        }
    }
}

/// What each agent contributes to one group sum: its stored value for
/// an object, or its current threshold bound for one side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Query {
    Object(ObjectId),
    Threshold(Side),
}

impl std::fmt::Display for Query {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Query::Object(o) => write!(f, "object {o}"),
            Query::Threshold(s) => write!(f, "{s} threshold"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CompKind {
    Object,
    Threshold,
}

/// Network-wide identity of one group-sum computation. `slot`
/// distinguishes multiple same-round object sums by one initiator
/// (used by the naive baseline; the threshold protocol always uses
/// slot 0).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CompKey {
    pub iteration: u32,
    pub round: u32,
    pub initiator: AgentId,
    pub kind: CompKind,
    pub slot: u32,
}

impl SumKey for CompKey {
    fn initiator(&self) -> AgentId {
        self.initiator
    }
}

/// The ten-object, three-agent lists used by the built-in trace
/// demonstration and several golden tests.
pub fn demo_lists<T: crate::float::Float>() -> Vec<SortedList<T>> {
    let rows: [[f64; 10]; 3] = [
        [21.0, 14.0, 11.0, 13.0, 2.0, 4.0, 10.0, 6.0, 12.0, 1.0],
        [28.0, 3.0, 26.0, 45.0, 20.0, 10.0, 1.0, 13.0, 18.0, 22.0],
        [2.0, 5.0, 30.0, 14.0, 6.0, 15.0, 27.0, 1.0, 29.0, 7.0],
    ];
    rows.iter()
        .map(|row| {
            let values: Vec<T> = row.iter().map(|&v| crate::float::cast(v)).collect();
            SortedList::from_values(&values).expect("demo lists are finite")
        })
        .collect()
}
