//! The two list types the top-K protocols work over: a per-agent
//! sorted view of one value vector, consumed from both ends, and the
//! bounded list of best (object, sum) pairs found so far.

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::float::Float;
use crate::topk::{ObjectId, Side};

/// One agent's values sorted descending (ties: lower object id
/// first), with cursors tracking how far sorted access has consumed
/// the list from each end.
#[derive(Clone, Debug)]
pub struct SortedList<T> {
    /// Sorted by value descending, object id ascending on ties.
    entries: Vec<(ObjectId, T)>,
    /// Value per object, indexed by `ObjectId::index`.
    by_id: Vec<T>,
    consumed_top: usize,
    consumed_bottom: usize,
    last_top: Option<T>,
    last_bottom: Option<T>,
}

impl<T: Float> SortedList<T> {
    /// Builds the list for a value vector; object `o` takes value
    /// `values[o − 1]`.
    pub fn from_values(values: &[T]) -> Result<Self> {
        let pairs: Vec<(ObjectId, T)> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (ObjectId::from_index(i), v))
            .collect();
        Self::from_pairs(pairs)
    }

    /// Builds the list from explicit pairs, which must cover objects
    /// `1..=N` exactly once.
    pub fn from_pairs(pairs: Vec<(ObjectId, T)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::invalid("a sorted list needs at least one entry"));
        }
        let n = pairs.len();
        let mut by_id = vec![None; n];
        for &(o, v) in &pairs {
            if !v.is_finite() {
                return Err(Error::invalid(format!("non-finite value {v} for object {o}")));
            }
            if o.0 < 1 || o.0 > n {
                return Err(Error::invalid(format!(
                    "object {o} outside the universe 1..={n}"
                )));
            }
            if by_id[o.index()].replace(v).is_some() {
                return Err(Error::invalid(format!("object {o} listed twice")));
            }
        }
        let by_id: Vec<T> = by_id.into_iter().map(|v| v.expect("all slots filled")).collect();
        let mut entries = pairs;
        entries.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .expect("finite values compare")
                .then_with(|| a.0.cmp(&b.0))
        });
        Ok(SortedList {
            entries,
            by_id,
            consumed_top: 0,
            consumed_bottom: 0,
            last_top: None,
            last_bottom: None,
        })
    }

    /// Universe size N.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sorted entries, top first.
    pub fn entries(&self) -> &[(ObjectId, T)] {
        &self.entries
    }

    /// This agent's value for an object.
    pub fn value(&self, object: ObjectId) -> Option<T> {
        self.by_id.get(object.index()).copied()
    }

    /// Entries not yet consumed from either end.
    pub fn remaining(&self) -> usize {
        self.entries.len() - self.consumed_top - self.consumed_bottom
    }

    pub fn fully_consumed(&self) -> bool {
        self.remaining() == 0
    }

    /// Next unconsumed entry on a side, without consuming it.
    pub fn peek(&self, side: Side) -> Option<(ObjectId, T)> {
        if self.fully_consumed() {
            return None;
        }
        match side {
            Side::Top => Some(self.entries[self.consumed_top]),
            Side::Bottom => Some(self.entries[self.entries.len() - 1 - self.consumed_bottom]),
        }
    }

    /// Consumes the next entry on a side.
    pub fn consume(&mut self, side: Side) -> Option<(ObjectId, T)> {
        let entry = self.peek(side)?;
        match side {
            Side::Top => {
                self.consumed_top += 1;
                self.last_top = Some(entry.1);
            }
            Side::Bottom => {
                self.consumed_bottom += 1;
                self.last_bottom = Some(entry.1);
            }
        }
        Some(entry)
    }

    /// Most recently consumed value on a side, if any.
    pub fn last_consumed(&self, side: Side) -> Option<T> {
        match side {
            Side::Top => self.last_top,
            Side::Bottom => self.last_bottom,
        }
    }

    /// This agent's share of a threshold sum: the most recently
    /// consumed value from the side, or the boundary value if that
    /// side has not been read yet.
    pub fn threshold_contribution(&self, side: Side) -> Result<T> {
        self.last_consumed(side)
            .or_else(|| self.peek(side).map(|(_, v)| v))
            .ok_or_else(|| {
                Error::invalid(format!("no {side} threshold value in an exhausted list"))
            })
    }
}

fn score_rank<T: Float>(a: &(ObjectId, T), b: &(ObjectId, T)) -> std::cmp::Ordering {
    b.1.abs()
        .partial_cmp(&a.1.abs())
        .expect("finite sums compare")
        .then_with(|| a.0.cmp(&b.0))
}

/// The best (object, sum) pairs seen so far, at most K of them,
/// ordered by |sum| descending with lower ids winning ties.
#[derive(Clone, Debug, PartialEq)]
pub struct TopKList<T> {
    k: usize,
    entries: Vec<(ObjectId, T)>,
}

impl<T: Float> TopKList<T> {
    pub fn new(k: usize) -> Self {
        TopKList {
            k,
            entries: Vec::with_capacity(k.min(64)),
        }
    }

    /// Builds a list by offering every score once.
    pub fn from_scores(k: usize, scores: &[(ObjectId, T)]) -> Self {
        let mut list = TopKList::new(k);
        for &(o, s) in scores {
            list.offer(o, s);
        }
        list
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() >= self.k
    }

    /// Ordered entries, largest |sum| first.
    pub fn entries(&self) -> &[(ObjectId, T)] {
        &self.entries
    }

    /// |sum| of the weakest kept entry.
    pub fn min_abs(&self) -> Option<T> {
        self.entries.last().map(|&(_, s)| s.abs())
    }

    pub fn contains(&self, object: ObjectId) -> bool {
        self.entries.iter().any(|&(o, _)| o == object)
    }

    /// Considers one (object, sum) pair. Re-offering an object is a
    /// no-op. Returns whether the list changed.
    pub fn offer(&mut self, object: ObjectId, sum: T) -> bool {
        if self.k == 0 || self.contains(object) {
            return false;
        }
        if self.entries.len() < self.k {
            let pos = self
                .entries
                .partition_point(|e| score_rank(e, &(object, sum)).is_lt());
            self.entries.insert(pos, (object, sum));
            return true;
        }
        let candidate = (object, sum);
        if score_rank(&candidate, self.entries.last().expect("full list")).is_lt() {
            self.entries.pop();
            let pos = self
                .entries
                .partition_point(|e| score_rank(e, &candidate).is_lt());
            self.entries.insert(pos, candidate);
            return true;
        }
        false
    }
}

/// Expands top-K entries into a length-`n` signal: each sum at its
/// object's index, zeros elsewhere.
pub fn finalize_estimate<T: Float>(entries: &[(ObjectId, T)], n: usize) -> Result<Array1<T>> {
    let mut signal = Array1::zeros(n);
    for &(o, sum) in entries {
        if o.0 < 1 || o.0 > n {
            return Err(Error::invalid(format!(
                "object {o} outside the signal range 1..={n}"
            )));
        }
        if signal[o.index()] != T::zero() {
            return Err(Error::invalid(format!("object {o} appears twice")));
        }
        signal[o.index()] = sum;
    }
    Ok(signal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topk::demo_lists;

    #[test]
    fn demo_list_sorts_descending_with_cursor_access() {
        let lists = demo_lists::<f64>();
        let second = &lists[1];
        assert_eq!(second.entries()[0], (ObjectId(4), 45.0));
        assert_eq!(second.entries()[1], (ObjectId(1), 28.0));
        assert_eq!(second.entries()[9], (ObjectId(7), 1.0));
        assert_eq!(second.value(ObjectId(10)), Some(22.0));
    }

    #[test]
    fn value_ties_order_by_object_id() {
        let list = SortedList::from_values(&[5.0, 5.0]).unwrap();
        assert_eq!(list.entries(), &[(ObjectId(1), 5.0), (ObjectId(2), 5.0)]);
    }

    #[test]
    fn bottom_traversal_is_ascending_value_order() {
        let mut list = SortedList::from_values(&[3.0, -1.0, 4.0, 0.0]).unwrap();
        let mut seen = Vec::new();
        while let Some((_, v)) = list.consume(Side::Bottom) {
            seen.push(v);
        }
        assert_eq!(seen, vec![-1.0, 0.0, 3.0, 4.0]);
        assert!(list.fully_consumed());
        assert_eq!(list.last_consumed(Side::Bottom), Some(4.0));
        assert_eq!(list.last_consumed(Side::Top), None);
    }

    #[test]
    fn cursors_never_cross() {
        let mut list = SortedList::from_values(&[1.0, 2.0, 3.0]).unwrap();
        list.consume(Side::Top);
        list.consume(Side::Bottom);
        assert_eq!(list.remaining(), 1);
        assert_eq!(list.consume(Side::Top), Some((ObjectId(2), 2.0)));
        assert_eq!(list.consume(Side::Top), None);
        assert_eq!(list.consume(Side::Bottom), None);
    }

    #[test]
    fn threshold_contribution_prefers_consumed_then_boundary() {
        let mut list = SortedList::from_values(&[10.0, 20.0, 30.0]).unwrap();
        // nothing consumed: boundary values
        assert_eq!(list.threshold_contribution(Side::Top).unwrap(), 30.0);
        assert_eq!(list.threshold_contribution(Side::Bottom).unwrap(), 10.0);
        list.consume(Side::Top);
        assert_eq!(list.threshold_contribution(Side::Top).unwrap(), 30.0);
        list.consume(Side::Top);
        assert_eq!(list.threshold_contribution(Side::Top).unwrap(), 20.0);
        // bottom still unconsumed: boundary moved? bottom end untouched
        assert_eq!(list.threshold_contribution(Side::Bottom).unwrap(), 10.0);
    }

    #[test]
    fn malformed_pairs_are_rejected() {
        assert!(SortedList::<f64>::from_pairs(vec![]).is_err());
        assert!(SortedList::from_pairs(vec![(ObjectId(1), 1.0), (ObjectId(1), 2.0)]).is_err());
        assert!(SortedList::from_pairs(vec![(ObjectId(1), 1.0), (ObjectId(3), 2.0)]).is_err());
        assert!(SortedList::from_values(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn topk_keeps_largest_magnitudes_with_id_tie_break() {
        let mut list = TopKList::new(2);
        assert!(list.offer(ObjectId(5), 1.0));
        assert!(list.offer(ObjectId(2), -3.0));
        assert!(list.offer(ObjectId(9), 2.0));
        assert!(!list.offer(ObjectId(7), 0.5));
        assert_eq!(list.entries(), &[(ObjectId(2), -3.0), (ObjectId(9), 2.0)]);
        assert_eq!(list.min_abs(), Some(2.0));
        // |−2.0| ties the weakest entry; higher id loses
        assert!(!list.offer(ObjectId(10), -2.0));
        // same magnitude at a lower id wins
        assert!(list.offer(ObjectId(1), -2.0));
        assert_eq!(list.entries(), &[(ObjectId(2), -3.0), (ObjectId(1), -2.0)]);
    }

    #[test]
    fn reoffering_an_object_changes_nothing() {
        let mut list = TopKList::new(3);
        list.offer(ObjectId(1), 4.0);
        assert!(!list.offer(ObjectId(1), 4.0));
        assert_eq!(list.len(), 1);
    }

    #[test]
    fn finalize_places_sums_at_object_indices() {
        let signal =
            finalize_estimate(&[(ObjectId(4), 72.0), (ObjectId(3), 67.0)], 10).unwrap();
        assert_eq!(
            signal.to_vec(),
            vec![0.0, 0.0, 67.0, 72.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        );
        let single = finalize_estimate(&[(ObjectId(1), -2.5)], 3).unwrap();
        assert_eq!(single.to_vec(), vec![-2.5, 0.0, 0.0]);
        let empty = finalize_estimate::<f64>(&[], 4).unwrap();
        assert_eq!(empty.to_vec(), vec![0.0; 4]);
    }

    #[test]
    fn finalize_rejects_bad_ids() {
        assert!(finalize_estimate(&[(ObjectId(5), 1.0)], 4).is_err());
        assert!(finalize_estimate(&[(ObjectId(1), 1.0), (ObjectId(1), 2.0)], 4).is_err());
    }
}
