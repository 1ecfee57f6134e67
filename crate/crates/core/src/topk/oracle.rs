//! Brute-force reference: sum every object, keep the K largest
//! magnitudes. Costs N sums always; every protocol result is checked
//! against it.

use crate::error::{Error, Result};
use crate::float::Float;
use crate::topk::{ObjectId, SortedList, TopKList};

/// All N per-object sums, in object-id order. Contributions fold in
/// ascending agent order.
pub fn exact_sums<T: Float>(lists: &[SortedList<T>]) -> Result<Vec<(ObjectId, T)>> {
    let first = lists
        .first()
        .ok_or_else(|| Error::invalid("no lists supplied"))?;
    let n = first.len();
    if lists.iter().any(|l| l.len() != n) {
        return Err(Error::invalid("lists cover different object universes"));
    }
    Ok((1..=n)
        .map(|o| {
            let object = ObjectId(o);
            let mut sum = T::zero();
            for list in lists {
                sum = sum + list.value(object).expect("object in universe");
            }
            (object, sum)
        })
        .collect())
}

/// The exact top-K by |sum| over all objects.
pub fn brute_force_topk<T: Float>(lists: &[SortedList<T>], k: usize) -> Result<TopKList<T>> {
    Ok(TopKList::from_scores(k, &exact_sums(lists)?))
}
