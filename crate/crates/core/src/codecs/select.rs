use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use super::CodecError;
use crate::scalar::Scalar;

/// Heap entry ordered so that "greater" means "kept first": larger
/// magnitude wins, and on equal magnitude the lower index wins.
struct Candidate<T> {
    magnitude: T,
    index: usize,
}

impl<T: Scalar> PartialEq for Candidate<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Scalar> Eq for Candidate<T> {}

impl<T: Scalar> PartialOrd for Candidate<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar> Ord for Candidate<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.magnitude
            .partial_cmp(&other.magnitude)
            .expect("finite magnitudes")
            .then_with(|| other.index.cmp(&self.index))
    }
}

/// Indices of the `k` largest-magnitude entries, ties broken by lower index,
/// returned in ascending index order. `O(d log k)` with a bounded min-heap.
///
/// For non-negative input this is the plain Top-k by value.
pub fn select_top_k<T: Scalar>(values: &[T], k: usize) -> Result<Vec<usize>, CodecError> {
    if k < 1 || k > values.len() {
        return Err(CodecError::InvalidParameter(format!(
            "k = {k} outside 1..={}",
            values.len()
        )));
    }
    let mut heap: BinaryHeap<Reverse<Candidate<T>>> = BinaryHeap::with_capacity(k + 1);
    for (index, v) in values.iter().enumerate() {
        let c = Candidate {
            magnitude: v.abs(),
            index,
        };
        if heap.len() < k {
            heap.push(Reverse(c));
        } else if let Some(Reverse(worst)) = heap.peek() {
            if c > *worst {
                heap.pop();
                heap.push(Reverse(c));
            }
        }
    }
    let mut out: Vec<usize> = heap.into_iter().map(|Reverse(c)| c.index).collect();
    out.sort_unstable();
    Ok(out)
}
