use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{NodeOrder, PartialActivationState};

pub(super) struct Entry {
    bound: f64,
    seq: u64,
    state: PartialActivationState,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // max-heap on bound, then FIFO on insertion order
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Open regions keyed by their parent's LP bound.
pub(super) enum Frontier {
    Best { heap: BinaryHeap<Entry>, seq: u64 },
    Depth(Vec<(PartialActivationState, f64)>),
}

impl Frontier {
    pub(super) fn new(order: NodeOrder) -> Self {
        match order {
            NodeOrder::BestFirst => Frontier::Best {
                heap: BinaryHeap::new(),
                seq: 0,
            },
            NodeOrder::DepthFirst => Frontier::Depth(Vec::new()),
        }
    }

    pub(super) fn push(&mut self, state: PartialActivationState, bound: f64) {
        match self {
            Frontier::Best { heap, seq } => {
                heap.push(Entry {
                    bound,
                    seq: *seq,
                    state,
                });
                *seq += 1;
            }
            Frontier::Depth(stack) => stack.push((state, bound)),
        }
    }

    /// Queues both children so the active one is expanded first.
    pub(super) fn push_children(
        &mut self,
        active: PartialActivationState,
        inactive: PartialActivationState,
        bound: f64,
    ) {
        match self {
            Frontier::Best { .. } => {
                self.push(active, bound);
                self.push(inactive, bound);
            }
            Frontier::Depth(_) => {
                self.push(inactive, bound);
                self.push(active, bound);
            }
        }
    }

    pub(super) fn pop(&mut self) -> Option<(PartialActivationState, f64)> {
        match self {
            Frontier::Best { heap, .. } => heap.pop().map(|e| (e.state, e.bound)),
            Frontier::Depth(stack) => stack.pop(),
        }
    }

    pub(super) fn len(&self) -> usize {
        match self {
            Frontier::Best { heap, .. } => heap.len(),
            Frontier::Depth(stack) => stack.len(),
        }
    }
}
