//! Cycle detection on sequences of bit sets.
//!
//! A deterministic map on subsets of a finite set is eventually periodic;
//! the union over one period of the eventual cycle is exactly the set of
//! elements hit infinitely often. Both the finite-state kernel and the grid
//! limit-set machinery use this one routine so their answers match.

use crate::bits::BitSet;
use std::collections::HashMap;

pub struct CycleUnion {
    /// Union over one full period of the eventual cycle; when no cycle was
    /// found within the step budget, the union over the second half of the
    /// computed prefix (a tail-union approximation).
    pub union_over_period: BitSet,
    /// Step at which the cycle was recognized (index of the repeat).
    pub stabilization_step: usize,
    /// Cycle length, when found.
    pub period: usize,
    pub stabilized: bool,
}

/// Iterate `step` from `start`, hashing each set, until a set repeats or
/// `max_steps` sets have been produced. Hash hits are re-verified against the
/// stored sets, so collisions cannot fake a cycle.
pub fn eventually_periodic_union(
    start: BitSet,
    mut step: impl FnMut(&BitSet) -> BitSet,
    max_steps: usize,
) -> Option<CycleUnion> {
    let mut seen: HashMap<BitSet, usize> = HashMap::new();
    let mut history: Vec<BitSet> = Vec::new();
    let mut current = start;
    loop {
        if let Some(&first) = seen.get(&current) {
            let mut union = BitSet::empty(current.len());
            for s in &history[first..] {
                union = union.union(s);
            }
            return Some(CycleUnion {
                union_over_period: union,
                stabilization_step: history.len(),
                period: history.len() - first,
                stabilized: true,
            });
        }
        if history.len() >= max_steps {
            let tail_from = history.len() / 2;
            let mut union = BitSet::empty(current.len());
            for s in &history[tail_from..] {
                union = union.union(s);
            }
            return Some(CycleUnion {
                union_over_period: union,
                stabilization_step: history.len(),
                period: 0,
                stabilized: false,
            });
        }
        seen.insert(current.clone(), history.len());
        history.push(current.clone());
        current = step(&current);
    }
}
