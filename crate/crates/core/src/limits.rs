//! Limit sets, recurrence and invariance verdicts at grid scale.
//!
//! The ω-limit of a base cell is the union over one period of the eventual
//! cycle of its reach-set sequence. For base cells in the viability kernel
//! the iteration runs inside the kernel (complete-trajectory dynamics, which
//! agrees exactly with the finite-state kernel on imported relations); for
//! base cells outside it, where no two-sided path exists, the plain forward
//! iteration of the semigroup is used instead and the report says so.

use crate::bits::BitSet;
use crate::cycles::eventually_periodic_union;
use crate::error::{Error, Result};
use crate::semigroup::CellRelation;
use crate::space::CellSet;

/// Default step budget for cycle detection: subset sequences over `n` cells
/// are eventually periodic, and four sweeps of the grid is plenty for the
/// systems at hand.
pub fn default_step_budget(v: &CellRelation) -> usize {
    4 * v.cell_count()
}

#[derive(Clone, Debug)]
pub struct LimitSetReport {
    pub base_cell: usize,
    pub omega: CellSet,
    pub alpha: CellSet,
    /// Detected cycle length (0 when the budget ran out).
    pub period: usize,
    /// Step at which the ω sequence repeated.
    pub stabilization_steps: usize,
    pub stabilized: bool,
    /// ω is weakly invariant up to the declared inflation radius.
    pub weak_invariant: bool,
    pub inflation: usize,
    /// Whether the iteration was confined to the viability kernel.
    pub core_restricted: bool,
}

fn limit_union(
    v: &CellRelation,
    start: BitSet,
    core: Option<&BitSet>,
    forward: bool,
    budget: usize,
) -> (BitSet, usize, usize, bool) {
    let step = |s: &BitSet| {
        let mut out = BitSet::empty(s.len());
        for i in s.iter() {
            let next = if forward {
                v.successors(i)
            } else {
                v.predecessors(i)
            };
            for &j in next {
                out.insert(j);
            }
        }
        match core {
            Some(c) => out.intersection(c),
            None => out,
        }
    };
    let cycle = eventually_periodic_union(start, step, budget).expect("budgeted iteration");
    (
        cycle.union_over_period,
        cycle.period,
        cycle.stabilization_step,
        cycle.stabilized,
    )
}

/// ω- and α-limit report for one base cell, with a weak-invariance verdict
/// at the given inflation radius.
pub fn omega_limit_grid(
    v: &CellRelation,
    base_cell: usize,
    budget: usize,
    inflation: usize,
) -> Result<LimitSetReport> {
    if base_cell >= v.cell_count() {
        return Err(Error::InvalidDescriptor(format!(
            "cell {base_cell} out of range for {} cells",
            v.cell_count()
        )));
    }
    let core = v.core();
    let core_restricted = core.contains(base_cell);
    let core_bits = core_restricted.then(|| core.bits().clone());
    let start = BitSet::from_indices(v.cell_count(), &[base_cell]);

    let (omega_bits, period, stabilization_steps, stabilized) =
        limit_union(v, start.clone(), core_bits.as_ref(), true, budget);
    let (alpha_bits, _, _, _) = limit_union(v, start, core_bits.as_ref(), false, budget);

    let omega = CellSet::from_bits(v.grid().clone(), omega_bits);
    let alpha = CellSet::from_bits(v.grid().clone(), alpha_bits);
    let weak_invariant = omega_weakly_invariant(v, &omega, inflation)?;
    Ok(LimitSetReport {
        base_cell,
        omega,
        alpha,
        period,
        stabilization_steps,
        stabilized,
        weak_invariant,
        inflation,
        core_restricted,
    })
}

/// Whether a limit set is weakly invariant up to the declared inflation:
/// the viability kernel of the inflated set must still cover the set.
/// Cell sets are closed by construction, so closedness is structural.
pub fn omega_weakly_invariant(
    v: &CellRelation,
    omega: &CellSet,
    inflation: usize,
) -> Result<bool> {
    if omega.is_empty() {
        return Ok(true);
    }
    let kernel = v.viability_kernel(&omega.inflate(inflation))?;
    omega.is_subset(&kernel)
}

/// Cells of the viability kernel that belong to their own ω-limit set.
pub fn recurrent_cells(v: &CellRelation, budget: usize) -> Result<CellSet> {
    let core = v.core();
    let mut out = CellSet::empty(v.grid().clone());
    for x in core.iter() {
        let start = BitSet::from_indices(v.cell_count(), &[x]);
        let (omega, _, _, _) = limit_union(v, start, Some(core.bits()), true, budget);
        if omega.contains(x) {
            out.insert(x);
        }
    }
    Ok(out)
}

/// A cell set is strongly invariant at grid scale when, within the
/// viability kernel, it is closed under one-step images and preimages.
pub fn strong_invariance_grid(v: &CellRelation, a: &CellSet) -> Result<bool> {
    if a.grid() != v.grid() {
        return Err(Error::GridMismatch);
    }
    let core = v.core();
    let inside = a.intersection(&core)?;
    let fwd = v.reach_set(&inside, 1)?.intersection(&core)?;
    let bwd = v.reach_set(&inside, -1)?.intersection(&core)?;
    Ok(fwd.is_subset(a)? && bwd.is_subset(a)?)
}
