//! One-step reachability relations over grid cells: the set-valued
//! evolution at grid scale, with reach sets, preimages, composition checks
//! and the two-sided viability kernel.
//!
//! Edges are stored in compressed sparse rows ordered by source cell, so
//! iteration order is fixed and construction is deterministic.

use crate::bits::BitSet;
use crate::error::{Error, Result};
use crate::relation::Relation;
use crate::solvers::SetValuedField;
use crate::space::{CellSet, Grid};
use crate::trajectory::SolutionBundle;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstructionMode {
    /// Outer approximation propagated from a box field.
    FromField,
    /// Empirical transitions observed in a bundle.
    FromBundle,
    /// Imported from a finite-state relation.
    Imported,
}

/// One-step (time `dt`) reachability relation over the cells of a grid.
#[derive(Clone, Debug)]
pub struct CellRelation {
    grid: Arc<Grid>,
    dt: f64,
    row_offsets: Vec<usize>,
    columns: Vec<usize>,
    pred_offsets: Vec<usize>,
    pred_columns: Vec<usize>,
    pub mode: ConstructionMode,
    pub inflation: usize,
}

impl CellRelation {
    pub fn from_edges(
        grid: Arc<Grid>,
        dt: f64,
        mut edges: Vec<(usize, usize)>,
        mode: ConstructionMode,
        inflation: usize,
    ) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidDescriptor(format!("step must be positive, got {dt}")));
        }
        let n = grid.cell_count();
        for &(i, j) in &edges {
            if i >= n || j >= n {
                return Err(Error::InvalidDescriptor(format!(
                    "edge {i} -> {j} out of range for {n} cells"
                )));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        let mut row_offsets = vec![0usize; n + 1];
        for &(i, _) in &edges {
            row_offsets[i + 1] += 1;
        }
        for i in 0..n {
            row_offsets[i + 1] += row_offsets[i];
        }
        let columns: Vec<usize> = edges.iter().map(|&(_, j)| j).collect();

        let mut rev: Vec<(usize, usize)> = edges.iter().map(|&(i, j)| (j, i)).collect();
        rev.sort_unstable();
        let mut pred_offsets = vec![0usize; n + 1];
        for &(j, _) in &rev {
            pred_offsets[j + 1] += 1;
        }
        for i in 0..n {
            pred_offsets[i + 1] += pred_offsets[i];
        }
        let pred_columns: Vec<usize> = rev.iter().map(|&(_, i)| i).collect();

        Ok(CellRelation {
            grid,
            dt,
            row_offsets,
            columns,
            pred_offsets,
            pred_columns,
            mode,
            inflation,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn cell_count(&self) -> usize {
        self.grid.cell_count()
    }

    pub fn successors(&self, cell: usize) -> &[usize] {
        &self.columns[self.row_offsets[cell]..self.row_offsets[cell + 1]]
    }

    pub fn predecessors(&self, cell: usize) -> &[usize] {
        &self.pred_columns[self.pred_offsets[cell]..self.pred_offsets[cell + 1]]
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.cell_count())
            .flat_map(|i| self.successors(i).iter().map(move |&j| (i, j)))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.columns.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.successors(i).binary_search(&j).is_ok()
    }

    /// View the cell relation as a finite-state relation, enabling the exact
    /// kernel operations on it.
    pub fn to_relation(&self) -> Relation {
        Relation::new(self.cell_count(), &self.edges()).expect("edges validated at construction")
    }

    /// Import a finite-state relation as a cell relation over the one-cell-
    /// per-state grid, step 1.
    pub fn from_relation(r: &Relation) -> Self {
        let grid = Arc::new(Grid::finite(r.state_count()));
        CellRelation::from_edges(grid, 1.0, r.edges().to_vec(), ConstructionMode::Imported, 0)
            .expect("relation edges are in range")
    }

    fn image_bits(&self, e: &BitSet) -> BitSet {
        let mut out = BitSet::empty(self.cell_count());
        for i in e.iter() {
            for &j in self.successors(i) {
                out.insert(j);
            }
        }
        out
    }

    fn preimage_bits(&self, e: &BitSet) -> BitSet {
        let mut out = BitSet::empty(self.cell_count());
        for i in e.iter() {
            for &j in self.predecessors(i) {
                out.insert(j);
            }
        }
        out
    }

    /// `k`-fold relational image (`k >= 0`) or preimage (`k < 0`);
    /// `reach_set(e, 0) = e`.
    pub fn reach_set(&self, e: &CellSet, k: i64) -> Result<CellSet> {
        if e.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let mut bits = e.bits().clone();
        for _ in 0..k.unsigned_abs() {
            bits = if k >= 0 {
                self.image_bits(&bits)
            } else {
                self.preimage_bits(&bits)
            };
        }
        Ok(CellSet::from_bits(self.grid.clone(), bits))
    }

    /// Largest subset of `a` in which every cell keeps a successor and a
    /// predecessor inside the subset, by iterated removal.
    pub fn viability_kernel(&self, a: &CellSet) -> Result<CellSet> {
        if a.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let mut core = a.bits().clone();
        loop {
            let snapshot = core.clone();
            let mut changed = false;
            for i in snapshot.iter() {
                let has_succ = self.successors(i).iter().any(|&j| snapshot.contains(j));
                let has_pred = self.predecessors(i).iter().any(|&j| snapshot.contains(j));
                if !has_succ || !has_pred {
                    core.remove(i);
                    changed = true;
                }
            }
            if !changed {
                return Ok(CellSet::from_bits(self.grid.clone(), core));
            }
        }
    }

    /// Viability kernel of the whole grid.
    pub fn core(&self) -> CellSet {
        self.viability_kernel(&CellSet::full(self.grid.clone()))
            .expect("full set shares the grid")
    }
}

/// Outcome of the semigroup-law checks for one `(e, s, t)` triple.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SemigroupReport {
    /// Cells violating `reach(e, s+t) == reach(reach(e, s), t)`.
    pub composition_violations: Vec<usize>,
    /// Cells of `e ∩ core` missing from `reach(reach(e, -t), t)`.
    pub round_trip_violations: Vec<usize>,
    pub holds: bool,
}

/// Check the composition law `V(s+t)E = V(t)V(s)E` (a relation-power
/// identity, exact) and the round trip `E ∩ core ⊆ V(t)V(-t)E`.
pub fn check_semigroup(v: &CellRelation, e: &CellSet, s: i64, t: i64) -> Result<SemigroupReport> {
    let direct = v.reach_set(e, s + t)?;
    let staged = v.reach_set(&v.reach_set(e, s)?, t)?;
    let mut composition_violations: Vec<usize> = direct
        .bits()
        .difference(staged.bits())
        .iter()
        .chain(staged.bits().difference(direct.bits()).iter())
        .collect();
    composition_violations.sort_unstable();

    let core = v.core();
    let round = v.reach_set(&v.reach_set(e, -t)?, t)?;
    let round_trip_violations: Vec<usize> = e
        .bits()
        .intersection(core.bits())
        .difference(round.bits())
        .iter()
        .collect();

    let holds = composition_violations.is_empty() && round_trip_violations.is_empty();
    Ok(SemigroupReport {
        composition_violations,
        round_trip_violations,
        holds,
    })
}

/// Build a cell relation from a box field: each cell's corners and center
/// are propagated one step under the extreme velocities of the field hull,
/// the image hull is taken per dimension (right-open at exact boundaries)
/// and inflated by `inflation` cells.
pub fn build_cell_relation_from_field(
    field: &SetValuedField,
    grid: Arc<Grid>,
    dt: f64,
    inflation: usize,
) -> Result<CellRelation> {
    if !(dt > 0.0) {
        return Err(Error::InvalidDescriptor(format!("step must be positive, got {dt}")));
    }
    if field.space_arc().as_ref() != grid.space() {
        return Err(Error::GridMismatch);
    }
    let bounds = grid
        .space()
        .bounds()
        .ok_or_else(|| Error::InvalidDescriptor("field relations need a box or torus space".into()))?
        .to_vec();
    let dim = grid.dim();
    let torus = grid.space().is_torus();
    let mut edges: Vec<(usize, usize)> = Vec::new();

    for cell in 0..grid.cell_count() {
        let mut probes = grid.cell_corners(cell);
        probes.push(grid.cell_center(cell));
        let mut lo_img = vec![f64::INFINITY; dim];
        let mut hi_img = vec![f64::NEG_INFINITY; dim];
        for p in &probes {
            let hull = field.hull_at(&grid.space().canonicalize(p)).map_err(|e| match e {
                Error::EmptyBox { .. } => Error::EmptyBox { cell },
                other => other,
            })?;
            if hull.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: hull.len(),
                });
            }
            // extreme velocities are the hull corners; the componentwise
            // image interval is reached at componentwise extremes
            for d in 0..dim {
                let (vlo, vhi) = hull[d];
                lo_img[d] = lo_img[d].min(p[d] + dt * vlo);
                hi_img[d] = hi_img[d].max(p[d] + dt * vhi);
            }
        }
        // per-dimension index ranges of the image hull, unwrapped
        let mut ranges: Vec<(i64, i64)> = Vec::with_capacity(dim);
        for d in 0..dim {
            let w = grid.cell_width(d);
            let origin = bounds[d].0;
            // snap near-integer index values so boundary images land on the
            // boundary, left-closed and right-open
            let lo_t = (lo_img[d] - origin) / w;
            let lo_idx = if (lo_t - lo_t.round()).abs() < 1e-9 {
                lo_t.round() as i64
            } else {
                lo_t.floor() as i64
            };
            let hi_t = (hi_img[d] - origin) / w;
            let hi_idx = if (hi_t - hi_t.round()).abs() < 1e-9 {
                hi_t.round() as i64 - 1
            } else {
                hi_t.floor() as i64
            };
            let hi_idx = hi_idx.max(lo_idx);
            ranges.push((lo_idx - inflation as i64, hi_idx + inflation as i64));
        }
        // enumerate the hull box, wrapping on tori, clamping on boxes
        let mut targets: Vec<Vec<usize>> = vec![Vec::new(); dim];
        for d in 0..dim {
            let res = grid.resolution()[d] as i64;
            let (lo, hi) = ranges[d];
            let mut seen = Vec::new();
            if torus {
                if hi - lo + 1 >= res {
                    seen.extend(0..res as usize);
                } else {
                    for k in lo..=hi {
                        seen.push(k.rem_euclid(res) as usize);
                    }
                }
            } else {
                for k in lo.max(0)..=hi.min(res - 1) {
                    seen.push(k as usize);
                }
            }
            seen.sort_unstable();
            seen.dedup();
            targets[d] = seen;
        }
        if targets.iter().any(|t| t.is_empty()) {
            continue; // image left the box entirely
        }
        let mut multi = vec![0usize; dim];
        enumerate_product(&targets, &mut multi, 0, &mut |idx| {
            edges.push((cell, grid.ravel(idx)));
        });
    }
    CellRelation::from_edges(grid, dt, edges, ConstructionMode::FromField, inflation)
}

fn enumerate_product(
    choices: &[Vec<usize>],
    current: &mut Vec<usize>,
    depth: usize,
    emit: &mut impl FnMut(&[usize]),
) {
    if depth == choices.len() {
        emit(current);
        return;
    }
    for &c in &choices[depth] {
        current[depth] = c;
        enumerate_product(choices, current, depth + 1, emit);
    }
}

/// Build a cell relation empirically: add the edge `i -> j` whenever some
/// member passes from cell `i` to cell `j` in time `dt` (which the bundle
/// step must divide).
pub fn build_cell_relation_from_bundle(
    bundle: &SolutionBundle,
    grid: Arc<Grid>,
    dt: f64,
) -> Result<CellRelation> {
    if bundle.is_empty() {
        return Err(Error::EmptyBundle);
    }
    if grid.space() != bundle.space().as_ref() {
        return Err(Error::GridMismatch);
    }
    let ratio = dt / bundle.dt();
    let stride = ratio.round();
    if (ratio - stride).abs() > 1e-9 || stride < 1.0 {
        return Err(Error::StrideMismatch {
            bundle_dt: bundle.dt(),
            dt,
        });
    }
    let stride = stride as usize;
    let mut edges = Vec::new();
    for m in bundle.members() {
        let cells: Vec<usize> = m
            .samples()
            .iter()
            .map(|p| grid.locate(p))
            .collect::<Result<_>>()?;
        for k in 0..cells.len().saturating_sub(stride) {
            edges.push((cells[k], cells[k + stride]));
        }
    }
    CellRelation::from_edges(grid, dt, edges, ConstructionMode::FromBundle, 0)
}

/// Every transition observed in the bundle at the relation's stride must be
/// an edge: the soundness check for outer approximations.
pub fn is_edge_consistent(v: &CellRelation, bundle: &SolutionBundle) -> Result<bool> {
    let ratio = v.dt() / bundle.dt();
    let stride = ratio.round();
    if (ratio - stride).abs() > 1e-9 || stride < 1.0 {
        return Err(Error::StrideMismatch {
            bundle_dt: bundle.dt(),
            dt: v.dt(),
        });
    }
    let stride = stride as usize;
    for m in bundle.members() {
        let cells: Vec<usize> = m
            .samples()
            .iter()
            .map(|p| v.grid().locate(p))
            .collect::<Result<_>>()?;
        for k in 0..cells.len().saturating_sub(stride) {
            if !v.has_edge(cells[k], cells[k + stride]) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
