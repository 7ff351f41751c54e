//! Phase spaces, uniform grids and cell-set algebra.
//!
//! Three compact space kinds are supported: axis-aligned boxes, flat tori
//! (boxes with periodic identification) and finite label sets. A [`Grid`]
//! partitions a space into half-open cells; [`CellSet`] is a bit set over
//! the cells of one grid with union/intersection/complement, a Hausdorff
//! distance in adjacency steps, and radius-`r` inflation.

use crate::bits::BitSet;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// A point is a coordinate vector; finite spaces use a single coordinate
/// holding the label index.
pub type Point = Vec<f64>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SpaceDescriptor {
    /// Compact box with the listed per-dimension bounds.
    Box { bounds: Vec<(f64, f64)> },
    /// Flat torus; each dimension wraps with period `hi - lo`.
    Torus { bounds: Vec<(f64, f64)> },
    /// Finite label set with the discrete metric.
    Finite { labels: Vec<String> },
}

impl SpaceDescriptor {
    pub fn boxed(bounds: Vec<(f64, f64)>) -> Result<Self> {
        validate_bounds(&bounds)?;
        Ok(SpaceDescriptor::Box { bounds })
    }

    pub fn torus(bounds: Vec<(f64, f64)>) -> Result<Self> {
        validate_bounds(&bounds)?;
        Ok(SpaceDescriptor::Torus { bounds })
    }

    /// The unit circle as a period-1 torus.
    pub fn circle() -> Self {
        SpaceDescriptor::Torus {
            bounds: vec![(0.0, 1.0)],
        }
    }

    pub fn finite(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidDescriptor("finite space needs labels".into()));
        }
        let mut seen = labels.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != labels.len() {
            return Err(Error::InvalidDescriptor("duplicate labels".into()));
        }
        Ok(SpaceDescriptor::Finite { labels })
    }

    /// Finite space with labels `"0".."n-1"`.
    pub fn finite_numbered(n: usize) -> Self {
        SpaceDescriptor::Finite {
            labels: (0..n).map(|i| i.to_string()).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SpaceDescriptor::Box { bounds } | SpaceDescriptor::Torus { bounds } => bounds.len(),
            SpaceDescriptor::Finite { .. } => 1,
        }
    }

    pub fn is_torus(&self) -> bool {
        matches!(self, SpaceDescriptor::Torus { .. })
    }

    pub fn bounds(&self) -> Option<&[(f64, f64)]> {
        match self {
            SpaceDescriptor::Box { bounds } | SpaceDescriptor::Torus { bounds } => Some(bounds),
            SpaceDescriptor::Finite { .. } => None,
        }
    }

    /// Metric of the space: Euclidean on boxes, flat quotient metric on tori
    /// (per-dimension `min(|d|, period - |d|)`), discrete on finite sets.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            SpaceDescriptor::Box { .. } => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            SpaceDescriptor::Torus { bounds } => a
                .iter()
                .zip(b)
                .zip(bounds)
                .map(|((x, y), (lo, hi))| {
                    let period = hi - lo;
                    let d = (x - y).rem_euclid(period);
                    d.min(period - d).powi(2)
                })
                .sum::<f64>()
                .sqrt(),
            SpaceDescriptor::Finite { .. } => {
                if a[0].round() == b[0].round() {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }

    /// Reduce torus coordinates to the fundamental domain; identity elsewhere.
    pub fn canonicalize(&self, p: &[f64]) -> Point {
        match self {
            SpaceDescriptor::Torus { bounds } => p
                .iter()
                .zip(bounds)
                .map(|(x, (lo, hi))| lo + (x - lo).rem_euclid(hi - lo))
                .collect(),
            _ => p.to_vec(),
        }
    }

    /// Whether the point lies in the space (after torus reduction).
    pub fn contains(&self, p: &[f64]) -> bool {
        match self {
            SpaceDescriptor::Box { bounds } => {
                p.len() == bounds.len()
                    && p.iter().zip(bounds).all(|(x, (lo, hi))| *x >= *lo && *x <= *hi)
            }
            SpaceDescriptor::Torus { bounds } => p.len() == bounds.len(),
            SpaceDescriptor::Finite { labels } => {
                p.len() == 1 && (p[0].round() as usize) < labels.len() && p[0] >= -0.5
            }
        }
    }
}

fn validate_bounds(bounds: &[(f64, f64)]) -> Result<()> {
    if bounds.is_empty() {
        return Err(Error::InvalidDescriptor("need at least one dimension".into()));
    }
    for (axis, (lo, hi)) in bounds.iter().enumerate() {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidDescriptor(format!(
                "bounds on axis {axis} must satisfy lo < hi, got [{lo}, {hi}]"
            )));
        }
    }
    Ok(())
}

/// Uniform grid over a space. Cells are half-open per dimension; the upper
/// boundary of the final box cell is closed so the box is exactly partitioned.
/// Finite spaces have one cell per label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    space: SpaceDescriptor,
    resolution: Vec<usize>,
    strides: Vec<usize>,
    cell_count: usize,
}

impl Grid {
    pub fn new(space: SpaceDescriptor, resolution: Vec<usize>) -> Result<Self> {
        let resolution = match &space {
            SpaceDescriptor::Finite { labels } => vec![labels.len()],
            _ => {
                if resolution.len() != space.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: space.dim(),
                        got: resolution.len(),
                    });
                }
                if resolution.contains(&0) {
                    return Err(Error::InvalidDescriptor("resolution must be positive".into()));
                }
                resolution
            }
        };
        let mut strides = vec![0; resolution.len()];
        let mut acc = 1;
        for (d, s) in strides.iter_mut().enumerate().rev() {
            *s = acc;
            acc *= resolution[d];
        }
        Ok(Grid {
            space,
            resolution,
            strides,
            cell_count: acc,
        })
    }

    /// One-cell-per-state grid over a numbered finite space.
    pub fn finite(n: usize) -> Self {
        Grid::new(SpaceDescriptor::finite_numbered(n), vec![]).expect("finite grid")
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn cell_count(&self) -> usize {
        self.cell_count
    }

    pub fn dim(&self) -> usize {
        self.resolution.len()
    }

    pub fn cell_width(&self, axis: usize) -> f64 {
        match self.space.bounds() {
            Some(b) => (b[axis].1 - b[axis].0) / self.resolution[axis] as f64,
            None => 1.0,
        }
    }

    /// Cell index of a point. Box points must lie within bounds; torus
    /// coordinates are reduced to the fundamental domain first.
    pub fn locate(&self, p: &[f64]) -> Result<usize> {
        match &self.space {
            SpaceDescriptor::Finite { labels } => {
                let idx = p.first().copied().unwrap_or(-1.0).round();
                if idx < 0.0 || idx as usize >= labels.len() {
                    return Err(Error::UnknownLabel {
                        index: idx.max(0.0) as usize,
                        count: labels.len(),
                    });
                }
                Ok(idx as usize)
            }
            SpaceDescriptor::Box { bounds } => {
                if p.len() != bounds.len() {
                    return Err(Error::DimensionMismatch {
                        expected: bounds.len(),
                        got: p.len(),
                    });
                }
                let mut idx = 0;
                for (axis, (&x, &(lo, hi))) in p.iter().zip(bounds).enumerate() {
                    if x < lo || x > hi || !x.is_finite() {
                        return Err(Error::OutOfBounds {
                            axis,
                            value: x,
                            lo,
                            hi,
                        });
                    }
                    let res = self.resolution[axis];
                    let w = (hi - lo) / res as f64;
                    // The final cell keeps its upper boundary.
                    let k = (((x - lo) / w).floor() as usize).min(res - 1);
                    idx += k * self.strides[axis];
                }
                Ok(idx)
            }
            SpaceDescriptor::Torus { bounds } => {
                if p.len() != bounds.len() {
                    return Err(Error::DimensionMismatch {
                        expected: bounds.len(),
                        got: p.len(),
                    });
                }
                let mut idx = 0;
                for (axis, (&x, &(lo, hi))) in p.iter().zip(bounds).enumerate() {
                    let res = self.resolution[axis];
                    let period = hi - lo;
                    let w = period / res as f64;
                    let r = (x - lo).rem_euclid(period);
                    let k = ((r / w).floor() as usize).min(res - 1);
                    idx += k * self.strides[axis];
                }
                Ok(idx)
            }
        }
    }

    /// Multi-index of a linear cell index.
    pub fn unravel(&self, cell: usize) -> Vec<usize> {
        let mut rem = cell;
        self.strides
            .iter()
            .map(|&s| {
                let k = rem / s;
                rem %= s;
                k
            })
            .collect()
    }

    pub fn ravel(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(k, s)| k * s).sum()
    }

    /// Center point of a cell.
    pub fn cell_center(&self, cell: usize) -> Point {
        match self.space.bounds() {
            None => vec![cell as f64],
            Some(bounds) => {
                let multi = self.unravel(cell);
                multi
                    .iter()
                    .zip(bounds)
                    .enumerate()
                    .map(|(axis, (&k, &(lo, _)))| lo + (k as f64 + 0.5) * self.cell_width(axis))
                    .collect()
            }
        }
    }

    /// Corner points of a cell (2^dim of them).
    pub fn cell_corners(&self, cell: usize) -> Vec<Point> {
        let bounds = match self.space.bounds() {
            Some(b) => b,
            None => return vec![vec![cell as f64]],
        };
        let multi = self.unravel(cell);
        let dim = multi.len();
        let mut corners = Vec::with_capacity(1 << dim);
        for mask in 0..(1usize << dim) {
            let corner: Point = (0..dim)
                .map(|axis| {
                    let k = multi[axis] + ((mask >> axis) & 1);
                    bounds[axis].0 + k as f64 * self.cell_width(axis)
                })
                .collect();
            corners.push(corner);
        }
        corners
    }

    /// Distance between two cells counted in adjacency steps: the max over
    /// dimensions of the index offset, wrapping on tori, 0/1 on finite spaces.
    pub fn cell_step_distance(&self, a: usize, b: usize) -> usize {
        match &self.space {
            SpaceDescriptor::Finite { .. } => usize::from(a != b),
            _ => {
                let (ma, mb) = (self.unravel(a), self.unravel(b));
                ma.iter()
                    .zip(&mb)
                    .enumerate()
                    .map(|(axis, (&x, &y))| {
                        let d = x.abs_diff(y);
                        if self.space.is_torus() {
                            d.min(self.resolution[axis] - d)
                        } else {
                            d
                        }
                    })
                    .max()
                    .unwrap_or(0)
            }
        }
    }

    /// Cells adjacent to `cell` (offset at most 1 in every dimension,
    /// wrapping on tori), the cell itself excluded.
    pub fn neighbors(&self, cell: usize) -> Vec<usize> {
        match &self.space {
            SpaceDescriptor::Finite { labels } => {
                (0..labels.len()).filter(|&j| j != cell).collect()
            }
            _ => {
                let multi = self.unravel(cell);
                let dim = multi.len();
                let mut out = Vec::new();
                let mut offsets = vec![-1i64; dim];
                loop {
                    if offsets.iter().any(|&o| o != 0) {
                        let mut ok = true;
                        let mut neigh = vec![0usize; dim];
                        for axis in 0..dim {
                            let res = self.resolution[axis] as i64;
                            let mut k = multi[axis] as i64 + offsets[axis];
                            if self.space.is_torus() {
                                k = k.rem_euclid(res);
                            } else if k < 0 || k >= res {
                                ok = false;
                                break;
                            }
                            neigh[axis] = k as usize;
                        }
                        if ok {
                            out.push(self.ravel(&neigh));
                        }
                    }
                    // advance the offset counter over {-1,0,1}^dim
                    let mut axis = 0;
                    loop {
                        if axis == dim {
                            out.sort_unstable();
                            out.dedup();
                            return out;
                        }
                        offsets[axis] += 1;
                        if offsets[axis] <= 1 {
                            break;
                        }
                        offsets[axis] = -1;
                        axis += 1;
                    }
                }
            }
        }
    }
}

/// Set of grid cells. All set algebra requires both operands to share a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSet {
    grid: Arc<Grid>,
    bits: BitSet,
}

impl CellSet {
    pub fn empty(grid: Arc<Grid>) -> Self {
        let bits = BitSet::empty(grid.cell_count());
        CellSet { grid, bits }
    }

    pub fn full(grid: Arc<Grid>) -> Self {
        let bits = BitSet::full(grid.cell_count());
        CellSet { grid, bits }
    }

    pub fn from_cells(grid: Arc<Grid>, cells: &[usize]) -> Self {
        let bits = BitSet::from_indices(grid.cell_count(), cells);
        CellSet { grid, bits }
    }

    pub fn from_bits(grid: Arc<Grid>, bits: BitSet) -> Self {
        assert_eq!(bits.len(), grid.cell_count());
        CellSet { grid, bits }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn bits(&self) -> &BitSet {
        &self.bits
    }

    pub fn insert(&mut self, cell: usize) {
        self.bits.insert(cell);
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.bits.contains(cell)
    }

    pub fn count(&self) -> usize {
        self.bits.count()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter()
    }

    pub fn to_indices(&self) -> Vec<usize> {
        self.bits.to_indices()
    }

    fn check_grid(&self, other: &CellSet) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    pub fn union(&self, other: &CellSet) -> Result<CellSet> {
        self.check_grid(other)?;
        Ok(CellSet {
            grid: self.grid.clone(),
            bits: self.bits.union(&other.bits),
        })
    }

    pub fn intersection(&self, other: &CellSet) -> Result<CellSet> {
        self.check_grid(other)?;
        Ok(CellSet {
            grid: self.grid.clone(),
            bits: self.bits.intersection(&other.bits),
        })
    }

    pub fn complement(&self) -> CellSet {
        CellSet {
            grid: self.grid.clone(),
            bits: self.bits.complement(),
        }
    }

    pub fn is_subset(&self, other: &CellSet) -> Result<bool> {
        self.check_grid(other)?;
        Ok(self.bits.is_subset(&other.bits))
    }

    /// Distances from every cell to the nearest member, by breadth-first
    /// search over cell adjacency. `usize::MAX` marks unreachable cells.
    fn distance_field(&self) -> Vec<usize> {
        let n = self.grid.cell_count();
        let mut dist = vec![usize::MAX; n];
        let mut frontier: Vec<usize> = self.iter().collect();
        for &c in &frontier {
            dist[c] = 0;
        }
        let mut d = 0;
        while !frontier.is_empty() {
            d += 1;
            let mut next = Vec::new();
            for &c in &frontier {
                for nb in self.grid.neighbors(c) {
                    if dist[nb] == usize::MAX {
                        dist[nb] = d;
                        next.push(nb);
                    }
                }
            }
            frontier = next;
        }
        dist
    }

    /// Symmetric Hausdorff distance between two nonempty cell sets, counted
    /// in adjacency steps (torus adjacency wraps).
    pub fn hausdorff_distance(&self, other: &CellSet) -> Result<usize> {
        self.check_grid(other)?;
        if self.is_empty() || other.is_empty() {
            return Err(Error::EmptySet);
        }
        let da = self.distance_field();
        let db = other.distance_field();
        let h1 = other.iter().map(|c| da[c]).max().unwrap_or(0);
        let h2 = self.iter().map(|c| db[c]).max().unwrap_or(0);
        Ok(h1.max(h2))
    }

    /// Union of the set with all cells within adjacency radius `r`.
    pub fn inflate(&self, r: usize) -> CellSet {
        let mut current = self.clone();
        for _ in 0..r {
            let mut grown = current.bits.clone();
            for c in current.iter() {
                for nb in self.grid.neighbors(c) {
                    grown.insert(nb);
                }
            }
            if grown == current.bits {
                break;
            }
            current = CellSet {
                grid: self.grid.clone(),
                bits: grown,
            };
        }
        current
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle_grid(res: usize) -> Arc<Grid> {
        Arc::new(Grid::new(SpaceDescriptor::circle(), vec![res]).unwrap())
    }

    #[test]
    fn locate_on_circle() {
        let g = circle_grid(10);
        assert_eq!(g.locate(&[0.25]).unwrap(), 2);
        // wrap identity
        assert_eq!(g.locate(&[1.25]).unwrap(), 2);
        assert_eq!(g.locate(&[-0.05]).unwrap(), 9);
    }

    #[test]
    fn locate_out_of_bounds_on_box() {
        let g = Grid::new(
            SpaceDescriptor::boxed(vec![(0.0, 1.0)]).unwrap(),
            vec![4],
        )
        .unwrap();
        match g.locate(&[1.2]) {
            Err(Error::OutOfBounds { axis: 0, .. }) => {}
            other => panic!("expected out-of-bounds, got {other:?}"),
        }
        // closed upper boundary of the final cell
        assert_eq!(g.locate(&[1.0]).unwrap(), 3);
        assert_eq!(g.locate(&[0.0]).unwrap(), 0);
    }

    #[test]
    fn locate_of_cell_center_is_identity() {
        let grids = vec![
            Arc::new(
                Grid::new(
                    SpaceDescriptor::boxed(vec![(0.0, 1.0), (-1.0, 1.0)]).unwrap(),
                    vec![7, 9],
                )
                .unwrap(),
            ),
            circle_grid(13),
            Arc::new(Grid::finite(5)),
        ];
        for g in grids {
            for cell in 0..g.cell_count() {
                assert_eq!(g.locate(&g.cell_center(cell)).unwrap(), cell);
            }
        }
    }

    #[test]
    fn hausdorff_on_circle() {
        let g = circle_grid(10);
        let a = CellSet::from_cells(g.clone(), &[0]);
        let b = CellSet::from_cells(g.clone(), &[5]);
        assert_eq!(a.hausdorff_distance(&a).unwrap(), 0);
        assert_eq!(a.hausdorff_distance(&b).unwrap(), 5);
        let empty = CellSet::empty(g);
        assert!(matches!(
            a.hausdorff_distance(&empty),
            Err(Error::EmptySet)
        ));
    }

    #[test]
    fn inflate_on_circle() {
        let g = circle_grid(10);
        let a = CellSet::from_cells(g.clone(), &[3]);
        assert_eq!(a.inflate(0).to_indices(), vec![3]);
        assert_eq!(a.inflate(1).to_indices(), vec![2, 3, 4]);
        let full = CellSet::full(g);
        assert_eq!(full.inflate(2), full);
    }

    #[test]
    fn inflate_wraps_and_clamps() {
        let g = circle_grid(10);
        let a = CellSet::from_cells(g, &[0]);
        assert_eq!(a.inflate(1).to_indices(), vec![0, 1, 9]);

        let b = Arc::new(
            Grid::new(SpaceDescriptor::boxed(vec![(0.0, 1.0)]).unwrap(), vec![10]).unwrap(),
        );
        let s = CellSet::from_cells(b, &[0]);
        assert_eq!(s.inflate(1).to_indices(), vec![0, 1]);
    }

    #[test]
    fn neighbors_in_two_dims() {
        let g = Arc::new(
            Grid::new(
                SpaceDescriptor::boxed(vec![(0.0, 1.0), (0.0, 1.0)]).unwrap(),
                vec![4, 4],
            )
            .unwrap(),
        );
        // corner cell has 3 neighbors, interior cell has 8
        assert_eq!(g.neighbors(0).len(), 3);
        assert_eq!(g.neighbors(g.ravel(&[1, 1])).len(), 8);
    }

    #[test]
    fn torus_metric_wraps() {
        let s = SpaceDescriptor::circle();
        assert!((s.distance(&[0.1], &[0.9]) - 0.2).abs() < 1e-12);
        let b = SpaceDescriptor::boxed(vec![(0.0, 1.0)]).unwrap();
        assert!((b.distance(&[0.1], &[0.9]) - 0.8).abs() < 1e-12);
    }
}
