//! Set-valued dynamics toolkit: sampled trajectory bundles with the shift
//! flow, exact finite-state relation kernels, grid-scale reachability
//! semigroups, limit sets, recurrence, and invariant measures.
//!
//! The crate has two levels that check each other. The finite-state
//! [`relation`] kernel decides invariance, limit sets and measure statements
//! exactly, with no tolerance; the grid level ([`semigroup`], [`limits`],
//! [`measures`]) approximates continuous systems on cell grids and must
//! agree with the kernel whenever a relation is imported as a cell relation.

pub mod bits;
pub mod cycles;
pub mod error;
pub mod format;
pub mod limits;
pub mod measures;
pub mod relation;
pub mod semigroup;
pub mod solvers;
pub mod space;
pub mod trajectory;

pub use error::{Error, Result};
pub use limits::{omega_limit_grid, recurrent_cells, strong_invariance_grid, LimitSetReport};
pub use measures::DiscreteMeasure;
pub use relation::{Relation, StateSet};
pub use semigroup::{
    build_cell_relation_from_bundle, build_cell_relation_from_field, check_semigroup, CellRelation,
};
pub use solvers::{
    extend_backward, sample_inclusion, simulate_filippov, PiecewiseField, SelectionLaw,
    SelectionPolicy, SetValuedField,
};
pub use space::{CellSet, Grid, Point, SpaceDescriptor};
pub use trajectory::{check_axioms, cu_distance, AxiomCheckConfig, SolutionBundle, Trajectory};
