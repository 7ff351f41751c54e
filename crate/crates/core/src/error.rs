//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("coordinate {axis} = {value} outside [{lo}, {hi}]")]
    OutOfBounds {
        axis: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("unknown label index {index} (space has {count} labels)")]
    UnknownLabel { index: usize, count: usize },

    #[error("operation requires a nonempty set")]
    EmptySet,

    #[error("operands belong to different grids")]
    GridMismatch,

    #[error("{states} states exceed the enumeration cap of {cap}")]
    CapacityExceeded { states: usize, cap: usize },

    #[error("state {state} lies on no complete trajectory")]
    NoCompleteTrajectory { state: usize },

    #[error("weight on non-edge {from} -> {to}")]
    NonEdgeWeight { from: usize, to: usize },

    #[error("edge {from} -> {to} leaves the viable core")]
    EdgeOffCore { from: usize, to: usize },

    #[error("weight {weight} on edge {from} -> {to} is not positive")]
    NonPositiveWeight { from: usize, to: usize, weight: f64 },

    #[error("weighted edge {from} -> {to} targets a state with no outgoing weight")]
    UnchargedTarget { from: usize, to: usize },

    #[error("stationary distribution did not converge within {iterations} iterations")]
    Convergence { iterations: usize },

    #[error("time {value} is not an integer multiple of the step {step}")]
    GridAlignment { value: f64, step: f64 },

    #[error("time {t} outside the sampled window [{t_min}, {t_max}]")]
    OutsideWindow { t: f64, t_min: f64, t_max: f64 },

    #[error("splice values differ by {gap} at time {at}, tolerance {tol}")]
    SwitchingGap { gap: f64, at: f64, tol: f64 },

    #[error("field box at cell {cell} is empty or unbounded")]
    EmptyBox { cell: usize },

    #[error("field undefined at cell {cell}")]
    FieldUndefined { cell: usize },

    #[error("bundle contains no members")]
    EmptyBundle,

    #[error("sliding ambiguity at {point:?}: both one-sided fields leave the surface")]
    SlidingAmbiguity { point: Vec<f64> },

    #[error("horizon of {actual} steps is shorter than the required {required}")]
    HorizonTooShort { required: usize, actual: usize },

    #[error("bundle step {bundle_dt} does not divide the relation step {dt}")]
    StrideMismatch { bundle_dt: f64, dt: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("no member starts in cell {cell}")]
    NoMemberAtCell { cell: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid descriptor: {0}")]
    InvalidDescriptor(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
