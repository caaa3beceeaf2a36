//! Reachable, viable and invariant sets of nonlinear control systems.
//!
//! Value functions are built by backward recursion on a Cartesian grid
//! with d-linear interpolation, using dynamics that freeze once the state
//! enters the target. Sets are read off as sublevel (reach) or
//! superlevel (viable, invariant) sets of the resulting field.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` / `*32` aliases below fix the precision.

pub mod cli;
pub mod config;
pub mod error;
pub mod export;
pub mod grid;
pub mod models;
pub mod oracle;
pub mod scalar;
pub mod solver;
pub mod targets;

pub use config::{Run, RunConfig};
pub use error::{Error, Result};
pub use grid::{Grid, Interpolator, Mode, Relation, ValueField};
pub use models::{builtin_system, discretize_controls, Dynamics, ParamTable, SystemModel};
pub use oracle::{analytic_min_time, boundary_band, brute_classify, simulate, TrajectoryResult};
pub use scalar::Scalar;
pub use solver::{
    extract_set, query_config, recursion_step, solve, solve_query, solve_with, QueryKind, SetQuery,
    SolveConfig, SolveOptions, SolveOutcome,
};
pub use targets::{TargetSet, VoxelMask};

pub type Grid64 = Grid<f64>;
pub type Grid32 = Grid<f32>;
pub type ValueField64 = ValueField<f64>;
pub type ValueField32 = ValueField<f32>;
pub type SystemModel64 = SystemModel<f64>;
pub type SystemModel32 = SystemModel<f32>;
pub type TargetSet64 = TargetSet<f64>;
pub type TargetSet32 = TargetSet<f32>;
pub type SolveConfig64 = SolveConfig<f64>;
pub type SolveConfig32 = SolveConfig<f32>;
