//! Moment relaxations of correlations with bounded signaling across the virtual input.
//!
//! Sequential, outcome-dependent measurement programs act as distinguishers
//! between virtual inputs; the relaxation at level ℓ bounds the acceptance gap
//! of every program of depth ≤ ℓ by the signaling budget `κ_S`.

pub mod curve;
pub mod moment;
pub mod programs;
pub mod strategy;
pub mod words;

pub use curve::{
    classical_line, curve_csv, default_grid, shifted_bound, tsirelson_curve, tsirelson_point,
    CurvePoint, TSIRELSON_OMEGA,
};
pub use moment::{
    build_moment_problem, solve_moment_problem, BlockLabel, MomentProblem, MomentSolution,
    MomentSpec, Objective, ScoreConstraint, ScoreMode,
};
pub use programs::{
    enumerate_programs, enumerate_programs_capped, AdaptiveProgram, ProgramSet, DEFAULT_PROGRAM_CAP,
};
pub use strategy::{sequential_leak_strategy, OperatorStrategy, SignalingReport};
pub use words::{Letter, Polynomial, Variant, Word};
