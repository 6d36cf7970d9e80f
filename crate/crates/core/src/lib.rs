//! Multizone airflow network solver.
//!
//! Zone reference pressures are found by driving the per-zone mass balance to
//! zero. Four strategies are available: Newton–Raphson with fixed
//! under-relaxation, Newton with Walton-style adaptive relaxation, and either
//! of those started from a damped Picard (fixed-point) initializer.

pub mod assembly;
pub mod fixtures;
pub mod linalg;
pub mod network;
pub mod physics;
pub mod report;
pub mod scenario;
pub mod solver;

pub use assembly::{AirflowSystem, BoundaryState, LinkFlow, PressureVector};
pub use network::{parse_network, validate, Network};
pub use solver::{solve, SolveError, SolveOutcome, SolverConfig, Strategy};
