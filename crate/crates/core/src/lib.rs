//! Randomized constraints consensus for distributed robust mixed-integer
//! linear programs.
//!
//! Nodes of a time-varying directed network each hold an uncertain set of
//! linear constraints. Every node alternates between a Monte Carlo
//! verification of its candidate point and a local mixed-integer solve over
//! its basis, its neighbours' bases and any violated sampled constraints.
//! Nodes stop once their candidate has been stable long enough for the
//! network to have agreed on a common solution.
//!
//! Modules, bottom-up:
//! - [`geometry`]: mixed-integer spaces, constraints, bases, Helly numbers
//! - [`milp`]: deterministic lexicographic MILP solver and basis extraction
//! - [`uncertainty`]: uncertain sets, samplers, verification and sample-size bounds
//! - [`consensus`]: the per-node state machine
//! - [`network`]: communication schedules and the round-based simulator
//! - [`experiments`]: instance generators, a-posteriori analysis and reports

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod consensus;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod milp;
pub mod network;
pub mod par;
pub mod rng;
pub mod uncertainty;

pub use error::{Error, Result};
pub use geometry::{Basis, ConstraintSystem, LinearConstraint, MixedIntegerSpace, Point, Provenance};
pub use par::Execution;
