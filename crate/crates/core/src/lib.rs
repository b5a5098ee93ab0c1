//! Simulation and numerics for one-dimensional branching-selection particle
//! systems: N-BBM (kill the leftmost) and N-Brownian bees (kill the particle
//! furthest from the origin), with drift.
//!
//! - [`engine`]: exact event-driven simulation and trajectories.
//! - [`couplings`]: shared-randomness constructions that order the systems pathwise.
//! - [`statistics`]: velocity, regimes, occupation times, invariance-principle checks.
//! - [`brw_bounds`]: cumulant calculus and the bounding branching random walks.
//! - [`fbp`]: the free boundary problem solver.
//! - [`replicas`] and [`experiments`]: seeded, optionally parallel replication.

// `!(x > 0.0)` is how parameter checks reject NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod brw_bounds;
pub mod couplings;
pub mod engine;
pub mod experiments;
pub mod fbp;
pub mod replicas;
pub mod rng;
pub mod statistics;
