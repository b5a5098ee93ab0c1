//! Explicit finite-difference solver for the free boundary problem
//! `u_t = u_xx / 2 - mu u_x + u` on `(-R_t, R_t)` with `int u = 1`, and the
//! Wasserstein distance between a particle cloud and a PDE density.

mod distance;
mod io;
mod solver;
mod state;

use thiserror::Error;

pub use distance::distance_empirical_pde;
pub use io::{write_boundary, write_snapshots};
pub use solver::{solve_fbp, step_fbp, FbpSolution, Stepper};
pub use state::{steady_state_density, PdeParams, PdeState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FbpError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("dt = {dt} violates the stability bound {limit}")]
    Unstable { dt: f64, limit: f64 },
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("mass {mass} below 1 after the growth step")]
    MassDeficit { mass: f64 },
    #[error("mass {mass} differs from 1 after selection")]
    MassDrift { mass: f64 },
    #[error("negative density {value} at cell {index}")]
    NegativeDensity { index: usize, value: f64 },
    #[error("radius {radius} reached 0.9 L = {limit} at t = {time}")]
    RadiusLimit { radius: f64, limit: f64, time: f64 },
}

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> FbpError {
    FbpError::InvalidParameter { field, reason: reason.into() }
}

/// Tolerance on `h * sum(u) = 1`.
pub const MASS_TOLERANCE: f64 = 1e-10;
