//! Cumulant calculus for discrete-time branching random walks with
//! selection, and the two N-BRW processes whose speeds bound the N-BBM
//! speed from above and below.

mod cumulant;
mod process;

use thiserror::Error;

pub use cumulant::{
    kappa_bbm, kappa_hat_delta, solve_theta_star, solve_theta_star_in, speed_second_order, Cumulant, CustomCumulant,
    KappaBbm, KappaHatDelta, ThetaStar,
};
pub use process::{
    estimate_brw_speed, estimate_brw_speed_pooled, lower_offspring, simulate_nbrw_lower, simulate_nbrw_upper,
    upper_offspring, write_speed_sweep, BrwDrivers, BrwKind, BrwParams, BrwSpeed, BrwTrajectory, KeyedBrwDrivers,
    SpeedSweepRow,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BrwError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("theta * kappa'(theta) - kappa(theta) has no sign change on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("generation {generation} produced {count} offspring, above the cap of {cap}")]
    PopulationExplosion { generation: usize, count: usize, cap: usize },
    #[error("need at least {needed} generations after burn-in, got {got}")]
    EmptyWindow { needed: usize, got: usize },
}

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> BrwError {
    BrwError::InvalidParameter { field, reason: reason.into() }
}
