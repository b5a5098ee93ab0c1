//! Estimators and tests that turn the long-time behaviour of the particle
//! systems into desk-scale checks.

mod association;
mod diffusivity;
mod ks;
mod paths;
mod recurrence;
mod regime;
mod regression;
mod velocity;

use thiserror::Error;

use crate::engine::EngineError;

pub use association::{association_covariance, covariance_with_bootstrap, AssociationEstimate, PathFunctional};
pub use diffusivity::{diffusivity_from_values, estimate_diffusivity, DiffusionConstants};
pub use ks::{half_normal_cdf, kolmogorov_survival, ks_statistic, ks_two_sample, normal_cdf, KsResult};
pub use paths::{
    g_transformed_leftmost_at, leftmost_at, leftmost_path, occupation_fraction_negative,
    occupation_fraction_positive_rightmost, remove_negative_excursions, rescale_path, rightmost_at, SampledPath,
};
pub use recurrence::{hitting_time_t0, return_times_to_a, HittingTime, ReturnTimes};
pub use regime::{classify_regime, Regime, RegimeReport};
pub use regression::{linear_fit, mean, sample_variance, LinearFit};
pub use velocity::{
    estimate_velocity, estimate_velocity_pooled, pool as pool_velocities, velocity_formula, VelocityEstimate,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("no observations in the window [{start}, {end}]")]
    EmptyWindow { start: f64, end: f64 },
    #[error("time {time} exceeds the horizon {horizon}")]
    OutsideHorizon { time: f64, horizon: f64 },
    #[error("trajectory was recorded without a sub-sampling grid")]
    NoGrid,
    #[error("sample {index} is NaN")]
    NanSample { index: usize },
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> StatsError {
    StatsError::InvalidParameter { field, reason: reason.into() }
}
