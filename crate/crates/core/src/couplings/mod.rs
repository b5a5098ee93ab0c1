//! Shared-randomness constructions that order N-BBM and bees pathwise.
//!
//! [`coupled_simulate_monotone`] drives a bees process and two N-BBMs from
//! one [`DriverBundle`], giving `bees ≼ bbm(ν) ≼ bbm(ν')` whenever `ν ≼ ν'`.
//! [`coupled_simulate_abs`] flips the Brownian drivers of the bees by the
//! sign of each particle, giving `bbm(ν̃) ≼ -|bees(ν)|` until a bee first
//! reaches the origin. Both orders are theorems, so any recorded violation
//! is a bug, not a statistic.

mod abs;
mod drivers;
mod monotone;

use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::engine::{EngineError, Trajectory};

pub use abs::{coupled_simulate_abs, AbsCoupledRun, SignMatrix};
pub use drivers::{make_driver_bundle, DriverBundle};
pub use monotone::coupled_simulate_monotone;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CouplingError {
    #[error("a driver bundle needs at least one particle")]
    NoParticles,
    #[error("initial configurations have different sizes ({left} vs {right})")]
    SizeMismatch { left: usize, right: usize },
    #[error("initial configurations are not ordered as the coupling requires")]
    InitialOrder,
    #[error("the absolute-value coupling needs drift <= 0, got {0}; reflect space first")]
    PositiveDrift(f64),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Which ordering failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OrderPair {
    /// `bees ≼ bbm_low`
    BeesLow,
    /// `bbm_low ≼ bbm_high`
    LowHigh,
    /// `bbm ≼ -|bees|`
    BbmNegAbsBees,
}

impl OrderPair {
    pub fn label(self) -> &'static str {
        match self {
            OrderPair::BeesLow => "bees<=bbm_low",
            OrderPair::LowHigh => "bbm_low<=bbm_high",
            OrderPair::BbmNegAbsBees => "bbm<=-|bees|",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub time: f64,
    pub pair: OrderPair,
}

/// Output of [`coupled_simulate_monotone`].
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledRun {
    pub bees: Trajectory,
    pub bbm_low: Trajectory,
    pub bbm_high: Trajectory,
    pub violations: Vec<Violation>,
}

/// `violations.csv`: header `time,pair`, one row per failure.
pub fn write_violations(violations: &[Violation], mut w: impl Write) -> io::Result<()> {
    writeln!(w, "time,pair")?;
    for v in violations {
        writeln!(w, "{},{}", crate::engine::csv::format_f64(v.time), v.pair.label())?;
    }
    Ok(())
}
