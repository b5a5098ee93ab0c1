//! Exact event-driven simulation of N-BBM and N-Brownian bees with drift.
//!
//! Branching events are the jump times of a rate-N Poisson clock. Between
//! events every particle is a Brownian motion with drift, driven by the
//! Gaussian stream of its rank at the start of the interval. At an event the
//! particle of a uniformly chosen rank is duplicated and either the leftmost
//! particle (N-BBM) or the particle furthest from the origin (bees) is killed.

mod configuration;
pub mod csv;
mod hitting;
mod simulate;
mod trajectory;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use configuration::{apply_k, apply_l, compare_left_of, rank_sort, Configuration};
pub(crate) use configuration::{k_in_place, k_kills_left, left_of_sorted};
pub(crate) use hitting::segment_hit;
pub use hitting::{bridge_crossing_probability, first_hit_zero, first_hit_zero_with};
pub use simulate::{advance_interval, simulate, simulate_seeded, Simulator, StepOutcome};
pub(crate) use simulate::{EventClock, Recorder, SegmentEnd};
pub use trajectory::{EventRecord, Grid, KilledSide, ObservationPoint, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("configuration must contain at least one particle")]
    EmptyConfiguration,
    #[error("non-finite position at index {index}")]
    NonFinite { index: usize },
    #[error("rank {rank} outside 1..={n}")]
    RankOutOfRange { rank: usize, n: usize },
    #[error("negative duration {0}")]
    NegativeDuration(f64),
    #[error("expected {expected} values, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("time {time} outside the recorded window [0, {horizon}]")]
    OutsideWindow { time: f64, horizon: f64 },
    #[error("trajectory has no sub-sampling grid")]
    NoGrid,
    #[error("malformed trajectory CSV at line {line}: {reason}")]
    Csv { line: usize, reason: String },
}

/// Which selection rule the system uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProcessKind {
    /// Kill the leftmost particle.
    Nbbm,
    /// Kill the particle furthest from the origin.
    Bees,
}

impl ProcessKind {
    pub fn name(self) -> &'static str {
        match self {
            ProcessKind::Nbbm => "nbbm",
            ProcessKind::Bees => "bees",
        }
    }
}

/// Parameters of a single simulated trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub n_particles: usize,
    pub drift: f64,
    pub horizon: f64,
    /// Spacing of the sub-sampling grid used for path statistics.
    pub sub_step: f64,
    pub seed: u64,
    /// Keep the configuration at every grid time.
    pub record_grid: bool,
    /// Keep the pre- and post-event configurations of every branching event.
    pub record_events: bool,
}

impl SimParams {
    pub const DEFAULT_SUB_STEP: f64 = 0.01;

    pub fn new(n_particles: usize, drift: f64, horizon: f64, seed: u64) -> Self {
        Self {
            n_particles,
            drift,
            horizon,
            sub_step: Self::DEFAULT_SUB_STEP,
            seed,
            record_grid: true,
            record_events: true,
        }
    }

    pub fn with_sub_step(mut self, sub_step: f64) -> Self {
        self.sub_step = sub_step;
        self
    }

    pub fn with_grid(mut self, on: bool) -> Self {
        self.record_grid = on;
        self
    }

    pub fn with_events(mut self, on: bool) -> Self {
        self.record_events = on;
        self
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.n_particles == 0 {
            return Err(EngineError::InvalidParameter { field: "n_particles", reason: "must be at least 1".into() });
        }
        if !self.drift.is_finite() {
            return Err(EngineError::InvalidParameter { field: "drift", reason: "must be finite".into() });
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(EngineError::InvalidParameter {
                field: "horizon",
                reason: format!("must be positive and finite, got {}", self.horizon),
            });
        }
        if !(self.sub_step > 0.0 && self.sub_step.is_finite()) {
            return Err(EngineError::InvalidParameter {
                field: "sub_step",
                reason: format!("must be positive and finite, got {}", self.sub_step),
            });
        }
        Ok(())
    }
}
