//! Replicated experiments shared by the command line and the acceptance
//! suite. Every function takes explicit seeds and a [`ReplicaRunner`]; the
//! result depends only on the seeds.

use serde::Serialize;
use thiserror::Error;

use crate::brw_bounds::BrwError;
use crate::couplings::{CouplingError, DriverBundle};
use crate::engine::{simulate, Configuration, EngineError, ProcessKind, SimParams, Trajectory};
use crate::fbp::FbpError;
use crate::replicas::ReplicaRunner;
use crate::statistics::{
    diffusivity_from_values, estimate_velocity, leftmost_at, DiffusionConstants, StatsError, VelocityEstimate,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Brw(#[from] BrwError),
    #[error(transparent)]
    Fbp(#[from] FbpError),
    #[error("replica with seed {seed}: {message}")]
    Replica { seed: u64, message: String },
    #[error("no seeds given")]
    NoSeeds,
}

impl ExperimentError {
    /// Attach the seed of the replica that failed.
    pub fn at_seed(self, seed: u64) -> Self {
        match self {
            e @ ExperimentError::Replica { .. } => e,
            e => ExperimentError::Replica { seed, message: e.to_string() },
        }
    }
}

/// One family of replicas that differ only in their seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaSpec {
    pub kind: ProcessKind,
    pub drift: f64,
    pub horizon: f64,
    pub sub_step: f64,
    pub initial: Configuration,
    pub record_events: bool,
}

impl ReplicaSpec {
    /// Grid only, started with every particle at the origin.
    pub fn from_origin(
        kind: ProcessKind,
        n: usize,
        drift: f64,
        horizon: f64,
        sub_step: f64,
    ) -> Result<Self, EngineError> {
        Ok(Self { kind, drift, horizon, sub_step, initial: Configuration::uniform(n, 0.0)?, record_events: false })
    }

    pub fn n(&self) -> usize {
        self.initial.len()
    }

    pub fn params(&self, seed: u64) -> SimParams {
        SimParams::new(self.n(), self.drift, self.horizon, seed)
            .with_sub_step(self.sub_step)
            .with_events(self.record_events)
    }

    pub fn simulate(&self, seed: u64) -> Result<Trajectory, ExperimentError> {
        let drivers = DriverBundle::new(seed, self.n())?;
        Ok(simulate(self.kind, &self.params(seed), &self.initial, drivers)?)
    }
}

/// Simulate every seed and reduce each trajectory with `f` inside the
/// worker, so trajectories never need to be held all at once.
pub fn map_replicas<T, F>(
    spec: &ReplicaSpec,
    seeds: &[u64],
    runner: &ReplicaRunner,
    f: F,
) -> Result<Vec<T>, ExperimentError>
where
    T: Send,
    F: Fn(&Trajectory) -> Result<T, ExperimentError> + Sync + Send,
{
    if seeds.is_empty() {
        return Err(ExperimentError::NoSeeds);
    }
    runner.map(seeds, |seed| spec.simulate(seed).and_then(|t| f(&t)).map_err(|e| e.at_seed(seed))).into_iter().collect()
}

/// Pooled front velocity over replicas, burn-in `t_burn`.
pub fn pooled_velocity(
    spec: &ReplicaSpec,
    seeds: &[u64],
    t_burn: f64,
    runner: &ReplicaRunner,
) -> Result<VelocityEstimate, ExperimentError> {
    let each = map_replicas(spec, seeds, runner, |t| Ok(estimate_velocity(t, t_burn)?))?;
    Ok(match each.as_slice() {
        [one] => *one,
        _ => crate::statistics::pool_velocities(&each),
    })
}

/// The estimated critical drift: the common slope of an N-BBM at zero drift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalDrift {
    pub n: usize,
    pub mu_c_hat: f64,
    pub stderr: f64,
    pub velocity: VelocityEstimate,
}

/// N-BBM from the origin at zero drift, burn-in a tenth of the horizon.
pub fn estimate_critical_drift(
    n: usize,
    horizon: f64,
    sub_step: f64,
    seeds: &[u64],
    runner: &ReplicaRunner,
) -> Result<CriticalDrift, ExperimentError> {
    let spec = ReplicaSpec::from_origin(ProcessKind::Nbbm, n, 0.0, horizon, sub_step)?;
    let v = pooled_velocity(&spec, seeds, 0.1 * horizon, runner)?;
    Ok(CriticalDrift { n, mu_c_hat: v.common_slope(), stderr: v.common_stderr, velocity: v })
}

/// `Var(Z_1(t_eval)) / t_eval` for an N-BBM run at drift `-mu_c_hat`, which
/// removes the mean motion of the front.
pub fn centred_diffusivity(
    n: usize,
    mu_c_hat: f64,
    t_eval: f64,
    sub_step: f64,
    seeds: &[u64],
    runner: &ReplicaRunner,
) -> Result<DiffusionConstants, ExperimentError> {
    let spec = ReplicaSpec::from_origin(ProcessKind::Nbbm, n, -mu_c_hat, t_eval, sub_step)?;
    let values = map_replicas(&spec, seeds, runner, |t| Ok(leftmost_at(t, t_eval)?))?;
    Ok(diffusivity_from_values(&values, t_eval)?)
}
