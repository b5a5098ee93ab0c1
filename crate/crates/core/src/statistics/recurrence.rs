use serde::Serialize;

use crate::couplings::DriverBundle;
use crate::engine::{Configuration, ProcessKind, SimParams, Simulator, Trajectory};

use super::StatsError;

/// First time the rightmost N-BBM particle reaches the origin. A run that
/// reaches the horizon first is censored and reports the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HittingTime {
    pub time: f64,
    pub censored: bool,
}

/// `T_0 = inf{t >= 0 : Z_N(t) >= 0}` for an N-BBM started from `nu`,
/// checked at every grid and event time.
pub fn hitting_time_t0(
    nu: &Configuration,
    params: &SimParams,
    drivers: DriverBundle,
) -> Result<HittingTime, StatsError> {
    if nu.rightmost() > 0.0 {
        return Err(super::invalid("nu", format!("rightmost particle must be at -s <= 0, got {}", nu.rightmost())));
    }
    if nu.rightmost() == 0.0 {
        return Ok(HittingTime { time: 0.0, censored: false });
    }
    let params = SimParams { record_grid: true, ..params.clone() };
    let mut sim = Simulator::new(ProcessKind::Nbbm, &params, nu, drivers)?;
    while let Some(step) = sim.step() {
        let cur = sim.current();
        if cur[cur.len() - 1] >= 0.0 {
            return Ok(HittingTime { time: step.time(), censored: false });
        }
    }
    Ok(HittingTime { time: params.horizon, censored: true })
}

/// Visits of the skeleton `X(n t0)` to `A = [-1, 1]^N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnTimes {
    pub t0: f64,
    /// Skeleton indices `n` with every particle in `[-1, 1]`.
    pub indices: Vec<usize>,
    /// Differences of consecutive indices.
    pub gaps: Vec<usize>,
    /// Number of skeleton points examined.
    pub skeleton_len: usize,
}

impl ReturnTimes {
    /// True when no return was observed.
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn mean_gap(&self) -> Option<f64> {
        (!self.gaps.is_empty()).then(|| self.gaps.iter().sum::<usize>() as f64 / self.gaps.len() as f64)
    }

    pub fn last_return_time(&self) -> Option<f64> {
        self.indices.last().map(|&n| n as f64 * self.t0)
    }
}

pub fn return_times_to_a(traj: &Trajectory, t0: f64) -> Result<ReturnTimes, StatsError> {
    if !(t0 > 0.0 && t0.is_finite()) {
        return Err(super::invalid("t0", format!("must be positive, got {t0}")));
    }
    let g = traj.grid().ok_or(StatsError::NoGrid)?;
    let ratio = t0 / g.sub_step();
    let stride = ratio.round();
    if stride < 1.0 || (ratio - stride).abs() > 1e-9 * ratio {
        return Err(super::invalid("t0", format!("must be a multiple of the grid step {}", g.sub_step())));
    }
    let stride = stride as usize;
    let mut indices = Vec::new();
    let mut skeleton_len = 0;
    for (n, k) in (0..g.len()).step_by(stride).enumerate() {
        skeleton_len += 1;
        if g.row(k).iter().all(|x| x.abs() <= 1.0) {
            indices.push(n);
        }
    }
    let gaps = indices.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(ReturnTimes { t0, indices, gaps, skeleton_len })
}
