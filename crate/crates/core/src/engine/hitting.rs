use crate::rng::{KeyedStream, StreamRole};

use super::{EngineError, Trajectory};

/// Probability that a Brownian bridge from `x` to `y` over `dt` touches 0.
pub fn bridge_crossing_probability(x: f64, y: f64, dt: f64) -> Result<f64, EngineError> {
    if !(dt > 0.0) {
        return Err(EngineError::InvalidParameter { field: "dt", reason: format!("must be positive, got {dt}") });
    }
    if x * y <= 0.0 {
        return Ok(1.0);
    }
    Ok((-2.0 * x.abs() * y.abs() / dt).exp())
}

/// Whether a pair of paired endpoints crosses zero within the segment, and
/// when. Sign changes are certain; otherwise a bridge Bernoulli decides.
pub(crate) fn segment_hit(t0: f64, t1: f64, from: &[f64], to: &[f64], bridge: &mut KeyedStream) -> Option<f64> {
    let dt = t1 - t0;
    let mut earliest: Option<f64> = None;
    for (&x, &y) in from.iter().zip(to) {
        if x == 0.0 {
            return Some(t0);
        }
        if x * y <= 0.0 {
            let t = t0 + dt * x / (x - y);
            earliest = Some(earliest.map_or(t, |e: f64| e.min(t)));
        }
    }
    if earliest.is_some() || dt <= 0.0 {
        return earliest;
    }
    for (&x, &y) in from.iter().zip(to) {
        let p = (-2.0 * x.abs() * y.abs() / dt).exp();
        if bridge.bernoulli(p) {
            return Some(t0 + 0.5 * dt);
        }
    }
    None
}

/// First time any particle touches 0, or `None` if none does by the horizon.
///
/// Consecutive observation points are paired rank by rank. Jumps at events
/// are not paths, so a post-event configuration only starts a new segment.
/// Bridge draws come from the trajectory's own `Bridge` stream.
pub fn first_hit_zero(traj: &Trajectory) -> Option<f64> {
    let mut stream = KeyedStream::new(traj.params().seed, StreamRole::Bridge);
    first_hit_zero_with(traj, &mut stream)
}

pub fn first_hit_zero_with(traj: &Trajectory, bridge: &mut KeyedStream) -> Option<f64> {
    let points = traj.observation_points();
    let first = points.first()?;
    if first.positions.contains(&0.0) {
        return Some(first.time);
    }
    for w in points.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if b.after_jump {
            continue;
        }
        if let Some(t) = segment_hit(a.time, b.time, a.positions, b.positions, bridge) {
            return Some(t);
        }
    }
    None
}
