use serde::Serialize;

use crate::engine::Trajectory;

use super::regression::{linear_fit, mean, sample_variance};
use super::StatsError;

const BATCHES: usize = 10;

/// Slopes of the leftmost and rightmost positions over a time window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VelocityEstimate {
    pub v_min_hat: f64,
    pub v_max_hat: f64,
    /// The larger of the two slope standard errors.
    pub stderr: f64,
    /// Standard error of the common slope `(v_min + v_max) / 2`.
    pub common_stderr: f64,
    /// Standard error of `v_max - v_min`.
    pub gap_stderr: f64,
    pub window: (f64, f64),
    pub replicas: usize,
}

impl VelocityEstimate {
    pub fn common_slope(&self) -> f64 {
        0.5 * (self.v_min_hat + self.v_max_hat)
    }
}

/// Two-term large-N speed of N-BBM: `sqrt(2) - pi^2 / (sqrt(2) ln^2 N)`.
pub fn velocity_formula(n: u64) -> Result<f64, StatsError> {
    if n < 2 {
        return Err(super::invalid("N", format!("must be at least 2, got {n}")));
    }
    let l = (n as f64).ln();
    Ok(std::f64::consts::SQRT_2 - std::f64::consts::PI.powi(2) / (std::f64::consts::SQRT_2 * l * l))
}

struct Window {
    t: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

fn window(traj: &Trajectory, t_burn: f64) -> Result<Window, StatsError> {
    let end = traj.horizon();
    if !(t_burn >= 0.0 && t_burn < end) {
        return Err(StatsError::EmptyWindow { start: t_burn, end });
    }
    let mut w = Window { t: Vec::new(), lo: Vec::new(), hi: Vec::new() };
    for (t, lo, hi) in traj.extremes() {
        if t >= t_burn {
            w.t.push(t);
            w.lo.push(lo);
            w.hi.push(hi);
        }
    }
    if w.t.len() < 3 || w.t[w.t.len() - 1] <= w.t[0] {
        return Err(StatsError::EmptyWindow { start: t_burn, end });
    }
    Ok(w)
}

/// Batch-means standard error of an OLS slope. Residuals of a diffusive
/// path are strongly autocorrelated, so the plain OLS error is far too small.
fn batch_stderr(t: &[f64], y: &[f64]) -> Option<f64> {
    let (t0, t1) = (t[0], t[t.len() - 1]);
    let width = (t1 - t0) / BATCHES as f64;
    let mut slopes = Vec::with_capacity(BATCHES);
    let mut start = 0;
    for b in 0..BATCHES {
        let upper = if b + 1 == BATCHES { f64::INFINITY } else { t0 + (b + 1) as f64 * width };
        let mut end = start;
        while end < t.len() && t[end] < upper {
            end += 1;
        }
        slopes.push(linear_fit(&t[start..end], &y[start..end]).ok()?.slope);
        start = end;
    }
    Some((sample_variance(&slopes) / BATCHES as f64).sqrt())
}

/// Least-squares slopes of `Z_1(t)` and `Z_N(t)` on `[t_burn, horizon]`.
///
/// The standard error comes from batch means over ten sub-windows when there
/// are enough observations, otherwise from the OLS residuals.
pub fn estimate_velocity(traj: &Trajectory, t_burn: f64) -> Result<VelocityEstimate, StatsError> {
    let w = window(traj, t_burn)?;
    let lo = linear_fit(&w.t, &w.lo)?;
    let hi = linear_fit(&w.t, &w.hi)?;
    let gap: Vec<f64> = w.hi.iter().zip(&w.lo).map(|(h, l)| h - l).collect();
    let mid: Vec<f64> = w.hi.iter().zip(&w.lo).map(|(h, l)| 0.5 * (h + l)).collect();
    let se = |y: &[f64], fallback: f64| batch_stderr(&w.t, y).unwrap_or(fallback);
    let se_lo = se(&w.lo, lo.slope_stderr);
    let se_hi = se(&w.hi, hi.slope_stderr);
    let common_stderr = se(&mid, linear_fit(&w.t, &mid)?.slope_stderr);
    let gap_stderr = se(&gap, linear_fit(&w.t, &gap)?.slope_stderr);
    Ok(VelocityEstimate {
        v_min_hat: lo.slope,
        v_max_hat: hi.slope,
        stderr: se_lo.max(se_hi),
        common_stderr,
        gap_stderr,
        window: (w.t[0], traj.horizon()),
        replicas: 1,
    })
}

/// Mean of per-replica slopes; standard errors from the replica spread.
pub fn estimate_velocity_pooled(replicas: &[Trajectory], t_burn: f64) -> Result<VelocityEstimate, StatsError> {
    match replicas {
        [] => Err(StatsError::TooFewSamples { needed: 1, got: 0 }),
        [one] => estimate_velocity(one, t_burn),
        _ => {
            let each = replicas.iter().map(|r| estimate_velocity(r, t_burn)).collect::<Result<Vec<_>, _>>()?;
            Ok(pool(&each))
        }
    }
}

/// Combine per-replica estimates using the replica spread.
pub fn pool(each: &[VelocityEstimate]) -> VelocityEstimate {
    let k = each.len() as f64;
    let se = |xs: Vec<f64>| (sample_variance(&xs) / k).sqrt();
    let lo: Vec<f64> = each.iter().map(|e| e.v_min_hat).collect();
    let hi: Vec<f64> = each.iter().map(|e| e.v_max_hat).collect();
    let mid: Vec<f64> = each.iter().map(VelocityEstimate::common_slope).collect();
    let gap: Vec<f64> = each.iter().map(|e| e.v_max_hat - e.v_min_hat).collect();
    let start = each.iter().map(|e| e.window.0).fold(f64::INFINITY, f64::min);
    let end = each.iter().map(|e| e.window.1).fold(f64::NEG_INFINITY, f64::max);
    VelocityEstimate {
        v_min_hat: mean(&lo),
        v_max_hat: mean(&hi),
        stderr: se(lo).max(se(hi)),
        common_stderr: se(mid),
        gap_stderr: se(gap),
        window: (start, end),
        replicas: each.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::couplings::DriverBundle;
    use crate::engine::{simulate, simulate_seeded, Configuration, ProcessKind, SimParams};
    use proptest::prelude::*;

    #[test]
    #[allow(clippy::approx_constant)] // hand-typed constants are the point of the oracle
    fn formula_values() {
        assert!(velocity_formula(1).is_err());
        // Independent evaluation: ln 100 = 4.605170..., ln 10 = 2.302585...
        let direct = |l: f64| 2f64.sqrt() - 9.869_604_401_089_358 / (1.414_213_562_373_095 * l * l);
        assert!((velocity_formula(100).unwrap() - direct(4.605_170_185_988_091)).abs() < 1e-12);
        assert!((velocity_formula(100).unwrap() - 1.08514).abs() < 1e-5);
        assert!((velocity_formula(10).unwrap() - 0.09792).abs() < 1e-5);
        assert!((velocity_formula(u64::MAX).unwrap() - 2f64.sqrt()) < 0.0);
        assert!((velocity_formula(u64::MAX).unwrap() - 2f64.sqrt()).abs() < 0.01);
    }

    proptest! {
        #[test]
        fn formula_increasing_and_bounded(n in 3u64..1_000_000_000) {
            let a = velocity_formula(n).unwrap();
            let b = velocity_formula(n + 1).unwrap();
            prop_assert!(a < b);
            prop_assert!(b < 2f64.sqrt());
        }
    }

    #[test]
    fn drift_only_path_is_exact() {
        let p = SimParams::new(1, 0.7, 50.0, 1).with_sub_step(0.1);
        let t = simulate(
            ProcessKind::Nbbm,
            &p,
            &Configuration::uniform(1, 0.0).unwrap(),
            DriverBundle::silent(1, 1).unwrap(),
        )
        .unwrap();
        let v = estimate_velocity(&t, 5.0).unwrap();
        assert!((v.v_min_hat - 0.7).abs() < 1e-12);
        assert!((v.v_max_hat - 0.7).abs() < 1e-12);
        assert!(v.stderr < 1e-12);
    }

    #[test]
    fn brownian_slope_is_zero() {
        let p = SimParams::new(1, 0.0, 1000.0, 42).with_sub_step(0.1).with_events(false);
        let t = simulate_seeded(ProcessKind::Nbbm, &p, &Configuration::uniform(1, 0.0).unwrap()).unwrap();
        let v = estimate_velocity(&t, 100.0).unwrap();
        assert!(v.v_min_hat.abs() < 3.0 * v.stderr, "{v:?}");
    }

    #[test]
    fn pooled_brownian_slope_is_zero() {
        let reps: Vec<_> = (0..20u64)
            .map(|seed| {
                let p = SimParams::new(1, 0.0, 1000.0, seed).with_sub_step(0.5).with_events(false);
                simulate_seeded(ProcessKind::Nbbm, &p, &Configuration::uniform(1, 0.0).unwrap()).unwrap()
            })
            .collect();
        let v = estimate_velocity_pooled(&reps, 100.0).unwrap();
        assert_eq!(v.replicas, 20);
        assert!(v.v_min_hat.abs() < 3.0 * v.stderr, "{v:?}");
    }

    #[test]
    fn window_errors() {
        let p = SimParams::new(1, 0.0, 1.0, 1);
        let t = simulate_seeded(ProcessKind::Nbbm, &p, &Configuration::uniform(1, 0.0).unwrap()).unwrap();
        assert!(matches!(estimate_velocity(&t, 1.0), Err(StatsError::EmptyWindow { .. })));
        assert!(estimate_velocity_pooled(&[], 0.0).is_err());
    }

    #[test]
    fn translation_equivariance() {
        let nu = Configuration::new(vec![-1.0, 0.0, 0.5, 2.0]).unwrap();
        for seed in 0..5 {
            let base = SimParams::new(4, 0.0, 30.0, seed).with_sub_step(0.1);
            let shifted = SimParams { drift: 0.8, ..base.clone() };
            let a = estimate_velocity(&simulate_seeded(ProcessKind::Nbbm, &base, &nu).unwrap(), 3.0).unwrap();
            let b = estimate_velocity(&simulate_seeded(ProcessKind::Nbbm, &shifted, &nu).unwrap(), 3.0).unwrap();
            assert!((b.v_min_hat - 0.8 - a.v_min_hat).abs() < 1e-9);
            assert!((b.v_max_hat - 0.8 - a.v_max_hat).abs() < 1e-9);
        }
    }

    #[test]
    fn reflection_negates_velocity() {
        let nu = Configuration::new(vec![-1.0, 0.2, 0.5]).unwrap();
        for seed in 0..5 {
            let p = SimParams::new(3, 0.3, 20.0, seed).with_sub_step(0.1);
            let q = SimParams { drift: -0.3, ..p.clone() };
            let a = estimate_velocity(
                &simulate(ProcessKind::Bees, &p, &nu, DriverBundle::new(seed, 3).unwrap()).unwrap(),
                2.0,
            )
            .unwrap();
            let mirrored =
                simulate(ProcessKind::Bees, &q, &nu.mirrored(), DriverBundle::new(seed, 3).unwrap().mirrored())
                    .unwrap();
            let b = estimate_velocity(&mirrored, 2.0).unwrap();
            assert!((a.v_min_hat + b.v_max_hat).abs() < 1e-9, "{a:?} {b:?}");
            assert!((a.v_max_hat + b.v_min_hat).abs() < 1e-9);
        }
    }
}
