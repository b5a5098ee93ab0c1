use serde::{Deserialize, Serialize};

use crate::engine::Trajectory;
use crate::rng::{KeyedStream, StreamRole};

use super::regression::mean;
use super::StatsError;

const MIN_REPLICAS: usize = 30;
const RESAMPLES: usize = 2000;
const LEVEL: f64 = 0.99;

/// Path functionals that are increasing for the pathwise order of N-BBM
/// trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathFunctional {
    /// `Z_1(T)`
    LeftmostAtEnd,
    /// `Z_N(T)`
    RightmostAtEnd,
    /// `max_{t <= T} Z_N(t)` over the grid
    MaxRightmost,
    /// `int_0^T Z_1(t) dt` by the trapezoid rule on the grid
    IntegralLeftmost,
}

impl PathFunctional {
    pub const CATALOG: [PathFunctional; 4] = [
        PathFunctional::LeftmostAtEnd,
        PathFunctional::RightmostAtEnd,
        PathFunctional::MaxRightmost,
        PathFunctional::IntegralLeftmost,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PathFunctional::LeftmostAtEnd => "Z1(T)",
            PathFunctional::RightmostAtEnd => "ZN(T)",
            PathFunctional::MaxRightmost => "max ZN",
            PathFunctional::IntegralLeftmost => "int Z1",
        }
    }

    pub fn evaluate(self, traj: &Trajectory) -> Result<f64, StatsError> {
        let end = traj.final_config();
        match self {
            PathFunctional::LeftmostAtEnd => Ok(end.leftmost()),
            PathFunctional::RightmostAtEnd => Ok(end.rightmost()),
            PathFunctional::MaxRightmost => {
                let g = traj.grid().ok_or(StatsError::NoGrid)?;
                Ok(g.rightmost().fold(end.rightmost(), f64::max))
            }
            PathFunctional::IntegralLeftmost => {
                let g = traj.grid().ok_or(StatsError::NoGrid)?;
                let mut total = 0.0;
                let mut prev: Option<(f64, f64)> = None;
                for (t, row) in g.rows() {
                    if let Some((t0, y0)) = prev {
                        total += 0.5 * (t - t0) * (y0 + row[0]);
                    }
                    prev = Some((t, row[0]));
                }
                if let Some((t0, y0)) = prev {
                    total += 0.5 * (traj.horizon() - t0) * (y0 + end.leftmost());
                }
                Ok(total)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AssociationEstimate {
    pub covariance: f64,
    /// Bootstrap percentile interval at `level`.
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub resamples: usize,
    pub replicas: usize,
}

fn covariance(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (x.len() - 1) as f64
}

/// Sample covariance with a 99% percentile-bootstrap interval. Resampling is
/// keyed by `seed`, so the interval is reproducible.
pub fn covariance_with_bootstrap(x: &[f64], y: &[f64], seed: u64) -> Result<AssociationEstimate, StatsError> {
    if x.len() != y.len() {
        return Err(super::invalid("g", "functionals evaluated on different replica sets"));
    }
    let n = x.len();
    if n < MIN_REPLICAS {
        return Err(StatsError::TooFewSamples { needed: MIN_REPLICAS, got: n });
    }
    if let Some(index) = x.iter().chain(y).position(|v| v.is_nan()) {
        return Err(StatsError::NanSample { index: index % n });
    }
    let mut stream = KeyedStream::new(seed, StreamRole::Bootstrap);
    let mut bx = vec![0.0; n];
    let mut by = vec![0.0; n];
    let mut stats: Vec<f64> = (0..RESAMPLES)
        .map(|_| {
            for k in 0..n {
                let i = stream.index(n);
                bx[k] = x[i];
                by[k] = y[i];
            }
            covariance(&bx, &by)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let tail = (1.0 - LEVEL) / 2.0;
    let pick = |q: f64| stats[((q * RESAMPLES as f64).floor() as usize).min(RESAMPLES - 1)];
    Ok(AssociationEstimate {
        covariance: covariance(x, y),
        lower: pick(tail),
        upper: pick(1.0 - tail),
        level: LEVEL,
        resamples: RESAMPLES,
        replicas: n,
    })
}

/// Covariance of `f` and `g` over independent replicas.
pub fn association_covariance(
    f: PathFunctional,
    g: PathFunctional,
    replicas: &[Trajectory],
    seed: u64,
) -> Result<AssociationEstimate, StatsError> {
    if replicas.len() < MIN_REPLICAS {
        return Err(StatsError::TooFewSamples { needed: MIN_REPLICAS, got: replicas.len() });
    }
    let x = replicas.iter().map(|r| f.evaluate(r)).collect::<Result<Vec<_>, _>>()?;
    let y = replicas.iter().map(|r| g.evaluate(r)).collect::<Result<Vec<_>, _>>()?;
    covariance_with_bootstrap(&x, &y, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{simulate_seeded, Configuration, ProcessKind, SimParams};

    fn replicas(n: usize, count: u64) -> Vec<Trajectory> {
        (0..count)
            .map(|seed| {
                let p = SimParams::new(n, 0.0, 2.0, seed).with_sub_step(0.05).with_events(false);
                simulate_seeded(ProcessKind::Nbbm, &p, &Configuration::uniform(n, 0.0).unwrap()).unwrap()
            })
            .collect()
    }

    #[test]
    fn variance_is_nonnegative() {
        let reps = replicas(3, 40);
        for f in PathFunctional::CATALOG {
            let e = association_covariance(f, f, &reps, 1).unwrap();
            assert!(e.covariance >= 0.0);
            assert!(e.lower >= 0.0);
            assert!(e.lower <= e.upper);
        }
    }

    #[test]
    fn decreasing_partner_gives_nonpositive_covariance() {
        let reps = replicas(3, 40);
        let x: Vec<f64> = reps.iter().map(|r| PathFunctional::LeftmostAtEnd.evaluate(r).unwrap()).collect();
        let y: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!(covariance_with_bootstrap(&x, &y, 2).unwrap().covariance <= 0.0);
    }

    #[test]
    fn functionals_on_a_fixture() {
        let p = SimParams::new(2, 0.0, 1.0, 0).with_sub_step(0.5);
        let rows = vec![vec![0.0, 1.0], vec![1.0, 3.0], vec![2.0, 2.5]];
        let t = Trajectory::from_grid_rows(ProcessKind::Nbbm, p, &rows).unwrap();
        assert_eq!(PathFunctional::LeftmostAtEnd.evaluate(&t).unwrap(), 2.0);
        assert_eq!(PathFunctional::RightmostAtEnd.evaluate(&t).unwrap(), 2.5);
        assert_eq!(PathFunctional::MaxRightmost.evaluate(&t).unwrap(), 3.0);
        // Trapezoid: 0.25 * (0 + 1) + 0.25 * (1 + 2).
        assert!((PathFunctional::IntegralLeftmost.evaluate(&t).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bootstrap_is_reproducible() {
        let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.7).sin()).collect();
        let y: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).cos()).collect();
        assert_eq!(covariance_with_bootstrap(&x, &y, 9).unwrap(), covariance_with_bootstrap(&x, &y, 9).unwrap());
        assert!(covariance_with_bootstrap(&x[..20], &y[..20], 9).is_err());
    }
}
