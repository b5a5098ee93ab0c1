use crate::couplings::DriverBundle;
use crate::engine::{Configuration, Grid, ProcessKind, SimParams, Simulator, StepOutcome, Trajectory};

use super::StatsError;

/// Real values on the uniform grid `0, dt, 2 dt, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    dt: f64,
    values: Vec<f64>,
}

impl SampledPath {
    pub fn new(dt: f64, values: Vec<f64>) -> Result<Self, StatsError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(super::invalid("dt", format!("must be positive, got {dt}")));
        }
        if let Some(index) = values.iter().position(|v| v.is_nan()) {
            return Err(StatsError::NanSample { index });
        }
        Ok(Self { dt, values })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// Last sampled time; `None` for an empty path.
    pub fn end(&self) -> Option<f64> {
        self.values.len().checked_sub(1).map(|k| self.time(k))
    }

    /// Linear interpolation between samples.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        let end = self.end()?;
        if t < 0.0 || t > end * (1.0 + 1e-12) {
            return None;
        }
        let s = t / self.dt;
        let k = (s.floor() as usize).min(self.values.len() - 1);
        let frac = s - k as f64;
        if k + 1 >= self.values.len() || frac <= 1e-12 {
            return Some(self.values[k]);
        }
        Some(self.values[k] + frac * (self.values[k + 1] - self.values[k]))
    }

    /// Fraction of `[0, t]` spent strictly below zero by the piecewise-linear
    /// interpolant, i.e. the trapezoid rule applied to the indicator.
    pub fn fraction_negative(&self, t: f64) -> Result<f64, StatsError> {
        let end = self.end().ok_or(StatsError::EmptyWindow { start: 0.0, end: t })?;
        if !(t > 0.0) {
            return Err(super::invalid("t", format!("must be positive, got {t}")));
        }
        if t > end * (1.0 + 1e-12) {
            return Err(StatsError::OutsideHorizon { time: t, horizon: end });
        }
        let mut neg = 0.0;
        for (k, w) in self.values.windows(2).enumerate() {
            let a = self.time(k);
            if a >= t {
                break;
            }
            let b = self.time(k + 1).min(t);
            let (y0, y1) = (w[0], if b < self.time(k + 1) { self.value_at(b).unwrap_or(w[1]) } else { w[1] });
            neg += (b - a) * negative_share(y0, y1);
        }
        Ok((neg / t).clamp(0.0, 1.0))
    }
}

fn negative_share(y0: f64, y1: f64) -> f64 {
    match (y0 < 0.0, y1 < 0.0) {
        (true, true) => 1.0,
        (false, false) => 0.0,
        (true, false) => y0 / (y0 - y1),
        (false, true) => y1 / (y1 - y0),
    }
}

fn grid(traj: &Trajectory) -> Result<&Grid, StatsError> {
    traj.grid().ok_or(StatsError::NoGrid)
}

/// `Z_1` on the sub-sampling grid. The horizon sample is dropped when it is
/// not itself a grid multiple.
pub fn leftmost_path(traj: &Trajectory) -> Result<SampledPath, StatsError> {
    let g = grid(traj)?;
    SampledPath::new(g.sub_step(), g.leftmost().collect())
}

fn rightmost_path(traj: &Trajectory) -> Result<SampledPath, StatsError> {
    let g = grid(traj)?;
    SampledPath::new(g.sub_step(), g.rightmost().collect())
}

fn grid_row(traj: &Trajectory, t: f64) -> Result<&[f64], StatsError> {
    if t > traj.horizon() * (1.0 + 1e-12) {
        return Err(StatsError::OutsideHorizon { time: t, horizon: traj.horizon() });
    }
    if (t - traj.horizon()).abs() <= 1e-9 * traj.horizon().max(1.0) {
        return Ok(traj.final_config().as_slice());
    }
    let g = grid(traj)?;
    let k = g.index_of(t).ok_or_else(|| super::invalid("t", format!("{t} is not a grid time")))?;
    Ok(g.row(k))
}

/// `Z_1(t)` at a grid time or the horizon.
pub fn leftmost_at(traj: &Trajectory, t: f64) -> Result<f64, StatsError> {
    Ok(grid_row(traj, t)?[0])
}

/// `Z_N(t)` at a grid time or the horizon.
pub fn rightmost_at(traj: &Trajectory, t: f64) -> Result<f64, StatsError> {
    let row = grid_row(traj, t)?;
    Ok(row[row.len() - 1])
}

/// Fraction of `[0, t]` during which the leftmost particle is negative.
pub fn occupation_fraction_negative(traj: &Trajectory, t: f64) -> Result<f64, StatsError> {
    if t > traj.horizon() * (1.0 + 1e-12) {
        return Err(StatsError::OutsideHorizon { time: t, horizon: traj.horizon() });
    }
    leftmost_path(traj)?.fraction_negative(t)
}

/// Fraction of `[0, t]` during which the rightmost particle is positive; the
/// mirror image of [`occupation_fraction_negative`].
pub fn occupation_fraction_positive_rightmost(traj: &Trajectory, t: f64) -> Result<f64, StatsError> {
    if t > traj.horizon() * (1.0 + 1e-12) {
        return Err(StatsError::OutsideHorizon { time: t, horizon: traj.horizon() });
    }
    let p = rightmost_path(traj)?;
    SampledPath::new(p.dt, p.values.iter().map(|v| -v).collect())?.fraction_negative(t)
}

/// `t -> m^{-1/2} Z_1(m t)` for `t` in `[0, t_max]`, sampled every `sub_step / m`.
pub fn rescale_path(traj: &Trajectory, m: f64, t_max: f64) -> Result<SampledPath, StatsError> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(super::invalid("m", format!("must be positive, got {m}")));
    }
    if !(t_max > 0.0) {
        return Err(super::invalid("t_max", format!("must be positive, got {t_max}")));
    }
    if m * t_max > traj.horizon() * (1.0 + 1e-12) {
        return Err(StatsError::OutsideHorizon { time: m * t_max, horizon: traj.horizon() });
    }
    let g = grid(traj)?;
    let keep = ((m * t_max / g.sub_step()) + 1e-9).floor() as usize + 1;
    let scale = m.sqrt().recip();
    let values = g.leftmost().take(keep).map(|x| x * scale).collect();
    SampledPath::new(g.sub_step() / m, values)
}

/// Discrete removal of negative excursions: the nonnegative samples, in
/// order, placed on consecutive grid times.
pub fn remove_negative_excursions(path: &SampledPath) -> SampledPath {
    SampledPath { dt: path.dt, values: path.values.iter().copied().filter(|v| *v >= 0.0).collect() }
}

/// The discrete g-transform of `Z_1` evaluated at time `t`, computed while
/// the process runs so that nothing is stored: the `(t / sub_step)`-th
/// nonnegative grid sample, counting the start as sample zero. `None` when the
/// horizon arrives first.
pub fn g_transformed_leftmost_at(
    kind: ProcessKind,
    nu: &Configuration,
    params: &SimParams,
    drivers: DriverBundle,
    t: f64,
) -> Result<Option<f64>, StatsError> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(super::invalid("t", format!("must be nonnegative, got {t}")));
    }
    let params = SimParams { record_grid: true, ..params.clone() };
    let target = (t / params.sub_step).round() as usize;
    let mut seen = 0usize;
    if nu.leftmost() >= 0.0 {
        if target == 0 {
            return Ok(Some(nu.leftmost()));
        }
        seen = 1;
    }
    let mut sim = Simulator::new(kind, &params, nu, drivers)?;
    while let Some(step) = sim.step() {
        let on_grid = matches!(step, StepOutcome::Sample { .. });
        let x = sim.current()[0];
        if on_grid && x >= 0.0 {
            if seen == target {
                return Ok(Some(x));
            }
            seen += 1;
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{ProcessKind, SimParams};
    use proptest::prelude::*;

    fn fixture(rows: Vec<Vec<f64>>, dt: f64) -> Trajectory {
        let n = rows[0].len();
        let p = SimParams::new(n, 0.0, 1.0, 0).with_sub_step(dt);
        Trajectory::from_grid_rows(ProcessKind::Nbbm, p, &rows).unwrap()
    }

    #[test]
    fn linear_crossing_gives_half() {
        let dt = 0.01;
        let rows: Vec<Vec<f64>> = (0..=200).map(|k| vec![k as f64 * dt - 1.0]).collect();
        let t = fixture(rows, dt);
        assert!((occupation_fraction_negative(&t, 2.0).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pinned_fixtures() {
        let pos = fixture(vec![vec![0.5, 1.0]; 11], 0.1);
        let neg = fixture(vec![vec![-1.0, -0.5]; 11], 0.1);
        assert_eq!(occupation_fraction_negative(&pos, 1.0).unwrap(), 0.0);
        assert_eq!(occupation_fraction_negative(&neg, 1.0).unwrap(), 1.0);
        assert_eq!(occupation_fraction_positive_rightmost(&pos, 1.0).unwrap(), 1.0);
        assert!(matches!(occupation_fraction_negative(&pos, 2.0), Err(StatsError::OutsideHorizon { .. })));
    }

    #[test]
    fn partial_interval() {
        // Path -1 -> 1 on [0, 1]; on [0, 0.25] it stays negative.
        let t = fixture(vec![vec![-1.0], vec![1.0]], 1.0);
        let p = leftmost_path(&t).unwrap();
        assert!((p.fraction_negative(0.25).unwrap() - 1.0).abs() < 1e-12);
        assert!((p.fraction_negative(0.75).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn rescale_identity_and_linear() {
        let dt = 0.1;
        let c = 0.3;
        let rows: Vec<Vec<f64>> = (0..=100).map(|k| vec![c * k as f64 * dt]).collect();
        let t = fixture(rows, dt);
        let same = rescale_path(&t, 1.0, t.horizon()).unwrap();
        assert_eq!(same, leftmost_path(&t).unwrap());
        let m = 4.0;
        let r = rescale_path(&t, m, 2.5).unwrap();
        for (k, v) in r.values().iter().enumerate() {
            let s = r.time(k);
            assert!((v - c * m.sqrt() * s).abs() < 1e-12);
        }
        assert!((r.end().unwrap() - 2.5).abs() < 1e-12);
        assert!(matches!(rescale_path(&t, 4.0, 3.0), Err(StatsError::OutsideHorizon { .. })));
    }

    #[test]
    fn excursion_removal_example() {
        let p = SampledPath::new(1.0, vec![1.0, -1.0, -2.0, 3.0]).unwrap();
        let g = remove_negative_excursions(&p);
        assert_eq!(g.values(), &[1.0, 3.0]);
        assert_eq!(g.time(1), 1.0);
        let all_neg = SampledPath::new(1.0, vec![-1.0, -2.0]).unwrap();
        assert!(remove_negative_excursions(&all_neg).is_empty());
    }

    #[test]
    fn nan_rejected() {
        assert!(matches!(SampledPath::new(1.0, vec![0.0, f64::NAN]), Err(StatsError::NanSample { index: 1 })));
    }

    proptest! {
        #[test]
        fn excursion_removal_is_nonnegative_subsequence(v in prop::collection::vec(-5.0f64..5.0, 0..60)) {
            let p = SampledPath::new(0.5, v.clone()).unwrap();
            let g = remove_negative_excursions(&p);
            prop_assert!(g.values().iter().all(|x| *x >= 0.0));
            let expected: Vec<f64> = v.iter().copied().filter(|x| *x >= 0.0).collect();
            prop_assert_eq!(g.values(), &expected[..]);
        }

        #[test]
        fn nonnegative_path_unchanged(v in prop::collection::vec(0.0f64..5.0, 1..60)) {
            let p = SampledPath::new(0.5, v).unwrap();
            prop_assert_eq!(remove_negative_excursions(&p), p);
        }

        #[test]
        fn occupation_in_unit_interval(v in prop::collection::vec(-5.0f64..5.0, 2..60)) {
            let p = SampledPath::new(0.1, v).unwrap();
            let f = p.fraction_negative(p.end().unwrap()).unwrap();
            prop_assert!((0.0..=1.0).contains(&f));
        }
    }

    #[test]
    fn streaming_g_transform_matches_stored_path() {
        let nu = Configuration::uniform(1, 0.0).unwrap();
        for seed in 0..5 {
            let p = SimParams::new(1, 0.0, 30.0, seed).with_sub_step(0.01).with_events(false);
            let stored =
                crate::engine::simulate(ProcessKind::Nbbm, &p, &nu, DriverBundle::new(seed, 1).unwrap()).unwrap();
            let g = remove_negative_excursions(&leftmost_path(&stored).unwrap());
            let streamed =
                g_transformed_leftmost_at(ProcessKind::Nbbm, &nu, &p, DriverBundle::new(seed, 1).unwrap(), 1.0)
                    .unwrap();
            assert_eq!(streamed, g.value_at(1.0), "seed {seed}");
        }
    }
}
