use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::rng::{KeyedStream, StreamRole};
use crate::statistics::{linear_fit, mean, sample_variance};

use super::cumulant::{speed_second_order, KappaBbm, KappaHatDelta};
use super::BrwError;

/// Randomness consumed by the N-BRW processes.
pub trait BrwDrivers {
    /// An Exp(1) branching time.
    fn branch_time(&mut self) -> f64;
    /// A standard Gaussian.
    fn gaussian(&mut self) -> f64;
}

/// Keyed streams for branching times and displacements.
#[derive(Debug, Clone)]
pub struct KeyedBrwDrivers {
    branching: KeyedStream,
    displacement: KeyedStream,
}

impl KeyedBrwDrivers {
    pub fn new(seed: u64) -> Self {
        Self {
            branching: KeyedStream::new(seed, StreamRole::Branching),
            displacement: KeyedStream::new(seed, StreamRole::Displacement),
        }
    }
}

impl BrwDrivers for KeyedBrwDrivers {
    fn branch_time(&mut self) -> f64 {
        self.branching.exponential(1.0)
    }

    fn gaussian(&mut self) -> f64 {
        self.displacement.normal()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BrwKind {
    /// Branching Brownian motion for unit time, then keep the N rightmost.
    Upper,
    /// At most one branching per generation of length delta, keep the
    /// `floor(N/2)` rightmost.
    Lower,
}

impl BrwKind {
    pub fn name(self) -> &'static str {
        match self {
            BrwKind::Upper => "upper",
            BrwKind::Lower => "lower",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrwParams {
    pub kind: BrwKind,
    /// The N of the N-BBM being bounded.
    pub n: usize,
    /// Generation length: 1 for the upper process, delta for the lower.
    pub step: f64,
    pub drift: f64,
    pub generations: usize,
}

impl BrwParams {
    pub fn upper(n: usize, drift: f64, generations: usize) -> Self {
        Self { kind: BrwKind::Upper, n, step: 1.0, drift, generations }
    }

    pub fn lower(n: usize, delta: f64, drift: f64, generations: usize) -> Self {
        Self { kind: BrwKind::Lower, n, step: delta, drift, generations }
    }

    /// Population kept after selection.
    pub fn n_keep(&self) -> usize {
        match self.kind {
            BrwKind::Upper => self.n,
            BrwKind::Lower => self.n / 2,
        }
    }

    /// Offspring allowed in one generation before aborting.
    pub fn offspring_cap(&self) -> usize {
        64 * self.n.max(1)
    }

    pub fn validate(&self) -> Result<(), BrwError> {
        let min_n = match self.kind {
            BrwKind::Upper => 1,
            BrwKind::Lower => 2,
        };
        if self.n < min_n {
            return Err(super::invalid("N", format!("must be at least {min_n}, got {}", self.n)));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(super::invalid("delta", format!("must be positive, got {}", self.step)));
        }
        if self.kind == BrwKind::Upper && self.step != 1.0 {
            return Err(super::invalid("delta", "the upper process uses unit generations"));
        }
        if !self.drift.is_finite() {
            return Err(super::invalid("mu", "must be finite"));
        }
        if self.generations == 0 {
            return Err(super::invalid("generations", "must be at least 1"));
        }
        Ok(())
    }
}

/// Per-generation record of an N-BRW run.
#[derive(Debug, Clone, PartialEq)]
pub struct BrwTrajectory {
    pub params: BrwParams,
    /// `g * step` for generations `0..=generations`.
    pub times: Vec<f64>,
    /// Leftmost and rightmost kept particle after each selection.
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
    /// Offspring produced in each generation, before selection.
    pub offspring: Vec<usize>,
    pub final_positions: Vec<f64>,
}

/// Offspring of one particle after a unit-time binary branching Brownian
/// motion with drift `mu`, appended to `out`. Returns false once `out`
/// exceeds `cap`.
fn grow_upper(parent: f64, mu: f64, drivers: &mut impl BrwDrivers, out: &mut Vec<f64>, cap: usize) -> bool {
    let mut stack = vec![(parent, 1.0f64)];
    while let Some((x, left)) = stack.pop() {
        let tau = drivers.branch_time();
        if tau >= left {
            out.push(x + mu * left + left.sqrt() * drivers.gaussian());
            if out.len() > cap {
                return false;
            }
        } else {
            let y = x + mu * tau + tau.sqrt() * drivers.gaussian();
            stack.push((y, left - tau));
            stack.push((y, left - tau));
        }
    }
    true
}

/// Offspring of one particle over a unit-time generation of the upper process.
pub fn upper_offspring(parent: f64, mu: f64, drivers: &mut impl BrwDrivers) -> Vec<f64> {
    let mut out = Vec::new();
    grow_upper(parent, mu, drivers, &mut out, usize::MAX);
    out
}

/// Offspring of one particle over a generation of length `delta` with at
/// most one branching.
pub fn lower_offspring(parent: f64, delta: f64, mu: f64, drivers: &mut impl BrwDrivers) -> Vec<f64> {
    let mut out = Vec::with_capacity(2);
    grow_lower(parent, delta, mu, drivers, &mut out);
    out
}

fn grow_lower(parent: f64, delta: f64, mu: f64, drivers: &mut impl BrwDrivers, out: &mut Vec<f64>) {
    let tau = drivers.branch_time();
    if tau >= delta {
        out.push(parent + mu * delta + delta.sqrt() * drivers.gaussian());
    } else {
        let y = parent + mu * tau + tau.sqrt() * drivers.gaussian();
        let rest = delta - tau;
        for _ in 0..2 {
            out.push(y + mu * rest + rest.sqrt() * drivers.gaussian());
        }
    }
}

fn keep_rightmost(v: &mut Vec<f64>, keep: usize) {
    if v.len() > keep {
        let cut = v.len() - keep;
        v.select_nth_unstable_by(cut, f64::total_cmp);
        v.drain(..cut);
    }
}

fn run(params: BrwParams, drivers: &mut impl BrwDrivers) -> Result<BrwTrajectory, BrwError> {
    params.validate()?;
    let keep = params.n_keep();
    let cap = params.offspring_cap();
    let mut pop = vec![0.0; keep];
    let mut next = Vec::with_capacity(4 * keep);
    let g = params.generations;
    let mut traj = BrwTrajectory {
        times: Vec::with_capacity(g + 1),
        mins: Vec::with_capacity(g + 1),
        maxs: Vec::with_capacity(g + 1),
        offspring: Vec::with_capacity(g),
        final_positions: Vec::new(),
        params,
    };
    traj.times.push(0.0);
    traj.mins.push(0.0);
    traj.maxs.push(0.0);
    for generation in 1..=g {
        next.clear();
        for &x in &pop {
            match traj.params.kind {
                BrwKind::Upper => {
                    if !grow_upper(x, traj.params.drift, drivers, &mut next, cap) {
                        return Err(BrwError::PopulationExplosion { generation, count: next.len(), cap });
                    }
                }
                BrwKind::Lower => grow_lower(x, traj.params.step, traj.params.drift, drivers, &mut next),
            }
        }
        traj.offspring.push(next.len());
        keep_rightmost(&mut next, keep);
        std::mem::swap(&mut pop, &mut next);
        let (lo, hi) = pop.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        traj.times.push(generation as f64 * traj.params.step);
        traj.mins.push(lo);
        traj.maxs.push(hi);
    }
    pop.sort_by(f64::total_cmp);
    traj.final_positions = pop;
    Ok(traj)
}

/// The upper bounding process: N particles at the origin, unit generations.
pub fn simulate_nbrw_upper(
    n: usize,
    mu: f64,
    generations: usize,
    drivers: &mut impl BrwDrivers,
) -> Result<BrwTrajectory, BrwError> {
    run(BrwParams::upper(n, mu, generations), drivers)
}

/// The lower bounding process: `floor(N/2)` particles at the origin,
/// generations of length `delta`.
pub fn simulate_nbrw_lower(
    n: usize,
    delta: f64,
    mu: f64,
    generations: usize,
    drivers: &mut impl BrwDrivers,
) -> Result<BrwTrajectory, BrwError> {
    run(BrwParams::lower(n, delta, mu, generations), drivers)
}

/// Speed of the front per unit time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BrwSpeed {
    pub speed_hat: f64,
    pub stderr: f64,
    pub replicas: usize,
}

/// OLS slope of the midpoint of the kept cloud after discarding the first
/// `burn_fraction` of the generations. The error is the OLS residual error.
pub fn estimate_brw_speed(traj: &BrwTrajectory, burn_fraction: f64) -> Result<BrwSpeed, BrwError> {
    if !(0.0..1.0).contains(&burn_fraction) {
        return Err(super::invalid("burn_fraction", format!("must be in [0, 1), got {burn_fraction}")));
    }
    let start = (burn_fraction * traj.times.len() as f64).floor() as usize;
    let t = &traj.times[start..];
    if t.len() < 3 {
        return Err(BrwError::EmptyWindow { needed: 3, got: t.len() });
    }
    let mid: Vec<f64> = traj.mins[start..].iter().zip(&traj.maxs[start..]).map(|(a, b)| 0.5 * (a + b)).collect();
    let fit = linear_fit(t, &mid).map_err(|e| super::invalid("trajectory", e.to_string()))?;
    Ok(BrwSpeed { speed_hat: fit.slope, stderr: fit.slope_stderr, replicas: 1 })
}

/// Mean of per-replica speeds with the replica standard error.
pub fn estimate_brw_speed_pooled(replicas: &[BrwTrajectory], burn_fraction: f64) -> Result<BrwSpeed, BrwError> {
    let speeds = replicas
        .iter()
        .map(|r| estimate_brw_speed(r, burn_fraction).map(|s| s.speed_hat))
        .collect::<Result<Vec<_>, _>>()?;
    match speeds.len() {
        0 => Err(BrwError::EmptyWindow { needed: 1, got: 0 }),
        1 => estimate_brw_speed(&replicas[0], burn_fraction),
        k => {
            Ok(BrwSpeed { speed_hat: mean(&speeds), stderr: (sample_variance(&speeds) / k as f64).sqrt(), replicas: k })
        }
    }
}

/// One line of the speed-sweep table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedSweepRow {
    pub kind: BrwKind,
    pub n: usize,
    pub delta: f64,
    pub speed_hat: f64,
    pub stderr: f64,
    pub speed_formula: f64,
}

impl SpeedSweepRow {
    /// Pair an estimate with the second-order formula for the same kind.
    pub fn new(params: &BrwParams, speed: BrwSpeed) -> Result<Self, BrwError> {
        let formula = match params.kind {
            BrwKind::Upper => speed_second_order(&KappaBbm, params.n as u64)?,
            BrwKind::Lower => speed_second_order(&KappaHatDelta::new(params.step)?, params.n as u64)?,
        };
        Ok(Self {
            kind: params.kind,
            n: params.n,
            delta: params.step,
            speed_hat: speed.speed_hat,
            stderr: speed.stderr,
            speed_formula: formula,
        })
    }
}

/// `kind,N,delta,speed_hat,stderr,speed_formula`
pub fn write_speed_sweep(rows: &[SpeedSweepRow], mut w: impl Write) -> io::Result<()> {
    use crate::engine::csv::format_f64;
    writeln!(w, "kind,N,delta,speed_hat,stderr,speed_formula")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.kind.name(),
            r.n,
            format_f64(r.delta),
            format_f64(r.speed_hat),
            format_f64(r.stderr),
            format_f64(r.speed_formula)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Never branches within a generation and never moves.
    struct Frozen;

    impl BrwDrivers for Frozen {
        fn branch_time(&mut self) -> f64 {
            10.0
        }
        fn gaussian(&mut self) -> f64 {
            0.0
        }
    }

    #[test]
    fn frozen_fixture_is_constant() {
        let t = simulate_nbrw_upper(5, 0.0, 20, &mut Frozen).unwrap();
        assert!(t.mins.iter().chain(&t.maxs).all(|&x| x == 0.0));
        assert!(t.offspring.iter().all(|&c| c == 5));
        let t = simulate_nbrw_lower(6, 0.5, 0.0, 20, &mut Frozen).unwrap();
        assert_eq!(t.final_positions, vec![0.0; 3]);
    }

    fn mean_and_se(xs: &[f64]) -> (f64, f64) {
        (mean(xs), (sample_variance(xs) / xs.len() as f64).sqrt())
    }

    #[test]
    fn upper_mean_offspring_is_e() {
        let mut d = KeyedBrwDrivers::new(5);
        let counts: Vec<f64> = (0..10_000).map(|_| upper_offspring(0.0, 0.0, &mut d).len() as f64).collect();
        let (m, se) = mean_and_se(&counts);
        assert!((m - std::f64::consts::E).abs() < 3.0 * se, "{m} ± {se}");
    }

    #[test]
    fn lower_mean_offspring() {
        let mut d = KeyedBrwDrivers::new(6);
        let counts: Vec<f64> = (0..10_000).map(|_| lower_offspring(0.0, 1.0, 0.0, &mut d).len() as f64).collect();
        let (m, se) = mean_and_se(&counts);
        let expected = 2.0 - (-1f64).exp();
        assert!((expected - 1.63212).abs() < 1e-5);
        assert!((m - expected).abs() < 3.0 * se, "{m} ± {se}");
    }

    #[test]
    fn lower_rarely_branches_for_tiny_delta() {
        let mut d = KeyedBrwDrivers::new(7);
        let branched = (0..10_000).filter(|_| lower_offspring(0.0, 1e-6, 0.0, &mut d).len() == 2).count();
        assert!(branched <= 2);
    }

    #[test]
    fn population_sizes() {
        let mut d = KeyedBrwDrivers::new(8);
        let t = simulate_nbrw_lower(9, 0.5, 0.0, 30, &mut d).unwrap();
        assert_eq!(t.params.n_keep(), 4);
        assert_eq!(t.final_positions.len(), 4);
        assert_eq!(t.times.len(), 31);
        assert!((t.times[30] - 15.0).abs() < 1e-12);
        let t = simulate_nbrw_upper(7, 0.0, 30, &mut d).unwrap();
        assert_eq!(t.final_positions.len(), 7);
        assert!(t.mins.iter().zip(&t.maxs).all(|(a, b)| a <= b));
    }

    #[test]
    fn explosion_is_diagnosed() {
        /// Branches immediately, forever.
        struct Eager;
        impl BrwDrivers for Eager {
            fn branch_time(&mut self) -> f64 {
                1e-3
            }
            fn gaussian(&mut self) -> f64 {
                0.0
            }
        }
        let err = simulate_nbrw_upper(2, 0.0, 3, &mut Eager).unwrap_err();
        assert!(matches!(err, BrwError::PopulationExplosion { generation: 1, cap: 128, .. }));
    }

    #[test]
    fn drift_shifts_speed() {
        let a = simulate_nbrw_upper(10, 0.0, 200, &mut KeyedBrwDrivers::new(3)).unwrap();
        let b = simulate_nbrw_upper(10, 0.5, 200, &mut KeyedBrwDrivers::new(3)).unwrap();
        let sa = estimate_brw_speed(&a, 0.1).unwrap().speed_hat;
        let sb = estimate_brw_speed(&b, 0.1).unwrap().speed_hat;
        assert!((sb - sa - 0.5).abs() < 1e-9);
    }

    #[test]
    fn invalid_inputs() {
        let mut d = KeyedBrwDrivers::new(1);
        assert!(simulate_nbrw_lower(1, 0.5, 0.0, 10, &mut d).is_err());
        assert!(simulate_nbrw_lower(4, 0.0, 0.0, 10, &mut d).is_err());
        assert!(simulate_nbrw_upper(0, 0.0, 10, &mut d).is_err());
    }

    #[test]
    fn sweep_csv() {
        let p = BrwParams::lower(100, 1.0, 0.0, 10);
        let row = SpeedSweepRow::new(&p, BrwSpeed { speed_hat: 0.7, stderr: 0.01, replicas: 4 }).unwrap();
        assert!((row.speed_formula - 0.759_504_874_906_269).abs() < 1e-12);
        let mut buf = Vec::new();
        write_speed_sweep(&[row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("kind,N,delta,speed_hat,stderr,speed_formula"));
        assert!(lines.next().unwrap().starts_with("lower,100,"));
    }
}
