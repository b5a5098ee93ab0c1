use crate::engine::Trajectory;
use crate::engine::{
    k_in_place, k_kills_left, left_of_sorted, Configuration, EventClock, KilledSide, ProcessKind, Recorder, SegmentEnd,
    SimParams, Simulator, StepOutcome,
};
use crate::rng::{KeyedStream, StreamRole};

use super::{CouplingError, DriverBundle, OrderPair, Violation};

/// Output of [`coupled_simulate_abs`].
#[derive(Debug, Clone, PartialEq)]
pub struct AbsCoupledRun {
    /// The bees process, built with sign-flipped drivers.
    pub bees: Trajectory,
    /// The N-BBM started from `nu_tilde`, built with the plain drivers.
    pub bbm: Trajectory,
    /// Failures of `bbm ≼ -|bees|` observed strictly before the stopping time.
    pub violations: Vec<Violation>,
    /// First time a bees particle reaches the origin, if before the horizon.
    pub stopping_time: Option<f64>,
    /// Sign of every particle at the start of every inter-event interval.
    pub signs: SignMatrix,
}

/// `S[i][j]`: sign of the particle driven by increment stream `j` during
/// interval `i`. Stream `j` drives the particle with the j-th smallest `-|x|`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SignMatrix {
    rows: Vec<Vec<i8>>,
}

impl SignMatrix {
    pub fn intervals(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[i8] {
        &self.rows[i]
    }
}

fn sign(x: f64) -> i8 {
    if x >= 0.0 {
        1
    } else {
        -1
    }
}

/// Bees whose particles are ordered by `-|x|` at the start of each interval;
/// the j-th of them moves by `-S_j dB^j + mu dt`.
struct FlippedBees {
    drift: f64,
    clock: EventClock,
    drivers: DriverBundle,
    positions: Vec<f64>,
    previous: Vec<f64>,
    signs: Vec<f64>,
    sorted: Vec<f64>,
    pre_event: Vec<f64>,
    increments: Vec<f64>,
    bridge: KeyedStream,
    hit: Option<f64>,
    events: usize,
    sign_rows: Vec<Vec<i8>>,
}

impl FlippedBees {
    fn new(params: &SimParams, initial: &Configuration, mut drivers: DriverBundle) -> Self {
        let clock = EventClock::new(params, &mut drivers);
        let n = initial.len();
        let mut s = Self {
            drift: params.drift,
            clock,
            drivers,
            positions: initial.as_slice().to_vec(),
            previous: vec![0.0; n],
            signs: vec![1.0; n],
            sorted: initial.as_slice().to_vec(),
            pre_event: initial.as_slice().to_vec(),
            increments: vec![0.0; n],
            bridge: KeyedStream::new(params.seed, StreamRole::Bridge),
            hit: initial.as_slice().contains(&0.0).then_some(0.0),
            events: 0,
            sign_rows: Vec::new(),
        };
        s.relabel();
        s
    }

    /// Order by `-|x|` ascending and fix the interval's signs.
    fn relabel(&mut self) {
        self.positions.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
        for (s, &x) in self.signs.iter_mut().zip(&self.positions) {
            *s = f64::from(sign(x));
        }
        self.sign_rows.push(self.positions.iter().map(|&x| sign(x)).collect());
    }

    fn step(&mut self) -> Option<StepOutcome> {
        let (start, end, kind) = self.clock.next_segment(&mut self.drivers)?;
        let dt = end - start;
        self.drivers.fill_increments(&mut self.increments);
        self.previous.copy_from_slice(&self.positions);
        let sd = dt.sqrt();
        let shift = self.drift * dt;
        for ((x, g), s) in self.positions.iter_mut().zip(&self.increments).zip(&self.signs) {
            *x += shift - s * (sd * g);
        }
        if self.hit.is_none() {
            self.hit = crate::engine::segment_hit(start, end, &self.previous, &self.positions, &mut self.bridge);
        }
        let outcome = match kind {
            SegmentEnd::Sample => StepOutcome::Sample { time: end },
            SegmentEnd::Horizon => StepOutcome::Horizon { time: end },
            SegmentEnd::Event => {
                self.positions.sort_by(f64::total_cmp);
                self.pre_event.copy_from_slice(&self.positions);
                let rank = self.drivers.next_rank();
                let transformed = transformed_rank(&self.positions, rank);
                let killed = if k_kills_left(&self.positions) {
                    KilledSide::LargestMagnitudeLeft
                } else {
                    KilledSide::LargestMagnitudeRight
                };
                k_in_place(&mut self.positions, transformed);
                self.events += 1;
                StepOutcome::Event { time: end, rank: transformed, killed }
            }
        };
        self.sorted.copy_from_slice(&self.positions);
        self.sorted.sort_by(f64::total_cmp);
        if kind == SegmentEnd::Event {
            self.relabel();
        }
        Some(outcome)
    }
}

/// The rank in `v` (sorted) of the element whose `-|.|` is the `rank`-th
/// smallest entry of `-|v|`.
fn transformed_rank(v: &[f64], rank: usize) -> usize {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()));
    order[rank - 1] + 1
}

/// The coupling of bees started from `nu` with an N-BBM started from
/// `nu_tilde ≼ -|nu|` under which `N-BBM ≼ -|bees|` up to the first time a
/// bees particle reaches the origin. Requires `mu <= 0`; for positive drift
/// reflect space first.
pub fn coupled_simulate_abs(
    nu: &Configuration,
    nu_tilde: &Configuration,
    params: &SimParams,
    drivers: DriverBundle,
) -> Result<AbsCoupledRun, CouplingError> {
    if params.drift > 0.0 {
        return Err(CouplingError::PositiveDrift(params.drift));
    }
    if nu.len() != nu_tilde.len() {
        return Err(CouplingError::SizeMismatch { left: nu.len(), right: nu_tilde.len() });
    }
    if !left_of_sorted(nu_tilde.as_slice(), nu.negated_abs().as_slice()) {
        return Err(CouplingError::InitialOrder);
    }
    let mut bbm = Simulator::new(ProcessKind::Nbbm, params, nu_tilde, drivers.clone())?;
    let mut bees = FlippedBees::new(params, nu, drivers);
    let mut rec_bbm = Recorder::new(ProcessKind::Nbbm, params, nu_tilde);
    let mut rec_bees = Recorder::new(ProcessKind::Bees, params, nu);
    let mut violations = Vec::new();

    let mut neg_abs = nu.negated_abs().into_vec();
    if bees.hit.is_none() && !left_of_sorted(nu_tilde.as_slice(), &neg_abs) {
        violations.push(Violation { time: 0.0, pair: OrderPair::BbmNegAbsBees });
    }
    while let Some(ob) = bees.step() {
        let oz = bbm.step().expect("coupled clocks advance together");
        debug_assert_eq!(ob.time(), oz.time());
        if bees.hit.is_none() {
            if matches!(ob, StepOutcome::Event { .. }) {
                fill_neg_abs(&bees.pre_event, &mut neg_abs);
                if !left_of_sorted(bbm.pre_event(), &neg_abs) {
                    violations.push(Violation { time: ob.time(), pair: OrderPair::BbmNegAbsBees });
                }
            }
            fill_neg_abs(&bees.sorted, &mut neg_abs);
            if !left_of_sorted(bbm.current(), &neg_abs) {
                violations.push(Violation { time: ob.time(), pair: OrderPair::BbmNegAbsBees });
            }
        }
        rec_bees.observe(ob, &bees.pre_event, &bees.sorted);
        rec_bbm.observe(oz, bbm.pre_event(), bbm.current());
    }
    Ok(AbsCoupledRun {
        bees: rec_bees.finish(bees.events, &bees.sorted),
        bbm: rec_bbm.finish(bbm.event_count(), bbm.current()),
        violations,
        stopping_time: bees.hit,
        signs: SignMatrix { rows: bees.sign_rows },
    })
}

fn fill_neg_abs(sorted: &[f64], out: &mut [f64]) {
    for (o, x) in out.iter_mut().zip(sorted) {
        *o = -x.abs();
    }
    out.sort_by(f64::total_cmp);
}
