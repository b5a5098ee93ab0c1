use crate::couplings::DriverBundle;

use super::configuration::{k_in_place, k_kills_left, l_in_place};
use super::trajectory::{EventRecord, Grid, KilledSide, Trajectory};
use super::{Configuration, EngineError, ProcessKind, SimParams};

/// What ends a segment of the time partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum SegmentEnd {
    Sample,
    Event,
    Horizon,
}

/// Merges the Poisson event times with the sub-sampling grid.
///
/// Every process driven by the same bundle and parameters walks the exact
/// same partition, which is what lets coupled processes share increments.
#[derive(Debug, Clone)]
pub(crate) struct EventClock {
    horizon: f64,
    sub_step: f64,
    grid: bool,
    time: f64,
    next_event: f64,
    next_k: u64,
    last_k: u64,
    finished: bool,
}

impl EventClock {
    pub(crate) fn new(params: &SimParams, drivers: &mut DriverBundle) -> Self {
        let last_k = (params.horizon / params.sub_step + 1e-9).floor() as u64;
        Self {
            horizon: params.horizon,
            sub_step: params.sub_step,
            grid: params.record_grid,
            time: 0.0,
            next_event: drivers.next_event_gap(),
            next_k: 1,
            last_k,
            finished: false,
        }
    }

    fn grid_time(&self, k: u64) -> f64 {
        if k == self.last_k && (k as f64 * self.sub_step - self.horizon).abs() < 1e-9 * self.horizon {
            self.horizon
        } else {
            k as f64 * self.sub_step
        }
    }

    /// Next segment `(start, end, kind)`, or `None` once the horizon is reached.
    pub(crate) fn next_segment(&mut self, drivers: &mut DriverBundle) -> Option<(f64, f64, SegmentEnd)> {
        if self.finished {
            return None;
        }
        let start = self.time;
        let grid_t = if self.grid && self.next_k <= self.last_k { self.grid_time(self.next_k) } else { f64::INFINITY };
        let (end, kind) = if self.next_event <= self.horizon && self.next_event < grid_t {
            let t = self.next_event;
            self.next_event += drivers.next_event_gap();
            (t, SegmentEnd::Event)
        } else if grid_t <= self.horizon {
            self.next_k += 1;
            if grid_t >= self.horizon {
                self.finished = true;
            }
            (grid_t, SegmentEnd::Sample)
        } else {
            self.finished = true;
            (self.horizon, SegmentEnd::Horizon)
        };
        self.time = end;
        Some((start, end, kind))
    }
}

/// Result of one [`Simulator::step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    /// A sub-sampling grid time.
    Sample { time: f64 },
    /// A branching event; `rank` is the duplicated rank.
    Event { time: f64, rank: usize, killed: KilledSide },
    /// The horizon, when it is not itself a grid time.
    Horizon { time: f64 },
}

impl StepOutcome {
    pub fn time(&self) -> f64 {
        match *self {
            StepOutcome::Sample { time } | StepOutcome::Event { time, .. } | StepOutcome::Horizon { time } => time,
        }
    }
}

/// Incremental simulator. Walks the merged event/grid partition one segment
/// at a time so that callers can stop early (hitting times) or observe a
/// run without storing it.
#[derive(Debug, Clone)]
pub struct Simulator {
    kind: ProcessKind,
    drift: f64,
    clock: EventClock,
    drivers: DriverBundle,
    // Indexed by rank at the start of the current interval.
    positions: Vec<f64>,
    sorted: Vec<f64>,
    pre_event: Vec<f64>,
    increments: Vec<f64>,
    time: f64,
    events: usize,
}

impl Simulator {
    pub fn new(
        kind: ProcessKind,
        params: &SimParams,
        initial: &Configuration,
        mut drivers: DriverBundle,
    ) -> Result<Self, EngineError> {
        params.validate()?;
        check_sizes(params, initial, &drivers)?;
        let clock = EventClock::new(params, &mut drivers);
        let n = params.n_particles;
        Ok(Self {
            kind,
            drift: params.drift,
            clock,
            drivers,
            positions: initial.as_slice().to_vec(),
            sorted: initial.as_slice().to_vec(),
            pre_event: initial.as_slice().to_vec(),
            increments: vec![0.0; n],
            time: 0.0,
            events: 0,
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn event_count(&self) -> usize {
        self.events
    }

    /// Sorted positions after the last step.
    pub fn current(&self) -> &[f64] {
        &self.sorted
    }

    /// Sorted positions just before the last event.
    pub fn pre_event(&self) -> &[f64] {
        &self.pre_event
    }

    pub fn step(&mut self) -> Option<StepOutcome> {
        let (start, end, kind) = self.clock.next_segment(&mut self.drivers)?;
        let dt = end - start;
        self.drivers.fill_increments(&mut self.increments);
        let sd = dt.sqrt();
        let shift = self.drift * dt;
        for (x, g) in self.positions.iter_mut().zip(&self.increments) {
            *x += shift + sd * g;
        }
        self.time = end;
        let outcome = match kind {
            SegmentEnd::Sample => StepOutcome::Sample { time: end },
            SegmentEnd::Horizon => StepOutcome::Horizon { time: end },
            SegmentEnd::Event => {
                self.positions.sort_by(f64::total_cmp);
                self.pre_event.copy_from_slice(&self.positions);
                let rank = self.drivers.next_rank();
                let killed = match self.kind {
                    ProcessKind::Nbbm => {
                        l_in_place(&mut self.positions, rank);
                        KilledSide::Leftmost
                    }
                    ProcessKind::Bees => {
                        let side = if k_kills_left(&self.positions) {
                            KilledSide::LargestMagnitudeLeft
                        } else {
                            KilledSide::LargestMagnitudeRight
                        };
                        k_in_place(&mut self.positions, rank);
                        side
                    }
                };
                self.events += 1;
                StepOutcome::Event { time: end, rank, killed }
            }
        };
        self.sorted.copy_from_slice(&self.positions);
        if kind != SegmentEnd::Event {
            self.sorted.sort_by(f64::total_cmp);
        }
        Some(outcome)
    }
}

fn check_sizes(params: &SimParams, initial: &Configuration, drivers: &DriverBundle) -> Result<(), EngineError> {
    if initial.len() != params.n_particles {
        return Err(EngineError::SizeMismatch { expected: params.n_particles, got: initial.len() });
    }
    if drivers.n_particles() != params.n_particles {
        return Err(EngineError::SizeMismatch { expected: params.n_particles, got: drivers.n_particles() });
    }
    Ok(())
}

/// Move every particle by `drift * dt + sqrt(dt) * g_j`, where draw `j`
/// belongs to the particle of rank `j`, and re-rank.
pub fn advance_interval(
    config: &Configuration,
    dt: f64,
    drift: f64,
    gaussians: &[f64],
) -> Result<Configuration, EngineError> {
    if dt < 0.0 || dt.is_nan() {
        return Err(EngineError::NegativeDuration(dt));
    }
    if gaussians.len() != config.len() {
        return Err(EngineError::SizeMismatch { expected: config.len(), got: gaussians.len() });
    }
    let sd = dt.sqrt();
    let moved = config.as_slice().iter().zip(gaussians).map(|(x, g)| x + drift * dt + sd * g).collect();
    Configuration::new(moved)
}

/// Accumulates a [`Trajectory`] from the steps of a [`Simulator`].
pub(crate) struct Recorder {
    kind: ProcessKind,
    params: SimParams,
    initial: Configuration,
    grid: Option<Grid>,
    events: Vec<EventRecord>,
}

impl Recorder {
    pub(crate) fn new(kind: ProcessKind, params: &SimParams, initial: &Configuration) -> Self {
        let grid = params.record_grid.then(|| {
            let mut g = Grid::new(params.n_particles, params.sub_step);
            g.push(0.0, initial.as_slice());
            g
        });
        Self { kind, params: params.clone(), initial: initial.clone(), grid, events: Vec::new() }
    }

    /// Record the state after a step. `pre` and `post` are sorted.
    pub(crate) fn observe(&mut self, outcome: StepOutcome, pre: &[f64], post: &[f64]) {
        match outcome {
            StepOutcome::Sample { time } => {
                if let Some(g) = self.grid.as_mut() {
                    g.push(time, post);
                }
            }
            StepOutcome::Event { time, rank, killed } => {
                if self.params.record_events {
                    self.events.push(EventRecord {
                        time,
                        branch_index: rank,
                        killed_side: killed,
                        pre_config: Configuration::from_sorted_unchecked(pre.to_vec()),
                        post_config: Configuration::from_sorted_unchecked(post.to_vec()),
                    });
                }
            }
            StepOutcome::Horizon { .. } => {}
        }
    }

    pub(crate) fn finish(self, event_count: usize, final_positions: &[f64]) -> Trajectory {
        Trajectory::assemble(
            self.kind,
            self.params,
            self.initial,
            self.events,
            event_count,
            self.grid,
            Configuration::from_sorted_unchecked(final_positions.to_vec()),
        )
    }
}

/// Run one trajectory to the horizon.
pub fn simulate(
    kind: ProcessKind,
    params: &SimParams,
    initial: &Configuration,
    drivers: DriverBundle,
) -> Result<Trajectory, EngineError> {
    let mut sim = Simulator::new(kind, params, initial, drivers)?;
    let mut rec = Recorder::new(kind, params, initial);
    while let Some(outcome) = sim.step() {
        rec.observe(outcome, sim.pre_event(), sim.current());
    }
    Ok(rec.finish(sim.event_count(), sim.current()))
}

/// [`simulate`] with the driver bundle keyed by `params.seed`.
pub fn simulate_seeded(
    kind: ProcessKind,
    params: &SimParams,
    initial: &Configuration,
) -> Result<Trajectory, EngineError> {
    let drivers = DriverBundle::new(params.seed, params.n_particles)
        .map_err(|_| EngineError::InvalidParameter { field: "n_particles", reason: "must be at least 1".into() })?;
    simulate(kind, params, initial, drivers)
}
