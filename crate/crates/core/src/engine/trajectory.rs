use serde::{Deserialize, Serialize};

use super::{Configuration, EngineError, ProcessKind, SimParams};

/// Which particle a branching event removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KilledSide {
    Leftmost,
    LargestMagnitudeLeft,
    LargestMagnitudeRight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub time: f64,
    /// Rank (1-based) of the duplicated particle.
    pub branch_index: usize,
    pub killed_side: KilledSide,
    pub pre_config: Configuration,
    pub post_config: Configuration,
}

/// Configurations sampled on the uniform sub-step grid, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n: usize,
    sub_step: f64,
    times: Vec<f64>,
    positions: Vec<f64>,
}

impl Grid {
    pub fn new(n: usize, sub_step: f64) -> Self {
        Self { n, sub_step, times: Vec::new(), positions: Vec::new() }
    }

    pub fn push(&mut self, time: f64, row: &[f64]) {
        debug_assert_eq!(row.len(), self.n);
        self.times.push(time);
        self.positions.extend_from_slice(row);
    }

    pub fn n_particles(&self) -> usize {
        self.n
    }

    pub fn sub_step(&self) -> f64 {
        self.sub_step
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.times[k]
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.positions[k * self.n..(k + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.times.iter().copied().zip(self.positions.chunks_exact(self.n))
    }

    /// Index of the sample at `time`, if `time` is a grid point.
    pub fn index_of(&self, time: f64) -> Option<usize> {
        let k = (time / self.sub_step).round();
        if k < 0.0 {
            return None;
        }
        let k = k as usize;
        (k < self.len() && (self.times[k] - time).abs() <= 1e-9 * self.sub_step.max(time)).then_some(k)
    }

    pub fn leftmost(&self) -> impl Iterator<Item = f64> + '_ {
        self.positions.chunks_exact(self.n).map(|r| r[0])
    }

    pub fn rightmost(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.n;
        self.positions.chunks_exact(n).map(move |r| r[n - 1])
    }
}

/// A simulated run: event records and optionally the sub-sampled grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    kind: ProcessKind,
    params: SimParams,
    initial: Configuration,
    events: Vec<EventRecord>,
    event_count: usize,
    grid: Option<Grid>,
    final_config: Configuration,
}

impl Trajectory {
    /// Build a trajectory from parts; used by the simulator and by fixtures.
    pub fn assemble(
        kind: ProcessKind,
        params: SimParams,
        initial: Configuration,
        events: Vec<EventRecord>,
        event_count: usize,
        grid: Option<Grid>,
        final_config: Configuration,
    ) -> Self {
        Self { kind, params, initial, events, event_count, grid, final_config }
    }

    /// A trajectory with no events whose grid holds the given rows.
    pub fn from_grid_rows(kind: ProcessKind, params: SimParams, rows: &[Vec<f64>]) -> Result<Self, EngineError> {
        let first = rows.first().ok_or(EngineError::EmptyConfiguration)?;
        let n = first.len();
        let mut grid = Grid::new(n, params.sub_step);
        let mut last = None;
        for (k, r) in rows.iter().enumerate() {
            let c = Configuration::new(r.clone())?;
            if c.len() != n {
                return Err(EngineError::SizeMismatch { expected: n, got: c.len() });
            }
            grid.push(k as f64 * params.sub_step, c.as_slice());
            last = Some(c);
        }
        let initial = Configuration::new(first.clone())?;
        let params = SimParams { n_particles: n, horizon: (rows.len() - 1).max(1) as f64 * params.sub_step, ..params };
        Ok(Self::assemble(kind, params, initial, Vec::new(), 0, Some(grid), last.expect("nonempty")))
    }

    pub fn kind(&self) -> ProcessKind {
        self.kind
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn n_particles(&self) -> usize {
        self.initial.len()
    }

    pub fn horizon(&self) -> f64 {
        self.params.horizon
    }

    pub fn initial(&self) -> &Configuration {
        &self.initial
    }

    /// Recorded events (empty when event recording was off).
    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    /// Number of events that happened, recorded or not.
    pub fn event_count(&self) -> usize {
        self.event_count
    }

    pub fn grid(&self) -> Option<&Grid> {
        self.grid.as_ref()
    }

    pub fn final_config(&self) -> &Configuration {
        &self.final_config
    }

    /// Time-ordered observation points: grid rows interleaved with the pre-
    /// and post-configurations of recorded events. Paths are continuous
    /// between consecutive points except across a (pre, post) pair.
    pub fn observation_points(&self) -> Vec<ObservationPoint<'_>> {
        let mut out = Vec::new();
        let grid_rows: Vec<(f64, &[f64])> = match &self.grid {
            Some(g) => g.rows().collect(),
            None => vec![(0.0, self.initial.as_slice())],
        };
        let mut gi = grid_rows.into_iter().peekable();
        for e in &self.events {
            while let Some(&(t, row)) = gi.peek() {
                if t <= e.time {
                    out.push(ObservationPoint { time: t, positions: row, after_jump: false });
                    gi.next();
                } else {
                    break;
                }
            }
            out.push(ObservationPoint { time: e.time, positions: e.pre_config.as_slice(), after_jump: false });
            out.push(ObservationPoint { time: e.time, positions: e.post_config.as_slice(), after_jump: true });
        }
        out.extend(gi.map(|(t, row)| ObservationPoint { time: t, positions: row, after_jump: false }));
        if self.grid.is_none() || out.last().map(|p| p.time) < Some(self.params.horizon) {
            out.push(ObservationPoint {
                time: self.params.horizon,
                positions: self.final_config.as_slice(),
                after_jump: false,
            });
        }
        out
    }

    /// `(time, leftmost, rightmost)` at every observation point.
    pub fn extremes(&self) -> Vec<(f64, f64, f64)> {
        match &self.grid {
            Some(g) => g.rows().map(|(t, r)| (t, r[0], r[r.len() - 1])).collect(),
            None => self
                .observation_points()
                .into_iter()
                .map(|p| (p.time, p.positions[0], p.positions[p.positions.len() - 1]))
                .collect(),
        }
    }
}

/// One entry of [`Trajectory::observation_points`].
#[derive(Debug, Clone, Copy)]
pub struct ObservationPoint<'a> {
    pub time: f64,
    pub positions: &'a [f64],
    /// True for the post-event configuration: the path jumped into it.
    pub after_jump: bool,
}
