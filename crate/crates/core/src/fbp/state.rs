use serde::{Deserialize, Serialize};

use super::{FbpError, MASS_TOLERANCE};

/// Grid, time stepping and drift of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeParams {
    /// The grid covers `[-L, L]`.
    pub half_width: f64,
    pub h: f64,
    pub dt: f64,
    pub drift: f64,
    pub end_time: f64,
    /// Time between stored profiles.
    pub snapshot_every: f64,
    /// Time between recorded boundary positions.
    pub boundary_every: f64,
}

impl PdeParams {
    pub const DEFAULT_HALF_WIDTH: f64 = 4.0;

    /// `dt = h^2`, `L = 4`, a snapshot at the end and the boundary every 0.01.
    pub fn new(h: f64, drift: f64, end_time: f64) -> Self {
        Self {
            half_width: Self::DEFAULT_HALF_WIDTH,
            h,
            dt: h * h,
            drift,
            end_time,
            snapshot_every: end_time,
            boundary_every: 0.01,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_snapshot_every(mut self, every: f64) -> Self {
        self.snapshot_every = every;
        self
    }

    /// Number of grid intervals on each side of the origin.
    pub(crate) fn half_cells(&self) -> usize {
        (self.half_width / self.h).round() as usize
    }

    pub fn cells(&self) -> usize {
        2 * self.half_cells() + 1
    }

    pub fn steps(&self) -> usize {
        (self.end_time / self.dt).round() as usize
    }

    /// Largest `dt` keeping the update positive and the diffusion stable.
    pub fn dt_limit(&self) -> f64 {
        let h2 = self.h * self.h;
        let positivity = 1.0 / (1.0 / h2 + self.drift.abs() / self.h - 1.0);
        h2.min(if positivity > 0.0 { positivity } else { f64::INFINITY })
    }

    pub fn validate(&self) -> Result<(), FbpError> {
        let pos = |field: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(super::invalid(field, format!("must be positive and finite, got {v}")))
            }
        };
        pos("half_width", self.half_width)?;
        pos("h", self.h)?;
        pos("dt", self.dt)?;
        pos("end_time", self.end_time)?;
        pos("snapshot_every", self.snapshot_every)?;
        pos("boundary_every", self.boundary_every)?;
        if !self.drift.is_finite() {
            return Err(super::invalid("drift", "must be finite"));
        }
        let ratio = self.half_width / self.h;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio || ratio.round() < 2.0 {
            return Err(super::invalid("h", format!("L / h = {ratio} must be an integer of at least 2")));
        }
        let limit = self.dt_limit();
        if self.dt > limit * (1.0 + 1e-12) {
            return Err(FbpError::Unstable { dt: self.dt, limit });
        }
        let steps = self.end_time / self.dt;
        if (steps - steps.round()).abs() > 1e-6 * steps.max(1.0) {
            return Err(super::invalid("end_time", format!("T / dt = {steps} must be an integer")));
        }
        Ok(())
    }
}

/// Density on the uniform grid `x_k = (k - c) h`, `c = L / h`.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeState {
    pub(crate) h: f64,
    pub(crate) center: usize,
    pub(crate) u: Vec<f64>,
    pub(crate) radius: f64,
    pub(crate) time: f64,
    // Index range holding the nonzero values.
    pub(crate) lo: usize,
    pub(crate) hi: usize,
}

impl PdeState {
    /// Density proportional to `f(x_k)` normalised to unit mass.
    pub fn from_fn(params: &PdeParams, f: impl Fn(f64) -> f64) -> Result<Self, FbpError> {
        params.validate()?;
        let c = params.half_cells();
        let u: Vec<f64> = (0..params.cells()).map(|k| f((k as f64 - c as f64) * params.h)).collect();
        Self::from_values(params, u)
    }

    /// Normalise grid values to unit mass.
    pub fn from_values(params: &PdeParams, mut u: Vec<f64>) -> Result<Self, FbpError> {
        if u.len() != params.cells() {
            return Err(FbpError::InvalidState(format!("expected {} values, got {}", params.cells(), u.len())));
        }
        if let Some(index) = u.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(FbpError::NegativeDensity { index, value: u[index] });
        }
        let total: f64 = params.h * u.iter().sum::<f64>();
        if !(total > 0.0) {
            return Err(FbpError::InvalidState("initial density has zero mass".into()));
        }
        u.iter_mut().for_each(|v| *v /= total);
        let mut s = Self { h: params.h, center: params.half_cells(), u, radius: 0.0, time: 0.0, lo: 0, hi: 0 };
        s.refresh_support(0, s.u.len() - 1);
        s.check_mass()?;
        Ok(s)
    }

    /// Uniform density on `[a, b]`.
    pub fn uniform(params: &PdeParams, a: f64, b: f64) -> Result<Self, FbpError> {
        let tol = 1e-12 * params.h;
        Self::from_fn(params, |x| if x >= a - tol && x <= b + tol { 1.0 } else { 0.0 })
    }

    /// The `mu = 0` steady state `cos(sqrt(2) x) / sqrt(2)` on `|x| <= pi / (2 sqrt 2)`.
    pub fn steady_state(params: &PdeParams) -> Result<Self, FbpError> {
        Self::from_fn(params, steady_density)
    }

    pub(crate) fn refresh_support(&mut self, from: usize, to: usize) {
        let lo = (from..=to).find(|&k| self.u[k] > 0.0);
        match lo {
            Some(lo) => {
                let hi = (lo..=to).rev().find(|&k| self.u[k] > 0.0).unwrap_or(lo);
                self.lo = lo;
                self.hi = hi;
                let c = self.center;
                self.radius = self.h * (c.abs_diff(lo).max(c.abs_diff(hi))) as f64;
            }
            None => {
                self.lo = self.center;
                self.hi = self.center;
                self.radius = 0.0;
            }
        }
    }

    pub(crate) fn check_mass(&self) -> Result<(), FbpError> {
        let m = self.mass();
        if (m - 1.0).abs() > MASS_TOLERANCE {
            return Err(FbpError::MassDrift { mass: m });
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn x(&self, k: usize) -> f64 {
        (k as f64 - self.center as f64) * self.h
    }

    pub fn half_width(&self) -> f64 {
        self.center as f64 * self.h
    }

    pub fn mass(&self) -> f64 {
        self.h * self.u[self.lo..=self.hi].iter().sum::<f64>()
    }

    /// Centre of mass.
    pub fn mean(&self) -> f64 {
        self.h * (self.lo..=self.hi).map(|k| self.x(k) * self.u[k]).sum::<f64>()
    }

    /// `h * sum |u - v|` against a density evaluated at the grid points.
    pub fn l1_distance_to(&self, v: impl Fn(f64) -> f64) -> f64 {
        self.h * (0..self.u.len()).map(|k| (self.u[k] - v(self.x(k))).abs()).sum::<f64>()
    }

    /// The reflected profile `x -> -x`.
    pub fn mirrored(&self) -> Self {
        let mut u = self.u.clone();
        u.reverse();
        let n = u.len() - 1;
        Self { u, lo: n - self.hi, hi: n - self.lo, ..self.clone() }
    }

    /// Cell masses `h u_k`, each spread uniformly over `[x_k - h/2, x_k + h/2]`.
    pub(crate) fn cells(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (self.lo..=self.hi).map(move |k| (self.x(k) - 0.5 * self.h, self.h * self.u[k]))
    }

    /// Distribution function of the cell-uniform density.
    pub fn cdf(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (left, m) in self.cells() {
            if x <= left {
                break;
            }
            acc += m * ((x - left) / self.h).min(1.0);
        }
        acc.min(1.0)
    }

    /// Inverse of [`PdeState::cdf`] for `p` in `(0, 1)`.
    pub fn quantile(&self, p: f64) -> f64 {
        let mut acc = 0.0;
        let mut last = self.x(self.hi) + 0.5 * self.h;
        for (left, m) in self.cells() {
            if m > 0.0 && acc + m >= p {
                return left + self.h * ((p - acc) / m).clamp(0.0, 1.0);
            }
            acc += m;
            last = left + self.h;
        }
        last
    }
}

pub(crate) fn steady_density(x: f64) -> f64 {
    let r = std::f64::consts::PI / (2.0 * std::f64::consts::SQRT_2);
    if x.abs() <= r {
        (std::f64::consts::SQRT_2 * x).cos() / std::f64::consts::SQRT_2
    } else {
        0.0
    }
}

/// The exact steady state `u*`, for comparisons.
pub fn steady_state_density(x: f64) -> f64 {
    steady_density(x)
}
