use super::state::{PdeParams, PdeState};
use super::{FbpError, MASS_TOLERANCE};

/// Reusable stepping buffers for one parameter set.
#[derive(Debug, Clone)]
pub struct Stepper {
    params: PdeParams,
    scratch: Vec<f64>,
}

impl Stepper {
    pub fn new(params: &PdeParams) -> Result<Self, FbpError> {
        params.validate()?;
        Ok(Self { params: params.clone(), scratch: vec![0.0; params.cells()] })
    }

    fn check_grid(&self, state: &PdeState) -> Result<(), FbpError> {
        if state.u.len() != self.params.cells() || (state.h - self.params.h).abs() > 1e-15 * self.params.h {
            return Err(FbpError::InvalidState(format!(
                "state grid ({} cells, h = {}) does not match the parameters ({} cells, h = {})",
                state.u.len(),
                state.h,
                self.params.cells(),
                self.params.h
            )));
        }
        Ok(())
    }

    /// One explicit step followed by selection back to unit mass.
    pub fn step(&mut self, state: &mut PdeState) -> Result<(), FbpError> {
        let PdeParams { h, dt, drift: mu, .. } = self.params;
        let n = state.u.len();
        let a = state.lo.saturating_sub(1);
        let b = (state.hi + 1).min(n - 1);
        let u = &state.u;
        let inv_h2 = 1.0 / (h * h);
        let mut mass = 0.0;
        for k in a..=b {
            let uk = u[k];
            let up = if k > 0 { u[k - 1] } else { 0.0 };
            let dn = if k + 1 < n { u[k + 1] } else { 0.0 };
            let lap = 0.5 * ((dn + up) - 2.0 * uk) * inv_h2;
            let adv = if mu > 0.0 {
                -mu * (uk - up) / h
            } else if mu < 0.0 {
                -mu * (dn - uk) / h
            } else {
                0.0
            };
            let mut v = uk + dt * (lap + adv + uk);
            if v < 0.0 {
                if v < -1e-13 * (uk + up + dn) {
                    return Err(FbpError::NegativeDensity { index: k, value: v });
                }
                v = 0.0;
            }
            self.scratch[k] = v;
            mass += v;
        }
        state.u[a..=b].copy_from_slice(&self.scratch[a..=b]);
        let mass = h * mass;
        if mass < 1.0 - MASS_TOLERANCE {
            return Err(FbpError::MassDeficit { mass });
        }
        select(state, a, b, mass - 1.0);
        state.refresh_support(a, b);
        state.time += dt;
        state.check_mass()?;
        let limit = 0.9 * self.params.half_width;
        if state.radius >= limit {
            return Err(FbpError::RadiusLimit { radius: state.radius, limit, time: state.time });
        }
        Ok(())
    }
}

/// Remove `excess` mass from the cells furthest from the origin. The two
/// cells at equal distance are reduced together and proportionally.
fn select(state: &mut PdeState, a: usize, b: usize, mut excess: f64) {
    let c = state.center;
    let h = state.h;
    let mut d = c.abs_diff(a).max(c.abs_diff(b));
    while excess > 0.0 {
        let left = c.checked_sub(d).filter(|&i| i >= a);
        let right = Some(c + d).filter(|&j| j <= b && d > 0);
        let g = h * (left.map_or(0.0, |i| state.u[i]) + right.map_or(0.0, |j| state.u[j]));
        if g <= excess {
            for i in left.into_iter().chain(right) {
                state.u[i] = 0.0;
            }
            excess -= g;
        } else {
            let f = (g - excess) / g;
            for i in left.into_iter().chain(right) {
                state.u[i] *= f;
            }
            excess = 0.0;
        }
        if d == 0 {
            break;
        }
        d -= 1;
    }
}

/// A single step from `state`.
pub fn step_fbp(state: &PdeState, params: &PdeParams) -> Result<PdeState, FbpError> {
    let mut stepper = Stepper::new(params)?;
    stepper.check_grid(state)?;
    let mut next = state.clone();
    stepper.step(&mut next)?;
    Ok(next)
}

/// Stored profiles and the boundary path of a solve.
#[derive(Debug, Clone, PartialEq)]
pub struct FbpSolution {
    pub params: PdeParams,
    pub snapshots: Vec<PdeState>,
    /// `(t, R_t)`
    pub boundary: Vec<(f64, f64)>,
}

impl FbpSolution {
    pub fn final_state(&self) -> &PdeState {
        self.snapshots.last().expect("a solution always holds the initial state")
    }
}

fn stride(every: f64, dt: f64) -> usize {
    ((every / dt).round() as usize).max(1)
}

/// Step from `initial` to `params.end_time`.
pub fn solve_fbp(initial: &PdeState, params: &PdeParams) -> Result<FbpSolution, FbpError> {
    let mut stepper = Stepper::new(params)?;
    stepper.check_grid(initial)?;
    initial.check_mass()?;
    let steps = params.steps();
    let snap = stride(params.snapshot_every, params.dt);
    let bound = stride(params.boundary_every, params.dt);
    let mut state = initial.clone();
    let t0 = state.time;
    let mut snapshots = vec![state.clone()];
    let mut boundary = vec![(state.time, state.radius)];
    for i in 1..=steps {
        stepper.step(&mut state)?;
        state.time = t0 + i as f64 * params.dt;
        if i % snap == 0 || i == steps {
            snapshots.push(state.clone());
        }
        if i % bound == 0 || i == steps {
            boundary.push((state.time, state.radius));
        }
    }
    Ok(FbpSolution { params: params.clone(), snapshots, boundary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbp::steady_state_density;

    #[test]
    fn one_step_keeps_unit_mass() {
        let p = PdeParams::new(0.05, 0.0, 1.0);
        let mut u = vec![0.0; p.cells()];
        u[p.half_cells()] = 1.0;
        let s = PdeState::from_values(&p, u).unwrap();
        let next = step_fbp(&s, &p).unwrap();
        assert!((next.mass() - 1.0).abs() < 1e-14);
        assert!(next.values().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn steady_state_moves_little() {
        // Away from the boundary the update is dt times an O(h^2)
        // truncation error. At the edge the profile has a kink, so the
        // change is O(h) there.
        for h in [0.02, 0.01, 0.005] {
            let p = PdeParams::new(h, 0.0, 1.0);
            let s = PdeState::steady_state(&p).unwrap();
            let next = step_fbp(&s, &p).unwrap();
            let interior = (0..s.len())
                .filter(|&k| s.x(k).abs() < 1.0)
                .map(|k| (next.values()[k] - s.values()[k]).abs())
                .fold(0.0, f64::max);
            let sup = (0..s.len()).map(|k| (next.values()[k] - s.values()[k]).abs()).fold(0.0, f64::max);
            assert!(interior < h * h + p.dt, "h={h}: {interior}");
            assert!(sup < h, "h={h}: {sup}");
        }
    }

    #[test]
    fn drift_moves_the_centre() {
        let p = PdeParams::new(0.02, 0.3, 100.0 * 0.9 * 4e-4).with_dt(0.9 * 4e-4);
        let s = PdeState::uniform(&p, -0.5, 0.5).unwrap();
        assert!(s.mean().abs() < 1e-15);
        let sol = solve_fbp(&s, &p).unwrap();
        assert_eq!(p.steps(), 100);
        assert!(sol.final_state().mean() > 0.0);
    }

    #[test]
    fn symmetric_data_stays_symmetric() {
        let p = PdeParams::new(0.02, 0.0, 2.0).with_snapshot_every(0.25);
        let s = PdeState::uniform(&p, -0.5, 0.5).unwrap();
        let sol = solve_fbp(&s, &p).unwrap();
        assert_eq!(sol.snapshots.len(), 9);
        for snap in &sol.snapshots {
            let u = snap.values();
            let n = u.len() - 1;
            for k in 0..=n {
                assert!((u[k] - u[n - k]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn reflection_invariance() {
        let dt = 0.9 * 4e-4;
        let p = PdeParams::new(0.02, 0.4, 500.0 * dt).with_dt(dt);
        let q = PdeParams { drift: -0.4, ..p.clone() };
        let s = PdeState::from_fn(&p, |x| if (-0.2..=0.8).contains(&x) { 1.0 + x } else { 0.0 }).unwrap();
        let a = solve_fbp(&s, &p).unwrap();
        let b = solve_fbp(&s.mirrored(), &q).unwrap();
        let (ua, ub) = (a.final_state().values(), b.final_state().values());
        let n = ua.len() - 1;
        for k in 0..=n {
            assert!((ua[k] - ub[n - k]).abs() < 1e-12, "{k}: {} vs {}", ua[k], ub[n - k]);
        }
    }

    #[test]
    fn mass_and_positivity_every_step() {
        let p = PdeParams::new(0.02, 0.0, 1.0);
        let mut s = PdeState::uniform(&p, -0.3, 0.1).unwrap();
        let mut stepper = Stepper::new(&p).unwrap();
        let mut last_radius = s.radius();
        for _ in 0..p.steps() {
            stepper.step(&mut s).unwrap();
            assert!((s.mass() - 1.0).abs() < 1e-10);
            assert!(s.values().iter().all(|v| *v >= 0.0));
            assert!(s.radius().is_finite());
            // The support can only grow by one cell per step.
            assert!(s.radius() <= last_radius + p.h + 1e-12);
            last_radius = s.radius();
        }
    }

    #[test]
    fn converges_to_steady_state() {
        let p = PdeParams::new(0.02, 0.0, 20.0);
        let s = PdeState::uniform(&p, -0.5, 0.5).unwrap();
        let sol = solve_fbp(&s, &p).unwrap();
        let err = sol.final_state().l1_distance_to(steady_state_density);
        assert!(err < 0.02, "{err}");
        assert!(sol.boundary.len() > 1000);
    }

    #[test]
    fn radius_guard() {
        let p = PdeParams { half_width: 0.2, ..PdeParams::new(0.02, 0.0, 1.0) };
        let s = PdeState::uniform(&p, -0.05, 0.05).unwrap();
        assert!(matches!(solve_fbp(&s, &p), Err(FbpError::RadiusLimit { .. })));
    }

    #[test]
    fn grid_mismatch() {
        let p = PdeParams::new(0.02, 0.0, 1.0);
        let q = PdeParams::new(0.04, 0.0, 1.0);
        let s = PdeState::uniform(&p, -0.5, 0.5).unwrap();
        assert!(matches!(step_fbp(&s, &q), Err(FbpError::InvalidState(_))));
    }
}
