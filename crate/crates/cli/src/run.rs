//! Command execution. Each command validates nothing itself (the config layer
//! has done that), runs its replicas through the shared runner and writes its
//! reports into the output directory.

use std::time::Instant;

use beeslab::brw_bounds::{
    estimate_brw_speed_pooled, simulate_nbrw_lower, simulate_nbrw_upper, write_speed_sweep, BrwKind, BrwParams,
    KeyedBrwDrivers, SpeedSweepRow,
};
use beeslab::couplings::{coupled_simulate_abs, coupled_simulate_monotone, write_violations, DriverBundle};
use beeslab::engine::csv::{format_f64, trajectory_to_string};
use beeslab::engine::{Configuration, ProcessKind};
use beeslab::experiments::{
    centred_diffusivity, estimate_critical_drift, map_replicas, CriticalDrift, ExperimentError, ReplicaSpec,
};
use beeslab::fbp::{distance_empirical_pde, solve_fbp, write_boundary, write_snapshots, FbpError, PdeState};
use beeslab::replicas::ReplicaRunner;
use beeslab::rng::derive_seed;
use beeslab::statistics::{
    classify_regime, estimate_velocity, half_normal_cdf, ks_statistic, leftmost_at, mean, occupation_fraction_negative,
    pool_velocities, rightmost_at, velocity_formula, DiffusionConstants, KsResult, RegimeReport, VelocityEstimate,
};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::config::{
    BrwSweepParams, CoupleParams, CouplingMode, CriticalParams, ExperimentConfig, FbpInitial, FbpParams, Params,
    RegimesParams, SimulateParams, SweepParams, VelocityParams,
};
use crate::output::{CellEntry, OutputDir, ReplicaEntry, RunManifest, RunStatus, MANIFEST_FILE};

/// Seed tags for auxiliary estimation stages, so they never reuse the
/// streams of the main replicas.
const TAG_CRITICAL: u64 = 0xC0;
const TAG_DIFFUSIVITY: u64 = 0xD1;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error("{0}")]
    Runtime(String),
}

impl From<ExperimentError> for RunError {
    fn from(e: ExperimentError) -> Self {
        RunError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Runtime(format!("I/O error: {e}"))
    }
}

fn fbp_error(e: FbpError) -> RunError {
    match e {
        FbpError::MassDeficit { .. } | FbpError::MassDrift { .. } | FbpError::NegativeDensity { .. } => {
            RunError::Invariant(e.to_string())
        }
        other => RunError::Runtime(other.to_string()),
    }
}

/// What a command reports back besides the files it wrote.
#[derive(Debug, Default)]
struct Outcome {
    violations: Vec<String>,
    cells: Option<Vec<CellEntry>>,
}

impl Outcome {
    fn status(&self) -> RunStatus {
        if !self.violations.is_empty() {
            RunStatus::InvariantViolation
        } else if self.cells.iter().flatten().any(|c| c.status != RunStatus::Ok) {
            RunStatus::Error
        } else {
            RunStatus::Ok
        }
    }
}

/// Run a validated experiment and write its manifest. The manifest is written
/// exactly once, also when the run fails after the output directory exists.
pub fn run_experiment(config: &ExperimentConfig, out: &OutputDir, runner: &ReplicaRunner) -> RunManifest {
    let start = Instant::now();
    let result = dispatch(config, out, runner);
    let (status, violations, error, cells) = match result {
        Ok(o) => (o.status(), o.violations.clone(), None, o.cells),
        Err(RunError::Invariant(m)) => (RunStatus::InvariantViolation, vec![m], None, None),
        Err(e) => (RunStatus::Error, Vec::new(), Some(e.to_string()), None),
    };
    let mut manifest = RunManifest {
        artifact: "beeslab",
        version: env!("CARGO_PKG_VERSION"),
        command: config.command.name(),
        config: config.clone(),
        replicas: config.seeds.iter().enumerate().map(|(index, &seed)| ReplicaEntry { index, seed }).collect(),
        cells,
        status,
        violations,
        error,
        jobs: runner.jobs(),
        wall_clock_seconds: 0.0,
        outputs: Vec::new(),
    };
    manifest.outputs = out.files();
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    if let Err(e) = out.write_json(MANIFEST_FILE, &manifest) {
        manifest.status = RunStatus::Error;
        manifest.error = Some(format!("could not write the manifest: {e}"));
    }
    manifest
}

fn dispatch(config: &ExperimentConfig, out: &OutputDir, runner: &ReplicaRunner) -> Result<Outcome, RunError> {
    let seeds = &config.seeds;
    match &config.params {
        Params::Simulate(p) => simulate(p, seeds, out, runner),
        Params::Couple(p) => couple(p, seeds, out, runner),
        Params::Velocity(p) => velocity(p, seeds, out, runner),
        Params::Regimes(p) => regimes(p, seeds, out, runner),
        Params::Critical(p) => critical(p, seeds, out, runner),
        Params::Brw(p) => brw(p, seeds, out, runner),
        Params::Fbp(p) => fbp(p, seeds, out, runner),
        Params::Sweep(p) => sweep(p, seeds, out, runner),
    }
}

fn pooled(each: &[VelocityEstimate]) -> VelocityEstimate {
    match each {
        [one] => *one,
        _ => pool_velocities(each),
    }
}

fn config_of(v: &[f64]) -> Result<Configuration, RunError> {
    Configuration::new(v.to_vec()).map_err(|e| RunError::Runtime(e.to_string()))
}

fn derived(seeds: &[u64], tag: u64) -> Vec<u64> {
    seeds.iter().map(|&s| derive_seed(s, tag)).collect()
}

#[derive(Serialize)]
struct ReplicaVelocity {
    seed: u64,
    events: usize,
    velocity: VelocityEstimate,
}

fn simulate(p: &SimulateParams, seeds: &[u64], out: &OutputDir, runner: &ReplicaRunner) -> Result<Outcome, RunError> {
    let spec = ReplicaSpec {
        kind: p.process,
        drift: p.drift,
        horizon: p.horizon,
        sub_step: p.sub_step,
        initial: config_of(&p.initial)?,
        record_events: p.record_events,
    };
    let each = map_replicas(&spec, seeds, runner, |t| {
        let seed = t.params().seed;
        out.write(&format!("trajectories/seed_{seed}.csv"), trajectory_to_string(t).as_bytes())
            .map_err(|e| ExperimentError::Replica { seed, message: e.to_string() })?;
        Ok(ReplicaVelocity { seed, events: t.event_count(), velocity: estimate_velocity(t, p.t_burn)? })
    })?;
    let v: Vec<VelocityEstimate> = each.iter().map(|r| r.velocity).collect();
    out.write_json("simulate.json", &json!({ "replicas": each, "pooled_velocity": pooled(&v) }))?;
    Ok(Outcome::default())
}

fn couple(p: &CoupleParams, seeds: &[u64], out: &OutputDir, runner: &ReplicaRunner) -> Result<Outcome, RunError> {
    let nu = config_of(&p.nu)?;
    let partner = config_of(&p.partner)?;
    let results = runner.map(seeds, |seed| -> Result<serde_json::Value, RunError> {
        let params = beeslab::engine::SimParams::new(p.n, p.drift, p.horizon, seed).with_sub_step(p.sub_step);
        let drivers = DriverBundle::new(seed, p.n).map_err(|e| RunError::Runtime(e.to_string()))?;
        let fail = |e: beeslab::couplings::CouplingError| RunError::Runtime(format!("seed {seed}: {e}"));
        let (violations, stopping_time, trajectories) = match p.mode {
            CouplingMode::Monotone => {
                let run = coupled_simulate_monotone(&nu, &partner, &params, drivers).map_err(fail)?;
                let t = [("bees", run.bees), ("bbm_low", run.bbm_low), ("bbm_high", run.bbm_high)];
                (run.violations, None, t.to_vec())
            }
            CouplingMode::Abs => {
                let run = coupled_simulate_abs(&nu, &partner, &params, drivers).map_err(fail)?;
                (run.violations, run.stopping_time, vec![("bees", run.bees), ("bbm", run.bbm)])
            }
        };
        let mut buf = Vec::new();
        write_violations(&violations, &mut buf)?;
        out.write(&format!("violations/seed_{seed}.csv"), &buf)?;
        if p.write_trajectories {
            for (name, t) in &trajectories {
                out.write(&format!("trajectories/seed_{seed}_{name}.csv"), trajectory_to_string(t).as_bytes())?;
            }
        }
        Ok(json!({
            "seed": seed,
            "violations": violations.len(),
            "first_violation": violations.first(),
            "stopping_time": stopping_time,
        }))
    });
    let rows = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let violations = rows
        .iter()
        .filter(|r| r["violations"].as_u64().unwrap_or(0) > 0)
        .map(|r| format!("seed {}: {} ordering violations", r["seed"], r["violations"]))
        .collect();
    out.write_json("couple.json", &json!({ "mode": p.mode, "replicas": rows }))?;
    Ok(Outcome { violations, cells: None })
}

fn velocity(p: &VelocityParams, seeds: &[u64], out: &OutputDir, runner: &ReplicaRunner) -> Result<Outcome, RunError> {
    let spec = ReplicaSpec::from_origin(p.process, p.n, p.drift, p.horizon, p.sub_step)
        .map_err(|e| RunError::Runtime(e.to_string()))?;
    let each = map_replicas(&spec, seeds, runner, |t| Ok(estimate_velocity(t, p.t_burn)?))?;
    let formula = velocity_formula(p.n as u64).ok();
    out.write_json(
        "velocity.json",
        &json!({
            "estimate": pooled(&each),
            "common_slope": pooled(&each).common_slope(),
            "velocity_formula": formula,
            "replicas": seeds.iter().zip(&each).map(|(s, v)| json!({"seed": s, "velocity": v})).collect::<Vec<_>>(),
        }),
    )?;
    Ok(Outcome::default())
}

fn critical_drift(
    n: usize,
    horizon: f64,
    sub_step: f64,
    seeds: &[u64],
    runner: &ReplicaRunner,
) -> Result<CriticalDrift, RunError> {
    Ok(estimate_critical_drift(n, horizon, sub_step, &derived(seeds, TAG_CRITICAL), runner)?)
}

/// `d_eff` when there are enough seeds for it.
fn diffusivity(
    n: usize,
    mu_c: f64,
    t_eval: f64,
    sub_step: f64,
    seeds: &[u64],
    runner: &ReplicaRunner,
) -> Result<Option<DiffusionConstants>, RunError> {
    if seeds.len() < 30 {
        return Ok(None);
    }
    Ok(Some(centred_diffusivity(n, mu_c, t_eval, sub_step, &derived(seeds, TAG_DIFFUSIVITY), runner)?))
}

#[derive(Serialize)]
struct RegimeRow {
    n: usize,
    mu: f64,
    velocity: VelocityEstimate,
    report: RegimeReport,
}

#[allow(clippy::too_many_arguments)]
fn regime_cell(
    n: usize,
    mu: f64,
    c: &CriticalDrift,
    horizon: f64,
    sub_step: f64,
    t_burn: f64,
    seeds: &[u64],
    runner: &ReplicaRunner,
) -> Result<RegimeRow, RunError> {
    let spec = ReplicaSpec::from_origin(ProcessKind::Bees, n, mu, horizon, sub_step)
        .map_err(|e| RunError::Runtime(e.to_string()))?;
    let each = map_replicas(&spec, seeds, runner, |t| Ok(estimate_velocity(t, t_burn)?))?;
    let v = pooled(&each);
    let report = classify_regime(mu, c.mu_c_hat, c.stderr, Some(&v)).map_err(|e| RunError::Runtime(e.to_string()))?;
    Ok(RegimeRow { n, mu, velocity: v, report })
}

fn opt_f64(x: Option<f64>) -> String {
    x.map(format_f64).unwrap_or_default()
}

/// `N,mu,v_hat,stderr,regime,d_eff,inconclusive`
fn regime_table(rows: &[(&RegimeRow, Option<f64>)]) -> String {
    let mut s = String::from("N,mu,v_hat,stderr,regime,d_eff,inconclusive\n");
    for (r, d_eff) in rows {
        s += &format!(
            "{},{},{},{},{},{},{}\n",
            r.n,
            format_f64(r.mu),
            format_f64(r.velocity.common_slope()),
            format_f64(r.velocity.common_stderr),
            r.report.regime.name(),
            opt_f64(*d_eff),
            r.report.inconclusive
        );
    }
    s
}

fn regimes(p: &RegimesParams, seeds: &[u64], out: &OutputDir, runner: &ReplicaRunner) -> Result<Outcome, RunError> {
    let c = critical_drift(p.n, p.critical_horizon, p.sub_step, seeds, runner)?;
    let d = diffusivity(p.n, c.mu_c_hat, p.critical_horizon, p.sub_step, seeds, runner)?;
    let rows = (0..p.drifts.len())
        .map(|k| {
            let mu = p.drifts.resolve(k, c.mu_c_hat);
            regime_cell(p.n, mu, &c, p.horizon, p.sub_step, p.t_burn, seeds, runner)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let d_eff = d.map(|d| d.d_eff);
    out.write("regimes.csv", regime_table(&rows.iter().map(|r| (r, d_eff)).collect::<Vec<_>>()).as_bytes())?;
    out.write_json("regimes.json", &json!({ "critical": c, "diffusivity": d, "cells": rows }))?;
    Ok(Outcome::default())
}

#[derive(Serialize)]
struct SignedCritical {
    mu: f64,
    /// KS of `sign(mu) X_1(m) / sqrt(m)` against the half-normal with scale `sqrt(d_eff)`.
    ks_leftmost: KsResult,
    /// The same for the midpoint of the cloud.
    ks_midpoint: KsResult,
    mean_width_over_sqrt_m: f64,
    occupation_negative_early: f64,
    occupation_negative_end: f64,
}

fn critical(p: &CriticalParams, seeds: &[u64], out: &OutputDir, runner: &ReplicaRunner) -> Result<Outcome, RunError> {
    let c = critical_drift(p.n, p.critical_horizon, p.sub_step, seeds, runner)?;
    let d = centred_diffusivity(p.n, c.mu_c_hat, p.m, p.sub_step, &derived(seeds, TAG_DIFFUSIVITY), runner)?;
    let scale = d.d_eff.sqrt();
    let sm = p.m.sqrt();
    let mut signs = Vec::new();
    for sign in [1.0, -1.0] {
        let mu = sign * c.mu_c_hat;
        let spec = ReplicaSpec::from_origin(ProcessKind::Bees, p.n, mu, p.m, p.sub_step)
            .map_err(|e| RunError::Runtime(e.to_string()))?;
        let rows = map_replicas(&spec, seeds, runner, |t| {
            Ok([
                leftmost_at(t, p.m)?,
                rightmost_at(t, p.m)?,
                occupation_fraction_negative(t, 0.1 * p.m)?,
                occupation_fraction_negative(t, p.m)?,
            ])
        })?;
        let col = |f: &dyn Fn(&[f64; 4]) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
        let ks =
            |v: Vec<f64>| ks_statistic(&v, |x| half_normal_cdf(x, scale)).map_err(|e| RunError::Runtime(e.to_string()));
        signs.push(SignedCritical {
            mu,
            ks_leftmost: ks(col(&|r| sign * r[0] / sm))?,
            ks_midpoint: ks(col(&|r| sign * 0.5 * (r[0] + r[1]) / sm))?,
            mean_width_over_sqrt_m: mean(&col(&|r| (r[1] - r[0]) / sm)),
            occupation_negative_early: mean(&col(&|r| r[2])),
            occupation_negative_end: mean(&col(&|r| r[3])),
        });
    }
    out.write_json("critical.json", &json!({ "critical": c, "diffusivity": d, "m": p.m, "signs": signs }))?;
    Ok(Outcome::default())
}

fn brw(p: &BrwSweepParams, seeds: &[u64], out: &OutputDir, runner: &ReplicaRunner) -> Result<Outcome, RunError> {
    let mut plan = Vec::new();
    for &n in &p.n {
        for &kind in &p.kinds {
            match kind {
                BrwKind::Upper => plan.push(BrwParams::upper(n, p.drift, p.horizon.round().max(1.0) as usize)),
                BrwKind::Lower => {
                    for &d in &p.deltas {
                        plan.push(BrwParams::lower(n, d, p.drift, (p.horizon / d).round().max(1.0) as usize));
                    }
                }
            }
        }
    }
    let mut rows = Vec::new();
    for params in &plan {
        let runs = runner.map(seeds, |seed| {
            let mut drivers = KeyedBrwDrivers::new(seed);
            let r = match params.kind {
                BrwKind::Upper => simulate_nbrw_upper(params.n, params.drift, params.generations, &mut drivers),
                BrwKind::Lower => {
                    simulate_nbrw_lower(params.n, params.step, params.drift, params.generations, &mut drivers)
                }
            };
            r.map_err(|e| RunError::Runtime(format!("seed {seed}: {e}")))
        });
        let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
        let speed = estimate_brw_speed_pooled(&runs, p.burn_fraction).map_err(|e| RunError::Runtime(e.to_string()))?;
        rows.push(SpeedSweepRow::new(params, speed).map_err(|e| RunError::Runtime(e.to_string()))?);
    }
    let mut buf = Vec::new();
    write_speed_sweep(&rows, &mut buf)?;
    out.write("speed_sweep.csv", &buf)?;
    let formula: Vec<_> =
        p.n.iter().map(|&n| json!({"n": n, "velocity_formula": velocity_formula(n as u64).ok()})).collect();
    out.write_json("brw.json", &json!({ "rows": rows, "nbbm_velocity_formula": formula }))?;
    Ok(Outcome::default())
}

fn fbp(p: &FbpParams, seeds: &[u64], out: &OutputDir, runner: &ReplicaRunner) -> Result<Outcome, RunError> {
    let initial = match p.initial {
        FbpInitial::Uniform { a, b } => PdeState::uniform(&p.pde, a, b),
        FbpInitial::Steady => PdeState::steady_state(&p.pde),
    }
    .map_err(fbp_error)?;
    let sol = solve_fbp(&initial, &p.pde).map_err(fbp_error)?;
    let mut buf = Vec::new();
    write_snapshots(&sol, &mut buf)?;
    out.write("snapshots.csv", &buf)?;
    buf.clear();
    write_boundary(&sol, &mut buf)?;
    out.write("boundary.csv", &buf)?;

    let last = sol.final_state();
    let l1_to_steady = (p.pde.drift == 0.0).then(|| last.l1_distance_to(beeslab::fbp::steady_state_density));
    let comparison = match &p.compare_bees {
        None => None,
        Some(cmp) => {
            // Bees start from the quantiles of the initial profile and are
            // compared with the profile at the end time.
            let start: Vec<f64> = (1..=cmp.n).map(|i| initial.quantile((i as f64 - 0.5) / cmp.n as f64)).collect();
            let spec = ReplicaSpec {
                kind: ProcessKind::Bees,
                drift: p.pde.drift,
                horizon: p.pde.end_time,
                sub_step: cmp.sub_step,
                initial: config_of(&start)?,
                record_events: false,
            };
            let w = map_replicas(&spec, seeds, runner, |t| Ok(distance_empirical_pde(t.final_config(), last)))?;
            Some(json!({ "n": cmp.n, "w1": w, "mean_w1": mean(&w) }))
        }
    };
    out.write_json(
        "fbp.json",
        &json!({
            "steps": p.pde.steps(),
            "final_time": last.time(),
            "final_mass": last.mass(),
            "final_radius": last.radius(),
            "final_mean": last.mean(),
            "l1_to_steady_state": l1_to_steady,
            "bees_comparison": comparison,
        }),
    )?;
    Ok(Outcome::default())
}

fn sweep(p: &SweepParams, seeds: &[u64], out: &OutputDir, runner: &ReplicaRunner) -> Result<Outcome, RunError> {
    let mut cells = Vec::new();
    let mut done: Vec<(RegimeRow, Option<f64>)> = Vec::new();
    let mut per_n = Vec::new();
    for &n in &p.n {
        // Failures at this stage take down every cell with this N.
        let base = critical_drift(n, p.critical_horizon, p.sub_step, seeds, runner).and_then(|c| {
            let d = diffusivity(n, c.mu_c_hat, p.critical_horizon, p.sub_step, seeds, runner)?;
            Ok((c, d))
        });
        if let Ok((c, d)) = &base {
            per_n.push(json!({ "n": n, "critical": c, "diffusivity": d }));
        }
        for k in 0..p.drifts.len() {
            let cell = cells.len();
            let drift_spec = p.drifts.values()[k];
            let result = base.as_ref().map_err(|e| RunError::Runtime(e.to_string())).and_then(|(c, d)| {
                let mu = p.drifts.resolve(k, c.mu_c_hat);
                regime_cell(n, mu, c, p.horizon, p.sub_step, p.t_burn, seeds, runner).map(|r| (r, d.map(|d| d.d_eff)))
            });
            match result {
                Ok((row, d_eff)) => {
                    cells.push(CellEntry { cell, n, drift_spec, mu: Some(row.mu), status: RunStatus::Ok, error: None });
                    done.push((row, d_eff));
                }
                Err(e) => cells.push(CellEntry {
                    cell,
                    n,
                    drift_spec,
                    mu: None,
                    status: RunStatus::Error,
                    error: Some(e.to_string()),
                }),
            }
        }
    }
    out.write("sweep.csv", regime_table(&done.iter().map(|(r, d)| (r, *d)).collect::<Vec<_>>()).as_bytes())?;
    let rows: Vec<&RegimeRow> = done.iter().map(|(r, _)| r).collect();
    out.write_json("sweep.json", &json!({ "per_n": per_n, "cells": rows }))?;
    Ok(Outcome { violations: Vec::new(), cells: Some(cells) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solver_invariants_map_to_violations() {
        assert!(matches!(fbp_error(FbpError::MassDrift { mass: 1.1 }), RunError::Invariant(_)));
        assert!(matches!(fbp_error(FbpError::NegativeDensity { index: 3, value: -1e-3 }), RunError::Invariant(_)));
        assert!(matches!(fbp_error(FbpError::Unstable { dt: 1.0, limit: 0.5 }), RunError::Runtime(_)));
    }

    #[test]
    fn failed_cell_makes_the_run_an_error() {
        let cell = |status| CellEntry { cell: 0, n: 1, drift_spec: 1.0, mu: None, status, error: None };
        assert_eq!(Outcome::default().status(), RunStatus::Ok);
        let o = Outcome { violations: Vec::new(), cells: Some(vec![cell(RunStatus::Ok), cell(RunStatus::Error)]) };
        assert_eq!(o.status(), RunStatus::Error);
        let o = Outcome { violations: vec!["x".into()], cells: None };
        assert_eq!(o.status(), RunStatus::InvariantViolation);
    }
}
