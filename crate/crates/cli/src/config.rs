//! Strict JSON experiment configuration.
//!
//! Parsing never stops at the first problem: every unknown key, type mismatch
//! and violated constraint is collected and reported together.

use std::collections::BTreeSet;
use std::fmt::Display;
use std::path::PathBuf;

use beeslab::brw_bounds::BrwKind;
use beeslab::engine::{compare_left_of, Configuration, ProcessKind, SimParams};
use beeslab::fbp::PdeParams;
use beeslab::replicas::replica_seeds;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Simulate,
    Couple,
    Velocity,
    Regimes,
    Critical,
    Brw,
    Fbp,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Couple => "couple",
            Command::Velocity => "velocity",
            Command::Regimes => "regimes",
            Command::Critical => "critical",
            Command::Brw => "brw",
            Command::Fbp => "fbp",
            Command::Sweep => "sweep",
        }
    }
}

/// Every problem found in a configuration document.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid configuration:\n  {}", .0.join("\n  "))]
pub struct ConfigError(pub Vec<String>);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub seeds: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub params: Params,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Params {
    Simulate(SimulateParams),
    Couple(CoupleParams),
    Velocity(VelocityParams),
    Regimes(RegimesParams),
    Critical(CriticalParams),
    Brw(BrwSweepParams),
    Fbp(FbpParams),
    Sweep(SweepParams),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateParams {
    pub process: ProcessKind,
    pub n: usize,
    pub drift: f64,
    pub horizon: f64,
    pub sub_step: f64,
    pub t_burn: f64,
    pub initial: Vec<f64>,
    pub record_events: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingMode {
    Monotone,
    Abs,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupleParams {
    pub mode: CouplingMode,
    pub n: usize,
    pub drift: f64,
    pub horizon: f64,
    pub sub_step: f64,
    pub nu: Vec<f64>,
    /// Upper N-BBM start (monotone) or the N-BBM start below `-|nu|` (abs).
    pub partner: Vec<f64>,
    pub write_trajectories: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VelocityParams {
    pub process: ProcessKind,
    pub n: usize,
    pub drift: f64,
    pub horizon: f64,
    pub sub_step: f64,
    pub t_burn: f64,
}

/// Drifts given either directly or as multiples of the estimated critical drift.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftGrid {
    Mu(Vec<f64>),
    MuFactors(Vec<f64>),
}

impl DriftGrid {
    pub fn len(&self) -> usize {
        self.values().len()
    }

    pub fn is_empty(&self) -> bool {
        self.values().is_empty()
    }

    pub fn values(&self) -> &[f64] {
        match self {
            DriftGrid::Mu(v) | DriftGrid::MuFactors(v) => v,
        }
    }

    pub fn resolve(&self, k: usize, mu_c_hat: f64) -> f64 {
        match self {
            DriftGrid::Mu(v) => v[k],
            DriftGrid::MuFactors(v) => v[k] * mu_c_hat,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimesParams {
    pub n: usize,
    pub drifts: DriftGrid,
    pub horizon: f64,
    pub sub_step: f64,
    pub t_burn: f64,
    pub critical_horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalParams {
    pub n: usize,
    /// Diffusive scale: the bees runs last `m` time units.
    pub m: f64,
    pub sub_step: f64,
    pub critical_horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BrwSweepParams {
    pub n: Vec<usize>,
    pub kinds: Vec<BrwKind>,
    pub deltas: Vec<f64>,
    pub drift: f64,
    pub horizon: f64,
    pub burn_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FbpInitial {
    Uniform { a: f64, b: f64 },
    Steady,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeesComparison {
    pub n: usize,
    pub sub_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FbpParams {
    pub pde: PdeParams,
    pub initial: FbpInitial,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compare_bees: Option<BeesComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepParams {
    pub n: Vec<usize>,
    pub drifts: DriftGrid,
    pub horizon: f64,
    pub sub_step: f64,
    pub t_burn: f64,
    pub critical_horizon: f64,
}

/// Cursor over one JSON object that remembers which keys were read.
struct Fields<'a> {
    path: String,
    map: &'a Map<String, Value>,
    seen: BTreeSet<String>,
}

impl<'a> Fields<'a> {
    fn new(path: &str, value: &'a Value, issues: &mut Vec<String>) -> Option<Self> {
        match value.as_object() {
            Some(map) => Some(Self { path: path.to_string(), map, seen: BTreeSet::new() }),
            None => {
                issues.push(format!("{}: expected an object", display_path(path)));
                None
            }
        }
    }

    fn at(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    fn raw(&mut self, key: &str) -> Option<&'a Value> {
        self.seen.insert(key.to_string());
        self.map.get(key)
    }

    fn get<T: DeserializeOwned>(&mut self, key: &str, issues: &mut Vec<String>) -> Option<T> {
        let v = self.raw(key)?;
        match T::deserialize(v) {
            Ok(t) => Some(t),
            Err(e) => {
                issues.push(format!("{}: {e}", self.at(key)));
                None
            }
        }
    }

    fn require<T: DeserializeOwned>(&mut self, key: &str, issues: &mut Vec<String>) -> Option<T> {
        if !self.map.contains_key(key) {
            self.seen.insert(key.to_string());
            issues.push(format!("{}: missing required key", self.at(key)));
            return None;
        }
        self.get(key, issues)
    }

    fn finish(self, issues: &mut Vec<String>) {
        for key in self.map.keys() {
            if !self.seen.contains(key) {
                issues.push(format!("{}: unknown key", self.at(key)));
            }
        }
    }
}

fn display_path(path: &str) -> &str {
    if path.is_empty() {
        "<document>"
    } else {
        path
    }
}

fn require_that(issues: &mut Vec<String>, ok: bool, field: &str, why: impl Display) {
    if !ok {
        issues.push(format!("{field}: {why}"));
    }
}

fn positive(issues: &mut Vec<String>, field: &str, x: f64) {
    require_that(issues, x > 0.0 && x.is_finite(), field, format!("must be positive and finite, got {x}"));
}

fn finite(issues: &mut Vec<String>, field: &str, x: f64) {
    require_that(issues, x.is_finite(), field, format!("must be finite, got {x}"));
}

fn at_least(issues: &mut Vec<String>, field: &str, x: usize, min: usize) {
    require_that(issues, x >= min, field, format!("must be at least {min}, got {x}"));
}

/// Parse and validate a configuration document. `cli_command` is the command
/// named on the command line; a `command` key in the document must agree.
pub fn parse_config(source: &str, cli_command: Command) -> Result<ExperimentConfig, ConfigError> {
    let doc: Value = serde_json::from_str(source).map_err(|e| ConfigError(vec![format!("malformed JSON: {e}")]))?;
    let mut issues = Vec::new();
    let mut top = Fields::new("", &doc, &mut issues).ok_or_else(|| ConfigError(issues.clone()))?;

    if let Some(c) = top.get::<Command>("command", &mut issues) {
        require_that(
            &mut issues,
            c == cli_command,
            "command",
            format!("document is for `{}` but `{}` was requested", c.name(), cli_command.name()),
        );
    }
    let seeds = parse_seeds(&mut top, &mut issues);
    let output_dir = top.get::<PathBuf>("output_dir", &mut issues);
    let params = match top.raw("params") {
        None => {
            issues.push("params: missing required key".into());
            None
        }
        Some(v) => parse_params(cli_command, v, seeds.len(), &mut issues),
    };
    top.finish(&mut issues);

    match (issues.is_empty(), params) {
        (true, Some(params)) => Ok(ExperimentConfig { command: cli_command, seeds, output_dir, params }),
        _ => Err(ConfigError(issues)),
    }
}

/// `seeds` is a list of integers or `{"base": b, "count": k}`, which expands
/// to `k` seeds derived from `b`.
fn parse_seeds(top: &mut Fields<'_>, issues: &mut Vec<String>) -> Vec<u64> {
    let Some(v) = top.raw("seeds") else {
        issues.push("seeds: missing required key".into());
        return Vec::new();
    };
    let seeds = if v.is_object() {
        let Some(mut f) = Fields::new("seeds", v, issues) else { return Vec::new() };
        let base = f.require::<u64>("base", issues);
        let count = f.require::<usize>("count", issues);
        f.finish(issues);
        match (base, count) {
            (Some(b), Some(c)) => replica_seeds(b, c),
            _ => return Vec::new(),
        }
    } else {
        match Vec::<u64>::deserialize(v) {
            Ok(s) => s,
            Err(e) => {
                issues.push(format!("seeds: {e}"));
                return Vec::new();
            }
        }
    };
    require_that(issues, !seeds.is_empty(), "seeds", "must contain at least one seed");
    let distinct: BTreeSet<u64> = seeds.iter().copied().collect();
    require_that(issues, distinct.len() == seeds.len(), "seeds", "must not repeat");
    seeds
}

fn parse_params(cmd: Command, v: &Value, n_seeds: usize, issues: &mut Vec<String>) -> Option<Params> {
    let mut f = Fields::new("params", v, issues)?;
    let before = issues.len();
    let params = match cmd {
        Command::Simulate => simulate(&mut f, issues).map(Params::Simulate),
        Command::Couple => couple(&mut f, issues).map(Params::Couple),
        Command::Velocity => velocity(&mut f, issues).map(Params::Velocity),
        Command::Regimes => regimes(&mut f, issues).map(Params::Regimes),
        Command::Critical => critical(&mut f, n_seeds, issues).map(Params::Critical),
        Command::Brw => brw(&mut f, issues).map(Params::Brw),
        Command::Fbp => fbp(&mut f, issues).map(Params::Fbp),
        Command::Sweep => sweep(&mut f, issues).map(Params::Sweep),
    };
    f.finish(issues);
    if issues.len() > before {
        None
    } else {
        params
    }
}

/// `horizon`, `sub_step` and `t_burn` with their defaults and checks.
fn time_window(f: &mut Fields<'_>, default_sub_step: f64, issues: &mut Vec<String>) -> (f64, f64, f64) {
    let horizon = f.require::<f64>("horizon", issues).unwrap_or(f64::NAN);
    let sub_step = f.get::<f64>("sub_step", issues).unwrap_or(default_sub_step);
    let t_burn = f.get::<f64>("t_burn", issues).unwrap_or(0.1 * horizon);
    if !horizon.is_nan() {
        positive(issues, "params.horizon", horizon);
        require_that(
            issues,
            (0.0..horizon).contains(&t_burn),
            "params.t_burn",
            format!("must lie in [0, horizon), got {t_burn}"),
        );
    }
    positive(issues, "params.sub_step", sub_step);
    (horizon, sub_step, t_burn)
}

fn particles(f: &mut Fields<'_>, min: usize, issues: &mut Vec<String>) -> usize {
    let n = f.require::<usize>("n", issues).unwrap_or(0);
    if f.map.contains_key("n") {
        at_least(issues, "params.n", n, min);
    }
    n
}

fn drift(f: &mut Fields<'_>, issues: &mut Vec<String>) -> f64 {
    let mu = f.get::<f64>("drift", issues).unwrap_or(0.0);
    finite(issues, "params.drift", mu);
    mu
}

fn configuration(field: &str, v: &[f64], n: usize, issues: &mut Vec<String>) -> Option<Configuration> {
    if v.len() != n {
        issues.push(format!("{field}: expected {n} positions, got {}", v.len()));
        return None;
    }
    match Configuration::new(v.to_vec()) {
        Ok(c) => Some(c),
        Err(e) => {
            issues.push(format!("{field}: {e}"));
            None
        }
    }
}

fn simulate(f: &mut Fields<'_>, issues: &mut Vec<String>) -> Option<SimulateParams> {
    let process = f.require::<ProcessKind>("process", issues);
    let n = particles(f, 1, issues);
    let drift = drift(f, issues);
    let (horizon, sub_step, t_burn) = time_window(f, SimParams::DEFAULT_SUB_STEP, issues);
    let initial = f.get::<Vec<f64>>("initial", issues).unwrap_or_else(|| vec![0.0; n]);
    configuration("params.initial", &initial, n, issues);
    let record_events = f.get::<bool>("record_events", issues).unwrap_or(true);
    Some(SimulateParams { process: process?, n, drift, horizon, sub_step, t_burn, initial, record_events })
}

fn couple(f: &mut Fields<'_>, issues: &mut Vec<String>) -> Option<CoupleParams> {
    let mode = f.require::<CouplingMode>("mode", issues);
    let n = particles(f, 1, issues);
    let drift = drift(f, issues);
    let (horizon, sub_step, _) = time_window(f, SimParams::DEFAULT_SUB_STEP, issues);
    let write_trajectories = f.get::<bool>("write_trajectories", issues).unwrap_or(false);
    // Claim the position keys now so an invalid mode does not also report them as unknown.
    for key in ["nu", "nu_prime", "nu_tilde"] {
        f.seen.insert(key.to_string());
    }
    let mode = mode?;
    let (default_nu, partner_key, other_key) = match mode {
        CouplingMode::Monotone => (0.0, "nu_prime", "nu_tilde"),
        CouplingMode::Abs => (1.0, "nu_tilde", "nu_prime"),
    };
    if f.map.contains_key(other_key) {
        issues.push(format!("params.{other_key}: not used by the {mode:?} coupling"));
        f.seen.insert(other_key.to_string());
    }
    let nu = f.get::<Vec<f64>>("nu", issues).unwrap_or_else(|| vec![default_nu; n]);
    let nu_conf = configuration("params.nu", &nu, n, issues);
    let partner = f.get::<Vec<f64>>(partner_key, issues).or_else(|| {
        nu_conf.as_ref().map(|c| match mode {
            CouplingMode::Monotone => c.as_slice().to_vec(),
            CouplingMode::Abs => c.negated_abs().into_vec(),
        })
    });
    let partner_conf = partner.as_ref().and_then(|p| configuration(&format!("params.{partner_key}"), p, n, issues));
    if let (Some(a), Some(b)) = (&nu_conf, &partner_conf) {
        match mode {
            CouplingMode::Monotone => {
                require_that(issues, compare_left_of(a, b), "params.nu_prime", "nu must lie left of nu_prime")
            }
            CouplingMode::Abs => require_that(
                issues,
                compare_left_of(b, &a.negated_abs()),
                "params.nu_tilde",
                "nu_tilde must lie left of -|nu|",
            ),
        }
    }
    if mode == CouplingMode::Abs {
        require_that(issues, drift <= 0.0, "params.drift", format!("the abs coupling needs drift <= 0, got {drift}"));
    }
    Some(CoupleParams { mode, n, drift, horizon, sub_step, nu, partner: partner?, write_trajectories })
}

fn velocity(f: &mut Fields<'_>, issues: &mut Vec<String>) -> Option<VelocityParams> {
    let process = f.get::<ProcessKind>("process", issues).unwrap_or(ProcessKind::Nbbm);
    let n = particles(f, 1, issues);
    let drift = drift(f, issues);
    let (horizon, sub_step, t_burn) = time_window(f, SimParams::DEFAULT_SUB_STEP, issues);
    Some(VelocityParams { process, n, drift, horizon, sub_step, t_burn })
}

fn drift_grid(f: &mut Fields<'_>, issues: &mut Vec<String>) -> Option<DriftGrid> {
    let mu = f.get::<Vec<f64>>("mu", issues);
    let factors = f.get::<Vec<f64>>("mu_factors", issues);
    let grid = match (mu, factors) {
        (Some(m), None) => DriftGrid::Mu(m),
        (None, Some(k)) => DriftGrid::MuFactors(k),
        (Some(_), Some(_)) => {
            issues.push("params.mu: give either mu or mu_factors, not both".into());
            return None;
        }
        (None, None) => {
            if !f.map.contains_key("mu") && !f.map.contains_key("mu_factors") {
                issues.push("params.mu: one of mu or mu_factors is required".into());
            }
            return None;
        }
    };
    require_that(issues, !grid.is_empty(), "params.mu", "must list at least one drift");
    for x in grid.values() {
        finite(issues, "params.mu", *x);
    }
    Some(grid)
}

fn regimes(f: &mut Fields<'_>, issues: &mut Vec<String>) -> Option<RegimesParams> {
    let n = particles(f, 1, issues);
    let drifts = drift_grid(f, issues);
    let (horizon, sub_step, t_burn) = time_window(f, 0.5, issues);
    let critical_horizon = f.get::<f64>("critical_horizon", issues).unwrap_or(horizon);
    positive(issues, "params.critical_horizon", critical_horizon);
    Some(RegimesParams { n, drifts: drifts?, horizon, sub_step, t_burn, critical_horizon })
}

fn critical(f: &mut Fields<'_>, n_seeds: usize, issues: &mut Vec<String>) -> Option<CriticalParams> {
    let n = particles(f, 1, issues);
    let m = f.require::<f64>("m", issues).unwrap_or(1.0);
    positive(issues, "params.m", m);
    let sub_step = f.get::<f64>("sub_step", issues).unwrap_or(0.5);
    positive(issues, "params.sub_step", sub_step);
    let critical_horizon = f.get::<f64>("critical_horizon", issues).unwrap_or(5.0 * m);
    positive(issues, "params.critical_horizon", critical_horizon);
    // The diffusivity estimate needs 30 replicas.
    at_least(issues, "seeds", n_seeds, 30);
    Some(CriticalParams { n, m, sub_step, critical_horizon })
}

fn brw(f: &mut Fields<'_>, issues: &mut Vec<String>) -> Option<BrwSweepParams> {
    let n = f.require::<Vec<usize>>("n", issues).unwrap_or_default();
    let kinds = f.get::<Vec<BrwKind>>("kinds", issues).unwrap_or_else(|| vec![BrwKind::Upper, BrwKind::Lower]);
    let deltas = f.get::<Vec<f64>>("deltas", issues).unwrap_or_else(|| vec![0.5]);
    let drift = drift(f, issues);
    let horizon = f.require::<f64>("horizon", issues).unwrap_or(1.0);
    let burn_fraction = f.get::<f64>("burn_fraction", issues).unwrap_or(0.1);
    positive(issues, "params.horizon", horizon);
    require_that(issues, !kinds.is_empty(), "params.kinds", "must list at least one kind");
    require_that(
        issues,
        (0.0..1.0).contains(&burn_fraction),
        "params.burn_fraction",
        format!("must lie in [0, 1), got {burn_fraction}"),
    );
    for (k, &size) in n.iter().enumerate() {
        let min = if kinds.contains(&BrwKind::Lower) { 2 } else { 1 };
        at_least(issues, &format!("params.n[{k}]"), size, min);
    }
    if kinds.contains(&BrwKind::Lower) {
        require_that(issues, !deltas.is_empty(), "params.deltas", "the lower process needs at least one delta");
        for (k, &d) in deltas.iter().enumerate() {
            positive(issues, &format!("params.deltas[{k}]"), d);
        }
    }
    require_that(issues, !n.is_empty() || !f.map.contains_key("n"), "params.n", "must list at least one N");
    Some(BrwSweepParams { n, kinds, deltas, drift, horizon, burn_fraction })
}

fn fbp(f: &mut Fields<'_>, issues: &mut Vec<String>) -> Option<FbpParams> {
    let h = f.require::<f64>("h", issues);
    let end_time = f.require::<f64>("end_time", issues);
    let drift = drift(f, issues);
    let dt = f.get::<f64>("dt", issues);
    let half_width = f.get::<f64>("half_width", issues);
    let snapshot_every = f.get::<f64>("snapshot_every", issues);
    let boundary_every = f.get::<f64>("boundary_every", issues);
    let initial = match f.raw("initial") {
        None => Some(FbpInitial::Uniform { a: -1.0, b: 1.0 }),
        Some(v) => fbp_initial(v, issues),
    };
    let compare_bees = match f.raw("compare_bees") {
        None => None,
        Some(v) => {
            let mut g = Fields::new("params.compare_bees", v, issues)?;
            let n = particles(&mut g, 1, issues);
            let sub_step = g.get::<f64>("sub_step", issues).unwrap_or(1.0);
            positive(issues, "params.compare_bees.sub_step", sub_step);
            g.finish(issues);
            Some(BeesComparison { n, sub_step })
        }
    };
    let (h, end_time) = (h?, end_time?);
    let mut pde = PdeParams::new(h, drift, end_time);
    if let Some(l) = half_width {
        pde.half_width = l;
    }
    match dt {
        Some(dt) => pde = pde.with_dt(dt),
        // The largest stable step that divides the end time.
        None if end_time > 0.0 && h > 0.0 => {
            let steps = (end_time / pde.dt_limit() - 1e-9).ceil().max(1.0);
            pde = pde.with_dt(end_time / steps);
        }
        None => {}
    }
    if let Some(s) = snapshot_every {
        pde = pde.with_snapshot_every(s);
    }
    if let Some(b) = boundary_every {
        pde.boundary_every = b;
    }
    if let Err(e) = pde.validate() {
        issues.push(format!("params: {e}"));
    }
    if let Some(FbpInitial::Uniform { a, b }) = &initial {
        require_that(
            issues,
            a < b && a.abs() < pde.half_width && b.abs() < pde.half_width,
            "params.initial",
            format!("need -L < a < b < L with L = {}, got [{a}, {b}]", pde.half_width),
        );
    }
    Some(FbpParams { pde, initial: initial?, compare_bees })
}

fn fbp_initial(v: &Value, issues: &mut Vec<String>) -> Option<FbpInitial> {
    let mut g = Fields::new("params.initial", v, issues)?;
    let kind = g.require::<String>("kind", issues);
    let out = match kind.as_deref() {
        Some("uniform") => {
            let a = g.require::<f64>("a", issues);
            let b = g.require::<f64>("b", issues);
            Some(FbpInitial::Uniform { a: a?, b: b? })
        }
        Some("steady") => Some(FbpInitial::Steady),
        Some(other) => {
            issues.push(format!("params.initial.kind: expected `uniform` or `steady`, got `{other}`"));
            None
        }
        None => None,
    };
    g.finish(issues);
    out
}

fn sweep(f: &mut Fields<'_>, issues: &mut Vec<String>) -> Option<SweepParams> {
    // Individual N values are checked per cell at run time, so one bad cell
    // does not stop the others.
    let n = f.require::<Vec<usize>>("n", issues);
    let drifts = drift_grid(f, issues);
    let (horizon, sub_step, t_burn) = time_window(f, 0.5, issues);
    let critical_horizon = f.get::<f64>("critical_horizon", issues).unwrap_or(horizon);
    positive(issues, "params.critical_horizon", critical_horizon);
    let n = n?;
    require_that(issues, !n.is_empty(), "params.n", "must list at least one N");
    Some(SweepParams { n, drifts: drifts?, horizon, sub_step, t_burn, critical_horizon })
}
