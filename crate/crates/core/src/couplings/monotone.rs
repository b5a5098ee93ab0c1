use crate::engine::{left_of_sorted, Configuration, ProcessKind, Recorder, SimParams, Simulator, StepOutcome};

use super::{CoupledRun, CouplingError, DriverBundle, OrderPair, Violation};

/// Bees from `nu`, N-BBM from `nu` and N-BBM from `nu_prime`, all driven by
/// clones of one bundle. The order `bees ≼ bbm_low ≼ bbm_high` is checked at
/// every event (just before and just after) and every grid sample.
pub fn coupled_simulate_monotone(
    nu: &Configuration,
    nu_prime: &Configuration,
    params: &SimParams,
    drivers: DriverBundle,
) -> Result<CoupledRun, CouplingError> {
    if nu.len() != nu_prime.len() {
        return Err(CouplingError::SizeMismatch { left: nu.len(), right: nu_prime.len() });
    }
    if !left_of_sorted(nu.as_slice(), nu_prime.as_slice()) {
        return Err(CouplingError::InitialOrder);
    }
    let mut bees = Simulator::new(ProcessKind::Bees, params, nu, drivers.clone())?;
    let mut low = Simulator::new(ProcessKind::Nbbm, params, nu, drivers.clone())?;
    let mut high = Simulator::new(ProcessKind::Nbbm, params, nu_prime, drivers)?;
    let mut rec_bees = Recorder::new(ProcessKind::Bees, params, nu);
    let mut rec_low = Recorder::new(ProcessKind::Nbbm, params, nu);
    let mut rec_high = Recorder::new(ProcessKind::Nbbm, params, nu_prime);
    let mut violations = Vec::new();

    check(0.0, nu.as_slice(), nu.as_slice(), nu_prime.as_slice(), &mut violations);
    while let Some(ob) = bees.step() {
        let ol = low.step().expect("coupled clocks advance together");
        let oh = high.step().expect("coupled clocks advance together");
        debug_assert_eq!(ob.time(), ol.time());
        debug_assert_eq!(ob.time(), oh.time());
        if matches!(ob, StepOutcome::Event { .. }) {
            check(ob.time(), bees.pre_event(), low.pre_event(), high.pre_event(), &mut violations);
        }
        check(ob.time(), bees.current(), low.current(), high.current(), &mut violations);
        rec_bees.observe(ob, bees.pre_event(), bees.current());
        rec_low.observe(ol, low.pre_event(), low.current());
        rec_high.observe(oh, high.pre_event(), high.current());
    }
    Ok(CoupledRun {
        bees: rec_bees.finish(bees.event_count(), bees.current()),
        bbm_low: rec_low.finish(low.event_count(), low.current()),
        bbm_high: rec_high.finish(high.event_count(), high.current()),
        violations,
    })
}

fn check(time: f64, bees: &[f64], low: &[f64], high: &[f64], out: &mut Vec<Violation>) {
    if !left_of_sorted(bees, low) {
        out.push(Violation { time, pair: OrderPair::BeesLow });
    }
    if !left_of_sorted(low, high) {
        out.push(Violation { time, pair: OrderPair::LowHigh });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_starts_give_identical_bbm() {
        let nu = Configuration::new(vec![-0.5, 0.0, 0.3, 1.0]).unwrap();
        let p = SimParams::new(4, 0.2, 5.0, 17).with_sub_step(0.05);
        let run = coupled_simulate_monotone(&nu, &nu, &p, DriverBundle::new(17, 4).unwrap()).unwrap();
        assert_eq!(run.bbm_low, run.bbm_high);
        assert!(run.violations.is_empty());
    }

    #[test]
    fn single_particle_bees_equals_bbm() {
        let nu = Configuration::new(vec![0.7]).unwrap();
        let p = SimParams::new(1, -0.1, 5.0, 3);
        let run = coupled_simulate_monotone(&nu, &nu, &p, DriverBundle::new(3, 1).unwrap()).unwrap();
        assert_eq!(run.bees.grid(), run.bbm_low.grid());
        assert_eq!(run.bees.final_config(), run.bbm_low.final_config());
    }

    #[test]
    fn rejects_unordered_start() {
        let a = Configuration::new(vec![0.0, 5.0]).unwrap();
        let b = Configuration::new(vec![1.0, 2.0]).unwrap();
        let p = SimParams::new(2, 0.0, 1.0, 1);
        let err = coupled_simulate_monotone(&a, &b, &p, DriverBundle::new(1, 2).unwrap()).unwrap_err();
        assert_eq!(err, CouplingError::InitialOrder);
    }

    #[test]
    fn no_violations_from_ordered_starts() {
        let n = 10;
        let nu = Configuration::uniform(n, -1.0).unwrap();
        let nu_prime = Configuration::uniform(n, 0.0).unwrap();
        for seed in 0..10 {
            let p = SimParams::new(n, 0.0, 20.0, seed);
            let run = coupled_simulate_monotone(&nu, &nu_prime, &p, DriverBundle::new(seed, n).unwrap()).unwrap();
            assert!(run.violations.is_empty(), "seed {seed}: {:?}", &run.violations[..1]);
        }
    }
}
