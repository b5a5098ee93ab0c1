//! Monte Carlo checks of distributional properties that are too slow for
//! unit tests. Every check uses fixed seeds, so outcomes are reproducible.

use beeslab::brw_bounds::{estimate_brw_speed, simulate_nbrw_lower, simulate_nbrw_upper, KeyedBrwDrivers};
use beeslab::couplings::{coupled_simulate_abs, coupled_simulate_monotone, DriverBundle};
use beeslab::engine::{simulate, Configuration, ProcessKind, SimParams};
use beeslab::experiments::{centred_diffusivity, estimate_critical_drift, map_replicas, pooled_velocity, ReplicaSpec};
use beeslab::replicas::{replica_seeds, ReplicaRunner};
use beeslab::statistics::{
    estimate_velocity, ks_statistic, ks_two_sample, leftmost_at, normal_cdf, rescale_path, return_times_to_a,
};
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

fn runner() -> ReplicaRunner {
    ReplicaRunner::default()
}

#[test]
fn event_counts_follow_the_poisson_law() {
    let (n, horizon) = (5, 2.0);
    let counts = runner().map(&replica_seeds(31, 4000), |seed| {
        let p = SimParams::new(n, 0.0, horizon, seed).with_grid(false);
        let init = Configuration::uniform(n, 0.0).unwrap();
        simulate(ProcessKind::Nbbm, &p, &init, DriverBundle::new(seed, n).unwrap()).unwrap().event_count() as u64
    });
    // Cells 0..=4 and >= 17 pooled so every expected count is large.
    let law = Poisson::new(n as f64 * horizon).unwrap();
    let cell = |k: u64| k.clamp(4, 17) as usize - 4;
    let mut observed = [0f64; 14];
    for &k in &counts {
        observed[cell(k)] += 1.0;
    }
    let mut expected = [0f64; 14];
    for k in 0..200u64 {
        expected[cell(k)] += law.pmf(k) * counts.len() as f64;
    }
    let chi2: f64 = observed.iter().zip(&expected).map(|(o, e)| (o - e).powi(2) / e).sum();
    let p = 1.0 - ChiSquared::new(13.0).unwrap().cdf(chi2);
    assert!(p > 0.01, "chi-square {chi2:.2}, p = {p:.4}");
}

#[test]
fn monotone_coupling_never_violates_order() {
    let n = 10;
    let nu = Configuration::uniform(n, -1.0).unwrap();
    let nu_prime = Configuration::uniform(n, 0.0).unwrap();
    let bad = runner().map(&replica_seeds(32, 100), |seed| {
        let p = SimParams::new(n, 0.0, 20.0, seed);
        coupled_simulate_monotone(&nu, &nu_prime, &p, DriverBundle::new(seed, n).unwrap()).unwrap().violations.len()
    });
    assert_eq!(bad.iter().sum::<usize>(), 0);
}

#[test]
fn abs_coupling_never_violates_order_before_the_stopping_time() {
    let nu = Configuration::new(vec![1.0, 2.0, 2.0, 3.0, 4.0]).unwrap();
    let nu_tilde = Configuration::new(vec![-4.0, -3.0, -2.0, -2.0, -1.0]).unwrap();
    let bad = runner().map(&replica_seeds(33, 100), |seed| {
        let p = SimParams::new(5, -0.2, 10.0, seed);
        coupled_simulate_abs(&nu, &nu_tilde, &p, DriverBundle::new(seed, 5).unwrap()).unwrap().violations.len()
    });
    assert_eq!(bad.iter().sum::<usize>(), 0);
}

#[test]
fn coupled_marginals_match_standalone_runs() {
    let (n, horizon) = (5, 5.0);
    let nu = Configuration::new(vec![-1.0, -0.5, 0.0, 0.5, 1.0]).unwrap();
    let coupled = runner().map(&replica_seeds(34, 1000), |seed| {
        let p = SimParams::new(n, 0.3, horizon, seed).with_sub_step(0.5);
        let run = coupled_simulate_monotone(&nu, &nu, &p, DriverBundle::new(seed, n).unwrap()).unwrap();
        (run.bees.final_config().leftmost(), run.bbm_low.final_config().leftmost())
    });
    let alone = |kind| {
        runner().map(&replica_seeds(35, 1000), |seed| {
            let p = SimParams::new(n, 0.3, horizon, seed).with_sub_step(0.5);
            simulate(kind, &p, &nu, DriverBundle::new(seed, n).unwrap()).unwrap().final_config().leftmost()
        })
    };
    let bees: Vec<f64> = coupled.iter().map(|c| c.0).collect();
    let bbm: Vec<f64> = coupled.iter().map(|c| c.1).collect();
    let p_bees = ks_two_sample(&bees, &alone(ProcessKind::Bees)).unwrap().p_value;
    let p_bbm = ks_two_sample(&bbm, &alone(ProcessKind::Nbbm)).unwrap().p_value;
    assert!(p_bees > 0.01 && p_bbm > 0.01, "bees p = {p_bees:.4}, N-BBM p = {p_bbm:.4}");
}

#[test]
fn rescaled_single_particle_is_standard_normal() {
    let m = 400.0;
    let spec = ReplicaSpec::from_origin(ProcessKind::Nbbm, 1, 0.0, m, 0.5).unwrap();
    let x = map_replicas(&spec, &replica_seeds(36, 1000), &runner(), |t| {
        Ok(rescale_path(t, m, 1.0)?.value_at(1.0).unwrap())
    })
    .unwrap();
    let ks = ks_statistic(&x, |v| normal_cdf(v, 1.0)).unwrap();
    assert!(ks.p_value > 0.01, "{ks:?}");
}

#[test]
fn nbbm_velocity_grows_with_n() {
    let v: Vec<f64> = [10, 50, 200]
        .iter()
        .map(|&n| {
            let spec = ReplicaSpec::from_origin(ProcessKind::Nbbm, n, 0.0, 200.0, 1.0).unwrap();
            pooled_velocity(&spec, &replica_seeds(37, 10), 20.0, &runner()).unwrap().common_slope()
        })
        .collect();
    assert!(v[0] < v[1] && v[1] < v[2], "{v:?}");
    assert!(v[2] < 2f64.sqrt(), "{v:?}");
}

#[test]
fn diffusivity_is_stable_in_the_evaluation_time() {
    let seeds = replica_seeds(38, 300);
    let c = estimate_critical_drift(10, 1000.0, 1.0, &replica_seeds(39, 100), &runner()).unwrap();
    let d200 = centred_diffusivity(10, c.mu_c_hat, 200.0, 1.0, &seeds, &runner()).unwrap();
    let d400 = centred_diffusivity(10, c.mu_c_hat, 400.0, 1.0, &seeds, &runner()).unwrap();
    let ratio = d400.d_eff / d200.d_eff;
    assert!((0.5..=2.0).contains(&ratio), "d_eff {} then {}", d200.d_eff, d400.d_eff);
}

#[test]
fn supercritical_bees_stop_returning() {
    let c = estimate_critical_drift(5, 500.0, 1.0, &replica_seeds(40, 40), &runner()).unwrap();
    let horizon = 400.0;
    let spec = ReplicaSpec::from_origin(ProcessKind::Bees, 5, 1.5 * c.mu_c_hat, horizon, 1.0).unwrap();
    let last =
        map_replicas(&spec, &replica_seeds(41, 50), &runner(), |t| Ok(return_times_to_a(t, 1.0)?.last_return_time()))
            .unwrap();
    // No visit to [-1, 1]^N during the second half counts as having escaped.
    let escaped = last.iter().filter(|l| l.is_none_or(|t| t < 0.5 * horizon)).count();
    assert!(escaped * 10 >= 9 * last.len(), "{escaped} of {} escaped", last.len());
}

#[test]
fn brw_bounds_bracket_paired_nbbm_speeds() {
    let (n, generations) = (10, 1200);
    let spec = ReplicaSpec::from_origin(ProcessKind::Nbbm, n, 0.0, generations as f64, 1.0).unwrap();
    let outcomes = runner().map(&replica_seeds(42, 100), |seed| {
        let nbbm = estimate_velocity(&spec.simulate(seed).unwrap(), 120.0).unwrap().common_slope();
        let up = simulate_nbrw_upper(n, 0.0, generations, &mut KeyedBrwDrivers::new(seed)).unwrap();
        let low = simulate_nbrw_lower(n, 0.5, 0.0, 2 * generations, &mut KeyedBrwDrivers::new(seed)).unwrap();
        let up = estimate_brw_speed(&up, 0.1).unwrap().speed_hat;
        let low = estimate_brw_speed(&low, 0.1).unwrap().speed_hat;
        (up >= nbbm, low <= nbbm)
    });
    let above = outcomes.iter().filter(|o| o.0).count();
    let below = outcomes.iter().filter(|o| o.1).count();
    assert!(above >= 95 && below >= 95, "upper above in {above}, lower below in {below} of 100");
}

#[test]
fn leftmost_of_a_free_particle_has_variance_t() {
    let spec = ReplicaSpec::from_origin(ProcessKind::Bees, 1, 0.0, 4.0, 0.5).unwrap();
    let x = map_replicas(&spec, &replica_seeds(43, 2000), &runner(), |t| Ok(leftmost_at(t, 4.0)?)).unwrap();
    let ks = ks_statistic(&x, |v| normal_cdf(v, 2.0)).unwrap();
    assert!(ks.p_value > 0.01, "{ks:?}");
}
