use std::f64::consts::PI;

use super::BrwError;

/// The log-Laplace transform `kappa(theta) = log E[sum_m e^{theta m}]` of one
/// generation's offspring displacements, with its first two derivatives.
pub trait Cumulant {
    fn kappa(&self, theta: f64) -> f64;

    /// Central difference with `h = 1e-6 theta`.
    fn kappa_prime(&self, theta: f64) -> f64 {
        let h = 1e-6 * theta;
        (self.kappa(theta + h) - self.kappa(theta - h)) / (2.0 * h)
    }

    /// Central second difference with `h = 1e-4 theta`; a smaller step loses
    /// the result to cancellation.
    fn kappa_double_prime(&self, theta: f64) -> f64 {
        let h = 1e-4 * theta;
        (self.kappa(theta + h) - 2.0 * self.kappa(theta) + self.kappa(theta - h)) / (h * h)
    }

    /// Open interval of `theta` on which `kappa` is finite.
    fn domain(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }

    /// Duration of one generation; speeds are reported per unit time.
    fn step(&self) -> f64 {
        1.0
    }

    /// Spot-check convexity on `samples` points spread over `[lo, hi]`.
    fn is_convex_on(&self, lo: f64, hi: f64, samples: usize) -> bool {
        (0..=samples).all(|k| {
            let t = lo + (hi - lo) * k as f64 / samples as f64;
            self.kappa(t).is_finite() && self.kappa_double_prime(t) >= -1e-6
        })
    }
}

/// Binary branching Brownian motion over unit time: `1 + theta^2 / 2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct KappaBbm;

impl Cumulant for KappaBbm {
    fn kappa(&self, theta: f64) -> f64 {
        1.0 + 0.5 * theta * theta
    }

    fn kappa_prime(&self, theta: f64) -> f64 {
        theta
    }

    fn kappa_double_prime(&self, _theta: f64) -> f64 {
        1.0
    }
}

/// At most one branching in a generation of length `delta`:
/// `theta^2 delta / 2 + log(2 - e^{-delta})`.
#[derive(Debug, Clone, Copy)]
pub struct KappaHatDelta {
    delta: f64,
}

impl KappaHatDelta {
    pub fn new(delta: f64) -> Result<Self, BrwError> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(super::invalid("delta", format!("must be positive, got {delta}")));
        }
        Ok(Self { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

impl Cumulant for KappaHatDelta {
    fn kappa(&self, theta: f64) -> f64 {
        0.5 * theta * theta * self.delta + (-(-self.delta).exp_m1()).ln_1p()
    }

    fn kappa_prime(&self, theta: f64) -> f64 {
        theta * self.delta
    }

    fn kappa_double_prime(&self, _theta: f64) -> f64 {
        self.delta
    }

    fn step(&self) -> f64 {
        self.delta
    }
}

/// A user-supplied cumulant; derivatives are taken numerically.
pub struct CustomCumulant<F: Fn(f64) -> f64> {
    kappa: F,
    domain: (f64, f64),
    step: f64,
}

impl<F: Fn(f64) -> f64> CustomCumulant<F> {
    pub fn new(kappa: F, domain: (f64, f64), step: f64) -> Result<Self, BrwError> {
        if !(domain.0 >= 0.0 && domain.0 < domain.1) {
            return Err(super::invalid(
                "domain",
                format!("({}, {}) is not an interval in (0, inf)", domain.0, domain.1),
            ));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(super::invalid("step", format!("must be positive, got {step}")));
        }
        Ok(Self { kappa, domain, step })
    }
}

impl<F: Fn(f64) -> f64> Cumulant for CustomCumulant<F> {
    fn kappa(&self, theta: f64) -> f64 {
        (self.kappa)(theta)
    }

    fn domain(&self) -> (f64, f64) {
        self.domain
    }

    fn step(&self) -> f64 {
        self.step
    }
}

fn positive(field: &'static str, x: f64) -> Result<(), BrwError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(super::invalid(field, format!("must be positive, got {x}")))
    }
}

pub fn kappa_bbm(theta: f64) -> Result<f64, BrwError> {
    positive("theta", theta)?;
    Ok(KappaBbm.kappa(theta))
}

pub fn kappa_hat_delta(theta: f64, delta: f64) -> Result<f64, BrwError> {
    positive("theta", theta)?;
    Ok(KappaHatDelta::new(delta)?.kappa(theta))
}

/// Root of `theta kappa'(theta) = kappa(theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaStar {
    pub theta: f64,
    /// `|theta kappa'(theta) - kappa(theta)|` at the returned root.
    pub residual: f64,
}

const DEFAULT_BRACKET: (f64, f64) = (1e-9, 1e3);

/// [`solve_theta_star_in`] on the cumulant's domain clipped to `[1e-9, 1e3]`.
pub fn solve_theta_star(spec: &impl Cumulant) -> Result<ThetaStar, BrwError> {
    let (a, b) = spec.domain();
    let lo = a.max(DEFAULT_BRACKET.0);
    let hi = if b.is_finite() { b - (b - lo) * 1e-9 } else { DEFAULT_BRACKET.1 };
    solve_theta_star_in(spec, lo, hi)
}

/// Bisection on `[lo, hi]`, run until the bracket cannot shrink further.
pub fn solve_theta_star_in(spec: &impl Cumulant, lo: f64, hi: f64) -> Result<ThetaStar, BrwError> {
    if !(lo > 0.0 && lo < hi && hi.is_finite()) {
        return Err(super::invalid("bracket", format!("[{lo}, {hi}] must satisfy 0 < lo < hi < inf")));
    }
    let h = |t: f64| t * spec.kappa_prime(t) - spec.kappa(t);
    let (mut a, mut b) = (lo, hi);
    let (ha, hb) = (h(a), h(b));
    if !(ha.is_finite() && hb.is_finite()) || ha.signum() == hb.signum() {
        return Err(BrwError::NoSignChange { lo, hi });
    }
    let rising = ha < 0.0;
    for _ in 0..2000 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if (h(m) < 0.0) == rising {
            a = m;
        } else {
            b = m;
        }
        if b - a <= 1e-15 * m {
            break;
        }
    }
    let theta = if h(a).abs() <= h(b).abs() { a } else { b };
    Ok(ThetaStar { theta, residual: h(theta).abs() })
}

/// `(kappa'(theta*) - pi^2 theta* kappa''(theta*) / (2 ln^2 N)) / step`.
pub fn speed_second_order(spec: &impl Cumulant, n: u64) -> Result<f64, BrwError> {
    if n < 2 {
        return Err(super::invalid("N", format!("must be at least 2, got {n}")));
    }
    let t = solve_theta_star(spec)?.theta;
    let l = (n as f64).ln();
    Ok((spec.kappa_prime(t) - PI * PI * t * spec.kappa_double_prime(t) / (2.0 * l * l)) / spec.step())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statistics::velocity_formula;
    use proptest::prelude::*;

    #[test]
    fn bbm_cumulant_values() {
        assert!((kappa_bbm(2f64.sqrt()).unwrap() - 2.0).abs() < 1e-15);
        assert!((kappa_bbm(1e-9).unwrap() - 1.0).abs() < 1e-15);
        assert!((KappaBbm.kappa_prime(2f64.sqrt()) - 2f64.sqrt()).abs() < 1e-15);
        assert!(kappa_bbm(0.0).is_err());
        assert!(kappa_bbm(-1.0).is_err());
    }

    #[test]
    fn hat_cumulant_values() {
        let c = (2.0 - (-1f64).exp()).ln();
        assert!((c - 0.489_880_125_644_75).abs() < 1e-12);
        assert!((kappa_hat_delta(1e-12, 1.0).unwrap() - c).abs() < 1e-12);
        assert!(kappa_hat_delta(1.0, 1e-12).unwrap().abs() < 1e-11);
        assert!((kappa_hat_delta(2f64.sqrt(), 1e-3).unwrap() - 0.001999).abs() < 1e-6);
        assert!(kappa_hat_delta(1.0, 0.0).is_err());
        assert!(kappa_hat_delta(0.0, 1.0).is_err());
    }

    #[test]
    fn theta_star_roots() {
        let t = solve_theta_star(&KappaBbm).unwrap();
        assert!((t.theta - 2f64.sqrt()).abs() < 1e-14);
        assert!(t.residual < 1e-10);
        let k = KappaHatDelta::new(1.0).unwrap();
        let t = solve_theta_star(&k).unwrap();
        let closed = (2.0 * (2.0 - (-1f64).exp()).ln()).sqrt();
        assert!((t.theta - closed).abs() < 1e-13);
        assert!((t.theta - 0.989_828_394_869_282).abs() < 1e-12);
        assert!(t.residual < 1e-10);
    }

    #[test]
    fn no_sign_change_is_reported() {
        assert!(matches!(solve_theta_star_in(&KappaBbm, 2.0, 3.0), Err(BrwError::NoSignChange { .. })));
    }

    #[test]
    fn bbm_speed_matches_velocity_formula() {
        for n in [10u64, 100, 10_000, 100_000_000] {
            let s = speed_second_order(&KappaBbm, n).unwrap();
            assert!((s - velocity_formula(n).unwrap()).abs() < 1e-12, "N={n}");
        }
        assert!(speed_second_order(&KappaBbm, 1).is_err());
    }

    #[test]
    fn hat_speed_at_unit_delta() {
        let s = speed_second_order(&KappaHatDelta::new(1.0).unwrap(), 100).unwrap();
        // theta* = 0.989828, correction pi^2 * 0.989828 / (2 ln^2 100) = 0.230324.
        assert!((s - 0.759_504_874_906_269).abs() < 1e-12, "{s}");
    }

    #[test]
    fn hat_speed_increases_to_the_limit() {
        let target = velocity_formula(100).unwrap();
        let speeds: Vec<f64> = [1.0, 0.1, 0.01, 0.001]
            .iter()
            .map(|&d| speed_second_order(&KappaHatDelta::new(d).unwrap(), 100).unwrap())
            .collect();
        assert!(speeds.windows(2).all(|w| w[0] < w[1]), "{speeds:?}");
        assert!(speeds.iter().all(|s| *s < target));
        assert!((speeds[3] - target).abs() < 1e-3);
    }

    #[test]
    fn numerical_derivatives_agree_with_analytic() {
        let custom = CustomCumulant::new(|t| 1.0 + 0.5 * t * t, (0.0, f64::INFINITY), 1.0).unwrap();
        let t = solve_theta_star(&custom).unwrap();
        assert!((t.theta - 2f64.sqrt()).abs() < 1e-8);
        assert!(t.residual < 1e-10);
        assert!((custom.kappa_double_prime(1.3) - 1.0).abs() < 1e-6);
        let s = speed_second_order(&custom, 1000).unwrap();
        assert!((s - velocity_formula(1000).unwrap()).abs() < 1e-6);
        assert!(custom.is_convex_on(0.1, 5.0, 50));
    }

    proptest! {
        #[test]
        fn hat_root_matches_closed_form(delta in 1e-4f64..10.0) {
            let k = KappaHatDelta::new(delta).unwrap();
            let t = solve_theta_star(&k).unwrap();
            let closed = (2.0 / delta * (2.0 - (-delta).exp()).ln()).sqrt();
            prop_assert!((t.theta - closed).abs() < 1e-12 * closed.max(1.0));
            prop_assert!(t.residual < 1e-10);
        }
    }
}
