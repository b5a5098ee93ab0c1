use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::velocity::VelocityEstimate;
use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    SubCritical,
    Critical,
    SuperCritical,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::SubCritical => "sub-critical",
            Regime::Critical => "critical",
            Regime::SuperCritical => "super-critical",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeReport {
    pub mu: f64,
    pub mu_c_hat: f64,
    pub mu_c_stderr: f64,
    pub regime: Regime,
    /// Set when the measured slopes contradict the label.
    pub inconclusive: bool,
    pub evidence: BTreeMap<String, f64>,
}

/// Label `mu` by comparing `|mu|` with `mu_c_hat ± 3 stderr`, then check the
/// label against measured front slopes when they are supplied.
///
/// The expected common slope of `X_1` and `X_N` is `(|mu| - mu_c) sign(mu)`
/// above criticality and zero otherwise. A mismatch of more than three
/// combined standard errors, or a spread between the two slopes of more than
/// three standard errors, marks the report inconclusive; the label itself
/// always follows the `|mu|` rule.
pub fn classify_regime(
    mu: f64,
    mu_c_hat: f64,
    mu_c_stderr: f64,
    diagnostics: Option<&VelocityEstimate>,
) -> Result<RegimeReport, StatsError> {
    if !(mu_c_hat > 0.0 && mu_c_hat.is_finite()) {
        return Err(super::invalid("mu_c_hat", format!("must be positive, got {mu_c_hat}")));
    }
    if !(mu_c_stderr >= 0.0 && mu_c_stderr.is_finite()) {
        return Err(super::invalid("mu_c_stderr", format!("must be nonnegative, got {mu_c_stderr}")));
    }
    if !mu.is_finite() {
        return Err(super::invalid("mu", "must be finite"));
    }
    let margin = 3.0 * mu_c_stderr;
    let regime = if mu.abs() < mu_c_hat - margin {
        Regime::SubCritical
    } else if mu.abs() > mu_c_hat + margin {
        Regime::SuperCritical
    } else {
        Regime::Critical
    };
    let expected = match regime {
        Regime::SuperCritical => (mu.abs() - mu_c_hat) * mu.signum(),
        _ => 0.0,
    };
    let mut evidence = BTreeMap::new();
    evidence.insert("abs_mu".to_string(), mu.abs());
    evidence.insert("margin".to_string(), margin);
    evidence.insert("expected_slope".to_string(), expected);
    let mut inconclusive = false;
    if let Some(v) = diagnostics {
        let slope = v.common_slope();
        // The expectation inherits the uncertainty of mu_c_hat above criticality.
        let se_expected = if regime == Regime::SuperCritical { mu_c_stderr } else { 0.0 };
        let se = (v.common_stderr.powi(2) + se_expected.powi(2)).sqrt();
        let z = if se > 0.0 {
            (slope - expected) / se
        } else if slope == expected {
            0.0
        } else {
            f64::INFINITY
        };
        let spread = v.v_max_hat - v.v_min_hat;
        evidence.insert("slope_leftmost".to_string(), v.v_min_hat);
        evidence.insert("slope_rightmost".to_string(), v.v_max_hat);
        evidence.insert("common_slope".to_string(), slope);
        evidence.insert("slope_stderr".to_string(), se);
        evidence.insert("slope_z".to_string(), z);
        evidence.insert("slope_spread".to_string(), spread);
        let spread_bad = spread.abs() > 3.0 * v.stderr.max(v.gap_stderr);
        inconclusive = z.abs() > 3.0 || spread_bad;
    }
    evidence.insert("inconclusive".to_string(), if inconclusive { 1.0 } else { 0.0 });
    Ok(RegimeReport { mu, mu_c_hat, mu_c_stderr, regime, inconclusive, evidence })
}
