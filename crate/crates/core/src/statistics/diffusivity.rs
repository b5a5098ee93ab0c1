use serde::Serialize;

use crate::engine::Trajectory;

use super::paths::leftmost_at;
use super::regression::sample_variance;
use super::StatsError;

const MIN_REPLICAS: usize = 30;

/// Diffusion constants of the centred front. Only the ratio `d_eff` is
/// estimated; the regeneration gap and the per-regeneration variance are
/// not separately identifiable from variance growth and stay `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiffusionConstants {
    pub beta: Option<f64>,
    pub sigma2: Option<f64>,
    pub d_eff: f64,
    /// Jackknife standard error of `d_eff`.
    pub d_eff_stderr: f64,
    pub t_eval: f64,
    pub replicas: usize,
}

/// `Var(Z_1(t_eval)) / t_eval` across replicas.
pub fn estimate_diffusivity(replicas: &[Trajectory], t_eval: f64) -> Result<DiffusionConstants, StatsError> {
    let values = replicas.iter().map(|r| leftmost_at(r, t_eval)).collect::<Result<Vec<_>, _>>()?;
    diffusivity_from_values(&values, t_eval)
}

/// [`estimate_diffusivity`] on precomputed values of `Z_1(t_eval)`.
pub fn diffusivity_from_values(values: &[f64], t_eval: f64) -> Result<DiffusionConstants, StatsError> {
    if values.len() < MIN_REPLICAS {
        return Err(StatsError::TooFewSamples { needed: MIN_REPLICAS, got: values.len() });
    }
    if !(t_eval > 0.0) {
        return Err(super::invalid("t_eval", format!("must be positive, got {t_eval}")));
    }
    if let Some(index) = values.iter().position(|v| v.is_nan()) {
        return Err(StatsError::NanSample { index });
    }
    let n = values.len();
    let full = sample_variance(values) / t_eval;
    // Leave-one-out variances from running sums, O(n).
    let sum: f64 = values.iter().sum();
    let sum_sq: f64 = values.iter().map(|v| v * v).sum();
    let m = (n - 1) as f64;
    let loo: Vec<f64> = values
        .iter()
        .map(|v| {
            let s = sum - v;
            let q = sum_sq - v * v;
            ((q - s * s / m) / (m - 1.0)).max(0.0) / t_eval
        })
        .collect();
    let loo_mean = loo.iter().sum::<f64>() / n as f64;
    let jk_var = (n as f64 - 1.0) / n as f64 * loo.iter().map(|x| (x - loo_mean).powi(2)).sum::<f64>();
    Ok(DiffusionConstants { beta: None, sigma2: None, d_eff: full, d_eff_stderr: jk_var.sqrt(), t_eval, replicas: n })
}
