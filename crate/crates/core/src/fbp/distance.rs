use crate::engine::Configuration;

use super::state::PdeState;

/// Integral of `|F(x) - c|` over `[a, b]` where `F` is linear from `fa` to `fb`.
fn abs_linear(a: f64, b: f64, fa: f64, fb: f64, c: f64) -> f64 {
    let (ya, yb) = (fa - c, fb - c);
    let w = b - a;
    if ya * yb >= 0.0 {
        0.5 * w * (ya.abs() + yb.abs())
    } else {
        // Split at the crossing.
        let r = ya.abs() / (ya.abs() + yb.abs());
        0.5 * w * (r * ya.abs() + (1.0 - r) * yb.abs())
    }
}

/// Wasserstein-1 distance between the empirical measure of `config` and the
/// density of `state`, as the integral of `|F_emp - F_pde|`. Each grid cell
/// carries mass `h u_k` spread uniformly over its width. The integral runs
/// over the smallest interval holding `[-L, L]` and every particle, so
/// particles outside the grid are charged their full transport cost.
pub fn distance_empirical_pde(config: &Configuration, state: &PdeState) -> f64 {
    let atoms = config.as_slice();
    let n = atoms.len() as f64;
    let h = state.h();
    let masses: Vec<f64> = state.cells().map(|(_, m)| m).collect();
    let left0 = state.cells().next().map_or(0.0, |(left, _)| left);
    let mut cum = Vec::with_capacity(masses.len() + 1);
    cum.push(0.0);
    for m in &masses {
        cum.push(cum[cum.len() - 1] + m);
    }
    let total_mass = cum[masses.len()];
    let cdf = |x: f64| -> f64 {
        let t = (x - left0) / h;
        if t <= 0.0 {
            return 0.0;
        }
        let j = t.floor() as usize;
        if j >= masses.len() {
            return total_mass;
        }
        cum[j] + masses[j] * (t - j as f64)
    };
    let mut points: Vec<f64> = (0..=masses.len()).map(|k| left0 + k as f64 * h).chain(atoms.iter().copied()).collect();
    points.sort_by(f64::total_cmp);
    points.dedup();

    let mut total = 0.0;
    let mut below = 0usize;
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        while below < atoms.len() && atoms[below] <= a {
            below += 1;
        }
        total += abs_linear(a, b, cdf(a), cdf(b), below as f64 / n);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbp::PdeParams;

    #[test]
    fn linear_piece_integral() {
        // |x - 0.5| over [0, 1] is 1/4.
        assert!((abs_linear(0.0, 1.0, 0.0, 1.0, 0.5) - 0.25).abs() < 1e-15);
        assert!((abs_linear(0.0, 2.0, 1.0, 1.0, 0.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn quantile_atoms_are_close() {
        let p = PdeParams::new(0.005, 0.0, 1.0);
        let s = PdeState::steady_state(&p).unwrap();
        for n in [10usize, 50, 200, 1000] {
            let atoms: Vec<f64> = (1..=n).map(|i| s.quantile((i as f64 - 0.5) / n as f64)).collect();
            let d = distance_empirical_pde(&Configuration::new(atoms).unwrap(), &s);
            assert!(d < 2.0 / n as f64, "N={n}: {d}");
        }
    }

    #[test]
    fn disjoint_supports() {
        let p = PdeParams::new(0.01, 0.0, 1.0);
        let s = PdeState::steady_state(&p).unwrap();
        let gap = 5.0 - s.radius();
        let d = distance_empirical_pde(&Configuration::uniform(20, 5.0).unwrap(), &s);
        assert!(d >= gap - p.h, "{d} vs {gap}");
        // Transport of a symmetric law to a point mass at 5 costs exactly 5.
        assert!((d - 5.0).abs() < 1e-9);
    }

    #[test]
    fn matches_brute_force_quadrature() {
        let p = PdeParams::new(0.05, 0.0, 1.0);
        let s = PdeState::uniform(&p, -0.5, 0.7).unwrap();
        let cfg = Configuration::new(vec![-0.9, -0.1, 0.0, 0.33, 0.34, 1.2]).unwrap();
        let d = distance_empirical_pde(&cfg, &s);
        let (lo, hi, m) = (-4.0, 4.0, 400_000);
        let dx = (hi - lo) / m as f64;
        let brute: f64 = (0..m)
            .map(|i| {
                let x = lo + (i as f64 + 0.5) * dx;
                let fe = cfg.as_slice().iter().filter(|a| **a <= x).count() as f64 / 6.0;
                (s.cdf(x) - fe).abs() * dx
            })
            .sum();
        assert!((d - brute).abs() < 1e-4, "{d} vs {brute}");
    }
}
