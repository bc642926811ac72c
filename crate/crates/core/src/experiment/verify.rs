use rand::Rng;

use crate::error::Result;
use crate::exact::{forgetting_gap, CategoricalLaw};
use crate::model::FiniteHmmParams;

/// Slack for floating-point rounding when comparing a measured gap with a
/// bound that can be exactly zero.
const ROUNDING: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialReport {
    pub trials: usize,
    pub violations: usize,
    /// Largest `measured - bound` seen.
    pub worst_excess: f64,
}

/// Random row-stochastic matrix with entries at least `floor / d`, random
/// means in `[-3, 3]` and a random variance.
pub fn random_finite_params<R: Rng + ?Sized>(d: usize, floor: f64, rng: &mut R) -> FiniteHmmParams {
    let mut transition = Vec::with_capacity(d * d);
    for _ in 0..d {
        let row: Vec<f64> = (0..d).map(|_| floor + rng.random::<f64>()).collect();
        let z: f64 = row.iter().sum();
        transition.extend(row.iter().map(|v| v / z));
    }
    let means = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
    FiniteHmmParams::new(transition, means, rng.random_range(0.2..2.0))
}

fn random_law<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CategoricalLaw {
    let w: Vec<f64> = (0..d).map(|_| rng.random::<f64>() + 1e-3).collect();
    CategoricalLaw::from_weights(&w).expect("positive weights")
}

/// Draws random `(χ, χ̃, h, r, ℓ₁, ℓ₂, s, t, y)` and checks that the measured
/// gap between the two smoothing functionals stays below the forgetting
/// bound. A third of the trials share the initial law and start, another
/// third share the end, exercising the one-sided bounds.
pub fn forgetting_trials<R: Rng + ?Sized>(theta: &FiniteHmmParams, trials: usize, rng: &mut R) -> Result<TrialReport> {
    let d = theta.states();
    let lo = theta.means.iter().copied().fold(f64::INFINITY, f64::min) - 2.0;
    let hi = theta.means.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 2.0;
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for k in 0..trials {
        let chi = random_law(d, rng);
        let (chi_tilde, lag_start, lag_end) = match k % 3 {
            0 => (chi.clone(), 0, rng.random_range(1..6)),
            1 => (random_law(d, rng), rng.random_range(1..6), 0),
            _ => (random_law(d, rng), rng.random_range(0..6), rng.random_range(0..6)),
        };
        let r = lag_start + rng.random_range(0..5);
        let s = r + rng.random_range(1..10);
        let t = s + rng.random_range(0..10);
        let y: Vec<f64> = (0..=t + lag_end).map(|_| rng.random_range(lo..hi)).collect();
        let table: Vec<f64> = (0..d * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let slope: Vec<f64> = (0..d).map(|_| rng.random_range(-0.5..0.5)).collect();
        let h = |i: usize, j: usize, yy: f64| table[i * d + j] + slope[j] * yy;
        let gap = forgetting_gap(theta, &chi, &chi_tilde, r, lag_start, lag_end, s, t, h, &y)?;
        let excess = gap.measured - gap.bound;
        worst = worst.max(excess);
        if excess > ROUNDING {
            violations += 1;
        }
    }
    Ok(TrialReport { trials, violations, worst_excess: worst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_models_respect_the_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let theta = random_finite_params(3, 0.2, &mut rng);
            let rep = forgetting_trials(&theta, 30, &mut rng).unwrap();
            assert_eq!(rep.violations, 0, "{rep:?}");
        }
    }
}
