mod common;

use boem_core::diagnostics::loglik;
use boem_core::engine::ExactBackend;
use boem_core::exact::{block_statistic, forgetting_gap, forward, forward_backward, smoothed_functional};
use boem_core::model::FiniteHmm;
use common::{brute_force, random_finite, random_law};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forward_backward_matches_path_enumeration(seed in any::<u64>(), d in 2usize..=3, n in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = random_finite(d, &mut rng);
        let chi = random_law(d, &mut rng);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let bf = brute_force(&theta, &chi, &y);
        let sm = forward_backward(&theta, &chi, &y).unwrap();
        for (a, b) in sm.marginals.iter().zip(&bf.marginals) {
            prop_assert!(max_abs_diff(a, b) < 1e-10);
        }
        for (a, b) in sm.pairs.iter().zip(&bf.pairs) {
            prop_assert!(max_abs_diff(a, b) < 1e-10);
        }
        prop_assert!((sm.loglik - bf.loglik).abs() < 1e-10);
        prop_assert!((forward(&theta, &chi, &y).unwrap().loglik() - bf.loglik).abs() < 1e-10);
        let be = ExactBackend { model: FiniteHmm::with_states(d) };
        prop_assert!((loglik(&be, &theta, &chi, &y).unwrap() - bf.loglik).abs() < 1e-10);
    }

    #[test]
    fn block_statistic_matches_path_enumeration(seed in any::<u64>(), d in 2usize..=3, n in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = random_finite(d, &mut rng);
        let chi = random_law(d, &mut rng);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let bf = brute_force(&theta, &chi, &y);
        let b = block_statistic(&theta, &chi, &y).unwrap();
        prop_assert!(max_abs_diff(b.stat.values(), &bf.stat) < 1e-10);
        prop_assert!((b.loglik - bf.loglik).abs() < 1e-10);
        prop_assert_eq!(b.stat.count(), n);
    }

    #[test]
    fn smoothed_functional_matches_path_enumeration(seed in any::<u64>(), d in 2usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = random_finite(d, &mut rng);
        let chi = random_law(d, &mut rng);
        let r = rng.random_range(0..3);
        let t = r + rng.random_range(1..=6);
        let s = rng.random_range(r + 1..=t);
        let y: Vec<f64> = (0..=t + 2).map(|_| rng.random_range(-3.0..3.0)).collect();
        let table: Vec<f64> = (0..d * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h = |i: usize, j: usize, yy: f64| vec![table[i * d + j] * yy, 1.0];
        let got = smoothed_functional(&theta, &chi, r, s, t, h, &y).unwrap();
        let bf = brute_force(&theta, &chi, &y[r + 1..=t]);
        let pair = &bf.pairs[s - r - 1];
        let want: f64 = (0..d * d).map(|k| pair[k] * table[k] * y[s]).sum();
        prop_assert!((got[0] - want).abs() < 1e-10);
        prop_assert!((got[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pair_marginals_sum_to_adjacent_marginals(seed in any::<u64>(), d in 2usize..=5, n in 1usize..=30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = random_finite(d, &mut rng);
        let chi = random_law(d, &mut rng);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
        let sm = forward_backward(&theta, &chi, &y).unwrap();
        for (k, pair) in sm.pairs.iter().enumerate() {
            for i in 0..d {
                let row: f64 = (0..d).map(|j| pair[i * d + j]).sum();
                let col: f64 = (0..d).map(|j| pair[j * d + i]).sum();
                prop_assert!((row - sm.marginals[k][i]).abs() < 1e-12);
                prop_assert!((col - sm.marginals[k + 1][i]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn terminal_law_is_the_last_smoothed_marginal() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let theta = random_finite(3, &mut rng);
    let chi = random_law(3, &mut rng);
    let y: Vec<f64> = (0..7).map(|_| rng.random_range(-2.0..2.0)).collect();
    let bf = brute_force(&theta, &chi, &y);
    let b = block_statistic(&theta, &chi, &y).unwrap();
    assert!(max_abs_diff(b.terminal.probs(), &bf.marginals[7]) < 1e-10);
}

#[test]
fn smoothing_functionals_form_a_cauchy_sequence() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let origin = 21;
    for _ in 0..20 {
        let theta = random_finite(3, &mut rng);
        let chi = random_law(3, &mut rng);
        let y: Vec<f64> = (0..=origin + 40).map(|_| rng.random_range(-3.0..3.0)).collect();
        let table: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h = |i: usize, j: usize, _y: f64| table[i * 3 + j];
        let level = |k: usize| forgetting_gap(&theta, &chi, &chi, origin - k, k, k, origin, origin + k, h, &y).unwrap();
        let (a, b) = (level(5), level(10));
        assert!(a.measured <= a.bound + 1e-12);
        assert!(b.measured <= b.bound + 1e-12);
        let rho = boem_core::exact::contraction_bounds(&theta).unwrap().rho;
        assert!(b.bound <= rho.powi(5) * a.bound * (1.0 + 1e-12));
        let c = forgetting_gap(&theta, &chi, &chi, origin - 20, 0, 0, origin, origin + 20, h, &y).unwrap();
        assert_eq!(c.measured, 0.0);
    }
}
