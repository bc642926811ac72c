mod common;

use boem_core::exact::{block_statistic, CategoricalLaw};
use boem_core::model::{FiniteHmm, Propagate, StochVol, SvParams};
use boem_core::particle::{block_statistic_pf, pf_step_in_place, systematic_resample, ParticleCloud};
use boem_core::rng::{stream, Purpose};
use boem_core::simulate::simulate;
use common::random_finite;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn weights_normalized_and_ancestors_in_range(seed in any::<u64>(), n in 2usize..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = StochVol::default();
        let theta = SvParams::new(rng.random_range(-0.95..0.95), rng.random_range(0.05..1.0), rng.random_range(0.2..3.0));
        let mut cloud = ParticleCloud::from_stationary(&model, &theta, n, &mut rng).unwrap();
        for _ in 0..30 {
            let y = model.sample_emission(&theta, model.sample_stationary(&theta, &mut rng), &mut rng);
            pf_step_in_place(&model, &theta, &mut cloud, y, 1.0, 1.0, &mut rng).unwrap();
            let total: f64 = cloud.weights().iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
            prop_assert!(cloud.weights().iter().all(|&w| w >= 0.0));
            prop_assert!(cloud.ancestors().iter().all(|&a| a < n));
        }
    }

    #[test]
    fn systematic_resampling_draws_valid_indices(seed in any::<u64>(), n in 1usize..100) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let z: f64 = raw.iter().sum::<f64>().max(1e-300);
        let w: Vec<f64> = raw.iter().map(|v| v / z).collect();
        let idx = systematic_resample(&w, &mut rng);
        prop_assert_eq!(idx.len(), n);
        prop_assert!(idx.iter().all(|&i| i < n));
        prop_assert!(idx.windows(2).all(|p| p[0] <= p[1]));
    }
}

#[test]
fn systematic_resampling_is_unbiased() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let n = 10;
    let raw: Vec<f64> = (0..n).map(|_| 0.3 + rng.random::<f64>()).collect();
    let z: f64 = raw.iter().sum();
    let w: Vec<f64> = raw.iter().map(|v| v / z).collect();
    let draws = 100_000;
    let mut counts = vec![0usize; n];
    for _ in 0..draws {
        for i in systematic_resample(&w, &mut rng) {
            counts[i] += 1;
        }
    }
    for i in 0..n {
        let mean = counts[i] as f64 / draws as f64;
        let expect = n as f64 * w[i];
        assert!((mean - expect).abs() <= 0.02 * expect, "particle {i}: {mean} vs {expect}");
    }
}

#[test]
fn particle_statistic_is_asymptotically_unbiased() {
    let model = FiniteHmm::with_states(3);
    let theta = random_finite(3, &mut ChaCha8Rng::seed_from_u64(12));
    let y = simulate(&model, &theta, 20, &mut ChaCha8Rng::seed_from_u64(13)).observations;
    let exact = block_statistic(&theta, &CategoricalLaw::stationary(&theta), &y).unwrap().stat;
    let seeds = 200;
    let dim = exact.dim();
    let mut sum = vec![0.0; dim];
    let mut sum2 = vec![0.0; dim];
    for seed in 0..seeds {
        let mut rng = stream(99, seed, Purpose::Smoother);
        let cloud = ParticleCloud::from_stationary(&model, &theta, 500, &mut rng).unwrap();
        let (s, _) = block_statistic_pf(&model, &theta, &cloud, &y, 500, &mut rng).unwrap();
        for (k, v) in s.values().iter().enumerate() {
            sum[k] += v;
            sum2[k] += v * v;
        }
    }
    let m = seeds as f64;
    for k in 0..dim {
        let mean = sum[k] / m;
        let var = (sum2[k] / m - mean * mean).max(0.0) * m / (m - 1.0);
        let se = (var / m).sqrt();
        let gap = (mean - exact.values()[k]).abs();
        assert!(gap <= 3.0 * se + 1e-12, "component {k}: mean {mean} exact {} se {se}", exact.values()[k]);
    }
}
