mod common;

use causal_shap::{fit_gaussian, DataMatrix, FeatureSpace};
use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(config(100, 0x5eed_0004))]

    #[test]
    fn conditional_covariance_ignores_values(seed in any::<u64>(), n in 2usize..=6, k in 1usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_gaussian(&mut rng, n);
        let k = k.min(n - 1);
        let given: Vec<usize> = sample(&mut rng, n, k).into_vec();
        let a: Vec<(usize, f64)> = given.iter().map(|&j| (j, rng.random_range(-5.0..5.0))).collect();
        let b: Vec<(usize, f64)> = given.iter().map(|&j| (j, rng.random_range(-5.0..5.0))).collect();
        let ca = model.condition_gaussian(&a).unwrap();
        let cb = model.condition_gaussian(&b).unwrap();
        prop_assert_eq!(&ca.covariance, &cb.covariance);
        prop_assert_eq!(&ca.features, &cb.features);
    }

    #[test]
    fn conditional_covariance_is_positive_definite(seed in any::<u64>(), n in 2usize..=6, k in 1usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_gaussian(&mut rng, n);
        let given: Vec<(usize, f64)> = sample(&mut rng, n, k.min(n - 1)).into_iter().map(|j| (j, 1.0)).collect();
        let c = model.condition_gaussian(&given).unwrap();
        prop_assert_eq!(&c.covariance, &c.covariance.transpose());
        let eig = c.covariance.clone().symmetric_eigen();
        prop_assert!(eig.eigenvalues.iter().all(|&l| l > 0.0));
        // conditioning never increases a marginal variance
        for (a, &j) in c.features.iter().enumerate() {
            prop_assert!(c.covariance[(a, a)] <= model.covariance()[(j, j)] + 1e-12);
        }
    }

    /// Averaging the conditional mean over the given features recovers the
    /// unconditional mean, because it is affine in the given values.
    #[test]
    fn conditional_mean_at_mean_is_marginal_mean(seed in any::<u64>(), n in 2usize..=6, k in 1usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_gaussian(&mut rng, n);
        let given: Vec<(usize, f64)> = sample(&mut rng, n, k.min(n - 1)).into_iter().map(|j| (j, model.mean()[j])).collect();
        let c = model.condition_gaussian(&given).unwrap();
        for (a, &j) in c.features.iter().enumerate() {
            prop_assert!((c.mean[a] - model.mean()[j]).abs() <= 1e-10);
        }
    }

    #[test]
    fn json_round_trip(seed in any::<u64>(), n in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_gaussian(&mut rng, n);
        let back = causal_shap::GaussianModel::from_json(&model.to_json()).unwrap();
        prop_assert_eq!(back.mean(), model.mean());
        prop_assert_eq!(back.covariance(), model.covariance());
    }
}

#[test]
fn fitted_model_recovers_generating_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let truth = random_gaussian(&mut rng, 4);
    let l = truth.covariance().clone().cholesky().unwrap().l();
    let m = 50_000;
    let mut values = Vec::with_capacity(m * 4);
    for _ in 0..m {
        let z = nalgebra::DVector::from_fn(4, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        values.extend((truth.mean() + &l * z).iter());
    }
    let data = DataMatrix::new(FeatureSpace::continuous(4), values).unwrap();
    let fit = fit_gaussian(&data, Some(0.0)).unwrap();
    for j in 0..4 {
        let se = (truth.covariance()[(j, j)] / m as f64).sqrt();
        assert!((fit.mean()[j] - truth.mean()[j]).abs() < 4.5 * se);
    }
    let diff: DMatrix<f64> = fit.covariance() - truth.covariance();
    assert!(diff.abs().max() < 0.05, "max covariance error {}", diff.abs().max());
}
