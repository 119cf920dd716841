#![allow(dead_code)]

use causal_shap::{build_chain_graph, ChainGraph, FeatureSpace, GaussianModel, JointTable, TableModel};
use nalgebra::DMatrix;
use proptest::test_runner::{Config, RngSeed};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn config(cases: u32, seed: u64) -> Config {
    Config { cases, rng_seed: RngSeed::Fixed(seed), failure_persistence: None, ..Config::default() }
}

/// Covariance `A Aᵀ + ½ I` with standard-normal-ish entries in `A`.
pub fn random_gaussian<R: Rng>(rng: &mut R, n: usize) -> GaussianModel {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let cov = &a * a.transpose() + DMatrix::identity(n, n) * 0.5;
    let mean = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    GaussianModel::new(FeatureSpace::continuous(n), mean, cov).unwrap()
}

/// Random ordered partition of the features into chain components.
pub fn random_graph<R: Rng>(rng: &mut R, space: FeatureSpace, allow_confounded: bool) -> ChainGraph {
    let n = space.len();
    let mut features: Vec<usize> = (0..n).collect();
    features.shuffle(rng);
    let mut components = Vec::new();
    let mut rest = &features[..];
    while !rest.is_empty() {
        let k = rng.random_range(1..=rest.len());
        components.push(rest[..k].to_vec());
        rest = &rest[k..];
    }
    let confounded: Vec<bool> = components.iter().map(|_| allow_confounded && rng.random_bool(0.5)).collect();
    build_chain_graph(space, &components, &confounded, None).unwrap()
}

/// Joint table over `n` binary features with every cell positive.
pub fn random_table<R: Rng>(rng: &mut R, n: usize) -> JointTable {
    let mut p: Vec<f64> = (0..1 << n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    JointTable::new(FeatureSpace::categorical(&vec![2; n]), p).unwrap()
}

pub fn random_outputs<R: Rng>(rng: &mut R, n: usize) -> TableModel {
    TableModel::new(vec![2; n], (0..1 << n).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap()
}

pub fn random_levels<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| f64::from(rng.random_range(0..2u8))).collect()
}

pub fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
    assert!((a - b).abs() <= tol, "{what}: {a} vs {b} (tolerance {tol})");
}
