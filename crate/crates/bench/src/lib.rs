//! Fixtures shared by the benchmarks.

use causal_shap::{build_chain_graph, ChainGraph, FeatureSpace, GaussianModel, LinearModel};
use nalgebra::DMatrix;

/// A seven-feature Gaussian with a three-component chain graph, a linear
/// model and an instance to explain.
pub struct Fixture {
    pub model: GaussianModel,
    pub graph: ChainGraph,
    pub linear: LinearModel,
    pub x: Vec<f64>,
}

pub fn fixture(n: usize) -> Fixture {
    assert!(n >= 3, "need one feature per component");
    let space = FeatureSpace::continuous(n);
    let cov = DMatrix::from_fn(n, n, |i, j| 0.6f64.powi(i.abs_diff(j) as i32));
    let model = GaussianModel::new(space.clone(), vec![0.0; n], cov).expect("positive definite");
    let split = [1, 1 + (n - 1) / 3, n];
    let components: Vec<Vec<usize>> = vec![(0..split[0]).collect(), (split[0]..split[1]).collect(), (split[1]..split[2]).collect()];
    let graph = build_chain_graph(space, &components, &[false, true, false], None).expect("valid partition");
    let linear = LinearModel::new(0.5, (0..n).map(|i| 1.0 - 0.2 * i as f64).collect());
    let x = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
    Fixture { model, graph, linear, x }
}
