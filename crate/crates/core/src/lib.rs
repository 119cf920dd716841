//! Causal Shapley values: feature attributions whose value function
//! conditions by intervention on a causal chain graph.

pub mod data;
pub mod discrete;
pub mod error;
pub mod feature;
pub mod gaussian;
pub mod graph;
pub mod numeric;
pub mod oracles;
pub mod permutation;
pub mod predictor;
pub mod report;
pub mod sampling;
pub mod shapley;
pub mod value;

pub use data::DataMatrix;
pub use discrete::{JointTable, TableModel};
pub use error::{DistributionError, Error, GraphError, PredictError, Result};
pub use feature::{Coalition, Feature, FeatureKind, FeatureSet, FeatureSpace};
pub use gaussian::{fit_gaussian, ConditionalGaussian, GaussianModel};
pub use graph::{build_chain_graph, ChainComponent, ChainGraph, Factor, FactorPlan};
pub use oracles::{toy_interventional_reduction, toy_shapley, xor_shapley, ToyParams, ToyStructure, XorSpec, XorStructure};
pub use permutation::{
    ExtensionSampler, OrderConstraints, Permutation, PermutationDistribution, PermutationSampling, Symmetry,
};
pub use predictor::{LinearModel, PredictionModel, Predictor};
pub use report::{AttributionReport, FeatureAttribution, ReportMeta};
pub use sampling::{sample_interventional, ConfoundedDraw, InterventionalSampler, Noise, RngStream};
pub use shapley::{contribution, decompose_effects, shapley_values, ContributionRecord, ShapleyOptions};
pub use value::{
    estimate_value, exact_value_discrete, exact_value_linear, DiscreteValues, LinearValues, Memoized,
    MonteCarloValues, SamplerConfig, ValueEstimate, ValueFunction, Variant,
};
