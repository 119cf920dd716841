use thiserror::Error;

/// Structural validation failures for feature spaces and chain graphs.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("feature names must be non-empty")]
    EmptyFeatureName,
    #[error("duplicate feature name `{0}`")]
    DuplicateFeatureName(String),
    #[error("categorical feature `{0}` has no levels")]
    NoLevels(String),
    #[error("categorical feature `{0}` lists a level twice")]
    DuplicateLevel(String),
    #[error("at most {max} features are supported, got {0}", max = crate::feature::MAX_FEATURES)]
    TooManyFeatures(usize),
    #[error("component {0} is empty")]
    EmptyComponent(usize),
    #[error("feature {feature} appears in component {component} but was already assigned")]
    DuplicateFeature { feature: usize, component: usize },
    #[error("feature {0} is not assigned to any component")]
    MissingFeature(usize),
    #[error("unknown feature index {0}")]
    UnknownFeature(usize),
    #[error("component {component} references unknown feature index {feature}")]
    UnknownFeatureInComponent { feature: usize, component: usize },
    #[error("unknown feature name `{name}` in component {component}")]
    UnknownFeatureName { name: String, component: usize },
    #[error("component {component} lists unknown parent component {parent}")]
    UnknownParent { component: usize, parent: usize },
    #[error("parent relation is cyclic through component {0}")]
    CyclicParents(usize),
    #[error("expected {expected} entries for {what}, got {got}")]
    LengthMismatch { what: &'static str, expected: usize, got: usize },
    #[error("permutation of length {got} is not a bijection on {n} features")]
    InvalidPermutation { n: usize, got: usize },
    #[error("malformed graph file: {0}")]
    Format(String),
}

/// Failures while fitting or sampling the observational distribution.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistributionError {
    #[error("need at least 2 observations to fit, got {0}")]
    TooFewRows(usize),
    #[error("regularization must be a finite non-negative number, got {0}")]
    InvalidRegularization(f64),
    #[error("covariance is not positive definite (smallest eigenvalue {min_eigenvalue:e}); increase regularization")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("conditioning block over features {features:?} is singular")]
    SingularConditioning { features: Vec<usize> },
    #[error("feature `{feature}` row {row}: unknown level `{level}`")]
    UnknownLevel { feature: String, row: usize, level: String },
    #[error("feature `{feature}` row {row}: cannot parse `{value}` as a number")]
    BadNumber { feature: String, row: usize, value: String },
    #[error("data header mismatch: {0}")]
    Header(String),
    #[error("row {row} has {got} values, expected {expected}")]
    RowLength { row: usize, expected: usize, got: usize },
    #[error("categorical feature {0} cannot be sampled conditionally or used as a conditioning variable")]
    UnsupportedCategorical(usize),
    #[error("feature {0} is categorical; a continuous feature is required here")]
    NotContinuous(usize),
    #[error("joint table: {0}")]
    Table(String),
    #[error("conditioning event {given:?} has probability zero")]
    ZeroProbability { given: Vec<(usize, usize)> },
    #[error("csv: {0}")]
    Csv(String),
    #[error("model file: {0}")]
    Format(String),
}

/// Failures raised by a prediction model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PredictError {
    #[error("row {row}: {message}")]
    InvalidInput { row: usize, message: String },
    #[error("expected {expected} predictions, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("{0}")]
    Backend(String),
}

/// Top-level error of the attribution pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error("predictor failure: {0}")]
    Predictor(#[from] PredictError),
    #[error("{0}")]
    Config(String),
    #[error("exact enumeration over {n} features exceeds the cap of {cap}; use sampled permutations")]
    EnumerationCap { n: usize, cap: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
