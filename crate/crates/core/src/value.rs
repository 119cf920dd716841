//! The value function `v(S) = E[f(X) | do(x_S)]` and its observational
//! counterparts, estimated by Monte Carlo or computed exactly.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, OnceLock};

use parking_lot::Mutex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrete::JointTable;
use crate::error::{DistributionError, Error, Result};
use crate::feature::{Coalition, FeatureSet, FeatureSpace};
use crate::gaussian::GaussianModel;
use crate::graph::{ChainGraph, FactorPlan};
use crate::numeric::{exact_sum, mean, sample_variance};
use crate::predictor::{LinearModel, Predictor};
use crate::sampling::{ConfoundedDraw, InterventionalSampler, Noise, RngStream};

/// How the out-of-coalition features are distributed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// `P(X_{S̄})`
    Marginal,
    /// `P(X_{S̄} | x_S)`
    Conditional,
    /// `P(X_{S̄} | do(x_S))`
    Causal,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Marginal, Variant::Conditional, Variant::Causal];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Marginal => "marginal",
            Variant::Conditional => "conditional",
            Variant::Causal => "causal",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}` (expected marginal, conditional or causal)")))
    }
}

/// The factorization used to evaluate `v(S)`. The empty coalition always
/// uses the observational joint, so `v(∅) = E f(X)` for every variant.
pub fn factor_plan(variant: Variant, graph: Option<&ChainGraph>, n: usize, set: FeatureSet) -> Result<FactorPlan> {
    if set.is_empty() {
        return Ok(FactorPlan::marginal(n, set));
    }
    match variant {
        Variant::Marginal => Ok(FactorPlan::marginal(n, set)),
        Variant::Conditional => Ok(FactorPlan::conditional(n, set)),
        Variant::Causal => {
            let graph = graph.ok_or_else(|| Error::Config("the causal variant requires a causal chain graph".into()))?;
            if graph.n_features() != n {
                return Err(Error::Config(format!(
                    "graph has {} features, expected {n}",
                    graph.n_features()
                )));
            }
            Ok(graph.intervention_factorization(set))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub n_samples: usize,
    pub seed: u64,
    pub antithetic: bool,
    pub confounded_draw: ConfoundedDraw,
    /// Mixed into the seed so independent repetitions use disjoint streams.
    pub replicate: u64,
    /// Rows per predictor call.
    pub batch_size: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_samples: 1000,
            seed: 0,
            antithetic: false,
            confounded_draw: ConfoundedDraw::Joint,
            replicate: 0,
            batch_size: 1024,
        }
    }
}

impl SamplerConfig {
    pub fn with_samples(n_samples: usize, seed: u64) -> Self {
        SamplerConfig { n_samples, seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::Config("n_samples must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub exact: bool,
}

impl ValueEstimate {
    pub fn exact(value: f64) -> Self {
        ValueEstimate { value, stderr: 0.0, n_samples: 0, exact: true }
    }
}

fn template(x: &[f64], set: FeatureSet) -> Vec<f64> {
    let mut row = vec![0.0; x.len()];
    for j in set.iter() {
        row[j] = x[j];
    }
    row
}

/// Averages `f` over draws from `plan`, with `clamp` (if any) reset to its
/// instance value after sampling. The noise stream depends only on the
/// plan's fixed set, so a clamped run shares its draws with the unclamped one.
fn monte_carlo(
    x: &[f64],
    plan: &FactorPlan,
    clamp: Option<usize>,
    sampler: &dyn InterventionalSampler,
    predictor: &dyn Predictor,
    config: &SamplerConfig,
) -> Result<ValueEstimate> {
    config.validate()?;
    let n = x.len();
    let base = template(x, plan.fixed());
    let compiled = sampler.compile(plan, config.confounded_draw)?;
    let mut noise = Noise::new(RngStream::for_coalition(config.seed, config.replicate, plan.fixed()), config.antithetic);
    let mut outputs = Vec::with_capacity(config.n_samples);
    let mut batch = Vec::with_capacity(config.batch_size.min(config.n_samples) * n);
    for k in 0..config.n_samples {
        noise.begin_draw(k);
        let start = batch.len();
        batch.extend_from_slice(&base);
        let row = &mut batch[start..];
        compiled.fill(row, &mut noise)?;
        if let Some(i) = clamp {
            row[i] = x[i];
        }
        if batch.len() == config.batch_size * n || k + 1 == config.n_samples {
            let y = predictor.predict(&batch)?;
            let expected = batch.len() / n;
            if y.len() != expected {
                return Err(crate::error::PredictError::LengthMismatch { expected, got: y.len() }.into());
            }
            outputs.extend(y);
            batch.clear();
        }
    }
    let value = mean(&outputs);
    let stderr = if config.antithetic {
        let pairs: Vec<f64> = outputs.chunks_exact(2).map(|p| 0.5 * (p[0] + p[1])).collect();
        if pairs.len() < 2 {
            0.0
        } else {
            (sample_variance(&pairs) / pairs.len() as f64).sqrt()
        }
    } else if outputs.len() < 2 {
        0.0
    } else {
        (sample_variance(&outputs) / outputs.len() as f64).sqrt()
    };
    Ok(ValueEstimate { value, stderr, n_samples: outputs.len(), exact: false })
}

/// Monte Carlo estimate of the value of `coalition`. `v(N)` is `f(x)` exactly.
pub fn estimate_value(
    coalition: &Coalition,
    variant: Variant,
    graph: Option<&ChainGraph>,
    sampler: &dyn InterventionalSampler,
    predictor: &dyn Predictor,
    config: &SamplerConfig,
) -> Result<ValueEstimate> {
    let n = sampler.feature_space().len();
    let mut x = vec![0.0; n];
    coalition.fill(&mut x);
    let set = coalition.set();
    if set == FeatureSet::full(n) {
        return Ok(ValueEstimate::exact(predictor.predict_one(&x)?));
    }
    let plan = factor_plan(variant, graph, n, set)?;
    monte_carlo(&x, &plan, None, sampler, predictor, config)
}

fn propagate_means(plan: &FactorPlan, model: &GaussianModel, x: &[f64]) -> Result<Vec<f64>, DistributionError> {
    let mut m = template(x, plan.fixed());
    for factor in plan.factors() {
        let given = factor.given().to_vec();
        let (categorical, continuous): (Vec<usize>, Vec<usize>) =
            factor.targets.iter().partition(|&j| !model.is_continuous(j));
        for &j in &categorical {
            if !given.is_empty() {
                return Err(DistributionError::UnsupportedCategorical(j));
            }
            let freq = model.level_frequencies(j).expect("categorical feature has frequencies");
            m[j] = freq.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        }
        if continuous.is_empty() {
            continue;
        }
        let lg = model.linear_conditional(&continuous, &given)?;
        for (a, &j) in continuous.iter().enumerate() {
            let mut v = lg.offset[a];
            for (b, &g) in given.iter().enumerate() {
                v += lg.gain[(a, b)] * m[g];
            }
            m[j] = v;
        }
    }
    Ok(m)
}

/// Closed-form value for a linear predictor: interventional means propagate
/// through the factorization in topological order.
pub fn exact_value_linear(
    coalition: &Coalition,
    variant: Variant,
    graph: Option<&ChainGraph>,
    model: &GaussianModel,
    linear: &LinearModel,
) -> Result<ValueEstimate> {
    let n = model.n_features();
    let mut x = vec![0.0; n];
    coalition.fill(&mut x);
    linear_value(&x, variant, graph, model, linear, coalition.set(), None)
}

fn linear_value(
    x: &[f64],
    variant: Variant,
    graph: Option<&ChainGraph>,
    model: &GaussianModel,
    linear: &LinearModel,
    set: FeatureSet,
    clamp: Option<usize>,
) -> Result<ValueEstimate> {
    let n = x.len();
    if linear.coefficients.len() != n {
        return Err(crate::error::PredictError::LengthMismatch { expected: n, got: linear.coefficients.len() }.into());
    }
    if set == FeatureSet::full(n) {
        return Ok(ValueEstimate::exact(linear.eval(x)));
    }
    let plan = factor_plan(variant, graph, n, set)?;
    let mut m = propagate_means(&plan, model, x)?;
    if let Some(i) = clamp {
        m[i] = x[i];
    }
    Ok(ValueEstimate::exact(linear.eval(&m)))
}

/// Brute-force value on a fully categorical space: the factors are
/// materialized as conditional tables of the joint and multiplied out.
pub fn exact_value_discrete(
    coalition: &Coalition,
    variant: Variant,
    graph: Option<&ChainGraph>,
    table: &JointTable,
    predictor: &dyn Predictor,
    mode: ConfoundedDraw,
) -> Result<ValueEstimate> {
    let n = table.feature_space().len();
    let mut x = vec![0.0; n];
    coalition.fill(&mut x);
    discrete_value(&x, variant, graph, table, predictor, mode, coalition.set(), None)
}

#[allow(clippy::too_many_arguments)]
fn discrete_value(
    x: &[f64],
    variant: Variant,
    graph: Option<&ChainGraph>,
    table: &JointTable,
    predictor: &dyn Predictor,
    mode: ConfoundedDraw,
    set: FeatureSet,
    clamp: Option<usize>,
) -> Result<ValueEstimate> {
    let n = x.len();
    if set == FeatureSet::full(n) {
        return Ok(ValueEstimate::exact(predictor.predict_one(x)?));
    }
    let plan = factor_plan(variant, graph, n, set)?;
    let mut groups = Vec::new();
    for factor in plan.factors() {
        let given = factor.given().to_vec();
        if factor.confounded && mode == ConfoundedDraw::PerFeature {
            groups.extend(factor.targets.iter().map(|j| (FeatureSet::singleton(j), given.clone())));
        } else if !factor.targets.is_empty() {
            groups.push((factor.targets, given));
        }
    }
    let mut rows = Vec::new();
    let mut weights = Vec::new();
    let mut row: Vec<usize> = template(x, set).iter().map(|&v| v as usize).collect();
    enumerate(table, &groups, 0, &mut row, 1.0, &mut |row, w| {
        let mut r: Vec<f64> = row.iter().map(|&v| v as f64).collect();
        if let Some(i) = clamp {
            r[i] = x[i];
        }
        rows.extend(r);
        weights.push(w);
    })?;
    let y = predictor.predict(&rows)?;
    if y.len() != weights.len() {
        return Err(crate::error::PredictError::LengthMismatch { expected: weights.len(), got: y.len() }.into());
    }
    Ok(ValueEstimate::exact(exact_sum(y.iter().zip(&weights).map(|(y, w)| y * w))))
}

fn enumerate(
    table: &JointTable,
    groups: &[(FeatureSet, Vec<usize>)],
    k: usize,
    row: &mut Vec<usize>,
    weight: f64,
    leaf: &mut dyn FnMut(&[usize], f64),
) -> Result<(), DistributionError> {
    let Some((targets, given)) = groups.get(k) else {
        leaf(row, weight);
        return Ok(());
    };
    let given: Vec<(usize, usize)> = given.iter().map(|&g| (g, row[g])).collect();
    for (levels, p) in table.conditional(*targets, &given)? {
        for (j, level) in targets.iter().zip(levels) {
            row[j] = level;
        }
        enumerate(table, groups, k + 1, row, weight * p, leaf)?;
    }
    Ok(())
}

/// Description of how a value function was evaluated, carried into reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValueMeta {
    pub variant: Variant,
    pub seed: Option<u64>,
    pub n_samples: Option<usize>,
}

/// Accessor for `v(S)` and the mixed term `E[f(X_{S̄}, x_{S∪i}) | do(x_S)]`.
pub trait ValueFunction: Sync {
    fn feature_space(&self) -> &FeatureSpace;

    fn value(&self, set: FeatureSet) -> Result<ValueEstimate>;

    /// Expected output with feature `i ∉ S` clamped to `x_i` in the predictor
    /// input while the distribution is still the one for `S`.
    fn clamped_value(&self, set: FeatureSet, i: usize) -> Result<ValueEstimate>;

    fn meta(&self) -> ValueMeta;

    /// Hint that these coalitions will be needed; implementations may
    /// evaluate them concurrently.
    fn prefetch(&self, _sets: &[FeatureSet]) {}

    fn prefetch_clamped(&self, _keys: &[(FeatureSet, usize)]) {}

    fn n_features(&self) -> usize {
        self.feature_space().len()
    }
}

/// Monte Carlo value function for one instance.
pub struct MonteCarloValues<'a> {
    pub x: Vec<f64>,
    pub variant: Variant,
    pub graph: Option<&'a ChainGraph>,
    pub sampler: &'a dyn InterventionalSampler,
    pub predictor: &'a dyn Predictor,
    pub config: SamplerConfig,
}

impl ValueFunction for MonteCarloValues<'_> {
    fn feature_space(&self) -> &FeatureSpace {
        self.sampler.feature_space()
    }

    fn value(&self, set: FeatureSet) -> Result<ValueEstimate> {
        let n = self.x.len();
        if set == FeatureSet::full(n) {
            return Ok(ValueEstimate::exact(self.predictor.predict_one(&self.x)?));
        }
        let plan = factor_plan(self.variant, self.graph, n, set)?;
        monte_carlo(&self.x, &plan, None, self.sampler, self.predictor, &self.config)
    }

    fn clamped_value(&self, set: FeatureSet, i: usize) -> Result<ValueEstimate> {
        let n = self.x.len();
        if self.variant == Variant::Marginal || set.with(i) == FeatureSet::full(n) {
            return self.value(set.with(i));
        }
        let plan = factor_plan(self.variant, self.graph, n, set)?;
        monte_carlo(&self.x, &plan, Some(i), self.sampler, self.predictor, &self.config)
    }

    fn meta(&self) -> ValueMeta {
        ValueMeta { variant: self.variant, seed: Some(self.config.seed), n_samples: Some(self.config.n_samples) }
    }
}

/// Exact values of a linear predictor under a Gaussian model.
pub struct LinearValues<'a> {
    pub x: Vec<f64>,
    pub variant: Variant,
    pub graph: Option<&'a ChainGraph>,
    pub model: &'a GaussianModel,
    pub linear: &'a LinearModel,
}

impl ValueFunction for LinearValues<'_> {
    fn feature_space(&self) -> &FeatureSpace {
        self.model.feature_space()
    }

    fn value(&self, set: FeatureSet) -> Result<ValueEstimate> {
        linear_value(&self.x, self.variant, self.graph, self.model, self.linear, set, None)
    }

    fn clamped_value(&self, set: FeatureSet, i: usize) -> Result<ValueEstimate> {
        if self.variant == Variant::Marginal {
            return self.value(set.with(i));
        }
        linear_value(&self.x, self.variant, self.graph, self.model, self.linear, set, Some(i))
    }

    fn meta(&self) -> ValueMeta {
        ValueMeta { variant: self.variant, seed: None, n_samples: None }
    }
}

/// Exact values on a fully categorical space.
pub struct DiscreteValues<'a> {
    pub x: Vec<f64>,
    pub variant: Variant,
    pub graph: Option<&'a ChainGraph>,
    pub table: &'a JointTable,
    pub predictor: &'a dyn Predictor,
    pub mode: ConfoundedDraw,
}

impl ValueFunction for DiscreteValues<'_> {
    fn feature_space(&self) -> &FeatureSpace {
        self.table.feature_space()
    }

    fn value(&self, set: FeatureSet) -> Result<ValueEstimate> {
        discrete_value(&self.x, self.variant, self.graph, self.table, self.predictor, self.mode, set, None)
    }

    fn clamped_value(&self, set: FeatureSet, i: usize) -> Result<ValueEstimate> {
        if self.variant == Variant::Marginal {
            return self.value(set.with(i));
        }
        discrete_value(&self.x, self.variant, self.graph, self.table, self.predictor, self.mode, set, Some(i))
    }

    fn meta(&self) -> ValueMeta {
        ValueMeta { variant: self.variant, seed: None, n_samples: None }
    }
}

type Slot = Arc<OnceLock<Result<ValueEstimate>>>;

/// Memo table over coalitions: each key is evaluated at most once, even
/// under concurrent access.
pub struct Memoized<V> {
    inner: V,
    values: Mutex<HashMap<FeatureSet, Slot>>,
    clamped: Mutex<HashMap<(FeatureSet, usize), Slot>>,
    evaluations: AtomicUsize,
}

impl<V: ValueFunction> Memoized<V> {
    pub fn new(inner: V) -> Self {
        Memoized {
            inner,
            values: Mutex::new(HashMap::new()),
            clamped: Mutex::new(HashMap::new()),
            evaluations: AtomicUsize::new(0),
        }
    }

    pub fn inner(&self) -> &V {
        &self.inner
    }

    /// Number of underlying evaluations performed so far.
    pub fn evaluations(&self) -> usize {
        self.evaluations.load(Ordering::Relaxed)
    }

    fn slot<K: std::hash::Hash + Eq>(map: &Mutex<HashMap<K, Slot>>, key: K) -> Slot {
        map.lock().entry(key).or_default().clone()
    }
}

impl<V: ValueFunction> ValueFunction for Memoized<V> {
    fn feature_space(&self) -> &FeatureSpace {
        self.inner.feature_space()
    }

    fn value(&self, set: FeatureSet) -> Result<ValueEstimate> {
        Self::slot(&self.values, set)
            .get_or_init(|| {
                self.evaluations.fetch_add(1, Ordering::Relaxed);
                self.inner.value(set)
            })
            .clone()
    }

    fn clamped_value(&self, set: FeatureSet, i: usize) -> Result<ValueEstimate> {
        if self.inner.meta().variant == Variant::Marginal {
            return self.value(set.with(i));
        }
        Self::slot(&self.clamped, (set, i))
            .get_or_init(|| {
                self.evaluations.fetch_add(1, Ordering::Relaxed);
                self.inner.clamped_value(set, i)
            })
            .clone()
    }

    fn meta(&self) -> ValueMeta {
        self.inner.meta()
    }

    fn prefetch(&self, sets: &[FeatureSet]) {
        sets.par_iter().for_each(|&s| {
            let _ = self.value(s);
        });
    }

    fn prefetch_clamped(&self, keys: &[(FeatureSet, usize)]) {
        keys.par_iter().for_each(|&(s, i)| {
            let _ = self.clamped_value(s, i);
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete::TableModel;
    use crate::graph::build_chain_graph;
    use nalgebra::DMatrix;

    fn toy_model(alpha: f64) -> GaussianModel {
        GaussianModel::new(
            FeatureSpace::continuous(2),
            vec![0.0, 0.0],
            DMatrix::from_row_slice(2, 2, &[1.0, alpha, alpha, 1.0]),
        )
        .unwrap()
    }

    fn chain() -> ChainGraph {
        build_chain_graph(FeatureSpace::continuous(2), &[vec![0], vec![1]], &[false, false], None).unwrap()
    }

    fn xor(eps: f64) -> (JointTable, TableModel) {
        let a = 0.25 * (1.0 + eps);
        let b = 0.25 * (1.0 - eps);
        (
            JointTable::new(FeatureSpace::categorical(&[2, 2]), vec![a, b, b, a]).unwrap(),
            TableModel::new(vec![2, 2], vec![0.0, 1.0, 1.0, 0.0]).unwrap(),
        )
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("causal".parse::<Variant>().unwrap(), Variant::Causal);
        assert!("interventional".parse::<Variant>().is_err());
    }

    #[test]
    fn linear_chain_value_uses_regression() {
        let (alpha, b1, b2, x1) = (0.8, 0.5, 2.0, 1.3);
        let lin = LinearModel::new(0.0, vec![b1, b2]);
        let c = Coalition::from_pairs(&[(0, x1)]).unwrap();
        let v = exact_value_linear(&c, Variant::Causal, Some(&chain()), &toy_model(alpha), &lin).unwrap();
        assert!((v.value - (b1 * x1 + b2 * alpha * x1)).abs() < 1e-15);
        assert!(v.exact && v.stderr == 0.0);
        let confounded = ChainGraph::single_component(FeatureSpace::continuous(2), true);
        let v = exact_value_linear(&c, Variant::Causal, Some(&confounded), &toy_model(alpha), &lin).unwrap();
        assert_eq!(v.value, b1 * x1);
    }

    #[test]
    fn linear_empty_coalition_is_mean_prediction() {
        let model = GaussianModel::new(
            FeatureSpace::continuous(2),
            vec![1.0, -2.0],
            DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 1.0]),
        )
        .unwrap();
        let lin = LinearModel::new(0.5, vec![3.0, 1.0]);
        for variant in Variant::ALL {
            let v = exact_value_linear(&Coalition::empty(), variant, Some(&chain()), &model, &lin).unwrap();
            assert_eq!(v.value, 0.5 + 3.0 - 2.0);
        }
    }

    #[test]
    fn discrete_xor_values() {
        let eps = 0.3;
        let (table, f) = xor(eps);
        let c = Coalition::from_pairs(&[(0, 0.0)]).unwrap();
        let val = |variant, graph: Option<&ChainGraph>| {
            exact_value_discrete(&c, variant, graph, &table, &f, ConfoundedDraw::Joint).unwrap().value
        };
        let g = build_chain_graph(FeatureSpace::categorical(&[2, 2]), &[vec![0], vec![1]], &[false, false], None).unwrap();
        assert!((val(Variant::Marginal, None) - 0.5).abs() < 1e-15);
        assert!((val(Variant::Conditional, None) - 0.5 * (1.0 - eps)).abs() < 1e-15);
        assert!((val(Variant::Causal, Some(&g)) - 0.5 * (1.0 - eps)).abs() < 1e-15);
        let full = Coalition::from_instance(FeatureSet::full(2), &[0.0, 0.0]);
        for variant in Variant::ALL {
            let v = exact_value_discrete(&full, variant, Some(&g), &table, &f, ConfoundedDraw::Joint).unwrap();
            assert_eq!(v, ValueEstimate::exact(0.0));
        }
    }

    #[test]
    fn discrete_zero_probability_is_reported() {
        let table = JointTable::new(FeatureSpace::categorical(&[2, 2]), vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        let f = TableModel::new(vec![2, 2], vec![0.0; 4]).unwrap();
        let c = Coalition::from_pairs(&[(0, 1.0)]).unwrap();
        let r = exact_value_discrete(&c, Variant::Conditional, None, &table, &f, ConfoundedDraw::Joint);
        assert!(matches!(r, Err(Error::Distribution(DistributionError::ZeroProbability { .. }))));
    }

    #[test]
    fn monte_carlo_xor_chain_value() {
        let eps = 0.5;
        let (table, f) = xor(eps);
        let g = build_chain_graph(FeatureSpace::categorical(&[2, 2]), &[vec![0], vec![1]], &[false, false], None).unwrap();
        let c = Coalition::from_pairs(&[(0, 0.0)]).unwrap();
        let cfg = SamplerConfig::with_samples(20_000, 11);
        let v = estimate_value(&c, Variant::Causal, Some(&g), &table, &f, &cfg).unwrap();
        assert!((v.value - 0.5 * (1.0 - eps)).abs() < 3.0 * v.stderr, "{v:?}");
        assert!(!v.exact);
    }

    #[test]
    fn full_coalition_is_exact() {
        let lin = LinearModel::new(1.0, vec![1.0, 2.0]);
        let c = Coalition::from_instance(FeatureSet::full(2), &[0.5, 0.25]);
        let v = estimate_value(&c, Variant::Causal, None, &toy_model(0.2), &lin, &SamplerConfig::default()).unwrap();
        assert_eq!(v, ValueEstimate::exact(2.0));
    }

    #[test]
    fn causal_without_graph_is_config_error() {
        let lin = LinearModel::new(0.0, vec![1.0, 1.0]);
        let c = Coalition::from_pairs(&[(0, 1.0)]).unwrap();
        let r = estimate_value(&c, Variant::Causal, None, &toy_model(0.2), &lin, &SamplerConfig::default());
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn stderr_scales_with_sample_count() {
        let lin = LinearModel::new(0.0, vec![1.0, 1.0]);
        let c = Coalition::from_pairs(&[(0, 1.0)]).unwrap();
        let est = |n| {
            estimate_value(&c, Variant::Conditional, None, &toy_model(0.5), &lin, &SamplerConfig::with_samples(n, 2))
                .unwrap()
                .stderr
        };
        let ratio = est(1_000) / est(16_000);
        assert!((ratio - 4.0).abs() < 1.0, "ratio {ratio}");
    }

    #[test]
    fn antithetic_cancels_linear_noise() {
        let lin = LinearModel::new(0.0, vec![1.0, 1.0]);
        let c = Coalition::from_pairs(&[(0, 1.0)]).unwrap();
        let cfg = SamplerConfig { antithetic: true, ..SamplerConfig::with_samples(100, 3) };
        let v = estimate_value(&c, Variant::Conditional, None, &toy_model(0.5), &lin, &cfg).unwrap();
        assert!((v.value - 1.5).abs() < 1e-12);
        assert!(v.stderr < 1e-12);
    }

    #[test]
    fn clamped_term_shares_samples() {
        let lin = LinearModel::new(0.0, vec![1.0, 1.0, 1.0]);
        let model = GaussianModel::new(FeatureSpace::continuous(3), vec![0.0; 3], DMatrix::identity(3, 3)).unwrap();
        let x = vec![0.5, 1.0, -1.0];
        let mc = MonteCarloValues {
            x: x.clone(),
            variant: Variant::Conditional,
            graph: None,
            sampler: &model,
            predictor: &lin,
            config: SamplerConfig::with_samples(500, 1),
        };
        let s = FeatureSet::singleton(0);
        let v = mc.value(s).unwrap();
        let m = mc.clamped_value(s, 1).unwrap();
        let m3 = mc.clamped_value(s, 2).unwrap();
        // all three runs see the same draws, so the sample means of X2 and X3 cancel
        let identity = m.value + m3.value - v.value - (x[0] + x[1] + x[2]);
        assert!(identity.abs() < 1e-12, "{identity}");
        assert_eq!(v, mc.value(s).unwrap());
        assert!(m.stderr < v.stderr);
    }

    #[test]
    fn memo_evaluates_once() {
        let lin = LinearModel::new(0.0, vec![1.0, 2.0]);
        let model = toy_model(0.4);
        let memo = Memoized::new(LinearValues {
            x: vec![1.0, 1.0],
            variant: Variant::Causal,
            graph: None,
            model: &model,
            linear: &lin,
        });
        let sets = vec![FeatureSet::EMPTY, FeatureSet::singleton(0), FeatureSet::EMPTY];
        memo.prefetch(&sets);
        memo.prefetch(&sets);
        let _ = memo.value(FeatureSet::EMPTY);
        // S = {0} fails (no graph) but is still only evaluated once
        assert!(memo.value(FeatureSet::singleton(0)).is_err());
        assert_eq!(memo.evaluations(), 2);
    }
}
