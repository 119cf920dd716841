//! Contributions per ordering, their direct/indirect split, and aggregation
//! into Shapley values.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::feature::FeatureSet;
use crate::numeric::{exact_sum, sample_variance};
use crate::permutation::{ExtensionCounts, Permutation, PermutationDistribution, PermutationSampling};
use crate::report::{AttributionReport, FeatureAttribution, ReportMeta};
use crate::value::{ValueEstimate, ValueFunction};

/// Orderings are enumerated exactly up to this many features by default.
pub const DEFAULT_ENUMERATION_CAP: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShapleyOptions {
    /// Also compute direct and indirect effects.
    pub decompose: bool,
    pub enumeration_cap: usize,
}

impl Default for ShapleyOptions {
    fn default() -> Self {
        ShapleyOptions { decompose: false, enumeration_cap: DEFAULT_ENUMERATION_CAP }
    }
}

/// Contribution `φ_i(π) = v(S ∪ i) − v(S)` of feature `i` with predecessors `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContributionRecord {
    pub feature: usize,
    pub permutation: Option<Permutation>,
    pub predecessors: FeatureSet,
    /// `v(S ∪ i)`
    pub with: ValueEstimate,
    /// `v(S)`
    pub without: ValueEstimate,
    /// `E[f(X_{S̄}, x_{S∪i}) | do(x_S)]`, when decomposed.
    pub mixed: Option<ValueEstimate>,
    /// Equals `direct + indirect` when decomposed.
    pub total: f64,
    pub direct: Option<f64>,
    pub indirect: Option<f64>,
    pub stderr_total: f64,
    pub stderr_direct: Option<f64>,
    pub stderr_indirect: Option<f64>,
}

fn hypot(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}

fn record(
    predecessors: FeatureSet,
    feature: usize,
    values: &dyn ValueFunction,
    decompose: bool,
    permutation: Option<Permutation>,
) -> Result<ContributionRecord> {
    assert!(!predecessors.contains(feature), "feature {feature} cannot precede itself");
    let with = values.value(predecessors.with(feature))?;
    let without = values.value(predecessors)?;
    let mut rec = ContributionRecord {
        feature,
        permutation,
        predecessors,
        with,
        without,
        mixed: None,
        total: with.value - without.value,
        direct: None,
        indirect: None,
        stderr_total: hypot(with.stderr, without.stderr),
        stderr_direct: None,
        stderr_indirect: None,
    };
    if decompose {
        let mixed = values.clamped_value(predecessors, feature)?;
        let direct = mixed.value - without.value;
        let indirect = with.value - mixed.value;
        rec.mixed = Some(mixed);
        rec.direct = Some(direct);
        rec.indirect = Some(indirect);
        rec.total = direct + indirect;
        rec.stderr_direct = Some(hypot(mixed.stderr, without.stderr));
        rec.stderr_indirect = Some(hypot(with.stderr, mixed.stderr));
    }
    Ok(rec)
}

/// `φ_i(π)` for one ordering.
pub fn contribution(perm: &Permutation, feature: usize, values: &dyn ValueFunction) -> Result<ContributionRecord> {
    assert!(perm.order().contains(&feature), "feature {feature} is not in the permutation");
    record(perm.predecessors(feature), feature, values, false, Some(perm.clone()))
}

/// `φ_i(π)` split into direct and indirect effects.
pub fn decompose_effects(perm: &Permutation, feature: usize, values: &dyn ValueFunction) -> Result<ContributionRecord> {
    assert!(perm.order().contains(&feature), "feature {feature} is not in the permutation");
    record(perm.predecessors(feature), feature, values, true, Some(perm.clone()))
}

/// `Σ_i φ_i(π)` over the records of one ordering, summed exactly from the
/// underlying values so that it telescopes to `v(N) − v(∅)` bit for bit.
pub fn telescoped_sum(records: &[ContributionRecord]) -> f64 {
    exact_sum(records.iter().flat_map(|r| [r.with.value, -r.without.value]))
}

/// Accumulates weighted records for one feature.
#[derive(Default)]
struct Aggregate {
    total: Vec<f64>,
    direct: Vec<f64>,
    indirect: Vec<f64>,
    coefficients: BTreeMap<u64, (f64, f64)>,
}

impl Aggregate {
    fn add(&mut self, w: f64, rec: &ContributionRecord) {
        self.total.push(w * rec.total);
        if let (Some(d), Some(ind)) = (rec.direct, rec.indirect) {
            self.direct.push(w * d);
            self.indirect.push(w * ind);
        }
        let mut bump = |set: FeatureSet, c: f64, se: f64| self.coefficients.entry(set.bits()).or_insert((0.0, se)).0 += c;
        bump(rec.predecessors.with(rec.feature), w, rec.with.stderr);
        bump(rec.predecessors, -w, rec.without.stderr);
    }

    /// Value-function noise propagated through the weighted differences,
    /// ignoring covariance between coalitions.
    fn value_variance(&self) -> f64 {
        self.coefficients.values().map(|(c, se)| c * c * se * se).sum()
    }
}

fn attribution(name: &str, agg: &Aggregate, phi: f64, extra_variance: f64, decompose: bool) -> FeatureAttribution {
    FeatureAttribution {
        feature: name.to_string(),
        phi,
        direct: decompose.then(|| exact_sum(agg.direct.iter().copied())),
        indirect: decompose.then(|| exact_sum(agg.indirect.iter().copied())),
        stderr: (agg.value_variance() + extra_variance).sqrt(),
    }
}

/// `φ_i = Σ_π w(π) φ_i(π)` for every feature.
pub fn shapley_values(
    dist: &PermutationDistribution,
    values: &dyn ValueFunction,
    options: ShapleyOptions,
) -> Result<AttributionReport> {
    let n = values.n_features();
    if dist.n_features() != n {
        return Err(Error::Config(format!(
            "permutation distribution covers {} features, value function {n}",
            dist.n_features()
        )));
    }
    let names: Vec<String> = values.feature_space().names().map(str::to_string).collect();
    let (features, n_permutations, perm_seed) = match dist.sampling() {
        PermutationSampling::Exact => (exact(dist, values, options, &names)?, None, None),
        PermutationSampling::Sampled { n_permutations, seed, .. } => {
            (sampled(dist, values, options, &names)?, Some(n_permutations), Some(seed))
        }
    };
    let f0 = values.value(FeatureSet::EMPTY)?;
    let fx = values.value(FeatureSet::full(n))?;
    let meta = values.meta();
    Ok(AttributionReport {
        features,
        f0: f0.value,
        f0_stderr: f0.stderr,
        fx: fx.value,
        meta: ReportMeta {
            variant: meta.variant,
            symmetry: dist.symmetry(),
            seed: meta.seed.or(perm_seed),
            n_samples: meta.n_samples,
            n_permutations,
        },
    })
}

fn exact(
    dist: &PermutationDistribution,
    values: &dyn ValueFunction,
    options: ShapleyOptions,
    names: &[String],
) -> Result<Vec<FeatureAttribution>> {
    let n = values.n_features();
    if n > options.enumeration_cap {
        return Err(Error::EnumerationCap { n, cap: options.enumeration_cap });
    }
    let counts = ExtensionCounts::new(dist.constraints())?;
    assert!(counts.total() > 0.0, "consistent orderings always exist for acyclic constraints");
    let mut terms: Vec<Vec<(FeatureSet, f64)>> = vec![Vec::new(); n];
    let mut needed = BTreeSet::new();
    let mut mixed = Vec::new();
    for (i, terms_i) in terms.iter_mut().enumerate() {
        for bits in 0..(1u64 << n) {
            let s = FeatureSet::from_bits(bits);
            if s.contains(i) {
                continue;
            }
            let w = counts.coalition_weight(s, i);
            if w > 0.0 {
                terms_i.push((s, w));
                needed.insert(s.bits());
                needed.insert(s.with(i).bits());
                if options.decompose {
                    mixed.push((s, i));
                }
            }
        }
    }
    values.prefetch(&needed.into_iter().map(FeatureSet::from_bits).collect::<Vec<_>>());
    if options.decompose {
        values.prefetch_clamped(&mixed);
    }
    let mut out = Vec::with_capacity(n);
    for (i, terms_i) in terms.iter().enumerate() {
        let mut agg = Aggregate::default();
        for &(s, w) in terms_i {
            agg.add(w, &record(s, i, values, options.decompose, None)?);
        }
        let phi = exact_sum(agg.total.iter().copied());
        out.push(attribution(&names[i], &agg, phi, 0.0, options.decompose));
    }
    Ok(out)
}

fn sampled(
    dist: &PermutationDistribution,
    values: &dyn ValueFunction,
    options: ShapleyOptions,
    names: &[String],
) -> Result<Vec<FeatureAttribution>> {
    let n = values.n_features();
    let perms = dist.draw()?;
    if perms.is_empty() {
        return Err(Error::Config("n_permutations must be at least 1".into()));
    }
    let mut needed = BTreeSet::new();
    let mut mixed = BTreeSet::new();
    for perm in &perms {
        let mut placed = FeatureSet::EMPTY;
        for &i in perm.order() {
            needed.insert(placed.bits());
            if options.decompose {
                mixed.insert((placed.bits(), i));
            }
            placed = placed.with(i);
        }
        needed.insert(placed.bits());
    }
    values.prefetch(&needed.into_iter().map(FeatureSet::from_bits).collect::<Vec<_>>());
    if options.decompose {
        values.prefetch_clamped(&mixed.into_iter().map(|(s, i)| (FeatureSet::from_bits(s), i)).collect::<Vec<_>>());
    }
    let p = perms.len() as f64;
    let mut aggs: Vec<Aggregate> = (0..n).map(|_| Aggregate::default()).collect();
    let mut raw: Vec<Vec<f64>> = vec![Vec::with_capacity(perms.len()); n];
    for perm in &perms {
        for (i, agg) in aggs.iter_mut().enumerate() {
            let rec = record(perm.predecessors(i), i, values, options.decompose, None)?;
            raw[i].push(rec.total);
            agg.add(1.0 / p, &rec);
        }
    }
    Ok((0..n)
        .map(|i| {
            let phi = exact_sum(aggs[i].total.iter().copied());
            let perm_variance = if perms.len() > 1 { sample_variance(&raw[i]) / p } else { 0.0 };
            attribution(&names[i], &aggs[i], phi, perm_variance, options.decompose)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete::{JointTable, TableModel};
    use crate::feature::FeatureSpace;
    use crate::gaussian::GaussianModel;
    use crate::graph::{build_chain_graph, ChainGraph};
    use crate::permutation::{all_permutations, ExtensionSampler, Symmetry};
    use crate::predictor::LinearModel;
    use crate::sampling::ConfoundedDraw;
    use crate::value::{DiscreteValues, LinearValues, Memoized, MonteCarloValues, SamplerConfig, Variant};
    use nalgebra::DMatrix;

    fn toy(alpha: f64) -> GaussianModel {
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

    #[test]
    fn chain_causal_symmetric_splits_indirect_effect() {
        let (alpha, beta, x1, x2) = (0.8, 2.0, 1.0, 1.5);
        let model = toy(alpha);
        let lin = LinearModel::new(0.0, vec![0.0, beta]);
        let g = chain();
        let values = Memoized::new(LinearValues { x: vec![x1, x2], variant: Variant::Causal, graph: Some(&g), model: &model, linear: &lin });
        let dist = PermutationDistribution::symmetric(2, PermutationSampling::Exact);
        let r = shapley_values(&dist, &values, ShapleyOptions { decompose: true, ..Default::default() }).unwrap();
        let half = 0.5 * beta * alpha * x1;
        assert!((r.features[0].phi - half).abs() < 1e-12);
        assert!(r.features[0].direct.unwrap().abs() < 1e-12);
        assert!((r.features[0].indirect.unwrap() - half).abs() < 1e-12);
        assert!((r.features[1].phi - (beta * x2 - half)).abs() < 1e-12);
        assert_eq!(r.meta.n_permutations, None);

        let perm = Permutation::new(vec![0, 1]).unwrap();
        let rec = contribution(&perm, 0, &values).unwrap();
        assert!((rec.total - beta * alpha * x1).abs() < 1e-12);
    }

    #[test]
    fn independent_marginal_linear_values() {
        let model = GaussianModel::new(FeatureSpace::continuous(3), vec![1.0, -1.0, 0.5], DMatrix::identity(3, 3)).unwrap();
        let lin = LinearModel::new(0.3, vec![2.0, -1.0, 4.0]);
        let x = vec![0.0, 2.0, 1.0];
        let values = LinearValues { x: x.clone(), variant: Variant::Marginal, graph: None, model: &model, linear: &lin };
        let dist = PermutationDistribution::symmetric(3, PermutationSampling::Exact);
        let r = shapley_values(&dist, &values, ShapleyOptions { decompose: true, ..Default::default() }).unwrap();
        for i in 0..3 {
            let expected = lin.coefficients[i] * (x[i] - model.mean()[i]);
            assert!((r.features[i].phi - expected).abs() < 1e-12);
            assert_eq!(r.features[i].indirect, Some(0.0));
        }
    }

    #[test]
    fn exact_weights_match_permutation_average() {
        // Oracle: direct average of φ_i(π) over every ordering.
        let space = FeatureSpace::categorical(&[2, 2, 2]);
        let probs = vec![0.05, 0.1, 0.15, 0.2, 0.1, 0.05, 0.25, 0.1];
        let table = JointTable::new(space, probs).unwrap();
        let f = TableModel::new(vec![2, 2, 2], vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.5, -1.0, 2.0]).unwrap();
        let values = Memoized::new(DiscreteValues {
            x: vec![1.0, 0.0, 1.0],
            variant: Variant::Conditional,
            graph: None,
            table: &table,
            predictor: &f,
            mode: ConfoundedDraw::Joint,
        });
        let perms = all_permutations(3);
        let dist = PermutationDistribution::symmetric(3, PermutationSampling::Exact);
        let r = shapley_values(&dist, &values, ShapleyOptions::default()).unwrap();
        for i in 0..3 {
            let avg: f64 = perms.iter().map(|p| contribution(p, i, &values).unwrap().total).sum::<f64>() / 6.0;
            assert!((r.features[i].phi - avg).abs() < 1e-12);
        }
        let first = telescoped_sum(&(0..3).map(|i| contribution(&perms[0], i, &values).unwrap()).collect::<Vec<_>>());
        for p in &perms {
            let recs: Vec<_> = (0..3).map(|i| contribution(p, i, &values).unwrap()).collect();
            assert_eq!(telescoped_sum(&recs).to_bits(), first.to_bits());
        }
        assert!(r.efficiency_gap().abs() < 1e-12);
    }

    #[test]
    fn enumeration_cap() {
        let n = 11;
        let model = GaussianModel::new(FeatureSpace::continuous(n), vec![0.0; n], DMatrix::identity(n, n)).unwrap();
        let lin = LinearModel::new(0.0, vec![1.0; n]);
        let values = LinearValues { x: vec![1.0; n], variant: Variant::Marginal, graph: None, model: &model, linear: &lin };
        let dist = PermutationDistribution::symmetric(n, PermutationSampling::Exact);
        assert_eq!(
            shapley_values(&dist, &values, ShapleyOptions::default()),
            Err(Error::EnumerationCap { n: 11, cap: 10 })
        );
        let sampled = PermutationDistribution::symmetric(
            n,
            PermutationSampling::Sampled { n_permutations: 20, seed: 1, sampler: ExtensionSampler::Exact },
        );
        let r = shapley_values(&sampled, &values, ShapleyOptions::default()).unwrap();
        for f in &r.features {
            assert!((f.phi - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sampled_converges_to_exact() {
        let space = FeatureSpace::categorical(&[2, 2, 2, 2]);
        let mut probs: Vec<f64> = (1..=16).map(|k| k as f64).collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        let table = JointTable::new(space.clone(), probs).unwrap();
        let f = TableModel::new(vec![2; 4], (0..16).map(|k| ((k * 7) % 5) as f64).collect()).unwrap();
        let g = build_chain_graph(space, &[vec![0, 1], vec![2], vec![3]], &[true, false, false], None).unwrap();
        let values = Memoized::new(DiscreteValues {
            x: vec![1.0, 0.0, 1.0, 1.0],
            variant: Variant::Causal,
            graph: Some(&g),
            table: &table,
            predictor: &f,
            mode: ConfoundedDraw::Joint,
        });
        for symmetry in [Symmetry::Symmetric, Symmetry::Asymmetric] {
            let exact = PermutationDistribution::new(symmetry, Some(&g), 4, PermutationSampling::Exact).unwrap();
            let exact = shapley_values(&exact, &values, ShapleyOptions::default()).unwrap();
            let sampling = PermutationSampling::Sampled { n_permutations: 4000, seed: 7, sampler: ExtensionSampler::Exact };
            let sampled = PermutationDistribution::new(symmetry, Some(&g), 4, sampling).unwrap();
            let sampled = shapley_values(&sampled, &values, ShapleyOptions::default()).unwrap();
            for (e, s) in exact.features.iter().zip(&sampled.features) {
                assert!((e.phi - s.phi).abs() <= 4.0 * s.stderr + 1e-12, "{symmetry:?}: {} vs {} ± {}", e.phi, s.phi, s.stderr);
            }
        }
    }

    #[test]
    fn monte_carlo_report_has_efficiency_within_noise() {
        let model = toy(0.6);
        let lin = LinearModel::new(1.0, vec![1.0, -2.0]);
        let g = chain();
        let values = Memoized::new(MonteCarloValues {
            x: vec![0.5, 1.0],
            variant: Variant::Causal,
            graph: Some(&g),
            sampler: &model,
            predictor: &lin,
            config: SamplerConfig::with_samples(5000, 3),
        });
        let dist = PermutationDistribution::asymmetric(&g, PermutationSampling::Exact);
        let r = shapley_values(&dist, &values, ShapleyOptions { decompose: true, ..Default::default() }).unwrap();
        assert!(r.efficiency_gap().abs() <= 4.0 * r.efficiency_stderr() + 1e-12);
        assert_eq!(r.meta.seed, Some(3));
        assert_eq!(r.meta.n_samples, Some(5000));
        for f in &r.features {
            assert!(f.stderr > 0.0);
        }
        let perm = Permutation::new(vec![0, 1]).unwrap();
        for i in 0..2 {
            let rec = decompose_effects(&perm, i, &values).unwrap();
            assert_eq!(rec.direct.unwrap() + rec.indirect.unwrap(), rec.total);
        }
    }
}
