use std::hint::black_box;

use causal_shap::{
    estimate_value, shapley_values, Coalition, FeatureSet, LinearValues, Memoized, MonteCarloValues,
    PermutationDistribution, PermutationSampling, SamplerConfig, ShapleyOptions, Variant,
};
use causal_shap_bench::fixture;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn value_estimation(c: &mut Criterion) {
    let fx = fixture(7);
    let coalition = Coalition::from_instance(FeatureSet::from_bits(0b011), &fx.x);
    let mut group = c.benchmark_group("estimate_value");
    for n_samples in [1_000, 10_000] {
        let config = SamplerConfig::with_samples(n_samples, 1);
        for variant in [Variant::Marginal, Variant::Conditional, Variant::Causal] {
            group.bench_with_input(BenchmarkId::new(variant.to_string(), n_samples), &config, |b, config| {
                b.iter(|| estimate_value(black_box(&coalition), variant, Some(&fx.graph), &fx.model, &fx.linear, config).unwrap())
            });
        }
    }
    group.finish();
}

fn exact_attribution(c: &mut Criterion) {
    let mut group = c.benchmark_group("shapley_values_exact");
    for n in [4, 7, 10] {
        let fx = fixture(n);
        for (label, dist) in [
            ("symmetric", PermutationDistribution::symmetric(n, PermutationSampling::Exact)),
            ("asymmetric", PermutationDistribution::asymmetric(&fx.graph, PermutationSampling::Exact)),
        ] {
            group.bench_with_input(BenchmarkId::new(label, n), &n, |b, _| {
                b.iter(|| {
                    let values = Memoized::new(LinearValues {
                        x: fx.x.clone(),
                        variant: Variant::Causal,
                        graph: Some(&fx.graph),
                        model: &fx.model,
                        linear: &fx.linear,
                    });
                    shapley_values(&dist, &values, ShapleyOptions::default()).unwrap()
                })
            });
        }
    }
    group.finish();
}

fn monte_carlo_attribution(c: &mut Criterion) {
    let fx = fixture(7);
    let dist = PermutationDistribution::asymmetric(&fx.graph, PermutationSampling::Exact);
    c.bench_function("shapley_values_monte_carlo/asymmetric/7", |b| {
        b.iter(|| {
            let values = Memoized::new(MonteCarloValues {
                x: fx.x.clone(),
                variant: Variant::Causal,
                graph: Some(&fx.graph),
                sampler: &fx.model,
                predictor: &fx.linear,
                config: SamplerConfig::with_samples(500, 3),
            });
            shapley_values(&dist, &values, ShapleyOptions { decompose: true, ..Default::default() }).unwrap()
        })
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = value_estimation, exact_attribution, monte_carlo_attribution
}
criterion_main!(benches);
