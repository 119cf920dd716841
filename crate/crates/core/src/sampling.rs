//! Drawing out-of-coalition features from factorized (interventional or
//! observational) distributions.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector};
use parking_lot::Mutex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::discrete::JointTable;
use crate::error::DistributionError;
use crate::feature::{Coalition, FeatureSet, FeatureSpace};
use crate::gaussian::GaussianModel;
use crate::graph::{Factor, FactorPlan};

const REPLICATE_MIX: u64 = 0x9E37_79B9_7F4A_7C15;

/// Seed plus stream label; `(seed, replicate, label)` fixes the sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub replicate: u64,
    pub label: u64,
}

impl RngStream {
    pub fn new(seed: u64, replicate: u64, label: u64) -> Self {
        RngStream { seed, replicate, label }
    }

    /// The stream used for coalition `set`: labels are the coalition bits, so
    /// every variant evaluating `set` draws from the same base stream.
    pub fn for_coalition(seed: u64, replicate: u64, set: FeatureSet) -> Self {
        RngStream { seed, replicate, label: set.bits() }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(self.replicate.wrapping_mul(REPLICATE_MIX)));
        rng.set_stream(self.label);
        rng
    }
}

/// Source of standard normals and uniforms. With `antithetic` on, every odd
/// draw replays the previous draw's variates mirrored (`z → −z`, `u → 1 − u`).
pub struct Noise {
    rng: ChaCha8Rng,
    antithetic: bool,
    tape: Vec<f64>,
    pos: usize,
    replay: bool,
}

impl Noise {
    pub fn new(stream: RngStream, antithetic: bool) -> Self {
        Noise { rng: stream.rng(), antithetic, tape: Vec::new(), pos: 0, replay: false }
    }

    /// Marks the start of draw number `k`.
    pub fn begin_draw(&mut self, k: usize) {
        if !self.antithetic {
            return;
        }
        if k % 2 == 0 {
            self.tape.clear();
            self.replay = false;
        } else {
            self.pos = 0;
            self.replay = true;
        }
    }

    fn replayed(&mut self) -> Option<f64> {
        if self.replay && self.pos < self.tape.len() {
            self.pos += 1;
            Some(self.tape[self.pos - 1])
        } else {
            None
        }
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.replayed() {
            return -z;
        }
        let z: f64 = self.rng.sample(StandardNormal);
        if self.antithetic && !self.replay {
            self.tape.push(z);
        }
        z
    }

    /// Uniform on `[0, 1)` (mirrored draws may return exactly 1).
    pub fn uniform(&mut self) -> f64 {
        if let Some(u) = self.replayed() {
            return 1.0 - u;
        }
        let u: f64 = self.rng.random();
        if self.antithetic && !self.replay {
            self.tape.push(u);
        }
        u
    }
}

/// How targets of a confounded component are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConfoundedDraw {
    /// Jointly from `P(X_{τ∩S̄} | parents)`.
    #[default]
    Joint,
    /// Each target independently from `P(X_j | parents)`.
    PerFeature,
}

/// Distribution that can fill in out-of-coalition features factor by factor.
pub trait InterventionalSampler: Send + Sync {
    fn feature_space(&self) -> &FeatureSpace;

    /// Prepares every factor of `plan` once so that many draws can reuse it.
    fn compile(&self, plan: &FactorPlan, mode: ConfoundedDraw) -> Result<Box<dyn CompiledPlan + '_>, DistributionError>;
}

pub trait CompiledPlan: Send + Sync {
    /// Overwrites the entries of `row` outside the plan's fixed set; entries
    /// inside it are read as the intervened (or observed) values.
    fn fill(&self, row: &mut [f64], noise: &mut Noise) -> Result<(), DistributionError>;
}

/// One draw of the full feature vector with `coalition` fixed.
pub fn sample_interventional(
    sampler: &dyn InterventionalSampler,
    plan: &FactorPlan,
    coalition: &Coalition,
    noise: &mut Noise,
    mode: ConfoundedDraw,
) -> Result<Vec<f64>, DistributionError> {
    assert_eq!(plan.fixed(), coalition.set(), "plan was derived for a different coalition");
    let mut row = vec![0.0; plan.n_features()];
    coalition.fill(&mut row);
    sampler.compile(plan, mode)?.fill(&mut row, noise)?;
    Ok(row)
}

/// `count` draws from the observational joint, row-major.
pub fn sample_joint(
    sampler: &dyn InterventionalSampler,
    count: usize,
    stream: RngStream,
) -> Result<Vec<f64>, DistributionError> {
    let n = sampler.feature_space().len();
    let plan = FactorPlan::marginal(n, FeatureSet::EMPTY);
    let compiled = sampler.compile(&plan, ConfoundedDraw::Joint)?;
    let mut noise = Noise::new(stream, false);
    let mut out = vec![0.0; count * n];
    for row in out.chunks_mut(n) {
        compiled.fill(row, &mut noise)?;
    }
    Ok(out)
}

/// Splits a factor's targets into the groups that are drawn together.
fn target_groups(factor: &Factor, mode: ConfoundedDraw) -> Vec<FeatureSet> {
    if factor.confounded && mode == ConfoundedDraw::PerFeature {
        factor.targets.iter().map(FeatureSet::singleton).collect()
    } else if factor.targets.is_empty() {
        Vec::new()
    } else {
        vec![factor.targets]
    }
}

enum GaussianStep {
    Block {
        targets: Vec<usize>,
        given: Vec<usize>,
        gain: DMatrix<f64>,
        offset: DVector<f64>,
        lower: DMatrix<f64>,
    },
    Level {
        feature: usize,
        cdf: Vec<f64>,
    },
}

struct CompiledGaussian {
    steps: Vec<GaussianStep>,
}

impl InterventionalSampler for GaussianModel {
    fn feature_space(&self) -> &FeatureSpace {
        GaussianModel::feature_space(self)
    }

    fn compile(&self, plan: &FactorPlan, mode: ConfoundedDraw) -> Result<Box<dyn CompiledPlan + '_>, DistributionError> {
        let mut steps = Vec::new();
        for factor in plan.factors() {
            let given = factor.given();
            for group in target_groups(factor, mode) {
                let (categorical, continuous): (Vec<usize>, Vec<usize>) =
                    group.iter().partition(|&j| !self.is_continuous(j));
                if let Some(&j) = categorical.first() {
                    if !given.is_empty() {
                        return Err(DistributionError::UnsupportedCategorical(j));
                    }
                }
                for j in categorical {
                    let freq = self.level_frequencies(j).expect("categorical feature has frequencies");
                    let mut acc = 0.0;
                    let cdf = freq
                        .iter()
                        .map(|p| {
                            acc += p;
                            acc
                        })
                        .collect();
                    steps.push(GaussianStep::Level { feature: j, cdf });
                }
                if continuous.is_empty() {
                    continue;
                }
                let given_idx = given.to_vec();
                let lg = self.linear_conditional(&continuous, &given_idx)?;
                let lower = Cholesky::new(lg.covariance.clone())
                    .ok_or_else(|| DistributionError::SingularConditioning {
                        features: given.union(group).to_vec(),
                    })?
                    .unpack();
                steps.push(GaussianStep::Block {
                    targets: continuous,
                    given: given_idx,
                    gain: lg.gain,
                    offset: lg.offset,
                    lower,
                });
            }
        }
        Ok(Box::new(CompiledGaussian { steps }))
    }
}

impl CompiledPlan for CompiledGaussian {
    fn fill(&self, row: &mut [f64], noise: &mut Noise) -> Result<(), DistributionError> {
        for step in &self.steps {
            match step {
                GaussianStep::Block { targets, given, gain, offset, lower } => {
                    let t = targets.len();
                    let z: Vec<f64> = (0..t).map(|_| noise.normal()).collect();
                    for (a, &j) in targets.iter().enumerate() {
                        let mut v = offset[a];
                        for (b, &g) in given.iter().enumerate() {
                            v += gain[(a, b)] * row[g];
                        }
                        for (b, zb) in z.iter().enumerate().take(a + 1) {
                            v += lower[(a, b)] * zb;
                        }
                        row[j] = v;
                    }
                }
                GaussianStep::Level { feature, cdf } => {
                    row[*feature] = inverse_cdf(cdf, noise.uniform()) as f64;
                }
            }
        }
        Ok(())
    }
}

/// First index whose cumulative probability exceeds `u`, skipping
/// zero-probability entries.
fn inverse_cdf(cdf: &[f64], u: f64) -> usize {
    let mut last_positive = 0;
    let mut prev = 0.0;
    for (k, &c) in cdf.iter().enumerate() {
        if c > prev {
            if u < c {
                return k;
            }
            last_positive = k;
        }
        prev = c;
    }
    last_positive
}

type Conditional = Arc<(Vec<Vec<usize>>, Vec<f64>)>;

struct TableStep {
    targets: FeatureSet,
    target_idx: Vec<usize>,
    given: Vec<usize>,
    cache: Mutex<HashMap<Vec<usize>, Conditional>>,
}

struct CompiledTable<'a> {
    table: &'a JointTable,
    steps: Vec<TableStep>,
}

impl InterventionalSampler for JointTable {
    fn feature_space(&self) -> &FeatureSpace {
        JointTable::feature_space(self)
    }

    fn compile(&self, plan: &FactorPlan, mode: ConfoundedDraw) -> Result<Box<dyn CompiledPlan + '_>, DistributionError> {
        let steps = plan
            .factors()
            .iter()
            .flat_map(|factor| {
                let given = factor.given().to_vec();
                target_groups(factor, mode).into_iter().map(move |targets| TableStep {
                    targets,
                    target_idx: targets.to_vec(),
                    given: given.clone(),
                    cache: Mutex::new(HashMap::new()),
                })
            })
            .collect();
        Ok(Box::new(CompiledTable { table: self, steps }))
    }
}

impl CompiledPlan for CompiledTable<'_> {
    fn fill(&self, row: &mut [f64], noise: &mut Noise) -> Result<(), DistributionError> {
        for step in &self.steps {
            let key: Vec<usize> = step.given.iter().map(|&g| row[g] as usize).collect();
            let cached = step.cache.lock().get(&key).cloned();
            let conditional = match cached {
                Some(c) => c,
                None => {
                    let given: Vec<(usize, usize)> = step.given.iter().copied().zip(key.iter().copied()).collect();
                    let entries = self.table.conditional(step.targets, &given)?;
                    let mut acc = 0.0;
                    let (levels, cdf) = entries
                        .into_iter()
                        .map(|(levels, p)| {
                            acc += p;
                            (levels, acc)
                        })
                        .unzip();
                    let c: Conditional = Arc::new((levels, cdf));
                    step.cache.lock().insert(key, c.clone());
                    c
                }
            };
            let k = inverse_cdf(&conditional.1, noise.uniform());
            for (&j, &level) in step.target_idx.iter().zip(&conditional.0[k]) {
                row[j] = level as f64;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_chain_graph, ChainGraph};
    use crate::numeric::{mean, sample_variance};

    fn bivariate(rho: f64) -> GaussianModel {
        GaussianModel::new(
            FeatureSpace::continuous(2),
            vec![0.0, 0.0],
            DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]),
        )
        .unwrap()
    }

    fn draws(model: &GaussianModel, graph: &ChainGraph, x1: f64, k: usize, seed: u64) -> Vec<f64> {
        let coalition = Coalition::from_pairs(&[(0, x1)]).unwrap();
        let plan = graph.intervention_factorization(coalition.set());
        let compiled = model.compile(&plan, ConfoundedDraw::Joint).unwrap();
        let mut noise = Noise::new(RngStream::new(seed, 0, 1), false);
        (0..k)
            .map(|_| {
                let mut row = vec![x1, f64::NAN];
                compiled.fill(&mut row, &mut noise).unwrap();
                assert_eq!(row[0], x1);
                row[1]
            })
            .collect()
    }

    #[test]
    fn full_coalition_returns_instance() {
        let m = bivariate(0.5);
        let g = ChainGraph::single_component(FeatureSpace::continuous(2), false);
        let c = Coalition::from_instance(FeatureSet::full(2), &[0.3, -1.2]);
        let plan = g.intervention_factorization(c.set());
        let mut noise = Noise::new(RngStream::new(0, 0, 0), false);
        let row = sample_interventional(&m, &plan, &c, &mut noise, ConfoundedDraw::Joint).unwrap();
        assert_eq!(row, vec![0.3, -1.2]);
    }

    #[test]
    fn confounder_intervention_leaves_other_feature_marginal() {
        let g = ChainGraph::single_component(FeatureSpace::continuous(2), true);
        let k = 40_000;
        let x2 = draws(&bivariate(0.7), &g, 1.0, k, 3);
        assert!(mean(&x2).abs() < 3.0 / (k as f64).sqrt());
    }

    #[test]
    fn chain_intervention_follows_regression() {
        let alpha = 0.6;
        let g = build_chain_graph(FeatureSpace::continuous(2), &[vec![0], vec![1]], &[false, false], None).unwrap();
        let k = 40_000;
        let x2 = draws(&bivariate(alpha), &g, 1.5, k, 4);
        let se = ((1.0 - alpha * alpha) / k as f64).sqrt();
        assert!((mean(&x2) - alpha * 1.5).abs() < 3.0 * se);
    }

    #[test]
    fn same_stream_is_reproducible_regardless_of_interleaving() {
        let m = bivariate(0.4);
        let g = ChainGraph::single_component(FeatureSpace::continuous(2), false);
        let a = draws(&m, &g, 0.2, 50, 9);
        let mut other = Noise::new(RngStream::new(9, 0, 2), false);
        for _ in 0..17 {
            other.normal();
        }
        let b = draws(&m, &g, 0.2, 50, 9);
        assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        let c = draws(&m, &g, 0.2, 50, 10);
        assert_ne!(a, c);
    }

    #[test]
    fn empty_coalition_reproduces_moments() {
        let cov = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, -0.2, 0.5, 2.0, 0.3, -0.2, 0.3, 0.7]);
        let m = GaussianModel::new(FeatureSpace::continuous(3), vec![1.0, 0.0, -1.0], cov.clone()).unwrap();
        let k = 50_000;
        let rows = sample_joint(&m, k, RngStream::new(1, 0, 0)).unwrap();
        for j in 0..3 {
            let col: Vec<f64> = rows.chunks(3).map(|r| r[j]).collect();
            let se = (cov[(j, j)] / k as f64).sqrt();
            assert!((mean(&col) - m.mean()[j]).abs() < 4.0 * se);
            let se_var = cov[(j, j)] * (2.0 / (k - 1) as f64).sqrt();
            assert!((sample_variance(&col) - cov[(j, j)]).abs() < 4.0 * se_var);
        }
    }

    #[test]
    fn antithetic_pairs_mirror_the_noise() {
        let mut noise = Noise::new(RngStream::new(5, 0, 0), true);
        noise.begin_draw(0);
        let (z, u) = (noise.normal(), noise.uniform());
        noise.begin_draw(1);
        assert_eq!(noise.normal(), -z);
        assert_eq!(noise.uniform(), 1.0 - u);
        noise.begin_draw(2);
        assert_ne!(noise.normal(), z);
    }

    #[test]
    fn categorical_conditioning_is_rejected() {
        use crate::data::DataMatrix;
        use crate::feature::{Feature, FeatureKind};
        let space = FeatureSpace::new(vec![
            Feature { name: "a".into(), kind: FeatureKind::Continuous },
            Feature { name: "g".into(), kind: FeatureKind::Categorical { levels: vec!["x".into(), "y".into()] } },
        ])
        .unwrap();
        let data = DataMatrix::from_rows(space.clone(), &[vec![1.0, 0.0], vec![2.0, 1.0], vec![0.5, 1.0]]).unwrap();
        let m = crate::gaussian::fit_gaussian(&data, None).unwrap();
        // parentless confounded component: categorical target drawn from its marginal
        let confounded = ChainGraph::single_component(space.clone(), true);
        let plan = confounded.intervention_factorization(FeatureSet::singleton(0));
        assert!(m.compile(&plan, ConfoundedDraw::Joint).is_ok());
        let plan = FactorPlan::conditional(2, FeatureSet::singleton(0));
        assert!(matches!(m.compile(&plan, ConfoundedDraw::Joint), Err(DistributionError::UnsupportedCategorical(1))));
        let plan = FactorPlan::conditional(2, FeatureSet::singleton(1));
        assert!(matches!(m.compile(&plan, ConfoundedDraw::Joint), Err(DistributionError::UnsupportedCategorical(1))));
    }

    #[test]
    fn table_sampler_matches_conditional() {
        let eps = 0.5;
        let a = 0.25 * (1.0 + eps);
        let b = 0.25 * (1.0 - eps);
        let t = JointTable::new(FeatureSpace::categorical(&[2, 2]), vec![a, b, b, a]).unwrap();
        let plan = FactorPlan::conditional(2, FeatureSet::singleton(0));
        let compiled = t.compile(&plan, ConfoundedDraw::Joint).unwrap();
        let mut noise = Noise::new(RngStream::new(0, 0, 1), false);
        let k = 40_000;
        let ones = (0..k)
            .filter(|_| {
                let mut row = vec![0.0, 0.0];
                compiled.fill(&mut row, &mut noise).unwrap();
                row[1] == 1.0
            })
            .count();
        let p = ones as f64 / k as f64;
        assert!((p - 0.25).abs() < 4.0 * (0.25f64 * 0.75 / k as f64).sqrt());
    }

    #[test]
    fn inverse_cdf_skips_empty_levels() {
        let cdf = [0.5, 0.5, 1.0];
        assert_eq!(inverse_cdf(&cdf, 0.0), 0);
        assert_eq!(inverse_cdf(&cdf, 0.5), 2);
        assert_eq!(inverse_cdf(&cdf, 1.0), 2);
        assert_eq!(inverse_cdf(&[1.0, 1.0], 1.0), 0);
    }
}
