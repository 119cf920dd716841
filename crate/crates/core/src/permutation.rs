//! Feature orderings and distributions over them.
//!
//! Symmetric Shapley values weight all `n!` orderings uniformly; asymmetric
//! ones restrict the support to orderings in which every ancestor component
//! precedes its descendants and weight that support uniformly.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, GraphError};
use crate::feature::FeatureSet;
use crate::graph::ChainGraph;

/// Counting linear extensions over all subsets is limited to this many features.
pub const MAX_COUNTED_FEATURES: usize = 20;

/// Rejection sampling of consistent orderings is limited to this many features.
pub const MAX_REJECTION_FEATURES: usize = 10;

/// An ordering of the features `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(order: Vec<usize>) -> Result<Self, GraphError> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &i in &order {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(GraphError::InvalidPermutation { n, got: order.len() });
            }
        }
        Ok(Permutation(order))
    }

    pub fn identity(n: usize) -> Self {
        Permutation((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn order(&self) -> &[usize] {
        &self.0
    }

    /// Features strictly before `feature`.
    pub fn predecessors(&self, feature: usize) -> FeatureSet {
        self.0.iter().take_while(|&&j| j != feature).copied().collect()
    }
}

/// Precedence constraints: `must_precede[j]` lists the features that have to
/// come before `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderConstraints {
    must_precede: Vec<FeatureSet>,
}

impl OrderConstraints {
    pub fn none(n: usize) -> Self {
        OrderConstraints { must_precede: vec![FeatureSet::EMPTY; n] }
    }

    /// Ancestor components before descendants; members of one component are
    /// unconstrained relative to each other.
    pub fn from_graph(graph: &ChainGraph) -> Self {
        OrderConstraints {
            must_precede: (0..graph.n_features()).map(|j| graph.ancestors_of_feature(j)).collect(),
        }
    }

    pub fn n_features(&self) -> usize {
        self.must_precede.len()
    }

    pub fn must_precede(&self, feature: usize) -> FeatureSet {
        self.must_precede[feature]
    }

    pub fn is_unconstrained(&self) -> bool {
        self.must_precede.iter().all(|s| s.is_empty())
    }

    /// Whether `set` can be the set of the first `|set|` features of a
    /// consistent ordering.
    pub fn is_prefix(&self, set: FeatureSet) -> bool {
        set.iter().all(|j| self.must_precede[j].is_subset(set))
    }

    pub fn is_consistent(&self, perm: &Permutation) -> bool {
        let mut placed = FeatureSet::EMPTY;
        perm.order().iter().all(|&j| {
            let ok = self.must_precede[j].is_subset(placed);
            placed = placed.with(j);
            ok
        })
    }

    /// Features that may come next after `placed`.
    fn available(&self, placed: FeatureSet) -> impl Iterator<Item = usize> + '_ {
        let n = self.n_features();
        placed
            .complement(n)
            .iter()
            .filter(move |&j| self.must_precede[j].is_subset(placed))
    }
}

/// Number of consistent orderings of every feature subset.
///
/// `count(T)` is the number of linear extensions of the constraints
/// restricted to `T`, computed by choosing the first element.
#[derive(Debug, Clone)]
pub struct ExtensionCounts {
    constraints: OrderConstraints,
    counts: Vec<f64>,
}

impl ExtensionCounts {
    pub fn new(constraints: &OrderConstraints) -> Result<Self, Error> {
        let n = constraints.n_features();
        if n > MAX_COUNTED_FEATURES {
            return Err(Error::EnumerationCap { n, cap: MAX_COUNTED_FEATURES });
        }
        let size = 1usize << n;
        let mut counts = vec![0.0f64; size];
        counts[0] = 1.0;
        for bits in 1..size {
            let set = FeatureSet::from_bits(bits as u64);
            counts[bits] = set
                .iter()
                .filter(|&j| constraints.must_precede[j].intersection(set).is_empty())
                .map(|j| counts[set.without(j).bits() as usize])
                .sum();
        }
        Ok(ExtensionCounts { constraints: constraints.clone(), counts })
    }

    pub fn count(&self, set: FeatureSet) -> f64 {
        self.counts[set.bits() as usize]
    }

    /// Size of the support: number of consistent orderings of all features.
    pub fn total(&self) -> f64 {
        self.count(FeatureSet::full(self.constraints.n_features()))
    }

    /// Probability, under the uniform distribution on consistent orderings,
    /// that the predecessors of `feature` are exactly `before`.
    pub fn coalition_weight(&self, before: FeatureSet, feature: usize) -> f64 {
        let n = self.constraints.n_features();
        if before.contains(feature) || !self.constraints.is_prefix(before) {
            return 0.0;
        }
        if !self.constraints.must_precede[feature].is_subset(before) {
            return 0.0;
        }
        let after = before.with(feature).complement(n);
        self.count(before) * self.count(after) / self.total()
    }

    /// Draws an ordering uniformly from the consistent ones.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Permutation {
        let n = self.constraints.n_features();
        let mut placed = FeatureSet::EMPTY;
        let mut order = Vec::with_capacity(n);
        for _ in 0..n {
            let remaining = placed.complement(n);
            let total = self.count(remaining);
            let mut u = rng.random::<f64>() * total;
            let candidates: Vec<usize> = self.constraints.available(placed).collect();
            let mut pick = *candidates.last().expect("acyclic constraints always leave a candidate");
            for &j in &candidates {
                let c = self.count(remaining.without(j));
                if u < c {
                    pick = j;
                    break;
                }
                u -= c;
            }
            order.push(pick);
            placed = placed.with(pick);
        }
        Permutation(order)
    }
}

/// All `n!` orderings in lexicographic order.
pub fn all_permutations(n: usize) -> Vec<Permutation> {
    let mut out = Vec::new();
    let mut current = (0..n).collect::<Vec<_>>();
    loop {
        out.push(Permutation(current.clone()));
        // next lexicographic permutation
        let Some(i) = (1..n).rev().find(|&i| current[i - 1] < current[i]) else {
            break;
        };
        let j = (i..n).rev().find(|&j| current[j] > current[i - 1]).unwrap();
        current.swap(i - 1, j);
        current[i..].reverse();
    }
    out
}

/// All orderings satisfying `constraints`, in lexicographic order.
pub fn consistent_permutations(constraints: &OrderConstraints) -> Vec<Permutation> {
    fn extend(c: &OrderConstraints, placed: FeatureSet, prefix: &mut Vec<usize>, out: &mut Vec<Permutation>) {
        if prefix.len() == c.n_features() {
            out.push(Permutation(prefix.clone()));
            return;
        }
        let next: Vec<usize> = c.available(placed).collect();
        for j in next {
            prefix.push(j);
            extend(c, placed.with(j), prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    extend(constraints, FeatureSet::EMPTY, &mut Vec::new(), &mut out);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetry {
    Symmetric,
    Asymmetric,
}

/// How consistent orderings are drawn in sampled mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExtensionSampler {
    /// Exactly uniform, via [`ExtensionCounts`]; falls back to `RandomTopological`
    /// above [`MAX_COUNTED_FEATURES`].
    #[default]
    Exact,
    /// Random topological sort with uniform choice among available features.
    /// Not uniform over orderings for general partial orders.
    RandomTopological,
    /// Uniform draw over all orderings, rejecting inconsistent ones.
    Rejection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PermutationSampling {
    /// Enumerate the whole support.
    Exact,
    /// Draw orderings uniformly from the support, with replacement.
    Sampled { n_permutations: usize, seed: u64, sampler: ExtensionSampler },
}

/// Weight function over orderings: uniform on its support.
#[derive(Debug, Clone)]
pub struct PermutationDistribution {
    symmetry: Symmetry,
    constraints: OrderConstraints,
    sampling: PermutationSampling,
}

impl PermutationDistribution {
    pub fn symmetric(n: usize, sampling: PermutationSampling) -> Self {
        PermutationDistribution {
            symmetry: Symmetry::Symmetric,
            constraints: OrderConstraints::none(n),
            sampling,
        }
    }

    pub fn asymmetric(graph: &ChainGraph, sampling: PermutationSampling) -> Self {
        PermutationDistribution {
            symmetry: Symmetry::Asymmetric,
            constraints: OrderConstraints::from_graph(graph),
            sampling,
        }
    }

    /// Symmetric or asymmetric depending on `symmetry`; the graph is only
    /// consulted for the asymmetric case.
    pub fn new(symmetry: Symmetry, graph: Option<&ChainGraph>, n: usize, sampling: PermutationSampling) -> Result<Self, Error> {
        match (symmetry, graph) {
            (Symmetry::Symmetric, _) => Ok(Self::symmetric(n, sampling)),
            (Symmetry::Asymmetric, Some(g)) => Ok(Self::asymmetric(g, sampling)),
            (Symmetry::Asymmetric, None) => {
                Err(Error::Config("asymmetric Shapley values require a causal chain graph".into()))
            }
        }
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn constraints(&self) -> &OrderConstraints {
        &self.constraints
    }

    pub fn sampling(&self) -> PermutationSampling {
        self.sampling
    }

    pub fn n_features(&self) -> usize {
        self.constraints.n_features()
    }

    /// Draws the configured number of orderings. Panics in exact mode.
    pub fn draw(&self) -> Result<Vec<Permutation>, Error> {
        let PermutationSampling::Sampled { n_permutations, seed, sampler } = self.sampling else {
            panic!("draw() called on an exact permutation distribution");
        };
        let n = self.n_features();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(PERMUTATION_STREAM);
        let counts = match sampler {
            ExtensionSampler::Exact if n <= MAX_COUNTED_FEATURES => Some(ExtensionCounts::new(&self.constraints)?),
            _ => None,
        };
        if sampler == ExtensionSampler::Rejection && n > MAX_REJECTION_FEATURES {
            return Err(Error::EnumerationCap { n, cap: MAX_REJECTION_FEATURES });
        }
        let mut out = Vec::with_capacity(n_permutations);
        for _ in 0..n_permutations {
            let perm = match (&counts, sampler) {
                (Some(c), _) => c.sample(&mut rng),
                (None, ExtensionSampler::Rejection) => loop {
                    let mut order: Vec<usize> = (0..n).collect();
                    order.shuffle(&mut rng);
                    let p = Permutation(order);
                    if self.constraints.is_consistent(&p) {
                        break p;
                    }
                },
                (None, _) => random_topological(&self.constraints, &mut rng),
            };
            out.push(perm);
        }
        Ok(out)
    }
}

/// Stream reserved for permutation draws; coalition streams use the
/// coalition mask, which never reaches this value for fewer than 64 features.
const PERMUTATION_STREAM: u64 = u64::MAX;

fn random_topological<R: Rng + ?Sized>(constraints: &OrderConstraints, rng: &mut R) -> Permutation {
    let n = constraints.n_features();
    let mut placed = FeatureSet::EMPTY;
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let candidates: Vec<usize> = constraints.available(placed).collect();
        let j = candidates[rng.random_range(0..candidates.len())];
        order.push(j);
        placed = placed.with(j);
    }
    Permutation(order)
}
