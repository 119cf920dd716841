//! Feature metadata, feature subsets and coalitions.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::GraphError;

/// Largest feature count supported by [`FeatureSet`].
pub const MAX_FEATURES: usize = 64;

/// Measurement type of a feature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous,
    Categorical { levels: Vec<String> },
}

impl FeatureKind {
    pub fn is_categorical(&self) -> bool {
        matches!(self, FeatureKind::Categorical { .. })
    }

    pub fn levels(&self) -> Option<&[String]> {
        match self {
            FeatureKind::Categorical { levels } => Some(levels),
            FeatureKind::Continuous => None,
        }
    }
}

/// A named feature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
}

/// Ordered list of features. Index `i` in every other structure refers to
/// `features()[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Feature>", into = "Vec<Feature>")]
pub struct FeatureSpace {
    features: Vec<Feature>,
}

impl FeatureSpace {
    pub fn new(features: Vec<Feature>) -> Result<Self, GraphError> {
        if features.len() > MAX_FEATURES {
            return Err(GraphError::TooManyFeatures(features.len()));
        }
        let mut seen = HashSet::new();
        for f in &features {
            if f.name.is_empty() {
                return Err(GraphError::EmptyFeatureName);
            }
            if !seen.insert(f.name.as_str()) {
                return Err(GraphError::DuplicateFeatureName(f.name.clone()));
            }
            if let FeatureKind::Categorical { levels } = &f.kind {
                if levels.is_empty() {
                    return Err(GraphError::NoLevels(f.name.clone()));
                }
                let distinct: HashSet<_> = levels.iter().collect();
                if distinct.len() != levels.len() {
                    return Err(GraphError::DuplicateLevel(f.name.clone()));
                }
            }
        }
        Ok(Self { features })
    }

    /// `n` continuous features named `x1..xn`.
    pub fn continuous(n: usize) -> Self {
        Self::new(
            (1..=n)
                .map(|i| Feature {
                    name: format!("x{i}"),
                    kind: FeatureKind::Continuous,
                })
                .collect(),
        )
        .expect("generated names are unique")
    }

    /// Categorical features named `x1..xn` with levels `"0".."k-1"`.
    pub fn categorical(cardinalities: &[usize]) -> Self {
        Self::new(
            cardinalities
                .iter()
                .enumerate()
                .map(|(i, &k)| Feature {
                    name: format!("x{}", i + 1),
                    kind: FeatureKind::Categorical {
                        levels: (0..k).map(|l| l.to_string()).collect(),
                    },
                })
                .collect(),
        )
        .expect("generated names are unique")
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }

    pub fn name(&self, i: usize) -> &str {
        &self.features[i].name
    }

    pub fn kind(&self, i: usize) -> &FeatureKind {
        &self.features[i].kind
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn all(&self) -> FeatureSet {
        FeatureSet::full(self.len())
    }
}

impl TryFrom<Vec<Feature>> for FeatureSpace {
    type Error = GraphError;

    fn try_from(features: Vec<Feature>) -> Result<Self, Self::Error> {
        Self::new(features)
    }
}

impl From<FeatureSpace> for Vec<Feature> {
    fn from(space: FeatureSpace) -> Self {
        space.features
    }
}

/// Subset of feature indices, stored as a 64-bit mask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct FeatureSet(u64);

impl FeatureSet {
    pub const EMPTY: FeatureSet = FeatureSet(0);

    pub fn from_bits(bits: u64) -> Self {
        FeatureSet(bits)
    }

    pub fn full(n: usize) -> Self {
        assert!(n <= MAX_FEATURES);
        if n == MAX_FEATURES {
            FeatureSet(u64::MAX)
        } else {
            FeatureSet((1u64 << n) - 1)
        }
    }

    pub fn singleton(i: usize) -> Self {
        FeatureSet(1u64 << i)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, i: usize) -> bool {
        i < MAX_FEATURES && self.0 & (1u64 << i) != 0
    }

    pub fn with(self, i: usize) -> Self {
        FeatureSet(self.0 | (1u64 << i))
    }

    pub fn without(self, i: usize) -> Self {
        FeatureSet(self.0 & !(1u64 << i))
    }

    pub fn union(self, other: Self) -> Self {
        FeatureSet(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        FeatureSet(self.0 & other.0)
    }

    pub fn difference(self, other: Self) -> Self {
        FeatureSet(self.0 & !other.0)
    }

    /// Complement within `{0, .., n-1}`.
    pub fn complement(self, n: usize) -> Self {
        FeatureSet::full(n).difference(self)
    }

    pub fn is_subset(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Ascending indices.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let i = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(i)
            }
        })
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }
}

impl FromIterator<usize> for FeatureSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        iter.into_iter().fold(FeatureSet::EMPTY, FeatureSet::with)
    }
}

impl fmt::Debug for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// In-coalition features together with their known values.
///
/// Values are held in ascending index order, one per member of `set`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coalition {
    set: FeatureSet,
    values: Vec<f64>,
}

impl Coalition {
    /// Builds the coalition `set` with values taken from the full instance `x`.
    pub fn from_instance(set: FeatureSet, x: &[f64]) -> Self {
        assert!(
            set.iter().all(|i| i < x.len()),
            "coalition index out of range for instance of length {}",
            x.len()
        );
        Coalition {
            set,
            values: set.iter().map(|i| x[i]).collect(),
        }
    }

    /// Builds a coalition from explicit `(index, value)` pairs.
    pub fn from_pairs(pairs: &[(usize, f64)]) -> Result<Self, GraphError> {
        let mut sorted = pairs.to_vec();
        sorted.sort_by_key(|p| p.0);
        let mut set = FeatureSet::EMPTY;
        for &(i, _) in &sorted {
            if i >= MAX_FEATURES {
                return Err(GraphError::UnknownFeature(i));
            }
            if set.contains(i) {
                return Err(GraphError::DuplicateFeature { feature: i, component: 0 });
            }
            set = set.with(i);
        }
        Ok(Coalition {
            set,
            values: sorted.into_iter().map(|p| p.1).collect(),
        })
    }

    pub fn empty() -> Self {
        Coalition { set: FeatureSet::EMPTY, values: Vec::new() }
    }

    pub fn set(&self) -> FeatureSet {
        self.set
    }

    /// Out-of-coalition features within `{0, .., n-1}`.
    pub fn complement(&self, n: usize) -> FeatureSet {
        self.set.complement(n)
    }

    pub fn value(&self, i: usize) -> Option<f64> {
        if !self.set.contains(i) {
            return None;
        }
        let rank = (self.set.bits() & ((1u64 << i) - 1)).count_ones() as usize;
        Some(self.values[rank])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.set.iter().zip(self.values.iter().copied())
    }

    /// Writes the coalition values into a full-length row.
    pub fn fill(&self, row: &mut [f64]) {
        for (i, v) in self.iter() {
            row[i] = v;
        }
    }
}
