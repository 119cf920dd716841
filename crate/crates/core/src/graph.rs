//! Causal chain graphs: a DAG of fully connected chain components, each
//! flagged as confounded (dependencies from a latent common cause) or not
//! (dependencies from mutual interaction).

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::GraphError;
use crate::feature::{Feature, FeatureSet, FeatureSpace};
use crate::permutation::Permutation;

/// One chain component. Component identifiers are positions in the listed
/// order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainComponent {
    members: FeatureSet,
    confounded: bool,
    parents: Vec<usize>,
}

impl ChainComponent {
    pub fn members(&self) -> FeatureSet {
        self.members
    }

    pub fn confounded(&self) -> bool {
        self.confounded
    }

    pub fn parents(&self) -> &[usize] {
        &self.parents
    }
}

/// Immutable causal chain graph over a [`FeatureSpace`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainGraph {
    space: FeatureSpace,
    components: Vec<ChainComponent>,
    explicit_parents: bool,
    topo_order: Vec<usize>,
    component_of: Vec<usize>,
    /// Features in the parent components of each component.
    parent_features: Vec<FeatureSet>,
    /// Features in all strict ancestor components of each component.
    ancestor_features: Vec<FeatureSet>,
}

/// Builds a chain graph from a partial causal ordering.
///
/// `partial_order[k]` lists the features of component `k`. Without
/// `explicit_parents`, every earlier component is a parent of every later one.
pub fn build_chain_graph(
    space: FeatureSpace,
    partial_order: &[Vec<usize>],
    confounding: &[bool],
    explicit_parents: Option<&[Vec<usize>]>,
) -> Result<ChainGraph, GraphError> {
    let n = space.len();
    let k = partial_order.len();
    if confounding.len() != k {
        return Err(GraphError::LengthMismatch {
            what: "confounding flags",
            expected: k,
            got: confounding.len(),
        });
    }
    if let Some(parents) = explicit_parents {
        if parents.len() != k {
            return Err(GraphError::LengthMismatch {
                what: "parent lists",
                expected: k,
                got: parents.len(),
            });
        }
    }

    let mut assigned = FeatureSet::EMPTY;
    let mut component_of = vec![usize::MAX; n];
    let mut components = Vec::with_capacity(k);
    for (c, members) in partial_order.iter().enumerate() {
        if members.is_empty() {
            return Err(GraphError::EmptyComponent(c));
        }
        let mut set = FeatureSet::EMPTY;
        for &i in members {
            if i >= n {
                return Err(GraphError::UnknownFeatureInComponent { feature: i, component: c });
            }
            if assigned.contains(i) {
                return Err(GraphError::DuplicateFeature { feature: i, component: c });
            }
            assigned = assigned.with(i);
            set = set.with(i);
            component_of[i] = c;
        }
        let parents = match explicit_parents {
            Some(p) => {
                let mut list = p[c].clone();
                list.sort_unstable();
                list.dedup();
                if let Some(&bad) = list.iter().find(|&&q| q >= k) {
                    return Err(GraphError::UnknownParent { component: c, parent: bad });
                }
                if list.contains(&c) {
                    return Err(GraphError::CyclicParents(c));
                }
                list
            }
            None => (0..c).collect(),
        };
        components.push(ChainComponent { members: set, confounded: confounding[c], parents });
    }
    if let Some(missing) = (0..n).find(|&i| !assigned.contains(i)) {
        return Err(GraphError::MissingFeature(missing));
    }

    let topo_order = topological_order(&components)?;
    let mut parent_features = vec![FeatureSet::EMPTY; k];
    let mut ancestor_features = vec![FeatureSet::EMPTY; k];
    for &c in &topo_order {
        for &p in &components[c].parents {
            parent_features[c] = parent_features[c].union(components[p].members);
            ancestor_features[c] = ancestor_features[c]
                .union(ancestor_features[p])
                .union(components[p].members);
        }
    }

    Ok(ChainGraph {
        space,
        components,
        explicit_parents: explicit_parents.is_some(),
        topo_order,
        component_of,
        parent_features,
        ancestor_features,
    })
}

/// Kahn's algorithm, ties broken by listed order.
fn topological_order(components: &[ChainComponent]) -> Result<Vec<usize>, GraphError> {
    let k = components.len();
    let mut indegree: Vec<usize> = components.iter().map(|c| c.parents.len()).collect();
    let mut children = vec![Vec::new(); k];
    for (c, comp) in components.iter().enumerate() {
        for &p in &comp.parents {
            children[p].push(c);
        }
    }
    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..k).filter(|&c| indegree[c] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(k);
    while let Some(Reverse(c)) = ready.pop() {
        order.push(c);
        for &child in &children[c] {
            indegree[child] -= 1;
            if indegree[child] == 0 {
                ready.push(Reverse(child));
            }
        }
    }
    if order.len() < k {
        let stuck = (0..k).find(|&c| indegree[c] > 0).unwrap_or(0);
        return Err(GraphError::CyclicParents(stuck));
    }
    Ok(order)
}

impl ChainGraph {
    /// All features in one parentless component.
    pub fn single_component(space: FeatureSpace, confounded: bool) -> Self {
        let all = (0..space.len()).collect();
        build_chain_graph(space, &[all], &[confounded], None).expect("single component is valid")
    }

    /// One singleton component per feature, in index order: a fully ordered DAG.
    pub fn total_order(space: FeatureSpace) -> Self {
        let n = space.len();
        let order: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        build_chain_graph(space, &order, &vec![false; n], None).expect("total order is valid")
    }

    pub fn feature_space(&self) -> &FeatureSpace {
        &self.space
    }

    pub fn n_features(&self) -> usize {
        self.space.len()
    }

    pub fn components(&self) -> &[ChainComponent] {
        &self.components
    }

    pub fn has_explicit_parents(&self) -> bool {
        self.explicit_parents
    }

    /// Component identifiers in topological order.
    pub fn topological_order(&self) -> &[usize] {
        &self.topo_order
    }

    pub fn component_of(&self, feature: usize) -> usize {
        self.component_of[feature]
    }

    pub fn parent_features(&self, component: usize) -> FeatureSet {
        self.parent_features[component]
    }

    /// Features that must precede `feature` in any causally consistent ordering.
    pub fn ancestors_of_feature(&self, feature: usize) -> FeatureSet {
        self.ancestor_features[self.component_of[feature]]
    }

    /// Factorization of `P(X_{S̄} | do(x_S))` into per-component factors.
    pub fn intervention_factorization(&self, intervened: FeatureSet) -> FactorPlan {
        let n = self.n_features();
        let out = intervened.complement(n);
        let factors = self
            .topo_order
            .iter()
            .map(|&c| {
                let comp = &self.components[c];
                let parents = self.parent_features[c];
                let mut given_fixed = parents.intersection(intervened);
                if !comp.confounded {
                    given_fixed = given_fixed.union(comp.members.intersection(intervened));
                }
                Factor {
                    component: Some(c),
                    targets: comp.members.intersection(out),
                    given_sampled: parents.intersection(out),
                    given_fixed,
                    confounded: comp.confounded,
                }
            })
            .collect();
        FactorPlan { n, fixed: intervened, factors }
    }

    /// True iff every feature comes after all features of its strict
    /// ancestor components.
    pub fn is_consistent_permutation(&self, perm: &Permutation) -> bool {
        assert_eq!(perm.len(), self.n_features(), "permutation length must match feature count");
        let mut placed = FeatureSet::EMPTY;
        for &j in perm.order() {
            if !self.ancestors_of_feature(j).is_subset(placed) {
                return false;
            }
            placed = placed.with(j);
        }
        true
    }

    /// Serializes to the JSON graph file format.
    pub fn to_json(&self) -> String {
        let file = GraphFile {
            features: self.space.features().to_vec(),
            components: self
                .components
                .iter()
                .map(|c| ComponentFile {
                    members: c.members.iter().map(|i| self.space.name(i).to_string()).collect(),
                    confounded: c.confounded,
                    parents: self.explicit_parents.then(|| c.parents.clone()),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("graph file serializes")
    }

    /// Parses the JSON graph file format, resolving member names to indices.
    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let file: GraphFile =
            serde_json::from_str(text).map_err(|e| GraphError::Format(e.to_string()))?;
        let space = FeatureSpace::new(file.features)?;
        let mut order = Vec::with_capacity(file.components.len());
        for (c, comp) in file.components.iter().enumerate() {
            let members = comp
                .members
                .iter()
                .map(|name| {
                    space.index_of(name).ok_or_else(|| GraphError::UnknownFeatureName {
                        name: name.clone(),
                        component: c,
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            order.push(members);
        }
        let confounding: Vec<bool> = file.components.iter().map(|c| c.confounded).collect();
        let with_parents = file.components.iter().filter(|c| c.parents.is_some()).count();
        let parents: Option<Vec<Vec<usize>>> = if with_parents == 0 {
            None
        } else if with_parents == file.components.len() {
            Some(file.components.iter().map(|c| c.parents.clone().unwrap_or_default()).collect())
        } else {
            return Err(GraphError::Format(
                "either every component lists `parents` or none does".into(),
            ));
        };
        build_chain_graph(space, &order, &confounding, parents.as_deref())
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    features: Vec<Feature>,
    components: Vec<ComponentFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentFile {
    members: Vec<String>,
    confounded: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    parents: Option<Vec<usize>>,
}

/// One factor `P(X_targets | X_given_sampled, x_given_fixed)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factor {
    /// Originating chain component; `None` for observational plans.
    pub component: Option<usize>,
    pub targets: FeatureSet,
    pub given_sampled: FeatureSet,
    pub given_fixed: FeatureSet,
    pub confounded: bool,
}

impl Factor {
    pub fn given(&self) -> FeatureSet {
        self.given_sampled.union(self.given_fixed)
    }
}

/// Ordered factorization of a (possibly interventional) distribution over
/// the out-of-coalition features. Factors are listed so that every sampled
/// conditioning variable is drawn by an earlier factor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorPlan {
    n: usize,
    fixed: FeatureSet,
    factors: Vec<Factor>,
}

impl FactorPlan {
    /// `P(X_{S̄})`: no conditioning at all.
    pub fn marginal(n: usize, fixed: FeatureSet) -> Self {
        FactorPlan {
            n,
            fixed,
            factors: vec![Factor {
                component: None,
                targets: fixed.complement(n),
                given_sampled: FeatureSet::EMPTY,
                given_fixed: FeatureSet::EMPTY,
                confounded: false,
            }],
        }
    }

    /// `P(X_{S̄} | x_S)`: conditioning by observation.
    pub fn conditional(n: usize, fixed: FeatureSet) -> Self {
        FactorPlan {
            n,
            fixed,
            factors: vec![Factor {
                component: None,
                targets: fixed.complement(n),
                given_sampled: FeatureSet::EMPTY,
                given_fixed: fixed,
                confounded: false,
            }],
        }
    }

    pub fn n_features(&self) -> usize {
        self.n
    }

    /// The in-coalition set `S`.
    pub fn fixed(&self) -> FeatureSet {
        self.fixed
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    /// Checks completeness and topological soundness.
    pub fn check(&self) -> Result<(), String> {
        let out = self.fixed.complement(self.n);
        let mut drawn = FeatureSet::EMPTY;
        for (k, f) in self.factors.iter().enumerate() {
            if !f.targets.intersection(drawn).is_empty() {
                return Err(format!("factor {k} redraws {:?}", f.targets.intersection(drawn)));
            }
            if !f.given_sampled.is_subset(drawn) {
                return Err(format!("factor {k} conditions on undrawn {:?}", f.given_sampled));
            }
            if !f.given_fixed.is_subset(self.fixed) || !f.targets.is_subset(out) {
                return Err(format!("factor {k} mixes fixed and sampled features"));
            }
            drawn = drawn.union(f.targets);
        }
        if drawn != out {
            return Err(format!("targets {drawn:?} do not cover {out:?}"));
        }
        Ok(())
    }
}
