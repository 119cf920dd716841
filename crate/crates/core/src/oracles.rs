//! Closed-form Shapley values for two-feature worked examples: four causal
//! structures under a linear model, and XOR on binary features.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature::FeatureSpace;
use crate::graph::{build_chain_graph, ChainGraph};
use crate::permutation::Symmetry;
use crate::value::Variant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToyStructure {
    /// `X1 → X2`
    Chain,
    /// `X2 → X1`
    Fork,
    /// `X1 ← Z → X2`
    Confounder,
    /// `X1 ⇄ X2`
    Cycle,
}

impl ToyStructure {
    pub const ALL: [ToyStructure; 4] = [ToyStructure::Chain, ToyStructure::Fork, ToyStructure::Confounder, ToyStructure::Cycle];

    pub fn as_str(self) -> &'static str {
        match self {
            ToyStructure::Chain => "chain",
            ToyStructure::Fork => "fork",
            ToyStructure::Confounder => "confounder",
            ToyStructure::Cycle => "cycle",
        }
    }

    /// The chain graph realizing this structure over two continuous features.
    pub fn graph(self) -> ChainGraph {
        let space = FeatureSpace::continuous(2);
        match self {
            ToyStructure::Chain => build_chain_graph(space, &[vec![0], vec![1]], &[false, false], None),
            ToyStructure::Fork => build_chain_graph(space, &[vec![1], vec![0]], &[false, false], None),
            ToyStructure::Confounder => Ok(ChainGraph::single_component(space, true)),
            ToyStructure::Cycle => Ok(ChainGraph::single_component(space, false)),
        }
        .expect("two-feature structures are valid")
    }
}

/// `f(x) = β1 x1 + β2 x2` with `E[X_i] = x̄_i` and
/// `E[X_{3−i} | x_i] = x̄_{3−i} + α (x_i − x̄_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyParams {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub mean1: f64,
    pub mean2: f64,
    pub x1: f64,
    pub x2: f64,
}

impl ToyParams {
    /// The setting of the pattern table: `β1 = 0`, `β2 = β`, zero means.
    pub fn pattern(alpha: f64, beta: f64, x1: f64, x2: f64) -> Self {
        ToyParams { alpha, beta1: 0.0, beta2: beta, mean1: 0.0, mean2: 0.0, x1, x2 }
    }

    fn swapped(self) -> Self {
        ToyParams { beta1: self.beta2, beta2: self.beta1, mean1: self.mean2, mean2: self.mean1, x1: self.x2, x2: self.x1, ..self }
    }
}

/// Direct, indirect and total effect of one feature.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Effect {
    pub direct: f64,
    pub indirect: f64,
    pub total: f64,
}

impl Effect {
    fn new(direct: f64, indirect: f64) -> Self {
        Effect { direct, indirect, total: direct + indirect }
    }
}

/// What `E[X_j | do(x_i)]` reduces to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    Conditional,
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterventionalReduction {
    pub reduction: Reduction,
    /// do-calculus rule justifying the reduction (2 or 3).
    pub rule: u8,
}

/// How `E[X_{other} | do(x_{intervened})]` becomes an observational quantity.
pub fn toy_interventional_reduction(structure: ToyStructure, intervened: usize) -> InterventionalReduction {
    assert!(intervened < 2, "two-feature structures only");
    let conditional = InterventionalReduction { reduction: Reduction::Conditional, rule: 2 };
    let marginal = InterventionalReduction { reduction: Reduction::Marginal, rule: 3 };
    match (structure, intervened) {
        (ToyStructure::Chain, 0) | (ToyStructure::Fork, 1) | (ToyStructure::Cycle, _) => conditional,
        _ => marginal,
    }
}

/// `E[X_other | ·x_i]` under the given variant.
fn expected_other(structure: ToyStructure, variant: Variant, p: &ToyParams, given: usize) -> f64 {
    let (other_mean, d) = if given == 0 { (p.mean2, p.x1 - p.mean1) } else { (p.mean1, p.x2 - p.mean2) };
    let reduction = match variant {
        Variant::Marginal => Reduction::Marginal,
        Variant::Conditional => Reduction::Conditional,
        Variant::Causal => toy_interventional_reduction(structure, given).reduction,
    };
    match reduction {
        Reduction::Conditional => other_mean + p.alpha * d,
        Reduction::Marginal => other_mean,
    }
}

/// Effects for ordering `first, second`.
fn ordered(structure: ToyStructure, variant: Variant, p: &ToyParams, first: usize) -> [Effect; 2] {
    let beta = [p.beta1, p.beta2];
    let x = [p.x1, p.x2];
    let mean = [p.mean1, p.mean2];
    let second = 1 - first;
    let shifted = expected_other(structure, variant, p, first);
    let mut out = [Effect::default(); 2];
    out[first] = Effect::new(beta[first] * (x[first] - mean[first]), beta[second] * (shifted - mean[second]));
    out[second] = Effect::new(beta[second] * (x[second] - shifted), 0.0);
    out
}

/// Closed-form direct/indirect/total Shapley values of the linear toy model.
pub fn toy_shapley(structure: ToyStructure, variant: Variant, symmetry: Symmetry, params: &ToyParams) -> [Effect; 2] {
    if structure == ToyStructure::Fork {
        let [a, b] = toy_shapley(ToyStructure::Chain, variant, symmetry, &params.swapped());
        return [b, a];
    }
    let asym_chain = symmetry == Symmetry::Asymmetric && structure == ToyStructure::Chain;
    if asym_chain {
        return ordered(structure, variant, params, 0);
    }
    let a = ordered(structure, variant, params, 0);
    let b = ordered(structure, variant, params, 1);
    let avg = |x: Effect, y: Effect| Effect::new(0.5 * (x.direct + y.direct), 0.5 * (x.indirect + y.indirect));
    [avg(a[0], b[0]), avg(a[1], b[1])]
}

/// Explanation patterns of the two-feature example with `f = β x2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pattern {
    /// Only direct effects.
    D,
    /// The indirect effect is split evenly.
    E,
    /// The root cause receives the whole indirect effect.
    R,
}

/// Which pattern each (structure, variant, symmetry) produces.
pub fn pattern_table(structure: ToyStructure, variant: Variant, symmetry: Symmetry) -> Pattern {
    use Pattern::*;
    use Symmetry::*;
    use ToyStructure::*;
    match (variant, symmetry, structure) {
        (Variant::Marginal, _, _) => D,
        (Variant::Conditional, Symmetric, _) => E,
        (Variant::Conditional, Asymmetric, Chain) => R,
        (Variant::Conditional, Asymmetric, Fork) => D,
        (Variant::Conditional, Asymmetric, Confounder | Cycle) => E,
        (Variant::Causal, Symmetric, Chain) => E,
        (Variant::Causal, Asymmetric, Chain) => R,
        (Variant::Causal, _, Fork | Confounder) => D,
        (Variant::Causal, _, Cycle) => E,
    }
}

/// Effects of each pattern for `f = β x2`, `E[X2 | x1] = α x1`, zero means.
pub fn pattern_values(pattern: Pattern, alpha: f64, beta: f64, x1: f64, x2: f64) -> [Effect; 2] {
    let shift = match pattern {
        Pattern::D => 0.0,
        Pattern::E => 0.5 * beta * alpha * x1,
        Pattern::R => beta * alpha * x1,
    };
    [Effect::new(0.0, shift), Effect::new(beta * x2 - shift, 0.0)]
}

/// Assumed causal structure between the two XOR inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum XorStructure {
    None,
    #[serde(rename = "chain-12")]
    Chain12,
    #[serde(rename = "chain-21")]
    Chain21,
    Confounder,
    Mutual,
}

impl XorStructure {
    pub const ALL: [XorStructure; 5] =
        [XorStructure::None, XorStructure::Chain12, XorStructure::Chain21, XorStructure::Confounder, XorStructure::Mutual];

    pub fn as_str(self) -> &'static str {
        match self {
            XorStructure::None => "none",
            XorStructure::Chain12 => "chain-12",
            XorStructure::Chain21 => "chain-21",
            XorStructure::Confounder => "confounder",
            XorStructure::Mutual => "mutual",
        }
    }

    /// Chain graph over two binary features; `None` has no graph.
    pub fn graph(self) -> Option<ChainGraph> {
        let space = FeatureSpace::categorical(&[2, 2]);
        let g = match self {
            XorStructure::None => return None,
            XorStructure::Chain12 => build_chain_graph(space, &[vec![0], vec![1]], &[false, false], None),
            XorStructure::Chain21 => build_chain_graph(space, &[vec![1], vec![0]], &[false, false], None),
            XorStructure::Confounder => Ok(ChainGraph::single_component(space, true)),
            XorStructure::Mutual => Ok(ChainGraph::single_component(space, false)),
        };
        Some(g.expect("two-feature structures are valid"))
    }
}

/// XOR on binary inputs with `p00 = p11 = ¼(1+ε)` and `p01 = p10 = ¼(1−ε)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XorSpec {
    pub epsilon: f64,
    pub structure: XorStructure,
    pub x: [u8; 2],
}

impl XorSpec {
    pub fn new(epsilon: f64, structure: XorStructure) -> Self {
        XorSpec { epsilon, structure, x: [0, 0] }
    }

    /// Cell probabilities `p00, p01, p10, p11`.
    pub fn probabilities(&self) -> [f64; 4] {
        let same = 0.25 * (1.0 + self.epsilon);
        let diff = 0.25 * (1.0 - self.epsilon);
        [same, diff, diff, same]
    }

    /// Outputs `f(0,0), f(0,1), f(1,0), f(1,1)`.
    pub fn outputs() -> [f64; 4] {
        [0.0, 1.0, 1.0, 0.0]
    }
}

/// Theoretical `(φ1, φ2)` for the XOR example.
pub fn xor_shapley(spec: &XorSpec, variant: Variant, symmetry: Symmetry) -> Result<[f64; 2]> {
    let eps = spec.epsilon;
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::Config(format!("epsilon must lie in [0, 1), got {eps}")));
    }
    if spec.x.iter().any(|&v| v > 1) {
        return Err(Error::Config("XOR inputs are binary".into()));
    }
    if variant == Variant::Causal && spec.structure == XorStructure::None {
        return Err(Error::Config("the causal variant needs an assumed structure".into()));
    }
    // P(X_other ≠ x_i | X_i = x_i) = ½(1−ε) and P(X_other ≠ x_i) = ½ for either input value
    let marginal = 0.5;
    let conditional = 0.5 * (1.0 - eps);
    let v_empty = 0.5 * (1.0 - eps);
    let v_full = f64::from(spec.x[0] ^ spec.x[1]);
    let single = |i: usize| -> f64 {
        let observed = match (variant, spec.structure) {
            (Variant::Marginal, _) => false,
            (Variant::Conditional, _) => true,
            (Variant::Causal, XorStructure::Chain12) => i == 0,
            (Variant::Causal, XorStructure::Chain21) => i == 1,
            (Variant::Causal, XorStructure::Confounder) => false,
            (Variant::Causal, XorStructure::Mutual) => true,
            (Variant::Causal, XorStructure::None) => unreachable!(),
        };
        // f(x_i, X_other) = 1 exactly when X_other ≠ x_i, whatever x_i is
        if observed {
            conditional
        } else {
            marginal
        }
    };
    let (v1, v2) = (single(0), single(1));
    let order = match (symmetry, spec.structure) {
        (Symmetry::Asymmetric, XorStructure::Chain12) => Some(0),
        (Symmetry::Asymmetric, XorStructure::Chain21) => Some(1),
        _ => None,
    };
    Ok(match order {
        Some(0) => [v1 - v_empty, v_full - v1],
        Some(_) => [v_full - v2, v2 - v_empty],
        None => [0.5 * (v1 - v_empty) + 0.5 * (v_full - v2), 0.5 * (v2 - v_empty) + 0.5 * (v_full - v1)],
    })
}
