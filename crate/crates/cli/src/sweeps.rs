//! Closed-form tables for the two-feature examples, optionally next to
//! Monte Carlo engine estimates.

use causal_shap::oracles::pattern_table;
use causal_shap::report::symmetry_str;
use causal_shap::{
    shapley_values, toy_shapley, xor_shapley, ChainGraph, FeatureSpace, GaussianModel, JointTable, LinearModel,
    Memoized, MonteCarloValues, PermutationDistribution, PermutationSampling, Predictor, SamplerConfig,
    ShapleyOptions, Symmetry, TableModel, ToyParams, ToyStructure, Variant, XorSpec, XorStructure,
};
use serde::Serialize;

use crate::config::ReportFormat;
use crate::CliError;

const SYMMETRIES: [Symmetry; 2] = [Symmetry::Symmetric, Symmetry::Asymmetric];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToyRow {
    pub alpha: f64,
    pub structure: &'static str,
    pub variant: &'static str,
    pub symmetry: &'static str,
    pub feature: usize,
    /// Pattern letter of the reference table; only defined for `β1 = 0` and zero means.
    pub pattern: Option<String>,
    pub direct: f64,
    pub indirect: f64,
    pub total: f64,
    pub estimate_direct: Option<f64>,
    pub estimate_indirect: Option<f64>,
    pub estimate_total: Option<f64>,
    pub estimate_stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct XorRow {
    pub epsilon: f64,
    pub structure: &'static str,
    pub variant: &'static str,
    pub symmetry: &'static str,
    pub phi1: f64,
    pub phi2: f64,
    pub estimate1: Option<f64>,
    pub estimate2: Option<f64>,
    pub stderr1: Option<f64>,
    pub stderr2: Option<f64>,
}

fn distribution(symmetry: Symmetry, graph: Option<&ChainGraph>) -> PermutationDistribution {
    match (symmetry, graph) {
        (Symmetry::Asymmetric, Some(g)) => PermutationDistribution::asymmetric(g, PermutationSampling::Exact),
        _ => PermutationDistribution::symmetric(2, PermutationSampling::Exact),
    }
}

/// Gaussian with unit variances, correlation `α` and the toy means.
pub fn toy_realization(p: &ToyParams) -> Result<(GaussianModel, LinearModel), CliError> {
    if !(p.alpha.abs() < 1.0) {
        return Err(CliError::Config(format!("--alpha: Monte Carlo estimates need |alpha| < 1, got {}", p.alpha)));
    }
    let cov = nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, p.alpha, p.alpha, 1.0]);
    let model = GaussianModel::new(FeatureSpace::continuous(2), vec![p.mean1, p.mean2], cov)
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok((model, LinearModel::new(0.0, vec![p.beta1, p.beta2])))
}

/// Every (structure, variant, symmetry) cell for each `α`.
pub fn toy_table(base: ToyParams, alphas: &[f64], estimate: Option<SamplerConfig>) -> Result<Vec<ToyRow>, CliError> {
    let mut rows = Vec::new();
    for &alpha in alphas {
        let p = ToyParams { alpha, ..base };
        let realization = estimate.map(|_| toy_realization(&p)).transpose()?;
        for structure in ToyStructure::ALL {
            let graph = structure.graph();
            for variant in Variant::ALL {
                for symmetry in SYMMETRIES {
                    let theory = toy_shapley(structure, variant, symmetry, &p);
                    let engine = match (&realization, estimate) {
                        (Some((model, linear)), Some(config)) => {
                            let values = Memoized::new(MonteCarloValues {
                                x: vec![p.x1, p.x2],
                                variant,
                                graph: Some(&graph),
                                sampler: model,
                                predictor: linear,
                                config,
                            });
                            let options = ShapleyOptions { decompose: true, ..ShapleyOptions::default() };
                            Some(shapley_values(&distribution(symmetry, Some(&graph)), &values, options)?)
                        }
                        _ => None,
                    };
                    let pattern = (p.beta1 == 0.0 && p.mean1 == 0.0 && p.mean2 == 0.0)
                        .then(|| format!("{:?}", pattern_table(structure, variant, symmetry)));
                    for (k, t) in theory.iter().enumerate() {
                        let e = engine.as_ref().map(|r| &r.features[k]);
                        rows.push(ToyRow {
                            alpha,
                            structure: structure.as_str(),
                            variant: variant.as_str(),
                            symmetry: symmetry_str(symmetry),
                            feature: k + 1,
                            pattern: pattern.clone(),
                            direct: t.direct,
                            indirect: t.indirect,
                            total: t.total,
                            estimate_direct: e.and_then(|e| e.direct),
                            estimate_indirect: e.and_then(|e| e.indirect),
                            estimate_total: e.map(|e| e.phi),
                            estimate_stderr: e.map(|e| e.stderr),
                        });
                    }
                }
            }
        }
    }
    Ok(rows)
}

/// Theoretical XOR values for each `ε`, with engine estimates on request.
pub fn xor_table(epsilons: &[f64], x: [u8; 2], estimate: Option<SamplerConfig>) -> Result<Vec<XorRow>, CliError> {
    let f = TableModel::new(vec![2, 2], XorSpec::outputs().to_vec()).expect("xor table is valid");
    let mut rows = Vec::new();
    for &epsilon in epsilons {
        for structure in XorStructure::ALL {
            let spec = XorSpec { x, ..XorSpec::new(epsilon, structure) };
            let graph = structure.graph();
            for variant in Variant::ALL {
                if variant == Variant::Causal && structure == XorStructure::None {
                    continue;
                }
                for symmetry in SYMMETRIES {
                    if symmetry == Symmetry::Asymmetric && graph.is_none() {
                        continue;
                    }
                    let [phi1, phi2] = xor_shapley(&spec, variant, symmetry).map_err(|e| CliError::Config(e.to_string()))?;
                    let engine = match estimate {
                        Some(config) => {
                            let table = JointTable::new(FeatureSpace::categorical(&[2, 2]), spec.probabilities().to_vec())
                                .map_err(|e| CliError::Config(e.to_string()))?;
                            let values = Memoized::new(MonteCarloValues {
                                x: x.iter().map(|&v| f64::from(v)).collect(),
                                variant,
                                graph: graph.as_ref(),
                                sampler: &table,
                                predictor: &f as &dyn Predictor,
                                config,
                            });
                            Some(shapley_values(&distribution(symmetry, graph.as_ref()), &values, ShapleyOptions::default())?)
                        }
                        None => None,
                    };
                    let est = |k: usize| engine.as_ref().map(|r| r.features[k].phi);
                    let se = |k: usize| engine.as_ref().map(|r| r.features[k].stderr);
                    rows.push(XorRow {
                        epsilon,
                        structure: structure.as_str(),
                        variant: variant.as_str(),
                        symmetry: symmetry_str(symmetry),
                        phi1,
                        phi2,
                        estimate1: est(0),
                        estimate2: est(1),
                        stderr1: se(0),
                        stderr2: se(1),
                    });
                }
            }
        }
    }
    Ok(rows)
}

pub fn render_rows<T: Serialize>(rows: &[T], format: ReportFormat) -> String {
    match format {
        ReportFormat::StructuredText => serde_json::to_string_pretty(rows).expect("rows serialize") + "\n",
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in rows {
                w.serialize(row).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
        }
    }
}
