//! The `explain` / `decompose` / `fit` pipeline.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use causal_shap::report::{write_sina, SinaInstance};
use causal_shap::{
    fit_gaussian, shapley_values, AttributionReport, ChainGraph, DataMatrix, ExtensionSampler, FeatureSpace,
    GaussianModel, InterventionalSampler, JointTable, Memoized, MonteCarloValues, PermutationDistribution,
    PermutationSampling, Predictor, SamplerConfig, ShapleyOptions,
};

use crate::config::{DistributionSpec, Instances, ModelSpec, ReportFormat, RunConfig};
use crate::external::ExternalPredictor;
use crate::CliError;

/// Orderings drawn when the feature count exceeds the enumeration cap and no
/// count was requested.
pub const DEFAULT_SAMPLED_PERMUTATIONS: usize = 1000;

pub struct InstanceReport {
    pub id: usize,
    pub x: Vec<f64>,
    pub report: AttributionReport,
}

/// Everything a run needs, loaded and cross-checked.
pub struct Prepared {
    pub space: FeatureSpace,
    pub graph: Option<ChainGraph>,
    pub sampler: Box<dyn InterventionalSampler>,
    pub predictor: Box<dyn Predictor>,
    pub instances: Vec<(usize, Vec<f64>)>,
}

fn read(path: &Path, flag: &str) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{flag}: cannot read {}: {e}", path.display())))
}

pub fn load_graph(path: &Path) -> Result<ChainGraph, CliError> {
    ChainGraph::from_json(&read(path, "--graph")?).map_err(|e| CliError::Config(format!("--graph: {e}")))
}

/// All-continuous feature space named by the CSV header.
fn space_from_header(path: &Path) -> Result<FeatureSpace, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::Config(format!("--data: {e}")))?;
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Config(format!("--data: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let features = names
        .into_iter()
        .map(|name| causal_shap::Feature { name, kind: causal_shap::FeatureKind::Continuous })
        .collect();
    FeatureSpace::new(features).map_err(|e| CliError::Config(format!("--data: {e}")))
}

fn load_data(path: &Path, space: &FeatureSpace) -> Result<DataMatrix, CliError> {
    DataMatrix::from_csv_path(space.clone(), path).map_err(|e| CliError::Config(format!("--data: {e}")))
}

fn model_file(path: &Path) -> Result<GaussianModel, CliError> {
    GaussianModel::from_json(&read(path, "distribution file")?)
        .map_err(|e| CliError::Config(format!("distribution file {}: {e}", path.display())))
}

fn build_predictor(spec: &ModelSpec, space: &FeatureSpace) -> Result<Box<dyn Predictor>, CliError> {
    let n = space.len();
    let predictor: Box<dyn Predictor> = match spec {
        ModelSpec::External { command, timeout_secs } => {
            Box::new(ExternalPredictor::spawn(command, n, Duration::from_secs_f64(*timeout_secs))?)
        }
        inline => {
            let model = inline.inline().expect("inline model");
            if let ModelSpec::Table { cardinalities, .. } = inline {
                let levels: Vec<Option<usize>> = space.features().iter().map(|f| f.kind.levels().map(<[_]>::len)).collect();
                if levels.iter().zip(cardinalities).any(|(l, &c)| *l != Some(c)) {
                    return Err(CliError::Config(format!(
                        "--model: table cardinalities {cardinalities:?} do not match the categorical features"
                    )));
                }
            }
            model.build().map_err(|e| CliError::Config(format!("--model: {e}")))?
        }
    };
    if predictor.n_features() != n {
        return Err(CliError::Config(format!(
            "--model: expects {} features but the feature space has {n}",
            predictor.n_features()
        )));
    }
    Ok(predictor)
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared, CliError> {
    cfg.validate()?;
    let graph = cfg.graph.as_deref().map(load_graph).transpose()?;
    let fitted = match &cfg.distribution {
        DistributionSpec::File { path } => Some(model_file(path)?),
        _ => None,
    };
    let space = match (&graph, &fitted, &cfg.data) {
        (Some(g), _, _) => g.feature_space().clone(),
        (None, Some(m), _) => m.feature_space().clone(),
        (None, None, Some(path)) => space_from_header(path)?,
        (None, None, None) => return Err(CliError::Config("--data or --graph must define the features".into())),
    };
    if let Some(m) = &fitted {
        if m.feature_space() != &space {
            return Err(CliError::Config("distribution file features differ from the graph's features".into()));
        }
    }
    let data = cfg.data.as_deref().map(|p| load_data(p, &space)).transpose()?;
    let sampler: Box<dyn InterventionalSampler> = match (&cfg.distribution, fitted) {
        (_, Some(m)) => Box::new(m),
        (DistributionSpec::Gaussian { regularization }, None) => {
            let data = data.as_ref().expect("validated");
            Box::new(fit_gaussian(data, *regularization).map_err(|e| CliError::Config(format!("--data: {e}")))?)
        }
        (DistributionSpec::Table, None) => {
            Box::new(JointTable::from_data(data.as_ref().expect("validated")).map_err(|e| CliError::Config(format!("--data: {e}")))?)
        }
        (DistributionSpec::File { .. }, None) => unreachable!(),
    };
    let instances: Vec<(usize, Vec<f64>)> = match &cfg.instances {
        Instances::All => {
            let data = data.as_ref().expect("validated");
            (0..data.n_rows()).map(|r| (r, data.row(r).to_vec())).collect()
        }
        Instances::Rows(rows) => {
            let data = data.as_ref().expect("validated");
            rows.iter()
                .map(|&r| {
                    if r < data.n_rows() {
                        Ok((r, data.row(r).to_vec()))
                    } else {
                        Err(CliError::Config(format!("--instances: row {r} is out of range ({} rows)", data.n_rows())))
                    }
                })
                .collect::<Result<_, _>>()?
        }
        Instances::Values(values) => {
            DataMatrix::from_rows(space.clone(), values).map_err(|e| CliError::Config(format!("--instances: {e}")))?;
            values.iter().cloned().enumerate().collect()
        }
    };
    if instances.is_empty() {
        return Err(CliError::Config("--instances: nothing to explain".into()));
    }
    let predictor = build_predictor(&cfg.model, &space)?;
    Ok(Prepared { space, graph, sampler, predictor, instances })
}

pub fn permutation_distribution(cfg: &RunConfig, graph: Option<&ChainGraph>, n: usize) -> Result<PermutationDistribution, CliError> {
    let sampled = |n_permutations| PermutationSampling::Sampled { n_permutations, seed: cfg.seed, sampler: ExtensionSampler::Exact };
    let sampling = match cfg.n_permutations {
        Some(p) => sampled(p),
        None if n <= cfg.enumeration_cap => PermutationSampling::Exact,
        None => sampled(DEFAULT_SAMPLED_PERMUTATIONS),
    };
    Ok(PermutationDistribution::new(cfg.symmetry, graph, n, sampling)?)
}

/// Computes one report per configured instance.
pub fn explain(cfg: &RunConfig) -> Result<Vec<InstanceReport>, CliError> {
    let prepared = prepare(cfg)?;
    explain_prepared(cfg, &prepared)
}

pub fn explain_prepared(cfg: &RunConfig, p: &Prepared) -> Result<Vec<InstanceReport>, CliError> {
    let dist = permutation_distribution(cfg, p.graph.as_ref(), p.space.len())?;
    let sampler_config = SamplerConfig {
        n_samples: cfg.n_samples,
        seed: cfg.seed,
        antithetic: cfg.antithetic,
        confounded_draw: cfg.confounded_draw,
        replicate: 0,
        batch_size: cfg.batch_size,
    };
    let options = ShapleyOptions { decompose: cfg.decompose, enumeration_cap: cfg.enumeration_cap };
    p.instances
        .iter()
        .map(|(id, x)| {
            let values = Memoized::new(MonteCarloValues {
                x: x.clone(),
                variant: cfg.variant,
                graph: p.graph.as_ref(),
                sampler: p.sampler.as_ref(),
                predictor: p.predictor.as_ref(),
                config: sampler_config,
            });
            let report = shapley_values(&dist, &values, options)?;
            Ok(InstanceReport { id: *id, x: x.clone(), report })
        })
        .collect()
}

pub fn render(report: &AttributionReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => report.to_csv(),
        ReportFormat::StructuredText => report.to_json() + "\n",
    }
}

/// `dir/stem-<id>.ext` for multi-instance runs.
pub fn instance_path(base: &Path, id: usize, format: ReportFormat) -> PathBuf {
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
    let ext = base.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| format.extension().into());
    base.with_file_name(format!("{stem}-{id}.{ext}"))
}

/// Writes via a temporary file in the target directory and renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Renders every output in memory first, then writes each atomically.
pub fn write_outputs(cfg: &RunConfig, reports: &[InstanceReport]) -> Result<(), CliError> {
    let format = cfg.output.format;
    let mut files: Vec<(PathBuf, Vec<u8>)> = Vec::new();
    match &cfg.output.report {
        Some(base) if reports.len() == 1 => files.push((base.clone(), render(&reports[0].report, format).into_bytes())),
        Some(base) => {
            for r in reports {
                files.push((instance_path(base, r.id, format), render(&r.report, format).into_bytes()));
            }
        }
        None => {
            let text = match (format, reports) {
                (_, [one]) => render(&one.report, format),
                (ReportFormat::StructuredText, _) => {
                    let all: Vec<&AttributionReport> = reports.iter().map(|r| &r.report).collect();
                    serde_json::to_string_pretty(&all).expect("reports serialize") + "\n"
                }
                (ReportFormat::Csv, _) => {
                    reports.iter().map(|r| format!("#instance,{}\n{}", r.id, r.report.to_csv())).collect::<Vec<_>>().join("\n")
                }
            };
            std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::Io(format!("stdout: {e}")))?;
        }
    }
    if let Some(path) = &cfg.output.sina {
        let rows: Vec<SinaInstance<'_>> =
            reports.iter().map(|r| SinaInstance { id: r.id, x: &r.x, report: &r.report }).collect();
        let mut bytes = Vec::new();
        write_sina(&mut bytes, &rows).map_err(|e| CliError::Io(e.to_string()))?;
        files.push((path.clone(), bytes));
    }
    for (path, bytes) in files {
        write_atomic(&path, &bytes)?;
    }
    Ok(())
}

/// Fits a Gaussian to the data file and returns its JSON export.
pub fn fit(graph: Option<&Path>, data: &Path, regularization: Option<f64>) -> Result<String, CliError> {
    let space = match graph {
        Some(g) => load_graph(g)?.feature_space().clone(),
        None => space_from_header(data)?,
    };
    let data = load_data(data, &space)?;
    let model = fit_gaussian(&data, regularization).map_err(|e| CliError::Config(format!("--data: {e}")))?;
    Ok(model.to_json() + "\n")
}
