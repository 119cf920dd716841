//! Run configuration, loadable from JSON and overridable from flags.

use std::path::{Path, PathBuf};

use causal_shap::{ConfoundedDraw, PredictionModel, Symmetry, Variant};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_TIMEOUT_SECS: f64 = 60.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Linear {
        intercept: f64,
        coefficients: Vec<f64>,
    },
    Table {
        cardinalities: Vec<usize>,
        outputs: Vec<f64>,
    },
    /// A child process speaking the line protocol on stdin/stdout.
    External {
        command: Vec<String>,
        #[serde(default = "default_timeout")]
        timeout_secs: f64,
    },
}

impl ModelSpec {
    pub fn inline(&self) -> Option<PredictionModel> {
        match self {
            ModelSpec::Linear { intercept, coefficients } => {
                Some(PredictionModel::Linear { intercept: *intercept, coefficients: coefficients.clone() })
            }
            ModelSpec::Table { cardinalities, outputs } => {
                Some(PredictionModel::Table { cardinalities: cardinalities.clone(), outputs: outputs.clone() })
            }
            ModelSpec::External { .. } => None,
        }
    }
}

fn default_timeout() -> f64 {
    DEFAULT_TIMEOUT_SECS
}

/// Where the observational distribution comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DistributionSpec {
    /// Multivariate Gaussian fitted to the data file.
    Gaussian {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        regularization: Option<f64>,
    },
    /// Empirical joint table over categorical features.
    Table,
    /// A Gaussian model previously exported by `fit`.
    File { path: PathBuf },
}

impl Default for DistributionSpec {
    fn default() -> Self {
        DistributionSpec::Gaussian { regularization: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Instances {
    /// Every row of the data file.
    All,
    /// Zero-based data rows.
    Rows(Vec<usize>),
    /// Feature vectors given inline; categorical entries are level indices.
    Values(Vec<Vec<f64>>),
}

impl Default for Instances {
    fn default() -> Self {
        Instances::Rows(vec![0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ReportFormat {
    #[default]
    #[serde(rename = "csv")]
    Csv,
    #[serde(rename = "structured-text")]
    StructuredText,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::StructuredText => "json",
        }
    }
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "structured-text" | "json" => Ok(ReportFormat::StructuredText),
            other => Err(format!("unknown format `{other}` (expected csv or structured-text)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Report path; with several instances the instance id is appended to the
    /// file stem. Standard output when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(default)]
    pub format: ReportFormat,
    /// Long-format `instance,feature,feature_value,phi` file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sina: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(default)]
    pub distribution: DistributionSpec,
    pub model: ModelSpec,
    #[serde(default)]
    pub instances: Instances,
    #[serde(default = "default_variant")]
    pub variant: Variant,
    #[serde(default = "default_symmetry")]
    pub symmetry: Symmetry,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    /// Exact enumeration when absent and the feature count allows it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_permutations: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub decompose: bool,
    #[serde(default)]
    pub antithetic: bool,
    #[serde(default)]
    pub confounded_draw: ConfoundedDraw,
    #[serde(default = "default_cap")]
    pub enumeration_cap: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_variant() -> Variant {
    Variant::Causal
}

fn default_symmetry() -> Symmetry {
    Symmetry::Symmetric
}

fn default_samples() -> usize {
    1000
}

fn default_cap() -> usize {
    causal_shap::shapley::DEFAULT_ENUMERATION_CAP
}

fn default_batch() -> usize {
    1024
}

impl RunConfig {
    pub fn new(model: ModelSpec) -> Self {
        RunConfig {
            graph: None,
            data: None,
            distribution: DistributionSpec::default(),
            model,
            instances: Instances::default(),
            variant: default_variant(),
            symmetry: default_symmetry(),
            n_samples: default_samples(),
            n_permutations: None,
            seed: 0,
            decompose: false,
            antithetic: false,
            confounded_draw: ConfoundedDraw::default(),
            enumeration_cap: default_cap(),
            batch_size: default_batch(),
            output: OutputSpec::default(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("--config: {e}")))
    }

    /// Reads a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("--config: cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.graph.as_mut().map(rebase);
        cfg.data.as_mut().map(rebase);
        if let DistributionSpec::File { path } = &mut cfg.distribution {
            rebase(path);
        }
        cfg.output.report.as_mut().map(rebase);
        cfg.output.sina.as_mut().map(rebase);
        Ok(cfg)
    }

    /// Checks that do not need any file to be opened.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if self.n_samples == 0 {
            return bad("--n-samples must be at least 1");
        }
        if self.n_permutations == Some(0) {
            return bad("--n-permutations must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if let ModelSpec::External { command, timeout_secs } = &self.model {
            if command.is_empty() {
                return bad("--predictor-command is empty");
            }
            if !(timeout_secs.is_finite() && *timeout_secs > 0.0) {
                return bad("--timeout must be a positive number of seconds");
            }
        }
        if let DistributionSpec::Gaussian { regularization: Some(r) } = self.distribution {
            if !(r.is_finite() && r >= 0.0) {
                return bad("--regularization must be a finite non-negative number");
            }
        }
        if (self.variant == Variant::Causal || self.symmetry == Symmetry::Asymmetric) && self.graph.is_none() {
            return bad("--graph is required for the causal variant and for asymmetric Shapley values");
        }
        let needs_data = !matches!(self.instances, Instances::Values(_)) || !matches!(self.distribution, DistributionSpec::File { .. });
        if needs_data && self.data.is_none() {
            return bad("--data is required to fit the distribution or to select instance rows");
        }
        Ok(())
    }
}
