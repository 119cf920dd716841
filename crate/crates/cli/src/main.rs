use std::path::PathBuf;
use std::process::ExitCode;

use causal_shap::{ConfoundedDraw, SamplerConfig, Symmetry, ToyParams, Variant};
use causal_shap_cli::config::{DistributionSpec, Instances, ModelSpec, ReportFormat, RunConfig, DEFAULT_TIMEOUT_SECS};
use causal_shap_cli::{run, sweeps, CliError};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "causal-shap", version, about = "Causal Shapley value attributions for tabular models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Shapley values for one or more instances.
    Explain(RunArgs),
    /// Shapley values split into direct and indirect effects.
    Decompose(RunArgs),
    /// Two-feature linear examples under four causal structures.
    #[command(allow_negative_numbers = true)]
    Toy(ToyArgs),
    /// XOR on two correlated binary features, swept over the coupling strength.
    Xor(XorArgs),
    /// Fit a Gaussian distribution model to data and export it as JSON.
    Fit(FitArgs),
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: causal_shap::Error| e.to_string())
}

fn parse_symmetry(s: &str) -> Result<Symmetry, String> {
    match s {
        "symmetric" => Ok(Symmetry::Symmetric),
        "asymmetric" => Ok(Symmetry::Asymmetric),
        other => Err(format!("unknown symmetry `{other}` (expected symmetric or asymmetric)")),
    }
}

fn parse_draw(s: &str) -> Result<ConfoundedDraw, String> {
    match s {
        "joint" => Ok(ConfoundedDraw::Joint),
        "per-feature" => Ok(ConfoundedDraw::PerFeature),
        other => Err(format!("unknown draw mode `{other}` (expected joint or per-feature)")),
    }
}

fn parse_instances(s: &str) -> Result<Instances, String> {
    if s == "all" {
        return Ok(Instances::All);
    }
    s.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<Result<_, _>>()
        .map(Instances::Rows)
}

#[derive(Clone, Copy)]
enum DistributionChoice {
    Gaussian,
    Table,
}

fn parse_distribution(s: &str) -> Result<DistributionChoice, String> {
    match s {
        "gaussian" => Ok(DistributionChoice::Gaussian),
        "table" => Ok(DistributionChoice::Table),
        other => Err(format!("unknown distribution `{other}` (expected gaussian or table)")),
    }
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration; flags given alongside override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Chain graph JSON (features, components, confounding).
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Training data CSV with a header of feature names.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Model spec JSON: linear, table or external.
    #[arg(long, conflicts_with = "predictor_command")]
    model: Option<PathBuf>,
    /// External predictor command line, split on whitespace.
    #[arg(long)]
    predictor_command: Option<String>,
    /// Seconds to wait for each external predictor response.
    #[arg(long)]
    timeout: Option<f64>,
    /// Distribution fitted to the data: gaussian or table.
    #[arg(long, value_parser = parse_distribution, conflicts_with = "distribution_file")]
    distribution: Option<DistributionChoice>,
    /// Gaussian model exported by `fit`, used instead of fitting.
    #[arg(long)]
    distribution_file: Option<PathBuf>,
    /// Ridge added to the covariance diagonal when fitting.
    #[arg(long)]
    regularization: Option<f64>,
    /// `all` or comma-separated zero-based data rows.
    #[arg(long, value_parser = parse_instances)]
    instances: Option<Instances>,
    /// marginal, conditional or causal.
    #[arg(long, value_parser = parse_variant)]
    variant: Option<Variant>,
    /// symmetric or asymmetric.
    #[arg(long, value_parser = parse_symmetry)]
    symmetry: Option<Symmetry>,
    /// Monte Carlo samples per coalition [default: 1000].
    #[arg(long)]
    n_samples: Option<usize>,
    /// Sampled orderings [default: exact enumeration up to 10 features].
    #[arg(long)]
    n_permutations: Option<usize>,
    /// Random seed [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Also report direct and indirect effects.
    #[arg(long)]
    decompose: bool,
    /// Antithetic noise pairs.
    #[arg(long)]
    antithetic: bool,
    /// How targets of a confounded component are drawn: joint or per-feature.
    #[arg(long, value_parser = parse_draw)]
    confounded_draw: Option<ConfoundedDraw>,
    /// Report file; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// csv or structured-text.
    #[arg(long)]
    format: Option<ReportFormat>,
    /// Long-format sina-plot data file.
    #[arg(long)]
    sina: Option<PathBuf>,
}

impl RunArgs {
    fn into_config(self, force_decompose: bool) -> Result<RunConfig, CliError> {
        let model = if let Some(path) = &self.model {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("--model: cannot read {}: {e}", path.display())))?;
            Some(serde_json::from_str::<ModelSpec>(&text).map_err(|e| CliError::Config(format!("--model: {e}")))?)
        } else {
            self.predictor_command.as_ref().map(|cmd| ModelSpec::External {
                command: cmd.split_whitespace().map(str::to_string).collect(),
                timeout_secs: self.timeout.unwrap_or(DEFAULT_TIMEOUT_SECS),
            })
        };
        let mut cfg = match (&self.config, model) {
            (Some(path), model) => {
                let mut cfg = RunConfig::load(path)?;
                if let Some(m) = model {
                    cfg.model = m;
                }
                cfg
            }
            (None, Some(m)) => RunConfig::new(m),
            (None, None) => {
                return Err(CliError::Config("--model or --predictor-command is required (or a --config file)".into()))
            }
        };
        if let (Some(t), ModelSpec::External { timeout_secs, .. }) = (self.timeout, &mut cfg.model) {
            *timeout_secs = t;
        }
        macro_rules! set {
            ($($field:ident).+ = $value:expr) => {
                if let Some(v) = $value {
                    cfg.$($field).+ = v;
                }
            };
        }
        set!(graph = self.graph.map(Some));
        set!(data = self.data.map(Some));
        set!(instances = self.instances);
        set!(variant = self.variant);
        set!(symmetry = self.symmetry);
        set!(n_samples = self.n_samples);
        set!(n_permutations = self.n_permutations.map(Some));
        set!(seed = self.seed);
        set!(confounded_draw = self.confounded_draw);
        set!(output.report = self.output.map(Some));
        set!(output.format = self.format);
        set!(output.sina = self.sina.map(Some));
        match (self.distribution, self.distribution_file) {
            (_, Some(path)) => cfg.distribution = DistributionSpec::File { path },
            (Some(DistributionChoice::Table), None) => cfg.distribution = DistributionSpec::Table,
            (Some(DistributionChoice::Gaussian), None) => {
                cfg.distribution = DistributionSpec::Gaussian { regularization: None }
            }
            (None, None) => {}
        }
        if let Some(r) = self.regularization {
            match &mut cfg.distribution {
                DistributionSpec::Gaussian { regularization } => *regularization = Some(r),
                _ => return Err(CliError::Config("--regularization only applies to a fitted gaussian".into())),
            }
        }
        cfg.decompose |= self.decompose || force_decompose;
        cfg.antithetic |= self.antithetic;
        Ok(cfg)
    }
}

#[derive(Args)]
struct ToyArgs {
    /// Correlation between the two features; a comma-separated list sweeps it.
    #[arg(long, value_delimiter = ',', default_value = "0.8")]
    alpha: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    beta1: f64,
    #[arg(long, alias = "beta", default_value_t = 2.0)]
    beta2: f64,
    #[arg(long, default_value_t = 0.0)]
    mean1: f64,
    #[arg(long, default_value_t = 0.0)]
    mean2: f64,
    #[arg(long, default_value_t = 1.0)]
    x1: f64,
    #[arg(long, default_value_t = 1.5)]
    x2: f64,
    /// Add Monte Carlo engine estimates with this many samples per coalition.
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: ReportFormat,
}

#[derive(Args)]
struct XorArgs {
    /// Coupling strengths in [0, 1).
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
    epsilon: Vec<f64>,
    /// Instance to explain, as two binary values.
    #[arg(long, value_delimiter = ',', default_value = "0,0", num_args = 1)]
    x: Vec<u8>,
    /// Add Monte Carlo engine estimates with this many samples per coalition.
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: ReportFormat,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    /// Chain graph whose feature list declares the columns; all columns are
    /// continuous without it.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    regularization: Option<f64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn emit(output: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match output {
        Some(path) => run::write_atomic(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn estimate_config(n_samples: Option<usize>, seed: u64) -> Result<Option<SamplerConfig>, CliError> {
    match n_samples {
        Some(0) => Err(CliError::Config("--n-samples must be at least 1".into())),
        n => Ok(n.map(|n| SamplerConfig::with_samples(n, seed))),
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Explain(args) => {
            let cfg = args.into_config(false)?;
            let reports = run::explain(&cfg)?;
            run::write_outputs(&cfg, &reports)
        }
        Command::Decompose(args) => {
            let cfg = args.into_config(true)?;
            let reports = run::explain(&cfg)?;
            run::write_outputs(&cfg, &reports)
        }
        Command::Toy(a) => {
            let base = ToyParams { alpha: 0.0, beta1: a.beta1, beta2: a.beta2, mean1: a.mean1, mean2: a.mean2, x1: a.x1, x2: a.x2 };
            let rows = sweeps::toy_table(base, &a.alpha, estimate_config(a.n_samples, a.seed)?)?;
            emit(a.output.as_ref(), &sweeps::render_rows(&rows, a.format))
        }
        Command::Xor(a) => {
            let x: [u8; 2] = match a.x.as_slice() {
                &[x1, x2] if x1 <= 1 && x2 <= 1 => [x1, x2],
                _ => return Err(CliError::Config("--x takes two binary values, e.g. 0,1".into())),
            };
            if let Some(e) = a.epsilon.iter().find(|e| !(0.0..1.0).contains(*e)) {
                return Err(CliError::Config(format!("--epsilon values must lie in [0, 1), got {e}")));
            }
            let rows = sweeps::xor_table(&a.epsilon, x, estimate_config(a.n_samples, a.seed)?)?;
            emit(a.output.as_ref(), &sweeps::render_rows(&rows, a.format))
        }
        Command::Fit(a) => {
            let json = run::fit(a.graph.as_deref(), &a.data, a.regularization)?;
            emit(a.output.as_ref(), &json)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("causal-shap: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
