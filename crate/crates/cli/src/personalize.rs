use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, ValueEnum};
use fsp::adaptation::{fit_personalized, fit_personalized_pool, fit_personalized_small_domain, FitConfig, FitReport};
use fsp::artifact::EstimatorArtifact;
use fsp::data::{load_csv, CsvSchema};
use fsp::expr::{positional_names, Expression};
use fsp::model::ScalarFn;
use fsp::oracle::{LabelOracle, ModelOracle, NoiseLaw, PoolLabels, PoolOracle, SyntheticOracle};
use fsp::rng::{rng_stream, PHASE_LABELS};
use fsp::sampling::PilotMode;
use fsp::{Domain, ModelSpec, PersonalizedEstimator};
use serde::{Deserialize, Serialize};

use crate::config::{create_dir, echo, load, resolve_seed, write_json};
use crate::error::{config_err, runtime_err, CliResult};

/// Where labels come from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LabelSource {
    /// `y = f*(x) + σ(x)·ε`, or Bernoulli draws with mean `f*(x)`.
    Synthetic {
        f_star: String,
        #[serde(default = "default_sigma")]
        sigma: String,
        #[serde(default)]
        bernoulli: bool,
    },
    /// Labeled CSV treated as a pool; each row is labeled at most once.
    Pool {
        path: PathBuf,
        #[serde(default = "default_response")]
        response: String,
    },
    /// External labeler speaking the model protocol.
    Process {
        command: Vec<String>,
        #[serde(default)]
        timeout_ms: Option<u64>,
    },
}

fn default_sigma() -> String {
    "1".into()
}

fn default_response() -> String {
    "y".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    Budgeted,
    SmallDomain,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PersonalizeConfig {
    /// Required unless labels come from a pool, whose bounding box is used.
    pub domain: Option<Domain>,
    /// Covariate names; default `x1 .. xd`, or every non-response pool column.
    pub covariates: Option<Vec<String>>,
    pub model: Option<ModelSpec>,
    pub labels: Option<LabelSource>,
    pub scheme: Scheme,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub fit: FitConfig,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Strict,
    Reuse,
}

#[derive(Debug, Args)]
pub struct PersonalizeArgs {
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Labeling budget.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Pilot split between variance estimation and validation.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Serialize)]
struct PersonalizeReport<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a PersonalizeConfig,
    seed: u64,
    fit: &'a FitReport,
    pool_indices: Option<&'a [usize]>,
    files: Vec<String>,
    wall_clock_seconds: f64,
}

/// Reads a pool CSV with every column but the response as a covariate when no names are given.
fn pool_columns(path: &Path, response: &str, covariates: &Option<Vec<String>>) -> CliResult<Vec<String>> {
    if let Some(c) = covariates {
        return Ok(c.clone());
    }
    let mut reader = csv::Reader::from_path(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    let header = reader.headers().map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    let cols: Vec<String> = header.iter().filter(|c| *c != response).map(str::to_string).collect();
    if cols.is_empty() {
        return Err(config_err(format!("{} has no covariate columns", path.display())));
    }
    Ok(cols)
}

struct Resolved {
    config: PersonalizeConfig,
    domain: Domain,
    covariates: Vec<String>,
    model: ModelSpec,
    labels: LabelSource,
    n: usize,
    seed: u64,
    output: PathBuf,
    pool: Option<(Vec<Vec<f64>>, Vec<f64>)>,
}

fn resolve(args: &PersonalizeArgs) -> CliResult<Resolved> {
    let mut cfg: PersonalizeConfig = load(args.config.as_deref())?;
    if let Some(n) = args.n {
        cfg.n = Some(n);
    }
    if let Some(o) = &args.out {
        cfg.output = Some(o.clone());
    }
    if let Some(m) = args.mode {
        cfg.fit.retrieval.mode = match m {
            ModeArg::Strict => PilotMode::Strict,
            ModeArg::Reuse => PilotMode::Reuse,
        };
    }
    let seed = resolve_seed(args.seed, cfg.seed)?;
    cfg.seed = Some(seed);
    let model = cfg.model.clone().ok_or_else(|| config_err("missing \"model\""))?;
    let labels = cfg.labels.clone().ok_or_else(|| config_err("missing \"labels\""))?;
    let n = cfg.n.ok_or_else(|| config_err("missing budget \"n\""))?;
    let output = cfg.output.clone().unwrap_or_else(|| PathBuf::from("personalized"));
    cfg.output = Some(output.clone());

    let mut pool = None;
    let (domain, covariates) = match &labels {
        LabelSource::Pool { path, response } => {
            if cfg.scheme == Scheme::SmallDomain {
                return Err(config_err("the small-domain scheme needs synthetic or process labels"));
            }
            let covariates = pool_columns(path, response, &cfg.covariates)?;
            let data = load_csv(path, &CsvSchema::new(covariates.clone(), Some(response))).map_err(config_err)?;
            if n > data.len() {
                return Err(config_err(format!("budget exceeds pool: n = {n} but the pool has {} rows", data.len())));
            }
            let domain = match &cfg.domain {
                Some(d) => d.clone(),
                None => Domain::bounding_box(&data.points, 0.0).map_err(config_err)?,
            };
            if domain.dim() != covariates.len() {
                return Err(config_err(format!("domain has {} dimensions but there are {} covariates", domain.dim(), covariates.len())));
            }
            if let Some(k) = data.points.iter().position(|x| !domain.contains(x)) {
                return Err(config_err(format!("pool row {} lies outside the domain", k + 2)));
            }
            let responses = data.responses.clone().unwrap_or_default();
            pool = Some((data.points, responses));
            (domain, covariates)
        }
        _ => {
            let domain = cfg.domain.clone().ok_or_else(|| config_err("missing \"domain\""))?;
            let covariates = cfg.covariates.clone().unwrap_or_else(|| positional_names(domain.dim()));
            if covariates.len() != domain.dim() {
                return Err(config_err(format!("domain has {} dimensions but there are {} covariates", domain.dim(), covariates.len())));
            }
            (domain, covariates)
        }
    };
    cfg.domain = Some(domain.clone());
    cfg.covariates = Some(covariates.clone());
    if n < 8 {
        return Err(config_err(format!("budget n must be at least 8, got {n}")));
    }
    Ok(Resolved { config: cfg, domain, covariates, model, labels, n, seed, output, pool })
}

fn expression_fn(source: &str, covariates: &[String]) -> CliResult<ScalarFn> {
    let expr = Expression::parse(source, covariates).map_err(config_err)?;
    Ok(Arc::new(move |x: &[f64]| expr.eval(x).unwrap_or(f64::NAN)))
}

fn label_oracle(r: &Resolved) -> CliResult<Box<dyn LabelOracle + Send>> {
    match &r.labels {
        LabelSource::Synthetic { f_star, sigma, bernoulli } => {
            let f = expression_fn(f_star, &r.covariates)?;
            let noise = if *bernoulli {
                NoiseLaw::Bernoulli
            } else {
                NoiseLaw::Gaussian { sigma: expression_fn(sigma, &r.covariates)? }
            };
            Ok(Box::new(SyntheticOracle::new(f, noise, rng_stream(r.seed, PHASE_LABELS))))
        }
        LabelSource::Process { command, timeout_ms } => {
            let spec = ModelSpec::Process { command: command.clone(), timeout_ms: *timeout_ms };
            Ok(Box::new(ModelOracle::new(spec.build(&r.covariates)?, None)))
        }
        LabelSource::Pool { .. } => unreachable!("pool labels are handled separately"),
    }
}

pub fn run(args: PersonalizeArgs) -> CliResult<()> {
    let r = resolve(&args)?;
    echo("personalize", &r.config)?;
    let start = Instant::now();
    let model = r.model.build(&r.covariates)?;
    let fit = &r.config.fit;

    let (est, report, pool_indices): (PersonalizedEstimator, FitReport, Option<Vec<usize>>) = match &r.pool {
        Some((points, responses)) => {
            let mut pool = PoolOracle::new(points.clone(), PoolLabels::Hidden(responses.clone()))?;
            let (est, report, result) = fit_personalized_pool(model, &r.domain, r.n, &mut pool, fit, r.seed)?;
            (est, report, result.pool_indices)
        }
        None => {
            let mut oracle = label_oracle(&r)?;
            let (est, report) = match r.config.scheme {
                Scheme::Budgeted => fit_personalized(model, &r.domain, r.n, oracle.as_mut(), fit, r.seed)?,
                Scheme::SmallDomain => fit_personalized_small_domain(model, &r.domain, r.n, oracle.as_mut(), fit, r.seed)?,
            };
            (est, report, None)
        }
    };

    create_dir(&r.output)?;
    let est_path = r.output.join("estimator.json");
    let report_path = r.output.join("report.json");
    let artifact = EstimatorArtifact::from_estimator(&est, r.covariates.clone(), r.model.clone());
    std::fs::write(&est_path, artifact.to_json()? + "\n")
        .map_err(|e| runtime_err(format!("cannot write {}: {e}", est_path.display())))?;

    eprintln!(
        "selected theta = ({}, {}), h = {}, validation score {}",
        report.theta.theta1(),
        report.theta.theta2(),
        report.bandwidth,
        report.validation_score
    );
    write_json(
        &report_path,
        &PersonalizeReport {
            tool: "fsp",
            version: env!("CARGO_PKG_VERSION"),
            command: "personalize",
            config: &r.config,
            seed: r.seed,
            fit: &report,
            pool_indices: pool_indices.as_deref(),
            files: vec![est_path.display().to_string(), report_path.display().to_string()],
            wall_clock_seconds: start.elapsed().as_secs_f64(),
        },
    )
}

