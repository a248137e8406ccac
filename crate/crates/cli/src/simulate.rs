use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use fsp::adaptation::FitConfig;
use fsp::simulation::{run_experiment, scenario_by_name, ExperimentConfig, Method, SummaryRow, SCENARIO_NAMES};
use serde::{Deserialize, Serialize};

use crate::config::{create_dir, echo, load, resolve_seed, write_json};
use crate::error::{config_err, runtime_err, CliResult};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub scenario: String,
    pub n: usize,
    pub n_ptr: usize,
    pub repetitions: usize,
    pub seed: Option<u64>,
    pub methods: Vec<Method>,
    pub fit: FitConfig,
    pub output: PathBuf,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        let e = ExperimentConfig::default();
        SimulateConfig {
            scenario: "regression".into(),
            n: e.n,
            n_ptr: e.n_ptr,
            repetitions: e.repetitions,
            seed: None,
            methods: e.methods,
            fit: e.fit,
            output: PathBuf::from("simulation"),
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// regression, classification or adversarial.
    #[arg(long)]
    scenario: Option<String>,
    /// Labeling budget per repetition.
    #[arg(long)]
    n: Option<usize>,
    /// Source sample size of the pre-trained model.
    #[arg(long)]
    n_ptr: Option<usize>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a SimulateConfig,
    metric: fsp::simulation::Metric,
    summary: &'a [SummaryRow],
    files: Vec<String>,
    wall_clock_seconds: f64,
}

fn resolve(args: &SimulateArgs) -> CliResult<SimulateConfig> {
    let mut cfg: SimulateConfig = load(args.config.as_deref())?;
    if let Some(s) = &args.scenario {
        cfg.scenario = s.clone();
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(n) = args.n_ptr {
        cfg.n_ptr = n;
    }
    if let Some(r) = args.repetitions {
        cfg.repetitions = r;
    }
    if let Some(o) = &args.out {
        cfg.output = o.clone();
    }
    cfg.seed = Some(resolve_seed(args.seed, cfg.seed)?);
    if !SCENARIO_NAMES.contains(&cfg.scenario.as_str()) {
        return Err(config_err(format!(
            "unknown scenario {:?}; valid scenarios are {}",
            cfg.scenario,
            SCENARIO_NAMES.join(", ")
        )));
    }
    if cfg.repetitions == 0 {
        return Err(config_err("repetitions must be at least 1"));
    }
    if cfg.n < 8 {
        return Err(config_err(format!("budget n must be at least 8, got {}", cfg.n)));
    }
    if cfg.methods.is_empty() {
        return Err(config_err("methods must not be empty"));
    }
    Ok(cfg)
}

pub fn run(args: SimulateArgs) -> CliResult<()> {
    let cfg = resolve(&args)?;
    echo("simulate", &cfg)?;
    let start = Instant::now();
    let scenario = scenario_by_name(&cfg.scenario).map_err(config_err)?;
    let experiment = ExperimentConfig {
        n: cfg.n,
        n_ptr: cfg.n_ptr,
        repetitions: cfg.repetitions,
        seed: cfg.seed.unwrap_or(0),
        methods: cfg.methods.clone(),
        fit: cfg.fit.clone(),
    };
    let result = run_experiment(&scenario, &experiment)?;

    create_dir(&cfg.output)?;
    let reps = cfg.output.join("repetitions.csv");
    let summary = cfg.output.join("summary.csv");
    let report = cfg.output.join("report.json");

    let mut w = csv::Writer::from_path(&reps).map_err(runtime_err)?;
    w.write_record(["repetition", "method", "metric", "theta1", "theta2", "bandwidth", "validation_score"])
        .map_err(runtime_err)?;
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for r in &result.rows {
        w.write_record([
            r.repetition.to_string(),
            r.method.name().to_string(),
            r.metric.to_string(),
            opt(r.theta1),
            opt(r.theta2),
            opt(r.bandwidth),
            opt(r.validation_score),
        ])
        .map_err(runtime_err)?;
    }
    w.flush().map_err(runtime_err)?;

    let mut w = csv::Writer::from_path(&summary).map_err(runtime_err)?;
    w.write_record(["method", "count", "mean", "sd", "min", "q25", "median", "q75", "max"]).map_err(runtime_err)?;
    for row in &result.summary {
        let s = &row.summary;
        let mut record = vec![row.method.name().to_string(), s.count.to_string()];
        record.extend([s.mean, s.sd, s.min, s.q25, s.median, s.q75, s.max].iter().map(|v| v.to_string()));
        w.write_record(&record).map_err(runtime_err)?;
    }
    w.flush().map_err(runtime_err)?;

    for row in &result.summary {
        eprintln!("{:<12} mean {:.4}  median {:.4}", row.method.name(), row.summary.mean, row.summary.median);
    }
    let files = [&reps, &summary, &report].iter().map(|p| p.display().to_string()).collect();
    write_json(
        &report,
        &SimulateReport {
            tool: "fsp",
            version: env!("CARGO_PKG_VERSION"),
            command: "simulate",
            config: &cfg,
            metric: result.metric,
            summary: &result.summary,
            files,
            wall_clock_seconds: start.elapsed().as_secs_f64(),
        },
    )
}
