//! Simulation scenarios, pre-trained model generators, metrics and the
//! repeated-experiment harness.

use std::sync::Arc;

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptation::{fit_personalized, FitConfig};
use crate::domain::{linf_distance, Domain, LabeledSample};
use crate::error::{FspError, Result};
use crate::model::{blackbox_query, check_dim, BlackBox, FnModel, ScalarFn, SharedModel};
use crate::oracle::{NoiseLaw, SyntheticOracle};
use crate::rng::{hash_words, rng_substream, Stream, PHASE_LABELS, PHASE_PRETRAINED, PHASE_TEST};
use crate::sampling::StepTwoRule;

/// Box-kernel local mean with a sup-norm window; an empty window predicts 0.
pub struct KernelRegressionModel {
    samples: Vec<LabeledSample>,
    bandwidth: f64,
    dim: usize,
}

impl KernelRegressionModel {
    pub fn new(samples: Vec<LabeledSample>, bandwidth: f64) -> Result<Self> {
        let dim = samples.first().map(|s| s.x.len()).ok_or(FspError::EmptyData)?;
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(FspError::InvalidParameter(format!("bandwidth must be finite and > 0, got {bandwidth}")));
        }
        Ok(KernelRegressionModel { samples, bandwidth, dim })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }
}

impl BlackBox for KernelRegressionModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x)?;
        let mut sum = 0.0;
        let mut count = 0usize;
        for s in &self.samples {
            if linf_distance(&s.x, x) <= self.bandwidth {
                sum += s.y;
                count += 1;
            }
        }
        Ok(sum / count.max(1) as f64)
    }

    fn describe(&self) -> String {
        format!("box-kernel regression on {} source samples (h = {})", self.samples.len(), self.bandwidth)
    }
}

/// Independent `N(0, 1)` value per distinct query point, derived from a hash
/// of the seed and the coordinates' bit patterns.
pub struct WhiteNoiseModel {
    seed: u64,
    dim: usize,
}

impl WhiteNoiseModel {
    pub fn new(dim: usize, seed: u64) -> Self {
        WhiteNoiseModel { seed, dim }
    }
}

impl BlackBox for WhiteNoiseModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x)?;
        // +0.0 and -0.0 are the same point.
        let words: Vec<u64> = x.iter().map(|v| (v + 0.0).to_bits()).collect();
        let mut rng = Stream::from_seed(hash_words(self.seed, "white-noise", &words));
        Ok(StandardNormal.sample(&mut rng))
    }

    fn describe(&self) -> String {
        format!("white noise (seed {})", self.seed)
    }
}

/// How a scenario's pre-trained model is produced.
#[derive(Debug, Clone)]
pub enum PretrainedSpec {
    /// Kernel regression on `N` uniform source points with
    /// `y = shrink·f*(x) + N(0, noise_sd²)`.
    KernelRegression { source: Domain, shrink: f64, noise_sd: f64 },
    /// Kernel regression on Bernoulli labels with `P(y = 1) = clamp(f*(x) + offset)`.
    KernelClassifier { source: Domain, offset: f64 },
    WhiteNoise,
    /// The true regression function.
    Truth,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Mse,
    Mce,
}

#[derive(Clone)]
pub struct Scenario {
    pub name: String,
    pub f_star: ScalarFn,
    pub noise: NoiseLaw,
    pub domain: Domain,
    pub pretrained: PretrainedSpec,
    pub n_test: usize,
    pub metric: Metric,
}

pub const SCENARIO_NAMES: [&str; 3] = ["regression", "classification", "adversarial"];

pub fn regression_truth(x: &[f64]) -> f64 {
    x[0].abs() + (x[1] + 0.3).abs().powf(0.5)
}

pub fn classification_truth(x: &[f64]) -> f64 {
    (x[0].abs().powf(0.6) + (x[1] - 0.3).abs().powf(0.6) - 0.1).min(0.9).max(0.0)
}

pub fn scenario_regression() -> Scenario {
    Scenario {
        name: "regression".into(),
        f_star: Arc::new(regression_truth),
        noise: NoiseLaw::homoskedastic(1.0),
        domain: Domain::cube(2, -0.5, 0.5).expect("valid box"),
        pretrained: PretrainedSpec::KernelRegression {
            source: Domain::cube(2, -1.0, 1.0).expect("valid box"),
            shrink: 0.8,
            noise_sd: 1.0,
        },
        n_test: 500,
        metric: Metric::Mse,
    }
}

pub fn scenario_classification() -> Scenario {
    Scenario {
        name: "classification".into(),
        f_star: Arc::new(classification_truth),
        noise: NoiseLaw::Bernoulli,
        domain: Domain::cube(2, -0.2, 0.8).expect("valid box"),
        pretrained: PretrainedSpec::KernelClassifier {
            source: Domain::cube(2, -1.0, 1.0).expect("valid box"),
            offset: 0.1,
        },
        n_test: 500,
        metric: Metric::Mce,
    }
}

pub fn scenario_adversarial() -> Scenario {
    Scenario { name: "adversarial".into(), pretrained: PretrainedSpec::WhiteNoise, ..scenario_regression() }
}

pub fn scenario_by_name(name: &str) -> Result<Scenario> {
    match name {
        "regression" => Ok(scenario_regression()),
        "classification" => Ok(scenario_classification()),
        "adversarial" => Ok(scenario_adversarial()),
        other => Err(FspError::InvalidParameter(format!(
            "unknown scenario {other:?}; valid names: {}",
            SCENARIO_NAMES.join(", ")
        ))),
    }
}

impl std::fmt::Debug for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scenario")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("pretrained", &self.pretrained)
            .field("n_test", &self.n_test)
            .field("metric", &self.metric)
            .finish()
    }
}

impl Scenario {
    /// Builds the pre-trained model from `n_ptr` source samples.
    pub fn pretrained_model(&self, n_ptr: usize, rng: &mut Stream) -> Result<SharedModel> {
        let d = self.domain.dim();
        let kernel = |source: &Domain, label: &dyn Fn(&[f64], &mut Stream) -> f64, rng: &mut Stream| {
            if n_ptr == 0 {
                return Err(FspError::InvalidParameter("pre-trained source size must be >= 1".into()));
            }
            let samples: Vec<LabeledSample> = (0..n_ptr)
                .map(|_| {
                    let x = source.sample_uniform(rng);
                    let y = label(&x, rng);
                    LabeledSample::new(x, y)
                })
                .collect();
            let h = (n_ptr as f64).powf(-1.0 / (d as f64 + 2.0));
            Ok(Arc::new(KernelRegressionModel::new(samples, h)?) as SharedModel)
        };
        match &self.pretrained {
            PretrainedSpec::KernelRegression { source, shrink, noise_sd } => {
                let f = self.f_star.clone();
                let (shrink, sd) = (*shrink, *noise_sd);
                kernel(
                    source,
                    &move |x, rng| {
                        let z: f64 = StandardNormal.sample(rng);
                        shrink * f(x) + sd * z
                    },
                    rng,
                )
            }
            PretrainedSpec::KernelClassifier { source, offset } => {
                let f = self.f_star.clone();
                let offset = *offset;
                kernel(
                    source,
                    &move |x, rng| {
                        let p = (f(x) + offset).clamp(0.0, 1.0);
                        if rand::Rng::random::<f64>(rng) < p {
                            1.0
                        } else {
                            0.0
                        }
                    },
                    rng,
                )
            }
            PretrainedSpec::WhiteNoise => Ok(Arc::new(WhiteNoiseModel::new(d, rand::Rng::random(rng)))),
            PretrainedSpec::Truth => Ok(Arc::new(FnModel::from_shared(d, "truth", self.f_star.clone()))),
            PretrainedSpec::Zero => Ok(Arc::new(FnModel::new(d, "zero", |_| 0.0))),
        }
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(FspError::DimensionMismatch { expected: a, got: b });
    }
    if a == 0 {
        return Err(FspError::EmptyData);
    }
    Ok(())
}

/// Mean squared error between predictions and target values.
pub fn mse(predictions: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(truth.len(), predictions.len())?;
    let total: f64 = predictions.iter().zip(truth).map(|(p, t)| (t - p) * (t - p)).sum();
    Ok(total / truth.len() as f64)
}

/// Fraction of labels that disagree with `𝟙(prediction ≥ 0.5)`.
pub fn mce(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    check_lengths(labels.len(), predictions.len())?;
    if let Some(l) = labels.iter().find(|&&l| l != 0.0 && l != 1.0) {
        return Err(FspError::InvalidParameter(format!("labels must be 0 or 1, got {l}")));
    }
    let wrong = predictions.iter().zip(labels).filter(|(p, l)| (if **p >= 0.5 { 1.0 } else { 0.0 }) != **l).count();
    Ok(wrong as f64 / labels.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    SingleTask,
    Fsp,
    Pretrained,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::SingleTask => "single-task",
            Method::Fsp => "fsp",
            Method::Pretrained => "pretrained",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub n_ptr: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub fit: FitConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 300,
            n_ptr: 1000,
            repetitions: 100,
            seed: 0,
            methods: vec![Method::SingleTask, Method::Fsp, Method::Pretrained],
            fit: FitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepetitionRow {
    pub repetition: usize,
    pub method: Method,
    pub metric: f64,
    pub theta1: Option<f64>,
    pub theta2: Option<f64>,
    pub bandwidth: Option<f64>,
    pub validation_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: Method,
    #[serde(flatten)]
    pub summary: Summary,
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(FspError::EmptyData);
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Summary {
        count: n,
        mean,
        sd,
        min: sorted[0],
        q25: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q75: quantile_sorted(&sorted, 0.75),
        max: sorted[n - 1],
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub scenario: String,
    pub metric: Metric,
    pub rows: Vec<RepetitionRow>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentResult {
    pub fn values(&self, method: Method) -> Vec<f64> {
        self.rows.iter().filter(|r| r.method == method).map(|r| r.metric).collect()
    }

    pub fn mean(&self, method: Method) -> Option<f64> {
        self.summary.iter().find(|s| s.method == method).map(|s| s.summary.mean)
    }
}

/// Seed for repetition `r` of an experiment.
pub fn repetition_seed(seed: u64, r: usize) -> u64 {
    let h = hash_words(seed, "repetition", &[r as u64]);
    u64::from_le_bytes(h[..8].try_into().expect("8 bytes"))
}

fn score(metric: Metric, preds: &[f64], truth: &[f64], labels: &[f64]) -> Result<f64> {
    match metric {
        Metric::Mse => mse(preds, truth),
        Metric::Mce => mce(preds, labels),
    }
}

fn run_repetition(scenario: &Scenario, config: &ExperimentConfig, r: usize) -> Result<Vec<RepetitionRow>> {
    let seed = config.seed;
    let rep_seed = repetition_seed(seed, r);
    let domain = &scenario.domain;
    let d = domain.dim();
    let needs_model = config.methods.iter().any(|m| *m != Method::SingleTask);
    let model = if needs_model {
        Some(scenario.pretrained_model(config.n_ptr, &mut rng_substream(seed, PHASE_PRETRAINED, r as u64))?)
    } else {
        None
    };

    let mut test_rng = rng_substream(seed, PHASE_TEST, r as u64);
    let test_x: Vec<Vec<f64>> = (0..scenario.n_test).map(|_| domain.sample_uniform(&mut test_rng)).collect();
    let truth: Vec<f64> = test_x.iter().map(|x| (scenario.f_star)(x)).collect();
    let labels: Vec<f64> = match scenario.metric {
        Metric::Mce => test_x
            .iter()
            .zip(&truth)
            .map(|(x, &m)| scenario.noise.draw(x, m, &mut test_rng))
            .collect::<Result<_>>()?,
        Metric::Mse => Vec::new(),
    };
    let oracle = || {
        SyntheticOracle::new(scenario.f_star.clone(), scenario.noise.clone(), rng_substream(seed, PHASE_LABELS, r as u64))
            .with_budget(config.n)
    };

    let mut rows = Vec::with_capacity(config.methods.len());
    for &method in &config.methods {
        let row = match method {
            Method::Pretrained => {
                let model = model.as_ref().expect("model built");
                let preds = blackbox_query(model.as_ref(), domain, &test_x)?;
                RepetitionRow {
                    repetition: r,
                    method,
                    metric: score(scenario.metric, &preds, &truth, &labels)?,
                    theta1: None,
                    theta2: None,
                    bandwidth: None,
                    validation_score: None,
                }
            }
            Method::Fsp | Method::SingleTask => {
                let (model, fit) = if method == Method::Fsp {
                    (model.clone().expect("model built"), config.fit.clone())
                } else {
                    let mut fit = config.fit.clone();
                    fit.use_pretrained = false;
                    fit.retrieval.step_two = StepTwoRule::Uniform;
                    (Arc::new(FnModel::new(d, "zero", |_| 0.0)) as SharedModel, fit)
                };
                let (est, report) = fit_personalized(model, domain, config.n, &mut oracle(), &fit, rep_seed)?;
                let preds = est.predict_batch(&test_x)?;
                RepetitionRow {
                    repetition: r,
                    method,
                    metric: score(scenario.metric, &preds, &truth, &labels)?,
                    theta1: Some(report.theta.theta1()),
                    theta2: Some(report.theta.theta2()),
                    bandwidth: Some(report.bandwidth),
                    validation_score: Some(report.validation_score),
                }
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

/// Runs independent repetitions in parallel; rows come back ordered by
/// repetition, then by method as listed in the config.
pub fn run_experiment(scenario: &Scenario, config: &ExperimentConfig) -> Result<ExperimentResult> {
    if config.repetitions == 0 {
        return Err(FspError::InvalidParameter("repetitions must be >= 1".into()));
    }
    if config.methods.is_empty() {
        return Err(FspError::InvalidParameter("no methods selected".into()));
    }
    let per_rep: Vec<Vec<RepetitionRow>> = (0..config.repetitions)
        .into_par_iter()
        .map(|r| run_repetition(scenario, config, r))
        .collect::<Result<_>>()?;
    let rows: Vec<RepetitionRow> = per_rep.into_iter().flatten().collect();
    let mut methods = config.methods.clone();
    methods.dedup();
    let summary = methods
        .iter()
        .map(|&m| {
            let values: Vec<f64> = rows.iter().filter(|r| r.method == m).map(|r| r.metric).collect();
            Ok(SummaryRow { method: m, summary: summarize(&values)? })
        })
        .collect::<Result<_>>()?;
    Ok(ExperimentResult { scenario: scenario.name.clone(), metric: scenario.metric, rows, summary })
}

/// Least-squares slope and intercept of `log y` on `log x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    check_lengths(xs.len(), ys.len())?;
    if xs.len() < 2 {
        return Err(FspError::Degenerate("need at least two points".into()));
    }
    if let Some(v) = xs.iter().chain(ys).find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(FspError::Degenerate(format!("non-positive value {v} on a log scale")));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(FspError::Degenerate("all x values are equal".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Mean metrics below this are treated as exact recovery.
pub const DEGENERATE_METRIC: f64 = 1e-20;

#[derive(Debug, Clone, Serialize)]
pub struct RateSlope {
    pub n_values: Vec<usize>,
    pub mean_metric: Vec<f64>,
    /// `None` when the fit is degenerate (for example, errors at rounding level).
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
}

/// Mean metric of one method over repetitions at each budget, and the
/// log-log slope against `n`.
pub fn rate_slope_experiment(
    scenario: &Scenario,
    n_values: &[usize],
    method: Method,
    base: &ExperimentConfig,
) -> Result<RateSlope> {
    let mut distinct = n_values.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(FspError::InvalidParameter("need at least three distinct budgets".into()));
    }
    let mut mean_metric = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let config = ExperimentConfig { n, methods: vec![method], ..base.clone() };
        let result = run_experiment(scenario, &config)?;
        mean_metric.push(result.mean(method).expect("method present"));
    }
    let xs: Vec<f64> = n_values.iter().map(|&n| n as f64).collect();
    let fit = if mean_metric.iter().any(|m| *m < DEGENERATE_METRIC) { None } else { log_log_slope(&xs, &mean_metric).ok() };
    Ok(RateSlope {
        n_values: n_values.to_vec(),
        mean_metric,
        slope: fit.map(|f| f.0),
        intercept: fit.map(|f| f.1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_stream;

    #[test]
    fn truth_values() {
        assert_eq!(regression_truth(&[0.0, -0.3]), 0.0);
        assert!((regression_truth(&[0.5, 0.2]) - (0.5 + 0.5f64.sqrt())).abs() < 1e-15);
        assert_eq!(classification_truth(&[0.0, 0.3]), 0.0);
        assert_eq!(classification_truth(&[0.8, 0.8]), 0.9);
    }

    #[test]
    fn metrics() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((mse(&[1.5, 2.5], &[1.0, 2.0]).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(mce(&[1.0; 3], &[1.0; 3]).unwrap(), 0.0);
        assert_eq!(mce(&[0.49; 3], &[1.0; 3]).unwrap(), 1.0);
        assert_eq!(mce(&[0.5], &[1.0]).unwrap(), 0.0);
        assert!(mse(&[], &[]).is_err());
        assert!(mce(&[0.2], &[0.3]).is_err());
    }

    #[test]
    fn white_noise_is_deterministic() {
        let m = WhiteNoiseModel::new(2, 9);
        assert_eq!(m.predict(&[0.1, 0.2]).unwrap(), m.predict(&[0.1, 0.2]).unwrap());
        assert_ne!(m.predict(&[0.1, 0.2]).unwrap(), m.predict(&[0.1, 0.3]).unwrap());
        assert_eq!(m.predict(&[0.0, 0.2]).unwrap(), m.predict(&[-0.0, 0.2]).unwrap());
    }

    #[test]
    fn summary_quantiles() {
        let s = summarize(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(s.median, 2.5);
        assert_eq!(s.min, 1.0);
        assert_eq!(s.q25, 1.75);
        assert!((s.sd - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn exact_power_law_slope() {
        let xs = [250.0, 500.0, 1000.0, 2000.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-1.0 / 3.0)).collect();
        let (slope, _) = log_log_slope(&xs, &ys).unwrap();
        assert!((slope + 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn single_repetition_table() {
        let cfg = ExperimentConfig { n: 40, n_ptr: 100, repetitions: 1, ..Default::default() };
        let res = run_experiment(&scenario_regression(), &cfg).unwrap();
        assert_eq!(res.rows.len(), 3);
        assert!(res.rows.iter().all(|r| r.metric.is_finite()));
    }

    #[test]
    fn kernel_pretrained_covers_target() {
        let s = scenario_regression();
        let m = s.pretrained_model(200, &mut rng_stream(1, "t")).unwrap();
        assert!(m.predict(&[0.3, -0.2]).unwrap().is_finite());
        assert!(scenario_by_name("nope").unwrap_err().to_string().contains("regression, classification, adversarial"));
    }
}
