use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::density::{plug_in_density, DensityOptions, SamplingDensity};
use super::density_ratio::{fit_density_ratio, DensityRatioFit, LogisticOptions};
use super::rejection::{rejection_sample, RejectionDiagnostics};
use crate::domain::{Domain, LabeledSample, SampleSet};
use crate::error::{FspError, Result};
use crate::estimator::{pilot_bandwidth, smooth_variance_bandwidth, VarianceField};
use crate::oracle::{LabelOracle, PoolOracle};
use crate::rng::{rng_stream, PHASE_PILOT, PHASE_RETRIEVAL, PHASE_SYNTHETIC};

/// How the pilot sample is split between variance estimation and validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PilotMode {
    /// First half estimates `σ̂²`, second half validates.
    Strict,
    /// All pilot samples estimate `σ̂²` and also validate.
    #[default]
    Reuse,
}

/// Where the second-phase covariates come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepTwoRule {
    /// Plug-in density proportional to `σ̂`.
    #[default]
    VarianceWeighted,
    /// Uniform on the domain (baseline for comparisons).
    Uniform,
}

/// Default bandwidth of the pilot variance field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PilotBandwidthRule {
    /// `n₀^{−1/(d+4)}`, with `n₀` the pilot points entering `σ̂²`.
    #[default]
    PilotSize,
    /// `n^{−1/(d+2)}` in the total budget `n`.
    Budget,
}

impl PilotBandwidthRule {
    pub fn bandwidth(self, n: usize, n_pilot: usize, domain: &Domain) -> f64 {
        match self {
            PilotBandwidthRule::PilotSize => smooth_variance_bandwidth(n_pilot, domain),
            PilotBandwidthRule::Budget => pilot_bandwidth(n, domain),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalConfig {
    pub pilot_fraction: f64,
    pub mode: PilotMode,
    pub step_two: StepTwoRule,
    pub pilot_rule: PilotBandwidthRule,
    /// Overrides `pilot_rule` with a fixed pilot bandwidth.
    pub pilot_bandwidth: Option<f64>,
    /// Quadrature resolution per coordinate; defaults to a grid of about 2·10⁴ cells.
    pub quadrature_per_dim: Option<usize>,
    pub envelope_safety: f64,
    pub floor_fraction: f64,
    /// Cap on the synthetic draws used for the density-ratio fit.
    pub synthetic_cap: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            pilot_fraction: 0.25,
            mode: PilotMode::Reuse,
            step_two: StepTwoRule::VarianceWeighted,
            pilot_rule: PilotBandwidthRule::PilotSize,
            pilot_bandwidth: None,
            quadrature_per_dim: None,
            envelope_safety: 1.1,
            floor_fraction: 0.01,
            synthetic_cap: 50_000,
        }
    }
}

impl RetrievalConfig {
    fn density_options(&self, domain: &Domain) -> DensityOptions {
        let mut opts = DensityOptions::for_domain(domain);
        if let Some(q) = self.quadrature_per_dim {
            opts.per_dim = q;
        }
        opts.safety = self.envelope_safety;
        opts.floor_fraction = self.floor_fraction;
        opts
    }

    fn validate(&self) -> Result<()> {
        if !(self.pilot_fraction > 0.0 && self.pilot_fraction < 1.0) {
            return Err(FspError::InvalidParameter(format!("pilot fraction must lie in (0, 1), got {}", self.pilot_fraction)));
        }
        if !(self.envelope_safety >= 1.0) {
            return Err(FspError::InvalidParameter("envelope safety factor must be >= 1".into()));
        }
        if !(self.floor_fraction > 0.0) {
            return Err(FspError::InvalidParameter("floor fraction must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RetrievalDiagnostics {
    pub n: usize,
    pub n_pilot: usize,
    pub mode: Option<PilotMode>,
    pub pilot_bandwidth: Option<f64>,
    pub mean_sigma: Option<f64>,
    pub floor_activations: usize,
    pub uniform_fallback: bool,
    pub rejection: RejectionDiagnostics,
    pub oracle_queries: usize,
    pub density_ratio: Option<DensityRatioFit>,
    pub synthetic_draws: usize,
    pub synthetic_cap_binding: bool,
    /// Every remaining pool point had to be selected, so no ratio was fitted.
    pub forced_selection: bool,
}

#[derive(Debug, Clone)]
pub struct RetrievalResult {
    pub samples: SampleSet,
    pub variance_field: Option<VarianceField>,
    pub density: Option<SamplingDensity>,
    /// Pool indices in sample order, for pool retrieval.
    pub pool_indices: Option<Vec<usize>>,
    pub diagnostics: RetrievalDiagnostics,
}

fn pilot_split(n0: usize, mode: PilotMode) -> (usize, Vec<usize>) {
    match mode {
        PilotMode::Strict => (n0 / 2, (n0 / 2..n0).collect()),
        PilotMode::Reuse => (n0, (0..n0).collect()),
    }
}

fn label_all(points: Vec<Vec<f64>>, oracle: &mut dyn LabelOracle) -> Result<Vec<LabeledSample>> {
    points
        .into_iter()
        .map(|x| {
            let y = oracle.label(&x)?;
            Ok(LabeledSample::new(x, y))
        })
        .collect()
}

fn variance_field(
    pilot: &[LabeledSample],
    used: usize,
    n: usize,
    domain: &Domain,
    config: &RetrievalConfig,
) -> Result<VarianceField> {
    let h = config.pilot_bandwidth.unwrap_or_else(|| config.pilot_rule.bandwidth(n, used, domain));
    VarianceField::new(pilot[..used].to_vec(), h, domain.clone())
}

/// Two-phase retrieval under a labeling budget `n`: a uniform pilot of
/// `n₀ = round(c·n)` points, then `n − n₀` points drawn from the plug-in
/// density `p̂ ∝ σ̂`. Training indices are `{n₀, …, n−1}`.
pub fn retrieve_budgeted(
    n: usize,
    domain: &Domain,
    oracle: &mut dyn LabelOracle,
    config: &RetrievalConfig,
    seed: u64,
) -> Result<RetrievalResult> {
    config.validate()?;
    if n < 8 {
        return Err(FspError::InvalidParameter(format!("budget must be at least 8, got {n}")));
    }
    let n0 = ((config.pilot_fraction * n as f64).round() as usize).clamp(2, n - 1);
    let start = oracle.queries();

    let mut pilot_rng = rng_stream(seed, PHASE_PILOT);
    let pilot_x: Vec<Vec<f64>> = (0..n0).map(|_| domain.sample_uniform(&mut pilot_rng)).collect();
    let mut samples = label_all(pilot_x, oracle)?;

    let (used, val_idx) = pilot_split(n0, config.mode);
    let field = variance_field(&samples, used, n, domain, config)?;
    let density = match config.step_two {
        StepTwoRule::VarianceWeighted => plug_in_density(&field, config.density_options(domain))?,
        StepTwoRule::Uniform => SamplingDensity::uniform(domain.clone(), config.envelope_safety),
    };

    let mut rng = rng_stream(seed, PHASE_RETRIEVAL);
    let (points, rejection) = rejection_sample(&density, n - n0, &mut rng)?;
    samples.extend(label_all(points, oracle)?);

    let diagnostics = RetrievalDiagnostics {
        n,
        n_pilot: n0,
        mode: Some(config.mode),
        pilot_bandwidth: Some(field.bandwidth()),
        mean_sigma: Some(density.diagnostics().mean_sigma),
        floor_activations: density.diagnostics().floor_activations,
        uniform_fallback: density.diagnostics().uniform_fallback,
        rejection,
        oracle_queries: oracle.queries() - start,
        ..Default::default()
    };
    Ok(RetrievalResult {
        samples: SampleSet::new(samples, (n0..n).collect(), val_idx)?,
        variance_field: Some(field),
        density: Some(density),
        pool_indices: None,
        diagnostics,
    })
}

/// Uniform retrieval on a (small) box: the first `n₀ = round(val_fraction · n)`
/// samples validate, the rest train.
pub fn retrieve_uniform_small_domain(
    n: usize,
    domain: &Domain,
    oracle: &mut dyn LabelOracle,
    val_fraction: f64,
    seed: u64,
) -> Result<RetrievalResult> {
    if n < 4 {
        return Err(FspError::InvalidParameter(format!("budget must be at least 4, got {n}")));
    }
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(FspError::InvalidParameter(format!("validation fraction must lie in (0, 1), got {val_fraction}")));
    }
    let n0 = ((val_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let start = oracle.queries();
    let mut rng = rng_stream(seed, PHASE_RETRIEVAL);
    let points: Vec<Vec<f64>> = (0..n).map(|_| domain.sample_uniform(&mut rng)).collect();
    let samples = label_all(points, oracle)?;
    let diagnostics = RetrievalDiagnostics {
        n,
        n_pilot: n0,
        oracle_queries: oracle.queries() - start,
        rejection: RejectionDiagnostics { proposals: n, accepted: n, envelope_violations: 0 },
        ..Default::default()
    };
    Ok(RetrievalResult {
        samples: SampleSet::new(samples, (n0..n).collect(), (0..n0).collect())?,
        variance_field: None,
        density: None,
        pool_indices: None,
        diagnostics,
    })
}

/// Retrieval from a finite pool of unlabeled points.
///
/// A uniform pilot of `n₀` pool points estimates `σ̂`; synthetic draws from
/// `p̂ ∝ σ̂` are contrasted with the remaining pool by logistic regression,
/// and `n − n₀` further pool points are drawn without replacement with
/// weights `r̂(x) = exp{β₀ + xᵀβ}`.
pub fn retrieve_from_pool(
    n: usize,
    n0: usize,
    domain: &Domain,
    pool: &mut PoolOracle,
    config: &RetrievalConfig,
    seed: u64,
) -> Result<RetrievalResult> {
    config.validate()?;
    let big_n = pool.len();
    if n > big_n {
        return Err(FspError::Budget(format!("budget {n} exceeds pool of {big_n}")));
    }
    if !(n > n0 && n0 >= 4) {
        return Err(FspError::InvalidParameter(format!("need n > n0 >= 4, got n = {n}, n0 = {n0}")));
    }
    for p in pool.points() {
        domain.check(p)?;
    }
    let start = pool.queries();

    let mut pilot_rng = rng_stream(seed, PHASE_PILOT);
    let pilot_idx: Vec<usize> = index::sample(&mut pilot_rng, big_n, n0).into_vec();
    let mut samples = Vec::with_capacity(n);
    for &i in &pilot_idx {
        let y = pool.label_index(i)?;
        samples.push(LabeledSample::new(pool.points()[i].clone(), y));
    }
    let (used, val_idx) = pilot_split(n0, config.mode);
    let field = variance_field(&samples, used, n, domain, config)?;
    let density = plug_in_density(&field, config.density_options(domain))?;

    let mut in_pilot = vec![false; big_n];
    pilot_idx.iter().for_each(|&i| in_pilot[i] = true);
    let remaining: Vec<usize> = (0..big_n).filter(|&i| !in_pilot[i]).collect();
    let need = n - n0;

    let mut diagnostics = RetrievalDiagnostics {
        n,
        n_pilot: n0,
        mode: Some(config.mode),
        pilot_bandwidth: Some(field.bandwidth()),
        mean_sigma: Some(density.diagnostics().mean_sigma),
        floor_activations: density.diagnostics().floor_activations,
        uniform_fallback: density.diagnostics().uniform_fallback,
        ..Default::default()
    };

    let mut rng = rng_stream(seed, PHASE_RETRIEVAL);
    let chosen: Vec<usize> = if need == remaining.len() {
        diagnostics.forced_selection = true;
        remaining.clone()
    } else {
        let wanted = big_n - n0;
        let draws = wanted.min(config.synthetic_cap);
        diagnostics.synthetic_cap_binding = draws < wanted;
        diagnostics.synthetic_draws = draws;
        let mut syn_rng = rng_stream(seed, PHASE_SYNTHETIC);
        let (synthetic, rejection) = rejection_sample(&density, draws, &mut syn_rng)?;
        diagnostics.rejection = rejection;
        let class0: Vec<Vec<f64>> = remaining.iter().map(|&i| pool.points()[i].clone()).collect();
        let fit = fit_density_ratio(&class0, &synthetic, LogisticOptions::default())?;
        let log_w: Vec<f64> = class0.iter().map(|x| fit.log_ratio(x)).collect();
        let shift = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = log_w.iter().map(|l| (l - shift).exp()).collect();
        diagnostics.density_ratio = Some(fit);
        let picked = index::sample_weighted(&mut rng, remaining.len(), |k| weights[k], need)
            .map_err(|e| FspError::InvalidParameter(format!("weighted pool sampling failed: {e}")))?;
        picked.into_iter().map(|k| remaining[k]).collect()
    };
    for &i in &chosen {
        let y = pool.label_index(i)?;
        samples.push(LabeledSample::new(pool.points()[i].clone(), y));
    }
    diagnostics.oracle_queries = pool.queries() - start;

    let mut pool_indices = pilot_idx;
    pool_indices.extend(chosen);
    Ok(RetrievalResult {
        samples: SampleSet::new(samples, (n0..n).collect(), val_idx)?,
        variance_field: Some(field),
        density: Some(density),
        pool_indices: Some(pool_indices),
        diagnostics,
    })
}
