//! Tuning-parameter grids and cross-validated selection of `θ` and `h`,
//! plus the end-to-end personalization pipelines.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{l2_distance, linf_distance, Domain, HolderParams, LabeledSample, SampleSet};
use crate::error::{FspError, Result};
use crate::estimator::{default_bandwidth, PersonalizedEstimator, VarianceField};
use crate::model::{blackbox_query, SharedModel};
use crate::oracle::{LabelOracle, PoolOracle};
use crate::sampling::{
    retrieve_budgeted, retrieve_from_pool, retrieve_uniform_small_domain, RetrievalConfig, RetrievalDiagnostics,
    RetrievalResult,
};
use crate::smoothing::truncate_to_band;

/// Candidate set `{k·c₁/m} × {j/m}`, `k, j = 0..m`, `m = ⌈ln n⌉`, in
/// lexicographic order.
#[derive(Debug, Clone, Serialize)]
pub struct ThetaGrid {
    c1: f64,
    n: usize,
    steps: usize,
    points: Vec<HolderParams>,
}

impl ThetaGrid {
    pub fn new(n: usize, c1: f64) -> Result<Self> {
        if n < 3 {
            return Err(FspError::InvalidParameter(format!("grid needs n >= 3, got {n}")));
        }
        if !(c1.is_finite() && c1 > 0.0) {
            return Err(FspError::InvalidParameter(format!("c1 must be finite and > 0, got {c1}")));
        }
        let m = (n as f64).ln().ceil() as usize;
        let level = |k: usize, top: f64| if k == m { top } else { k as f64 * top / m as f64 };
        let mut points = Vec::with_capacity((m + 1) * (m + 1));
        for k in 0..=m {
            for j in 0..=m {
                points.push(HolderParams::new(level(k, c1), level(j, 1.0))?);
            }
        }
        Ok(ThetaGrid { c1, n, steps: m, points })
    }

    /// Arbitrary candidate set, sorted lexicographically with duplicates removed.
    pub fn from_points(mut points: Vec<HolderParams>) -> Result<Self> {
        if points.is_empty() {
            return Err(FspError::InvalidParameter("empty candidate set".into()));
        }
        points.sort_by(|a, b| a.lex_cmp(b));
        points.dedup_by(|a, b| a.lex_cmp(b) == Ordering::Equal);
        let c1 = points.iter().map(|p| p.theta1()).fold(0.0, f64::max);
        Ok(ThetaGrid { c1, n: 0, steps: 0, points })
    }

    pub fn points(&self) -> &[HolderParams] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    /// `m = ⌈ln n⌉`; zero for grids built from explicit points.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

pub fn build_grid(n: usize, c1: f64) -> Result<ThetaGrid> {
    ThetaGrid::new(n, c1)
}

/// `Σ (y_i − ŷ_i)²` in sample order.
pub fn squared_error_sum(validation: &[LabeledSample], predictions: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (s, p) in validation.iter().zip(predictions) {
        let r = s.y - p;
        acc += r * r;
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreRow {
    pub theta1: f64,
    pub theta2: f64,
    pub bandwidth: f64,
    pub score: f64,
}

impl ScoreRow {
    pub fn theta(&self) -> HolderParams {
        HolderParams::new(self.theta1, self.theta2).expect("rows hold validated parameters")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TieRule {
    ThetaOnly,
    BandwidthThenTheta,
}

fn row_less(a: &ScoreRow, b: &ScoreRow, rule: TieRule) -> bool {
    match a.score.total_cmp(&b.score) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => {
            let by_theta = a.theta().lex_cmp(&b.theta());
            let order = match rule {
                TieRule::ThetaOnly => by_theta,
                TieRule::BandwidthThenTheta => a.bandwidth.total_cmp(&b.bandwidth).then(by_theta),
            };
            order == Ordering::Less
        }
    }
}

fn best_row(rows: &[ScoreRow], rule: TieRule) -> Result<ScoreRow> {
    let mut best: Option<ScoreRow> = None;
    for row in rows {
        if best.is_none_or(|b| row_less(row, &b, rule)) {
            best = Some(*row);
        }
    }
    best.ok_or_else(|| FspError::InvalidParameter("empty candidate set".into()))
}

/// Outcome of a validation-error search.
#[derive(Debug, Clone, Serialize)]
pub struct Selection {
    pub theta: HolderParams,
    pub bandwidth: f64,
    pub score: f64,
    /// One row per evaluated candidate.
    pub table: Vec<ScoreRow>,
}

fn finish(table: Vec<ScoreRow>, rule: TieRule) -> Result<Selection> {
    let best = best_row(&table, rule)?;
    Ok(Selection { theta: best.theta(), bandwidth: best.bandwidth, score: best.score, table })
}

/// Picks the candidate with the smallest validation squared error; ties go to
/// the lexicographically smallest `θ`.
pub fn select_theta(candidates: &[PersonalizedEstimator], validation: &[LabeledSample]) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(FspError::InvalidParameter("empty candidate set".into()));
    }
    if validation.is_empty() {
        return Err(FspError::EmptyData);
    }
    let xs: Vec<Vec<f64>> = validation.iter().map(|s| s.x.clone()).collect();
    let table = candidates
        .iter()
        .map(|c| {
            let preds = c.predict_batch(&xs)?;
            let theta = c.theta();
            Ok(ScoreRow {
                theta1: theta.theta1(),
                theta2: theta.theta2(),
                bandwidth: c.bandwidth(),
                score: squared_error_sum(validation, &preds),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    finish(table, TieRule::ThetaOnly)
}

/// Validation squared errors for every `(h, θ)` pair, laid out as
/// `scores[h_index * thetas.len() + theta_index]`.
///
/// The arithmetic mirrors [`PersonalizedEstimator::predict`] step for step so
/// the scores are identical to scoring each fitted candidate directly.
pub fn validation_scores(
    thetas: &[HolderParams],
    bandwidths: &[f64],
    train: &[LabeledSample],
    f_train: &[f64],
    validation: &[LabeledSample],
    f_validation: &[f64],
) -> Vec<f64> {
    let mut levels: Vec<f64> = thetas.iter().map(|t| t.theta2()).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let level_of: Vec<usize> =
        thetas.iter().map(|t| levels.iter().position(|&l| l == t.theta2()).expect("level present")).collect();
    let cells = thetas.len() * bandwidths.len();

    let per_point: Vec<Vec<f64>> = validation
        .par_iter()
        .zip(f_validation.par_iter())
        .map(|(v, &f_v)| {
            let linf: Vec<f64> = train.iter().map(|s| linf_distance(&s.x, &v.x)).collect();
            let l2: Vec<f64> = train.iter().map(|s| l2_distance(&s.x, &v.x)).collect();
            let pows: Vec<f64> =
                l2.iter().flat_map(|&d| levels.iter().map(move |&t| if d == 0.0 { 0.0 } else { d.powf(t) })).collect();
            let mut sq = Vec::with_capacity(cells);
            for &h in bandwidths {
                let window: Vec<usize> = (0..train.len()).filter(|&i| linf[i] <= h).collect();
                for (theta, &level) in thetas.iter().zip(&level_of) {
                    let mut sum = 0.0;
                    for &i in &window {
                        let smoothed = if l2[i] == 0.0 {
                            f_v
                        } else {
                            truncate_to_band(f_train[i], f_v, theta.theta1() * pows[i * levels.len() + level])
                        };
                        sum += train[i].y - smoothed;
                    }
                    let pred = f_v + sum / window.len().max(1) as f64;
                    let r = v.y - pred;
                    sq.push(r * r);
                }
            }
            sq
        })
        .collect();

    let mut scores = vec![0.0; cells];
    for sq in &per_point {
        for (acc, s) in scores.iter_mut().zip(sq) {
            *acc += s;
        }
    }
    scores
}

fn table_rows(thetas: &[HolderParams], bandwidths: &[f64], scores: &[f64]) -> Vec<ScoreRow> {
    let mut rows = Vec::with_capacity(scores.len());
    for (hi, &h) in bandwidths.iter().enumerate() {
        for (ti, t) in thetas.iter().enumerate() {
            rows.push(ScoreRow {
                theta1: t.theta1(),
                theta2: t.theta2(),
                bandwidth: h,
                score: scores[hi * thetas.len() + ti],
            });
        }
    }
    rows
}

fn check_bandwidths(bandwidths: &[f64]) -> Result<()> {
    if bandwidths.is_empty() {
        return Err(FspError::InvalidParameter("empty bandwidth set".into()));
    }
    if let Some(h) = bandwidths.iter().find(|h| !(h.is_finite() && **h > 0.0)) {
        return Err(FspError::InvalidParameter(format!("bandwidth must be finite and > 0, got {h}")));
    }
    Ok(())
}

/// Joint search over `Θ × H`; ties go to the smaller `h`, then the
/// lexicographically smaller `θ`.
pub fn select_theta_h(
    grid: &ThetaGrid,
    bandwidths: &[f64],
    train: &[LabeledSample],
    validation: &[LabeledSample],
    model: &SharedModel,
    domain: &Domain,
) -> Result<Selection> {
    check_bandwidths(bandwidths)?;
    if validation.is_empty() {
        return Err(FspError::EmptyData);
    }
    let (f_train, f_val) = query_split(model, domain, train, validation)?;
    select_with_cache(grid.points(), bandwidths, train, &f_train, validation, &f_val)
}

fn select_with_cache(
    thetas: &[HolderParams],
    bandwidths: &[f64],
    train: &[LabeledSample],
    f_train: &[f64],
    validation: &[LabeledSample],
    f_val: &[f64],
) -> Result<Selection> {
    let scores = validation_scores(thetas, bandwidths, train, f_train, validation, f_val);
    finish(table_rows(thetas, bandwidths, &scores), TieRule::BandwidthThenTheta)
}

fn query_split(
    model: &SharedModel,
    domain: &Domain,
    train: &[LabeledSample],
    validation: &[LabeledSample],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let xs: Vec<Vec<f64>> = train.iter().chain(validation).map(|s| s.x.clone()).collect();
    let mut f = blackbox_query(model.as_ref(), domain, &xs)?;
    let f_val = f.split_off(train.len());
    Ok((f, f_val))
}

/// How the kernel bandwidth is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandwidthRule {
    /// Cross-validate over `{s/k : k = 1..⌈√n⌉}`, `s` the domain edge.
    CvReduced,
    /// Cross-validate over `{s/k : k = 1..n}`.
    CvFull,
    /// Cross-validate over an explicit list.
    CvList(Vec<f64>),
    /// `min{σ̄^{2/(2θ₂+d)} n^{−1/(2θ₂+d)}, s/2}` per candidate `θ`.
    Theory,
    /// The same formula with a fixed smoothness in place of each candidate's `θ₂`.
    Rate { smoothness: f64 },
    Fixed(f64),
}

impl BandwidthRule {
    fn candidates(&self, n: usize, scale: f64) -> Option<Vec<f64>> {
        match self {
            BandwidthRule::CvReduced => {
                let k_max = (n as f64).sqrt().ceil() as usize;
                Some((1..=k_max).map(|k| scale / k as f64).rev().collect())
            }
            BandwidthRule::CvFull => Some((1..=n).map(|k| scale / k as f64).rev().collect()),
            BandwidthRule::CvList(list) => {
                let mut list = list.clone();
                list.sort_by(f64::total_cmp);
                list.dedup();
                Some(list)
            }
            BandwidthRule::Fixed(h) => Some(vec![*h]),
            BandwidthRule::Theory | BandwidthRule::Rate { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Largest `θ₁` on the grid.
    pub c1: f64,
    pub bandwidth: BandwidthRule,
    /// When false only `θ = (0, 0)` is considered, which ignores the
    /// pre-trained model inside the window.
    pub use_pretrained: bool,
    pub retrieval: RetrievalConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            c1: 2.0,
            bandwidth: BandwidthRule::CvReduced,
            use_pretrained: true,
            retrieval: RetrievalConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub theta: HolderParams,
    pub bandwidth: f64,
    pub validation_score: f64,
    /// Best validation score among `θ₁ = 0` candidates.
    pub zero_band_score: f64,
    pub grid_size: usize,
    pub grid_steps: usize,
    pub bandwidths: Vec<f64>,
    pub mean_sigma: Option<f64>,
    pub n_train: usize,
    pub n_validation: usize,
    /// Positions in the retrieved sample used for training.
    pub train_indices: Vec<usize>,
    pub validation_indices: Vec<usize>,
    pub scores: Vec<ScoreRow>,
    pub retrieval: RetrievalDiagnostics,
}

fn candidate_grid(n: usize, config: &FitConfig) -> Result<ThetaGrid> {
    if config.use_pretrained {
        ThetaGrid::new(n, config.c1)
    } else {
        ThetaGrid::from_points(vec![HolderParams::new(0.0, 0.0)?])
    }
}

/// Fits on an existing split: candidates are built on the training indices
/// and scored on the validation indices.
#[allow(clippy::too_many_arguments)]
fn fit_on_split(
    model: SharedModel,
    domain: &Domain,
    n: usize,
    samples: &SampleSet,
    config: &FitConfig,
    bandwidth_scale: f64,
    mean_sigma: Option<f64>,
    retrieval: RetrievalDiagnostics,
) -> Result<(PersonalizedEstimator, FitReport)> {
    let train = samples.train();
    let validation = samples.validation();
    if validation.is_empty() {
        return Err(FspError::EmptyData);
    }
    let grid = candidate_grid(n, config)?;
    let (f_train, f_val) = query_split(&model, domain, &train, &validation)?;

    let (selection, bandwidths) = match config.bandwidth.candidates(n, bandwidth_scale) {
        Some(hs) => {
            check_bandwidths(&hs)?;
            (select_with_cache(grid.points(), &hs, &train, &f_train, &validation, &f_val)?, hs)
        }
        None => {
            let sigma_bar = mean_sigma.ok_or_else(|| {
                FspError::InvalidParameter("the theory bandwidth rule needs a noise-level estimate".into())
            })?;
            let mut table = Vec::with_capacity(grid.len());
            let mut used = Vec::new();
            let smoothness = match config.bandwidth {
                BandwidthRule::Rate { smoothness } if (0.0..=1.0).contains(&smoothness) => Some(smoothness),
                BandwidthRule::Rate { smoothness } => {
                    return Err(FspError::InvalidParameter(format!("smoothness must lie in [0, 1], got {smoothness}")))
                }
                _ => None,
            };
            for &theta in grid.points() {
                let h = default_bandwidth(sigma_bar, smoothness.unwrap_or(theta.theta2()), n, domain);
                let score = validation_scores(&[theta], &[h], &train, &f_train, &validation, &f_val)[0];
                table.push(ScoreRow { theta1: theta.theta1(), theta2: theta.theta2(), bandwidth: h, score });
                used.push(h);
            }
            used.sort_by(f64::total_cmp);
            used.dedup();
            (finish(table, TieRule::ThetaOnly)?, used)
        }
    };

    let zero_band_score =
        selection.table.iter().filter(|r| r.theta1 == 0.0).map(|r| r.score).fold(f64::INFINITY, f64::min);
    let estimator = PersonalizedEstimator::with_cache(
        domain.clone(),
        train,
        f_train,
        model,
        selection.theta,
        selection.bandwidth,
    )?;
    let report = FitReport {
        theta: selection.theta,
        bandwidth: selection.bandwidth,
        validation_score: selection.score,
        zero_band_score,
        grid_size: grid.len(),
        grid_steps: grid.steps(),
        bandwidths,
        mean_sigma,
        n_train: samples.train_idx().len(),
        n_validation: samples.val_idx().len(),
        train_indices: samples.train_idx().to_vec(),
        validation_indices: samples.val_idx().to_vec(),
        scores: selection.table,
        retrieval,
    };
    Ok((estimator, report))
}

fn field_mean_sigma(result: &RetrievalResult, config: &FitConfig) -> Result<Option<f64>> {
    match &result.variance_field {
        Some(field) => {
            let per_dim = config
                .retrieval
                .quadrature_per_dim
                .unwrap_or_else(|| field.domain().default_resolution(20_000));
            Ok(Some(field.mean_sigma(per_dim)?))
        }
        None => Ok(None),
    }
}

/// Budgeted two-phase retrieval followed by cross-validated adaptation.
pub fn fit_personalized(
    model: SharedModel,
    domain: &Domain,
    n: usize,
    oracle: &mut dyn LabelOracle,
    config: &FitConfig,
    seed: u64,
) -> Result<(PersonalizedEstimator, FitReport)> {
    check_model(&model, domain)?;
    let result = retrieve_budgeted(n, domain, oracle, &config.retrieval, seed)?;
    let mean_sigma = field_mean_sigma(&result, config)?;
    fit_on_split(model, domain, n, &result.samples, config, domain.edge_scale(), mean_sigma, result.diagnostics)
}

/// Retrieval from a finite pool followed by cross-validated adaptation. The
/// pilot size is `round(c·n)`, at least 4.
pub fn fit_personalized_pool(
    model: SharedModel,
    domain: &Domain,
    n: usize,
    pool: &mut PoolOracle,
    config: &FitConfig,
    seed: u64,
) -> Result<(PersonalizedEstimator, FitReport, RetrievalResult)> {
    check_model(&model, domain)?;
    let n0 = ((config.retrieval.pilot_fraction * n as f64).round() as usize).max(4);
    let result = retrieve_from_pool(n, n0, domain, pool, &config.retrieval, seed)?;
    let mean_sigma = field_mean_sigma(&result, config)?;
    let (est, report) = fit_on_split(
        model,
        domain,
        n,
        &result.samples,
        config,
        domain.edge_scale(),
        mean_sigma,
        result.diagnostics.clone(),
    )?;
    Ok((est, report, result))
}

/// Uniform retrieval on a small box of edge `ν` with every bandwidth
/// constrained to `h ≤ ν`. The validation share is the configured pilot
/// fraction.
pub fn fit_personalized_small_domain(
    model: SharedModel,
    domain: &Domain,
    n: usize,
    oracle: &mut dyn LabelOracle,
    config: &FitConfig,
    seed: u64,
) -> Result<(PersonalizedEstimator, FitReport)> {
    check_model(&model, domain)?;
    let nu = domain.min_edge();
    if let Some(hs) = config.bandwidth.candidates(n, nu) {
        if let Some(&h) = hs.iter().find(|&&h| h > nu) {
            return Err(FspError::BandwidthConstraint { h, edge: nu });
        }
    }
    let result = retrieve_uniform_small_domain(n, domain, oracle, config.retrieval.pilot_fraction, seed)?;
    let mean_sigma = match config.bandwidth {
        BandwidthRule::Theory | BandwidthRule::Rate { .. } => {
            let validation = result.samples.validation();
            let h = config
                .retrieval
                .pilot_bandwidth
                .unwrap_or_else(|| config.retrieval.pilot_rule.bandwidth(n, validation.len(), domain));
            let field = VarianceField::new(validation, h, domain.clone())?;
            let per_dim = config.retrieval.quadrature_per_dim.unwrap_or_else(|| domain.default_resolution(20_000));
            Some(field.mean_sigma(per_dim)?)
        }
        _ => None,
    };
    let (est, report) =
        fit_on_split(model, domain, n, &result.samples, config, nu, mean_sigma, result.diagnostics)?;
    if est.bandwidth() > nu {
        return Err(FspError::BandwidthConstraint { h: est.bandwidth(), edge: nu });
    }
    Ok((est, report))
}

fn check_model(model: &SharedModel, domain: &Domain) -> Result<()> {
    if model.dim() != domain.dim() {
        return Err(FspError::DimensionMismatch { expected: domain.dim(), got: model.dim() });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FnModel;
    use crate::oracle::{NoiseLaw, SyntheticOracle};
    use crate::rng::rng_stream;
    use rand::Rng;
    use std::sync::Arc;

    fn th(a: f64, b: f64) -> HolderParams {
        HolderParams::new(a, b).unwrap()
    }

    #[test]
    fn grid_for_n_100() {
        let g = build_grid(100, 2.0).unwrap();
        assert_eq!(g.steps(), 5);
        assert_eq!(g.len(), 36);
        assert_eq!(g.points()[0], th(0.0, 0.0));
        assert_eq!(*g.points().last().unwrap(), th(2.0, 1.0));
        for j in 0..=5 {
            assert!(g.points().contains(&th(0.0, j as f64 / 5.0)));
        }
        assert!(g.points().windows(2).all(|w| w[0].lex_cmp(&w[1]) == Ordering::Less));
    }

    #[test]
    fn grid_rejects_bad_inputs() {
        assert!(build_grid(2, 1.0).is_err());
        assert!(build_grid(10, 0.0).is_err());
    }

    fn random_instance(seed: u64) -> (Vec<LabeledSample>, Vec<LabeledSample>, SharedModel, Domain) {
        let mut rng = rng_stream(seed, "adaptation-test");
        let domain = Domain::cube(2, 0.0, 1.0).unwrap();
        let mk = |rng: &mut crate::rng::Stream, k: usize| -> Vec<LabeledSample> {
            (0..k)
                .map(|_| {
                    let x = domain.sample_uniform(rng);
                    let y = x[0] * 2.0 + rng.random::<f64>();
                    LabeledSample::new(x, y)
                })
                .collect()
        };
        let train = mk(&mut rng, 30);
        let val = mk(&mut rng, 20);
        let model: SharedModel = Arc::new(FnModel::new(2, "sin", |x| (3.0 * x[0]).sin() + x[1]));
        (train, val, model, domain)
    }

    #[test]
    fn fast_scores_match_direct_predictions() {
        let (train, val, model, domain) = random_instance(1);
        let grid = build_grid(30, 2.0).unwrap();
        let hs = [0.1, 0.25, 0.5, 1.0];
        let sel = select_theta_h(&grid, &hs, &train, &val, &model, &domain).unwrap();
        let base = PersonalizedEstimator::new(domain.clone(), train, model, th(0.0, 0.0), 1.0).unwrap();
        for row in &sel.table {
            let est = base.with_params(row.theta(), row.bandwidth).unwrap();
            let preds = est.predict_batch(&val.iter().map(|s| s.x.clone()).collect::<Vec<_>>()).unwrap();
            assert_eq!(row.score, squared_error_sum(&val, &preds));
        }
        let min = sel.table.iter().map(|r| r.score).fold(f64::INFINITY, f64::min);
        assert_eq!(sel.score, min);
    }

    #[test]
    fn ties_go_to_smaller_theta() {
        let (train, val, model, domain) = random_instance(2);
        let base = PersonalizedEstimator::new(domain, train, model, th(0.0, 0.0), 0.3).unwrap();
        // θ₁ = 0 makes θ₂ irrelevant, so these three tie.
        let cands: Vec<_> = [th(0.0, 1.0), th(0.0, 0.5), th(0.0, 0.0)]
            .iter()
            .map(|&t| base.with_params(t, 0.3).unwrap())
            .collect();
        let sel = select_theta(&cands, &val).unwrap();
        assert_eq!(sel.theta, th(0.0, 0.0));
    }

    #[test]
    fn exact_candidate_wins() {
        let domain = Domain::cube(1, 0.0, 1.0).unwrap();
        let truth = |x: &[f64]| x[0] * x[0];
        let train: Vec<_> = (0..10).map(|i| LabeledSample::new(vec![i as f64 / 9.0], 0.0)).collect();
        let val: Vec<_> = (0..5).map(|i| LabeledSample::new(vec![0.05 + i as f64 / 5.0], truth(&[0.05 + i as f64 / 5.0]))).collect();
        let exact: SharedModel = Arc::new(FnModel::new(1, "sq", truth));
        let wrong: SharedModel = Arc::new(FnModel::new(1, "one", |_| 1.0));
        // Empty windows (tiny h) return the model value itself.
        let a = PersonalizedEstimator::new(domain.clone(), train.clone(), wrong, th(1.0, 0.0), 1e-3).unwrap();
        let b = PersonalizedEstimator::new(domain, train, exact, th(2.0, 1.0), 1e-3).unwrap();
        let sel = select_theta(&[a, b], &val).unwrap();
        assert_eq!(sel.score, 0.0);
        assert_eq!(sel.theta, th(2.0, 1.0));
    }

    #[test]
    fn small_domain_bandwidth_constraint() {
        let domain = Domain::cube(2, 0.0, 0.2).unwrap();
        let model: SharedModel = Arc::new(FnModel::new(2, "zero", |_| 0.0));
        let f: crate::model::ScalarFn = Arc::new(|x: &[f64]| x[0]);
        let cfg = |h: f64| FitConfig { bandwidth: BandwidthRule::Fixed(h), ..Default::default() };
        let mut oracle = SyntheticOracle::new(f.clone(), NoiseLaw::homoskedastic(0.1), rng_stream(0, "labels"));
        assert!(fit_personalized_small_domain(model.clone(), &domain, 40, &mut oracle, &cfg(0.2), 1).is_ok());
        let mut oracle = SyntheticOracle::new(f, NoiseLaw::homoskedastic(0.1), rng_stream(0, "labels"));
        let err = fit_personalized_small_domain(model, &domain, 40, &mut oracle, &cfg(0.202), 1).unwrap_err();
        assert!(matches!(err, FspError::BandwidthConstraint { .. }));
    }

    #[test]
    fn minimal_budget_run() {
        let domain = Domain::cube(2, 0.0, 1.0).unwrap();
        let model: SharedModel = Arc::new(FnModel::new(2, "zero", |_| 0.0));
        let f: crate::model::ScalarFn = Arc::new(|x: &[f64]| x[0] + x[1]);
        let mut oracle = SyntheticOracle::new(f, NoiseLaw::homoskedastic(0.5), rng_stream(3, "labels"));
        let (est, report) = fit_personalized(model, &domain, 16, &mut oracle, &FitConfig::default(), 3).unwrap();
        assert!(est.predict(&[0.5, 0.5]).unwrap().is_finite());
        assert_eq!(report.n_train + report.n_validation, 16);
        assert!(report.validation_score <= report.zero_band_score);
    }

    #[test]
    fn theory_rule_gives_per_level_bandwidths() {
        let domain = Domain::cube(2, 0.0, 1.0).unwrap();
        let model: SharedModel = Arc::new(FnModel::new(2, "zero", |_| 0.0));
        let f: crate::model::ScalarFn = Arc::new(|x: &[f64]| x[0]);
        let mut oracle = SyntheticOracle::new(f, NoiseLaw::homoskedastic(1.0), rng_stream(4, "labels"));
        let cfg = FitConfig { bandwidth: BandwidthRule::Theory, ..Default::default() };
        let (_, report) = fit_personalized(model, &domain, 200, &mut oracle, &cfg, 4).unwrap();
        assert_eq!(report.bandwidths.len(), report.grid_steps + 1);
    }
}
