//! Kernel machinery: the bias estimator, the personalized predictor and the
//! pilot variance field.

use std::sync::Arc;

use crate::domain::{l2_distance, linf_distance, Domain, HolderParams, LabeledSample};
use crate::error::{FspError, Result};
use crate::model::{blackbox_query, SharedModel};
use crate::smoothing::smooth_value;

/// Box-window average of `y_i − ω_{θ,x}∘f(x_i)` over training points with
/// `‖x_i − x‖_∞ ≤ h`; an empty window gives 0.
///
/// `f_x` is the model at `x` and `f_train[i]` the model at `train[i].x`.
pub fn window_bias(
    x: &[f64],
    f_x: f64,
    theta: HolderParams,
    bandwidth: f64,
    train: &[LabeledSample],
    f_train: &[f64],
) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (s, &f_i) in train.iter().zip(f_train) {
        if linf_distance(&s.x, x) <= bandwidth {
            sum += s.y - smooth_value(f_i, f_x, theta, l2_distance(&s.x, x));
            count += 1;
        }
    }
    sum / count.max(1) as f64
}

/// Frozen fit: training samples, selected `θ`, bandwidth and black-box handle.
///
/// Model values at the training points are queried once and shared by every
/// clone produced with [`PersonalizedEstimator::with_params`].
#[derive(Clone)]
pub struct PersonalizedEstimator {
    domain: Domain,
    train: Arc<[LabeledSample]>,
    f_train: Arc<[f64]>,
    model: SharedModel,
    theta: HolderParams,
    bandwidth: f64,
}

impl std::fmt::Debug for PersonalizedEstimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PersonalizedEstimator")
            .field("model", &self.model.describe())
            .field("n_train", &self.train.len())
            .field("theta", &self.theta)
            .field("bandwidth", &self.bandwidth)
            .finish()
    }
}

fn check_bandwidth(h: f64) -> Result<()> {
    if !(h.is_finite() && h > 0.0) {
        return Err(FspError::InvalidParameter(format!("bandwidth must be finite and > 0, got {h}")));
    }
    Ok(())
}

impl PersonalizedEstimator {
    pub fn new(
        domain: Domain,
        train: Vec<LabeledSample>,
        model: SharedModel,
        theta: HolderParams,
        bandwidth: f64,
    ) -> Result<Self> {
        let xs: Vec<Vec<f64>> = train.iter().map(|s| s.x.clone()).collect();
        let f_train = blackbox_query(model.as_ref(), &domain, &xs)?;
        Self::with_cache(domain, train, f_train, model, theta, bandwidth)
    }

    /// Builds from already queried model values at the training points.
    pub fn with_cache(
        domain: Domain,
        train: Vec<LabeledSample>,
        f_train: Vec<f64>,
        model: SharedModel,
        theta: HolderParams,
        bandwidth: f64,
    ) -> Result<Self> {
        check_bandwidth(bandwidth)?;
        if model.dim() != domain.dim() {
            return Err(FspError::DimensionMismatch { expected: domain.dim(), got: model.dim() });
        }
        if f_train.len() != train.len() {
            return Err(FspError::InvalidParameter("cached model values do not match the training set".into()));
        }
        for s in &train {
            domain.check(&s.x)?;
            if !s.y.is_finite() {
                return Err(FspError::InvalidParameter(format!("non-finite response at {:?}", s.x)));
            }
        }
        Ok(PersonalizedEstimator {
            domain,
            train: train.into(),
            f_train: f_train.into(),
            model,
            theta,
            bandwidth,
        })
    }

    /// Same training data and cache, different tuning parameters.
    pub fn with_params(&self, theta: HolderParams, bandwidth: f64) -> Result<Self> {
        check_bandwidth(bandwidth)?;
        Ok(PersonalizedEstimator { theta, bandwidth, ..self.clone() })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn train(&self) -> &[LabeledSample] {
        &self.train
    }

    pub fn cached_model_values(&self) -> &[f64] {
        &self.f_train
    }

    pub fn model(&self) -> &SharedModel {
        &self.model
    }

    pub fn theta(&self) -> HolderParams {
        self.theta
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    fn model_at(&self, x: &[f64]) -> Result<f64> {
        Ok(blackbox_query(self.model.as_ref(), &self.domain, std::slice::from_ref(&x.to_vec()))?[0])
    }

    fn bias_given(&self, x: &[f64], f_x: f64) -> f64 {
        window_bias(x, f_x, self.theta, self.bandwidth, &self.train, &self.f_train)
    }

    /// Kernel estimate of the smoothed bias at `x`.
    pub fn estimate_bias(&self, x: &[f64]) -> Result<f64> {
        let f_x = self.model_at(x)?;
        Ok(self.bias_given(x, f_x))
    }

    /// Personalized prediction `f(x) + δ̂(x)`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let f_x = self.model_at(x)?;
        Ok(f_x + self.bias_given(x, f_x))
    }

    /// Elementwise [`predict`](Self::predict) with a single batched model query.
    pub fn predict_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        let f_xs = blackbox_query(self.model.as_ref(), &self.domain, xs)?;
        Ok(xs.iter().zip(f_xs).map(|(x, f_x)| f_x + self.bias_given(x, f_x)).collect())
    }
}

/// Theory-guided bandwidth `min{σ̄^{2/(2θ₂+d)} n^{−1/(2θ₂+d)}, edge/2}`, scaled to the domain edge.
pub fn default_bandwidth(sigma_bar: f64, theta2: f64, n: usize, domain: &Domain) -> f64 {
    let d = domain.dim() as f64;
    let r = 2.0 * theta2 + d;
    let edge = domain.edge_scale();
    let h = sigma_bar.max(f64::MIN_POSITIVE).powf(2.0 / r) * (n as f64).powf(-1.0 / r) * edge;
    h.min(edge / 2.0)
}

/// Pilot bandwidth `n^{−1/(d+2)}`, scaled to the domain edge.
pub fn pilot_bandwidth(n: usize, domain: &Domain) -> f64 {
    (n as f64).powf(-1.0 / (domain.dim() as f64 + 2.0)) * domain.edge_scale()
}

/// Local-constant variance bandwidth `n₀^{−1/(d+4)}` for `n₀` pilot points, scaled to the domain edge.
pub fn smooth_variance_bandwidth(n_pilot: usize, domain: &Domain) -> f64 {
    (n_pilot.max(1) as f64).powf(-1.0 / (domain.dim() as f64 + 4.0)) * domain.edge_scale()
}

/// Local noise-variance estimate from pilot samples with the triangular
/// sup-norm kernel `K_h(x, x') = max{0, h − ‖x − x'‖_∞}`.
#[derive(Debug, Clone)]
pub struct VarianceField {
    pilot: Vec<LabeledSample>,
    bandwidth: f64,
    domain: Domain,
}

impl VarianceField {
    pub fn new(pilot: Vec<LabeledSample>, bandwidth: f64, domain: Domain) -> Result<Self> {
        check_bandwidth(bandwidth)?;
        for s in &pilot {
            domain.check(&s.x)?;
        }
        Ok(VarianceField { pilot, bandwidth, domain })
    }

    pub fn pilot(&self) -> &[LabeledSample] {
        &self.pilot
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// `σ̂²(x)`, clamped below at zero.
    pub fn estimate_variance(&self, x: &[f64]) -> Result<f64> {
        self.domain.check(x)?;
        Ok(self.variance_unchecked(x))
    }

    pub(crate) fn variance_unchecked(&self, x: &[f64]) -> f64 {
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for p in &self.pilot {
            let k = self.bandwidth - linf_distance(&p.x, x);
            if k > 0.0 {
                s0 += k;
                s1 += p.y * k;
                s2 += p.y * p.y * k;
            }
        }
        let raw = s2 / s0.max(1.0) - s1 * s1 / (s0 * s0).max(1.0);
        raw.max(0.0)
    }

    pub fn sigma_unchecked(&self, x: &[f64]) -> f64 {
        self.variance_unchecked(x).sqrt()
    }

    /// Midpoint-rule average of `σ̂` over the domain.
    pub fn mean_sigma(&self, per_dim: usize) -> Result<f64> {
        grid_mean(&self.domain, per_dim, |x| self.sigma_unchecked(x))
    }
}

/// Midpoint-rule average of `f` over the domain on a `per_dim^d` grid.
pub fn grid_mean(domain: &Domain, per_dim: usize, f: impl Fn(&[f64]) -> f64) -> Result<f64> {
    if per_dim < 2 {
        return Err(FspError::InvalidParameter(format!("quadrature resolution must be >= 2, got {per_dim}")));
    }
    let grid = domain.midpoint_grid(per_dim);
    let count = grid.len();
    let total: f64 = grid.map(|x| f(&x)).sum();
    Ok(total / count as f64)
}
