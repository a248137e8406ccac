//! Label sources: synthetic responses `y = f*(x) + ε`, external labelers, and
//! finite pools whose labels are revealed at most once.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{FspError, Result};
use crate::model::{ScalarFn, SharedModel};
use crate::rng::Stream;

/// Anything that returns a response for a covariate vector.
pub trait LabelOracle {
    fn label(&mut self, x: &[f64]) -> Result<f64>;

    /// Number of labels handed out so far.
    fn queries(&self) -> usize;
}

#[derive(Clone)]
pub enum NoiseLaw {
    /// `ε ~ N(0, σ(x)²)`.
    Gaussian { sigma: ScalarFn },
    /// `y ~ Bernoulli(f*(x))`; requires `f*(x) ∈ [0, 1]`.
    Bernoulli,
}

impl NoiseLaw {
    pub fn homoskedastic(sigma: f64) -> Self {
        NoiseLaw::Gaussian { sigma: std::sync::Arc::new(move |_| sigma) }
    }

    /// `σ²(x)` given the mean `f*(x)`.
    pub fn variance(&self, x: &[f64], mean: f64) -> f64 {
        match self {
            NoiseLaw::Gaussian { sigma } => sigma(x).powi(2),
            NoiseLaw::Bernoulli => mean * (1.0 - mean),
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, x: &[f64], mean: f64, rng: &mut R) -> Result<f64> {
        match self {
            NoiseLaw::Gaussian { sigma } => {
                let s = sigma(x);
                if !(s.is_finite() && s >= 0.0) {
                    return Err(FspError::InvalidParameter(format!("noise sd {s} at {x:?}")));
                }
                let z: f64 = StandardNormal.sample(rng);
                Ok(mean + s * z)
            }
            NoiseLaw::Bernoulli => {
                if !(0.0..=1.0).contains(&mean) {
                    return Err(FspError::InvalidParameter(format!("Bernoulli mean {mean} at {x:?}")));
                }
                Ok(if rng.random::<f64>() < mean { 1.0 } else { 0.0 })
            }
        }
    }
}

pub struct SyntheticOracle {
    f_star: ScalarFn,
    noise: NoiseLaw,
    rng: Stream,
    budget: Option<usize>,
    used: usize,
}

impl SyntheticOracle {
    pub fn new(f_star: ScalarFn, noise: NoiseLaw, rng: Stream) -> Self {
        SyntheticOracle { f_star, noise, rng, budget: None, used: 0 }
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = Some(budget);
        self
    }
}

impl LabelOracle for SyntheticOracle {
    fn label(&mut self, x: &[f64]) -> Result<f64> {
        if self.budget.is_some_and(|b| self.used >= b) {
            return Err(FspError::Budget(format!("synthetic oracle allows {} labels", self.used)));
        }
        self.used += 1;
        let mean = (self.f_star)(x);
        self.noise.draw(x, mean, &mut self.rng)
    }

    fn queries(&self) -> usize {
        self.used
    }
}

/// Labels from a black-box labeler, e.g. an external process using the model protocol.
pub struct ModelOracle {
    labeler: SharedModel,
    budget: Option<usize>,
    used: usize,
}

impl ModelOracle {
    pub fn new(labeler: SharedModel, budget: Option<usize>) -> Self {
        ModelOracle { labeler, budget, used: 0 }
    }
}

impl LabelOracle for ModelOracle {
    fn label(&mut self, x: &[f64]) -> Result<f64> {
        if self.budget.is_some_and(|b| self.used >= b) {
            return Err(FspError::Budget(format!("labeler allows {} labels", self.used)));
        }
        self.used += 1;
        let y = self.labeler.predict(x)?;
        if !y.is_finite() {
            return Err(FspError::Query { message: format!("non-finite label {y}"), line: None });
        }
        Ok(y)
    }

    fn queries(&self) -> usize {
        self.used
    }
}

pub enum PoolLabels {
    /// Labels known in advance (e.g. a labeled CSV) but revealed only on request.
    Hidden(Vec<f64>),
    /// Labels obtained on request from another oracle.
    Oracle(Box<dyn LabelOracle + Send>),
}

/// Finite pool of unlabeled points; each point may be labeled at most once.
pub struct PoolOracle {
    points: Vec<Vec<f64>>,
    labels: PoolLabels,
    consumed: Vec<bool>,
    used: usize,
}

impl PoolOracle {
    pub fn new(points: Vec<Vec<f64>>, labels: PoolLabels) -> Result<Self> {
        if points.is_empty() {
            return Err(FspError::EmptyData);
        }
        if let PoolLabels::Hidden(ys) = &labels {
            if ys.len() != points.len() {
                return Err(FspError::InvalidParameter(format!(
                    "pool has {} points but {} labels",
                    points.len(),
                    ys.len()
                )));
            }
        }
        let consumed = vec![false; points.len()];
        Ok(PoolOracle { points, labels, consumed, used: 0 })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn is_consumed(&self, i: usize) -> bool {
        self.consumed[i]
    }

    pub fn label_index(&mut self, i: usize) -> Result<f64> {
        if i >= self.points.len() {
            return Err(FspError::InvalidParameter(format!("pool index {i} out of range")));
        }
        if self.consumed[i] {
            return Err(FspError::Budget(format!("pool point {i} was already labeled")));
        }
        let y = match &mut self.labels {
            PoolLabels::Hidden(ys) => ys[i],
            PoolLabels::Oracle(o) => o.label(&self.points[i])?,
        };
        self.consumed[i] = true;
        self.used += 1;
        Ok(y)
    }

    pub fn queries(&self) -> usize {
        self.used
    }
}
