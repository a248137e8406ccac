//! Shared value types: the target box, Hölder parameters and labeled samples.

use std::cmp::Ordering;
use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FspError, Result};

/// Axis-aligned box `[lo_1, hi_1] x ... x [lo_d, hi_d]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDomain")]
pub struct Domain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

#[derive(Deserialize)]
struct RawDomain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl TryFrom<RawDomain> for Domain {
    type Error = FspError;

    fn try_from(raw: RawDomain) -> Result<Self> {
        Domain::new(raw.lo, raw.hi)
    }
}

impl Domain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() {
            return Err(FspError::InvalidDomain("dimension must be at least 1".into()));
        }
        if lo.len() != hi.len() {
            return Err(FspError::InvalidDomain(format!(
                "lo has {} coordinates but hi has {}",
                lo.len(),
                hi.len()
            )));
        }
        for (j, (a, b)) in lo.iter().zip(&hi).enumerate() {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(FspError::InvalidDomain(format!(
                    "coordinate {j}: need finite lo < hi, got [{a}, {b}]"
                )));
            }
        }
        let domain = Domain { lo, hi };
        let volume = domain.volume();
        if !(volume.is_finite() && volume > 0.0) {
            return Err(FspError::InvalidDomain(format!("volume {volume} is not finite and positive")));
        }
        Ok(domain)
    }

    /// The cube `[lo, hi]^d`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Domain::new(vec![lo; dim], vec![hi; dim])
    }

    /// Smallest box containing every point. Coordinates with zero spread are
    /// widened by `pad` on each side.
    pub fn bounding_box(points: &[Vec<f64>], pad: f64) -> Result<Self> {
        let first = points.first().ok_or(FspError::EmptyData)?;
        let mut lo = first.clone();
        let mut hi = first.clone();
        for p in points {
            if p.len() != lo.len() {
                return Err(FspError::DimensionMismatch { expected: lo.len(), got: p.len() });
            }
            for j in 0..p.len() {
                lo[j] = lo[j].min(p[j]);
                hi[j] = hi[j].max(p[j]);
            }
        }
        for j in 0..lo.len() {
            if lo[j] >= hi[j] {
                lo[j] -= pad;
                hi[j] += pad;
            }
        }
        Domain::new(lo, hi)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn edges(&self) -> impl Iterator<Item = f64> + '_ {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a)
    }

    pub fn volume(&self) -> f64 {
        self.edges().product()
    }

    /// Edge of the cube with the same volume. Equals the common edge for cubes.
    pub fn edge_scale(&self) -> f64 {
        if self.is_cube() {
            self.hi[0] - self.lo[0]
        } else {
            self.volume().powf(1.0 / self.dim() as f64)
        }
    }

    pub fn min_edge(&self) -> f64 {
        self.edges().fold(f64::INFINITY, f64::min)
    }

    pub fn is_cube(&self) -> bool {
        let e0 = self.hi[0] - self.lo[0];
        self.edges().all(|e| e == e0)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    /// Domain membership check used at public boundaries.
    pub fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(FspError::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        if !self.contains(x) {
            return Err(FspError::OutOfDomain {
                point: x.to_vec(),
                lo: self.lo.clone(),
                hi: self.hi.clone(),
            });
        }
        Ok(())
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| a + (b - a) * rng.random::<f64>())
            .collect()
    }

    /// Cell midpoints of the regular `per_dim^d` grid, first coordinate varying fastest.
    pub fn midpoint_grid(&self, per_dim: usize) -> MidpointGrid<'_> {
        MidpointGrid { domain: self, per_dim, next: 0, total: per_dim.pow(self.dim() as u32) }
    }

    /// Volume of one cell of [`Domain::midpoint_grid`].
    pub fn cell_volume(&self, per_dim: usize) -> f64 {
        self.volume() / (per_dim as f64).powi(self.dim() as i32)
    }

    /// Largest per-dimension resolution whose grid has at most `max_points` cells (and at least 2).
    pub fn default_resolution(&self, max_points: usize) -> usize {
        let d = self.dim() as u32;
        let mut q = 2usize;
        while (q + 1).checked_pow(d).is_some_and(|c| c <= max_points) {
            q += 1;
        }
        q
    }
}

pub struct MidpointGrid<'a> {
    domain: &'a Domain,
    per_dim: usize,
    next: usize,
    total: usize,
}

impl Iterator for MidpointGrid<'_> {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        if self.next >= self.total {
            return None;
        }
        let mut rem = self.next;
        self.next += 1;
        let q = self.per_dim as f64;
        let point = (0..self.domain.dim())
            .map(|j| {
                let k = rem % self.per_dim;
                rem /= self.per_dim;
                let (a, b) = (self.domain.lo[j], self.domain.hi[j]);
                a + (b - a) * (k as f64 + 0.5) / q
            })
            .collect();
        Some(point)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.total - self.next;
        (left, Some(left))
    }
}

impl ExactSizeIterator for MidpointGrid<'_> {}

/// Hölder parameters `θ = (θ₁, θ₂)`: a norm scale and a smoothness exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHolder")]
pub struct HolderParams {
    theta1: f64,
    theta2: f64,
}

#[derive(Deserialize)]
struct RawHolder {
    theta1: f64,
    theta2: f64,
}

impl TryFrom<RawHolder> for HolderParams {
    type Error = FspError;

    fn try_from(raw: RawHolder) -> Result<Self> {
        HolderParams::new(raw.theta1, raw.theta2)
    }
}

impl HolderParams {
    pub fn new(theta1: f64, theta2: f64) -> Result<Self> {
        if !(theta1.is_finite() && theta1 >= 0.0) {
            return Err(FspError::InvalidParameter(format!("theta1 must be finite and >= 0, got {theta1}")));
        }
        if !(0.0..=1.0).contains(&theta2) {
            return Err(FspError::InvalidParameter(format!("theta2 must lie in [0, 1], got {theta2}")));
        }
        Ok(HolderParams { theta1, theta2 })
    }

    pub fn theta1(&self) -> f64 {
        self.theta1
    }

    pub fn theta2(&self) -> f64 {
        self.theta2
    }

    /// Lexicographic order on `(θ₁, θ₂)`, used for tie-breaking.
    pub fn lex_cmp(&self, other: &Self) -> Ordering {
        self.theta1.total_cmp(&other.theta1).then(self.theta2.total_cmp(&other.theta2))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub x: Vec<f64>,
    pub y: f64,
}

impl LabeledSample {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        LabeledSample { x, y }
    }
}

/// Samples with disjoint training and validation index partitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    samples: Vec<LabeledSample>,
    train_idx: Vec<usize>,
    val_idx: Vec<usize>,
}

impl SampleSet {
    pub fn new(samples: Vec<LabeledSample>, train_idx: Vec<usize>, val_idx: Vec<usize>) -> Result<Self> {
        let n = samples.len();
        if let Some(&i) = train_idx.iter().chain(&val_idx).find(|&&i| i >= n) {
            return Err(FspError::InvalidParameter(format!("index {i} out of range for {n} samples")));
        }
        let train: HashSet<usize> = train_idx.iter().copied().collect();
        if let Some(&i) = val_idx.iter().find(|i| train.contains(i)) {
            return Err(FspError::InvalidParameter(format!("index {i} is in both training and validation sets")));
        }
        Ok(SampleSet { samples, train_idx, val_idx })
    }

    /// Every sample in the training partition, none in validation.
    pub fn all_training(samples: Vec<LabeledSample>) -> Self {
        let train_idx = (0..samples.len()).collect();
        SampleSet { samples, train_idx, val_idx: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn train_idx(&self) -> &[usize] {
        &self.train_idx
    }

    pub fn val_idx(&self) -> &[usize] {
        &self.val_idx
    }

    pub fn train(&self) -> Vec<LabeledSample> {
        self.train_idx.iter().map(|&i| self.samples[i].clone()).collect()
    }

    pub fn validation(&self) -> Vec<LabeledSample> {
        self.val_idx.iter().map(|&i| self.samples[i].clone()).collect()
    }

    pub fn dim(&self) -> Option<usize> {
        self.samples.first().map(|s| s.x.len())
    }
}

/// Euclidean distance.
pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}

/// Sup-norm distance.
pub fn linf_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (u, v)| m.max((u - v).abs()))
}
