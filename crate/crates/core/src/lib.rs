//! Personalizing pretrained predictors with locally smoothed bias correction.

pub mod adaptation;
pub mod artifact;
pub mod data;
pub mod domain;
pub mod error;
pub mod estimator;
pub mod expr;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod sampling;
pub mod simulation;
pub mod smoothing;

pub use domain::{Domain, HolderParams, LabeledSample, SampleSet};
pub use error::{FspError, Result};
pub use estimator::{PersonalizedEstimator, VarianceField};
pub use model::{BlackBox, ModelSpec, SharedModel};
