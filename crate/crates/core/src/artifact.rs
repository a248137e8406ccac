//! Self-describing JSON container for a fitted estimator.

use serde::{Deserialize, Serialize};

use crate::domain::{Domain, HolderParams, LabeledSample};
use crate::error::{FspError, Result};
use crate::estimator::PersonalizedEstimator;
use crate::model::ModelSpec;

pub const ARTIFACT_FORMAT: &str = "fsp-estimator";
pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorArtifact {
    pub format: String,
    pub version: u32,
    pub covariates: Vec<String>,
    pub domain: Domain,
    pub model: ModelSpec,
    pub theta: HolderParams,
    pub bandwidth: f64,
    pub train: Vec<LabeledSample>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reproducibility_note: Option<String>,
}

impl EstimatorArtifact {
    pub fn from_estimator(est: &PersonalizedEstimator, covariates: Vec<String>, model: ModelSpec) -> Self {
        EstimatorArtifact {
            format: ARTIFACT_FORMAT.into(),
            version: ARTIFACT_VERSION,
            covariates,
            domain: est.domain().clone(),
            reproducibility_note: model.reproducibility_note(),
            model,
            theta: est.theta(),
            bandwidth: est.bandwidth(),
            train: est.train().to_vec(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| FspError::InvalidParameter(format!("serialize estimator: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let art: EstimatorArtifact =
            serde_json::from_str(text).map_err(|e| FspError::InvalidParameter(format!("estimator file: {e}")))?;
        if art.format != ARTIFACT_FORMAT {
            return Err(FspError::InvalidParameter(format!("estimator file has format {:?}", art.format)));
        }
        if art.version != ARTIFACT_VERSION {
            return Err(FspError::InvalidParameter(format!("unsupported estimator version {}", art.version)));
        }
        if art.covariates.len() != art.domain.dim() {
            return Err(FspError::DimensionMismatch { expected: art.domain.dim(), got: art.covariates.len() });
        }
        Ok(art)
    }

    /// Rebuilds the estimator, reconnecting to the black-box backend.
    pub fn build(&self) -> Result<PersonalizedEstimator> {
        let model = self.model.build(&self.covariates)?;
        PersonalizedEstimator::new(self.domain.clone(), self.train.clone(), model, self.theta, self.bandwidth)
    }
}
