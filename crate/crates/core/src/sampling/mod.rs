//! Sample retrieval: sampling densities, the rejection sampler, budgeted
//! two-phase retrieval, small-domain uniform retrieval and pool retrieval via
//! a logistic density-ratio fit.

mod density;
mod density_ratio;
mod rejection;
mod retrieval;

pub use density::{plug_in_density, DensityDiagnostics, DensityOptions, SamplingDensity};
pub use density_ratio::{fit_density_ratio, DensityRatioFit, LogisticOptions};
pub use rejection::{rejection_sample, RejectionDiagnostics, MONITOR_MIN_RATE, MONITOR_WINDOW};
pub use retrieval::{
    retrieve_budgeted, retrieve_from_pool, retrieve_uniform_small_domain, PilotBandwidthRule, PilotMode, RetrievalConfig,
    RetrievalDiagnostics, RetrievalResult, StepTwoRule,
};
