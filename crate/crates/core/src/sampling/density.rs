use std::sync::Arc;

use serde::Serialize;

use crate::domain::Domain;
use crate::error::Result;
use crate::estimator::{grid_mean, VarianceField};
use crate::model::ScalarFn;

#[derive(Debug, Clone, Copy)]
pub struct DensityOptions {
    /// Quadrature grid resolution per coordinate.
    pub per_dim: usize,
    /// Envelope inflation over the grid maximum.
    pub safety: f64,
    /// Weight floor as a fraction of the mean of `σ̂`.
    pub floor_fraction: f64,
}

impl DensityOptions {
    pub fn for_domain(domain: &Domain) -> Self {
        DensityOptions { per_dim: domain.default_resolution(20_000), safety: 1.1, floor_fraction: 0.01 }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct DensityDiagnostics {
    pub grid_points: usize,
    /// Grid cells where the floor replaced `σ̂`.
    pub floor_activations: usize,
    pub floor: f64,
    pub mean_sigma: f64,
    /// Set when `σ̂` vanished on the whole grid and the uniform density was used instead.
    pub uniform_fallback: bool,
}

/// Density `w(x) / Z` on a box, with an envelope constant `M` for rejection
/// sampling against uniform proposals.
#[derive(Clone)]
pub struct SamplingDensity {
    domain: Domain,
    weight: Option<ScalarFn>,
    normalizer: f64,
    envelope: f64,
    diagnostics: DensityDiagnostics,
}

impl std::fmt::Debug for SamplingDensity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SamplingDensity")
            .field("normalizer", &self.normalizer)
            .field("envelope", &self.envelope)
            .field("diagnostics", &self.diagnostics)
            .finish()
    }
}

impl SamplingDensity {
    /// The uniform density; `safety` only inflates the envelope.
    pub fn uniform(domain: Domain, safety: f64) -> Self {
        let normalizer = domain.volume();
        SamplingDensity { domain, weight: None, normalizer, envelope: safety, diagnostics: DensityDiagnostics::default() }
    }

    /// Density proportional to `max(σ(x), floor_fraction · mean σ)`.
    pub fn from_sigma(domain: Domain, sigma: ScalarFn, opts: DensityOptions) -> Result<Self> {
        let mean_sigma = grid_mean(&domain, opts.per_dim, |x| sigma(x))?;
        if !(mean_sigma.is_finite() && mean_sigma > 0.0) {
            let mut d = SamplingDensity::uniform(domain, opts.safety);
            d.diagnostics.uniform_fallback = true;
            d.diagnostics.mean_sigma = mean_sigma;
            return Ok(d);
        }
        let floor = opts.floor_fraction * mean_sigma;
        let mut activations = 0usize;
        let mut total = 0.0;
        let mut max_w: f64 = 0.0;
        let grid = domain.midpoint_grid(opts.per_dim);
        let grid_points = grid.len();
        for x in grid {
            let s = sigma(&x);
            if s < floor {
                activations += 1;
            }
            let w = s.max(floor);
            total += w;
            max_w = max_w.max(w);
        }
        let normalizer = total * domain.cell_volume(opts.per_dim);
        let volume = domain.volume();
        let envelope = opts.safety * max_w / normalizer * volume;
        let weight: ScalarFn = Arc::new(move |x| sigma(x).max(floor));
        Ok(SamplingDensity {
            domain,
            weight: Some(weight),
            normalizer,
            envelope,
            diagnostics: DensityDiagnostics { grid_points, floor_activations: activations, floor, mean_sigma, uniform_fallback: false },
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn envelope(&self) -> f64 {
        self.envelope
    }

    pub fn diagnostics(&self) -> &DensityDiagnostics {
        &self.diagnostics
    }

    pub fn is_uniform(&self) -> bool {
        self.weight.is_none()
    }

    /// Normalized density at `x`.
    pub fn density(&self, x: &[f64]) -> f64 {
        match &self.weight {
            Some(w) => w(x) / self.normalizer,
            None => 1.0 / self.normalizer,
        }
    }

    /// Acceptance probability `p(x) · |X| / M` for a uniform proposal at `x` (may exceed 1
    /// where the envelope is too tight; the sampler counts those).
    pub fn acceptance(&self, x: &[f64]) -> f64 {
        self.density(x) * self.domain.volume() / self.envelope
    }

    /// Quadrature mass of a sub-box.
    pub fn mass(&self, region: &Domain, per_dim: usize) -> Result<f64> {
        Ok(grid_mean(region, per_dim, |x| self.density(x))? * region.volume())
    }
}

/// Plug-in density `p̂(x) ∝ σ̂(x)` from a pilot variance field.
pub fn plug_in_density(field: &VarianceField, opts: DensityOptions) -> Result<SamplingDensity> {
    let domain = field.domain().clone();
    let field = Arc::new(field.clone());
    let sigma: ScalarFn = Arc::new(move |x| field.sigma_unchecked(x));
    SamplingDensity::from_sigma(domain, sigma, opts)
}
