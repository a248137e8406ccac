use rand::Rng;
use serde::Serialize;

use super::density::SamplingDensity;
use crate::error::{FspError, Result};

/// Proposals per monitoring window.
pub const MONITOR_WINDOW: usize = 100_000;
/// Minimum acceptance rate within a window before the envelope is declared broken.
pub const MONITOR_MIN_RATE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct RejectionDiagnostics {
    pub proposals: usize,
    pub accepted: usize,
    /// Proposals whose acceptance probability exceeded one (envelope below the density).
    pub envelope_violations: usize,
}

impl RejectionDiagnostics {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            1.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }
}

/// Accept/reject with uniform proposals on the density's domain: accept `x`
/// with probability `p(x) · |X| / M`.
pub fn rejection_sample<R: Rng + ?Sized>(
    density: &SamplingDensity,
    count: usize,
    rng: &mut R,
) -> Result<(Vec<Vec<f64>>, RejectionDiagnostics)> {
    let mut out = Vec::with_capacity(count);
    let mut diag = RejectionDiagnostics::default();
    let mut window_accepted = 0usize;
    let mut window_proposals = 0usize;
    while out.len() < count {
        let x = density.domain().sample_uniform(rng);
        let a = density.acceptance(&x);
        diag.proposals += 1;
        window_proposals += 1;
        if a > 1.0 {
            diag.envelope_violations += 1;
        }
        if rng.random::<f64>() < a {
            out.push(x);
            diag.accepted += 1;
            window_accepted += 1;
        }
        if window_proposals == MONITOR_WINDOW {
            let rate = window_accepted as f64 / window_proposals as f64;
            if rate < MONITOR_MIN_RATE {
                return Err(FspError::Envelope { rate, proposals: diag.proposals });
            }
            window_accepted = 0;
            window_proposals = 0;
        }
    }
    Ok((out, diag))
}
