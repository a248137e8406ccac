//! θ-local-smoothing: truncating a function's deviation from its anchor value.
//!
//! `ω_{θ,x*}∘g(x) = g(x*) + min(|g(x) − g(x*)|, θ₁‖x − x*‖₂^θ₂) · sgn(g(x) − g(x*))`
//!
//! The band uses the Euclidean norm; the kernel window elsewhere uses the sup-norm.
//! With `θ₂ = 0` the band has constant width `θ₁` away from the anchor.

use crate::domain::{l2_distance, HolderParams};
use crate::error::{FspError, Result};
use crate::model::ScalarFn;

/// Band half-width `θ₁ d^θ₂` at Euclidean distance `d > 0`.
#[inline]
pub fn band_width(theta: HolderParams, distance: f64) -> f64 {
    theta.theta1() * distance.powf(theta.theta2())
}

/// Truncates `g_x` to the band of half-width `band` around `g_anchor`.
///
/// Values already inside the band are returned unchanged, bit for bit.
#[inline]
pub fn truncate_to_band(g_x: f64, g_anchor: f64, band: f64) -> f64 {
    let diff = g_x - g_anchor;
    if diff.abs() <= band {
        g_x
    } else if diff > 0.0 {
        g_anchor + band
    } else {
        g_anchor - band
    }
}

/// ω on already evaluated values; `distance` is `‖x − x*‖₂`.
///
/// At the anchor (`distance == 0`) the anchor value is returned before any
/// exponentiation, so `0⁰` is never evaluated.
#[inline]
pub fn smooth_value(g_x: f64, g_anchor: f64, theta: HolderParams, distance: f64) -> f64 {
    if distance == 0.0 {
        return g_anchor;
    }
    truncate_to_band(g_x, g_anchor, band_width(theta, distance))
}

fn finite(v: f64, at: &[f64]) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(FspError::Query { message: format!("function returned {v} at {at:?}"), line: None })
    }
}

pub fn local_smooth(g: &dyn Fn(&[f64]) -> f64, theta: HolderParams, anchor: &[f64], x: &[f64]) -> Result<f64> {
    let g_anchor = finite(g(anchor), anchor)?;
    let distance = l2_distance(x, anchor);
    if distance == 0.0 {
        return Ok(g_anchor);
    }
    let g_x = finite(g(x), x)?;
    Ok(truncate_to_band(g_x, g_anchor, band_width(theta, distance)))
}

/// `ω_{θ,x*}∘g` as a function of `x`, with `g(x*)` evaluated once.
#[derive(Clone)]
pub struct SmoothedView {
    base: ScalarFn,
    theta: HolderParams,
    anchor: Vec<f64>,
    anchor_value: f64,
}

impl SmoothedView {
    pub fn new(base: ScalarFn, theta: HolderParams, anchor: Vec<f64>) -> Result<Self> {
        let anchor_value = finite(base(&anchor), &anchor)?;
        Ok(SmoothedView { base, theta, anchor, anchor_value })
    }

    pub fn theta(&self) -> HolderParams {
        self.theta
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let distance = l2_distance(x, &self.anchor);
        if distance == 0.0 {
            return Ok(self.anchor_value);
        }
        let g_x = finite((self.base)(x), x)?;
        Ok(truncate_to_band(g_x, self.anchor_value, band_width(self.theta, distance)))
    }

    /// The view as a plain closure (non-finite base values become NaN).
    pub fn into_fn(self) -> ScalarFn {
        std::sync::Arc::new(move |x| self.eval(x).unwrap_or(f64::NAN))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSmoothCheck {
    pub holds: bool,
    /// `max |f(x) − f(x*)| / ‖x − x*‖₂^θ₂` over the probes.
    pub worst_ratio: f64,
}

/// Relative slack for membership checks; absorbs rounding in `g(x*) ± band`.
pub const CHECK_RELATIVE_TOLERANCE: f64 = 1e-12;

/// Empirical test of `f ∈ L_{x*}(θ)` on finitely many probe points.
pub fn check_local_smooth(
    f: &dyn Fn(&[f64]) -> f64,
    theta: HolderParams,
    anchor: &[f64],
    probes: &[Vec<f64>],
) -> Result<LocalSmoothCheck> {
    if probes.is_empty() {
        return Err(FspError::InvalidParameter("probe set is empty".into()));
    }
    let f_anchor = finite(f(anchor), anchor)?;
    let mut holds = true;
    let mut worst_ratio: f64 = 0.0;
    for p in probes {
        let distance = l2_distance(p, anchor);
        if distance == 0.0 {
            return Err(FspError::InvalidParameter(format!("probe {p:?} coincides with the anchor")));
        }
        let f_p = finite(f(p), p)?;
        let dev = (f_p - f_anchor).abs();
        let scale = distance.powf(theta.theta2());
        let band = theta.theta1() * scale;
        worst_ratio = worst_ratio.max(dev / scale);
        let slack = CHECK_RELATIVE_TOLERANCE * (f_anchor.abs() + f_p.abs() + band);
        if dev > band + slack {
            holds = false;
        }
    }
    Ok(LocalSmoothCheck { holds, worst_ratio })
}
