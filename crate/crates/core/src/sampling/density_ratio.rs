//! Logistic-regression density ratio between pool covariates (label 0) and
//! draws from the target sampling density (label 1).

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{FspError, Result};

#[derive(Debug, Clone, Copy)]
pub struct LogisticOptions {
    pub max_iter: usize,
    /// Convergence threshold on the sup-norm of the mean log-likelihood gradient.
    pub tol: f64,
    /// Diagonal jitter added to the Hessian.
    pub ridge: f64,
    /// Standardized coefficient norm beyond which the classes are treated as separable.
    pub separation_norm: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        LogisticOptions { max_iter: 100, tol: 1e-8, ridge: 1e-8, separation_norm: 1e3 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityRatioFit {
    /// `[intercept, slope_1, .., slope_d]` on the original covariate scale.
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    /// Mean log-likelihood at the returned coefficients.
    pub mean_log_likelihood: f64,
}

impl DensityRatioFit {
    pub fn intercept(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn slopes(&self) -> &[f64] {
        &self.coefficients[1..]
    }

    /// `log r̂(x) = β₀ + xᵀβ`. The intercept only rescales the ratio and cancels
    /// once weights are normalized.
    pub fn log_ratio(&self, x: &[f64]) -> f64 {
        self.intercept() + self.slopes().iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

struct Design {
    z: DMatrix<f64>,
    y: DVector<f64>,
    mean: Vec<f64>,
    scale: Vec<f64>,
}

fn standardized_design(class0: &[Vec<f64>], class1: &[Vec<f64>]) -> Result<Design> {
    if class0.is_empty() || class1.is_empty() {
        return Err(FspError::InvalidParameter("both classes must be nonempty".into()));
    }
    let d = class0[0].len();
    let rows: Vec<&Vec<f64>> = class0.iter().chain(class1).collect();
    if let Some(r) = rows.iter().find(|r| r.len() != d) {
        return Err(FspError::DimensionMismatch { expected: d, got: r.len() });
    }
    let n = rows.len();
    let cols = d + 1;
    if n < cols {
        return Err(FspError::RankDeficient { rank: n, cols });
    }
    let mut mean = vec![0.0; d];
    for r in &rows {
        for j in 0..d {
            mean[j] += r[j];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut scale = vec![0.0; d];
    for r in &rows {
        for j in 0..d {
            scale[j] += (r[j] - mean[j]).powi(2);
        }
    }
    scale.iter_mut().for_each(|s| *s = (*s / n as f64).sqrt());
    if scale.iter().any(|&s| !(s > 0.0)) {
        return Err(FspError::RankDeficient { rank: cols - 1, cols });
    }
    let z = DMatrix::from_fn(n, cols, |i, j| if j == 0 { 1.0 } else { (rows[i][j - 1] - mean[j - 1]) / scale[j - 1] });
    let gram = z.transpose() * &z;
    let rank = gram.clone().svd(false, false).rank(1e-10 * gram.norm().max(1.0));
    if rank < cols {
        return Err(FspError::RankDeficient { rank, cols });
    }
    let y = DVector::from_fn(n, |i, _| if i < class0.len() { 0.0 } else { 1.0 });
    Ok(Design { z, y, mean, scale })
}

fn mean_log_likelihood(design: &Design, beta: &DVector<f64>) -> f64 {
    let eta = &design.z * beta;
    let n = eta.len() as f64;
    eta.iter().zip(design.y.iter()).map(|(&e, &y)| y * e - softplus(e)).sum::<f64>() / n
}

/// Damped Newton maximization of the logistic log-likelihood with intercept.
///
/// Covariates are standardized internally; the returned coefficients are
/// mapped back to the original scale.
pub fn fit_density_ratio(class0: &[Vec<f64>], class1: &[Vec<f64>], opts: LogisticOptions) -> Result<DensityRatioFit> {
    let design = standardized_design(class0, class1)?;
    let n = design.z.nrows() as f64;
    let cols = design.z.ncols();
    let mut beta = DVector::<f64>::zeros(cols);
    let mut ll = mean_log_likelihood(&design, &beta);
    let mut iterations = 0;
    let mut converged = false;
    let mut gradient_norm;

    loop {
        let eta = &design.z * &beta;
        let p = eta.map(sigmoid);
        let resid = &design.y - &p;
        let grad = design.z.transpose() * &resid / n;
        gradient_norm = grad.amax();
        if gradient_norm <= opts.tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        let w = p.map(|v| v * (1.0 - v));
        let mut weighted = design.z.clone();
        for (i, mut row) in weighted.row_iter_mut().enumerate() {
            row *= w[i];
        }
        let mut hessian = design.z.transpose() * weighted / n;
        for j in 0..cols {
            hessian[(j, j)] += opts.ridge;
        }
        let step = match hessian.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => hessian.lu().solve(&grad).ok_or(FspError::RankDeficient { rank: cols - 1, cols })?,
        };
        let mut t = 1.0;
        let mut candidate = &beta + &step * t;
        let mut ll_new = mean_log_likelihood(&design, &candidate);
        while ll_new < ll && t > 1e-10 {
            t *= 0.5;
            candidate = &beta + &step * t;
            ll_new = mean_log_likelihood(&design, &candidate);
        }
        beta = candidate;
        ll = ll_new;
        iterations += 1;
        let norm = beta.norm();
        if !norm.is_finite() || norm > opts.separation_norm {
            return Err(FspError::Separation { norm });
        }
    }

    // A fitted hyperplane that classifies every point correctly means the
    // data are separable and the finite optimum is an artifact of the ridge.
    let eta = &design.z * &beta;
    let separated = eta.iter().zip(design.y.iter()).all(|(&e, &y)| if y > 0.5 { e > 0.0 } else { e < 0.0 });
    if separated {
        return Err(FspError::Separation { norm: beta.norm() });
    }

    let d = cols - 1;
    let mut coefficients = vec![0.0; cols];
    coefficients[0] = beta[0];
    for j in 0..d {
        coefficients[j + 1] = beta[j + 1] / design.scale[j];
        coefficients[0] -= beta[j + 1] * design.mean[j] / design.scale[j];
    }
    Ok(DensityRatioFit { coefficients, iterations, converged, gradient_norm, mean_log_likelihood: ll })
}
