#![allow(dead_code)]

use fsp::domain::{linf_distance, LabeledSample};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// One-sample Kolmogorov–Smirnov statistic against a continuous CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut worst: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        worst = worst.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    worst
}

/// Pearson chi-square goodness-of-fit p-value.
pub fn chi_square_p_value(observed: &[f64], expected: &[f64]) -> f64 {
    let stat: f64 = observed.iter().zip(expected).map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dist = ChiSquared::new((observed.len() - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

/// Counts of 2D points on an `k × k` grid over `[lo, hi]²`.
pub fn bin_counts_2d(points: &[Vec<f64>], lo: f64, hi: f64, k: usize) -> Vec<f64> {
    let mut counts = vec![0.0; k * k];
    for p in points {
        let cell = |v: f64| (((v - lo) / (hi - lo) * k as f64) as usize).min(k - 1);
        counts[cell(p[0]) * k + cell(p[1])] += 1.0;
    }
    counts
}

/// Box-window mean of `y` around `x`; `fallback` when the window is empty.
pub fn local_mean(train: &[LabeledSample], x: &[f64], h: f64, fallback: f64) -> f64 {
    let inside: Vec<f64> = train.iter().filter(|s| linf_distance(&s.x, x) <= h).map(|s| s.y).collect();
    if inside.is_empty() {
        fallback
    } else {
        inside.iter().sum::<f64>() / inside.len() as f64
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Logistic log-likelihood with labels 1 for `ones` and 0 for `zeros`, and
/// linear predictor `b0 + b·x`.
pub fn logistic_log_likelihood(zeros: &[Vec<f64>], ones: &[Vec<f64>], beta: &[f64]) -> f64 {
    let eta = |x: &[f64]| beta[0] + x.iter().zip(&beta[1..]).map(|(a, b)| a * b).sum::<f64>();
    let log1pexp = |t: f64| if t > 0.0 { t + (-t).exp().ln_1p() } else { t.exp().ln_1p() };
    let mut ll = 0.0;
    for x in ones {
        ll -= log1pexp(-eta(x));
    }
    for x in zeros {
        ll -= log1pexp(eta(x));
    }
    ll
}

/// Coarse-to-fine grid search for the logistic MLE in two covariates.
pub fn grid_search_logistic_mle(zeros: &[Vec<f64>], ones: &[Vec<f64>]) -> [f64; 3] {
    let mut center = [0.0; 3];
    let mut step = 0.5;
    while step > 1e-4 {
        let mut best = (f64::NEG_INFINITY, center);
        for i in -4..=4 {
            for j in -4..=4 {
                for k in -4..=4 {
                    let b = [center[0] + i as f64 * step, center[1] + j as f64 * step, center[2] + k as f64 * step];
                    let ll = logistic_log_likelihood(zeros, ones, &b);
                    if ll > best.0 {
                        best = (ll, b);
                    }
                }
            }
        }
        center = best.1;
        step /= 4.0;
    }
    center
}
