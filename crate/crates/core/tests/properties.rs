mod common;

use std::sync::Arc;

use fsp::adaptation::{validation_scores, ThetaGrid};
use fsp::domain::{l2_distance, Domain, HolderParams, LabeledSample};
use fsp::estimator::{PersonalizedEstimator, VarianceField};
use fsp::model::{FnModel, SharedModel};
use fsp::smoothing::{check_local_smooth, local_smooth, truncate_to_band};
use proptest::prelude::*;

use common::local_mean;

fn point(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, dim)
}

fn theta() -> impl Strategy<Value = HolderParams> {
    (0.0..3.0f64, 0.0..=1.0f64).prop_map(|(a, b)| HolderParams::new(a, b).unwrap())
}

fn rough(freq: f64, amp: f64) -> impl Fn(&[f64]) -> f64 {
    move |x: &[f64]| amp * (freq * x[0]).sin() + x.iter().skip(1).map(|v| (freq * v).cos()).sum::<f64>()
}

fn samples(dim: usize, max: usize) -> impl Strategy<Value = Vec<LabeledSample>> {
    prop::collection::vec((point(dim), -3.0..3.0f64), 1..max)
        .prop_map(|v| v.into_iter().map(|(x, y)| LabeledSample::new(x, y)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn smoothing_fixes_the_anchor(t in theta(), a in point(2), freq in 0.5..40.0f64, amp in 0.1..5.0f64) {
        let g = rough(freq, amp);
        prop_assert_eq!(local_smooth(&g, t, &a, &a).unwrap(), g(&a));
    }

    #[test]
    fn smoothed_values_lie_in_the_band(t in theta(), a in point(2), x in point(2), freq in 0.5..40.0f64, amp in 0.1..5.0f64) {
        let g = rough(freq, amp);
        prop_assume!(l2_distance(&a, &x) > 0.0);
        let v = local_smooth(&g, t, &a, &x).unwrap();
        let band = t.theta1() * l2_distance(&a, &x).powf(t.theta2());
        prop_assert!((v - g(&a)).abs() <= band * (1.0 + 1e-12) + 1e-12 * g(&a).abs());
        let smoothed = |p: &[f64]| local_smooth(&g, t, &a, p).unwrap();
        prop_assert!(check_local_smooth(&smoothed, t, &a, &[x.clone()]).unwrap().holds);
    }

    #[test]
    fn smoothing_is_idempotent(t in theta(), a in point(2), x in point(2), freq in 0.5..40.0f64) {
        let g = rough(freq, 2.0);
        let once = |p: &[f64]| local_smooth(&g, t, &a, p).unwrap();
        prop_assert_eq!(local_smooth(&once, t, &a, &x).unwrap(), once(&x));
    }

    #[test]
    fn truncation_keeps_values_inside_the_band(g_x in -10.0..10.0f64, g_a in -10.0..10.0f64, band in 0.0..5.0f64) {
        let v = truncate_to_band(g_x, g_a, band);
        if (g_x - g_a).abs() <= band {
            prop_assert_eq!(v.to_bits(), g_x.to_bits());
        } else {
            prop_assert!((v - g_a).abs() <= band * (1.0 + 1e-15) + 1e-15 * g_a.abs());
            prop_assert_eq!((v - g_a).signum(), (g_x - g_a).signum());
        }
    }

    #[test]
    fn wider_bands_move_values_no_closer_to_the_anchor(
        a in point(2), x in point(2), t1 in 0.0..2.0f64, extra in 0.0..2.0f64, t2 in 0.0..=1.0f64, freq in 0.5..40.0f64,
    ) {
        let g = rough(freq, 3.0);
        let small = local_smooth(&g, HolderParams::new(t1, t2).unwrap(), &a, &x).unwrap();
        let large = local_smooth(&g, HolderParams::new(t1 + extra, t2).unwrap(), &a, &x).unwrap();
        prop_assert!((large - g(&a)).abs() >= (small - g(&a)).abs());
        prop_assert!((large - g(&x)).abs() <= (small - g(&x)).abs());
    }

    #[test]
    fn batch_predictions_equal_scalar_predictions(train in samples(2, 60), t in theta(), h in 0.01..1.0f64, xs in prop::collection::vec(point(2), 0..30)) {
        let model: SharedModel = Arc::new(FnModel::new(2, "m", |x| x[0].sin() * 3.0 - x[1]));
        let est = PersonalizedEstimator::new(Domain::cube(2, 0.0, 1.0).unwrap(), train, model, t, h).unwrap();
        let batch = est.predict_batch(&xs).unwrap();
        for (x, b) in xs.iter().zip(batch) {
            prop_assert_eq!(est.predict(x).unwrap().to_bits(), b.to_bits());
        }
    }

    #[test]
    fn zero_band_prediction_is_the_window_mean(train in samples(2, 60), t2 in 0.0..=1.0f64, h in 0.01..1.0f64, x in point(2)) {
        let model: SharedModel = Arc::new(FnModel::new(2, "m", |x| 5.0 * x[0] * x[1]));
        let est = PersonalizedEstimator::new(Domain::cube(2, 0.0, 1.0).unwrap(), train.clone(), model, HolderParams::new(0.0, t2).unwrap(), h).unwrap();
        let expected = local_mean(&train, &x, h, 5.0 * x[0] * x[1]);
        let got = est.predict(&x).unwrap();
        prop_assert!((got - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
    }

    #[test]
    fn fast_scores_equal_direct_scores(train in samples(2, 40), validation in samples(2, 15), hs in prop::collection::vec(0.05..1.0f64, 1..4)) {
        let f = |x: &[f64]| x[0] - 2.0 * x[1];
        let grid = ThetaGrid::new(10, 2.0).unwrap();
        let f_train: Vec<f64> = train.iter().map(|s| f(&s.x)).collect();
        let f_val: Vec<f64> = validation.iter().map(|s| f(&s.x)).collect();
        let scores = validation_scores(grid.points(), &hs, &train, &f_train, &validation, &f_val);
        let model: SharedModel = Arc::new(FnModel::new(2, "m", f));
        let d = Domain::cube(2, 0.0, 1.0).unwrap();
        for (k, &h) in hs.iter().enumerate() {
            for (j, &t) in grid.points().iter().enumerate() {
                let est = PersonalizedEstimator::new(d.clone(), train.clone(), model.clone(), t, h).unwrap();
                let preds = est.predict_batch(&validation.iter().map(|s| s.x.clone()).collect::<Vec<_>>()).unwrap();
                let direct = fsp::adaptation::squared_error_sum(&validation, &preds);
                prop_assert_eq!(scores[k * grid.len() + j], direct);
            }
        }
    }

    #[test]
    fn grid_has_expected_shape(n in 3usize..5000, c1 in 0.1..10.0f64) {
        let grid = ThetaGrid::new(n, c1).unwrap();
        let m = (n as f64).ln().ceil() as usize;
        prop_assert_eq!(grid.len(), (m + 1) * (m + 1));
        prop_assert!(grid.points().iter().all(|t| t.theta1() >= 0.0 && t.theta1() <= c1 && t.theta2() >= 0.0 && t.theta2() <= 1.0));
        prop_assert_eq!(grid.points().last().unwrap().theta1(), c1);
    }

    #[test]
    fn variance_estimates_are_nonnegative(pilot in samples(2, 50), h in 0.01..2.0f64, x in point(2)) {
        let field = VarianceField::new(pilot, h, Domain::cube(2, 0.0, 1.0).unwrap()).unwrap();
        prop_assert!(field.estimate_variance(&x).unwrap() >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn holder_members_pass_through_unchanged(
        a in point(1), x in point(1), lm in 0.0..0.9f64, t2 in 0.05..=1.0f64, theta1 in 0.1..3.0f64,
    ) {
        // L|x - a|^t2 plus a constant, with L below theta1, is a member anchored at a.
        let l = lm * theta1;
        let anchor = a[0];
        let g = move |p: &[f64]| l * (p[0] - anchor).abs().powf(t2) + 0.25;
        let t = HolderParams::new(theta1, t2).unwrap();
        prop_assert_eq!(local_smooth(&g, t, &a, &x).unwrap(), g(&x));
    }
}
