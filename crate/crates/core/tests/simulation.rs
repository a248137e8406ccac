use std::sync::Arc;

use fsp::domain::Domain;
use fsp::model::BlackBox;
use fsp::oracle::NoiseLaw;
use fsp::rng::rng_stream;
use fsp::simulation::{
    classification_truth, mce, mse, rate_slope_experiment, regression_truth, run_experiment, scenario_by_name,
    scenario_regression, ExperimentConfig, Method, PretrainedSpec, Scenario, WhiteNoiseModel,
};
use rand::Rng;

#[test]
fn scenario_truths_match_their_formulas() {
    assert!((regression_truth(&[0.5, 0.2]) - 1.2071).abs() < 1e-4);
    assert_eq!(classification_truth(&[0.8, 0.8]), 0.9);
    let mut rng = rng_stream(1, "test-truth");
    for _ in 0..1000 {
        let (a, b): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let reg = a.abs() + (b + 0.3).abs().sqrt();
        assert!((regression_truth(&[a, b]) - reg).abs() < 1e-14);
        let raw = a.abs().powf(0.6) + (b - 0.3).abs().powf(0.6) - 0.1;
        let cls = if raw > 0.9 { 0.9 } else if raw < 0.0 { 0.0 } else { raw };
        assert!((classification_truth(&[a, b]) - cls).abs() < 1e-14);
        assert!((0.0..=1.0).contains(&classification_truth(&[a, b])));
    }
}

#[test]
fn scenario_lookup() {
    for name in ["regression", "classification", "adversarial"] {
        assert_eq!(scenario_by_name(name).unwrap().name, name);
    }
    let err = scenario_by_name("nope").unwrap_err().to_string();
    assert!(err.contains("regression") && err.contains("classification") && err.contains("adversarial"), "{err}");
}

#[test]
fn white_noise_model_statistics() {
    let m = WhiteNoiseModel::new(2, 17);
    let mut rng = rng_stream(17, "test-white");
    let xs: Vec<Vec<f64>> = (0..10_000).map(|_| vec![rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)]).collect();
    let ys = m.predict_batch(&xs).unwrap();
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!(mean.abs() <= 0.03, "mean {mean}");
    assert!((0.94..=1.06).contains(&var), "variance {var}");

    let fs: Vec<f64> = xs.iter().map(|x| regression_truth(x)).collect();
    let fm = fs.iter().sum::<f64>() / n;
    let cov: f64 = ys.iter().zip(&fs).map(|(y, f)| (y - mean) * (f - fm)).sum();
    let sf = fs.iter().map(|f| (f - fm).powi(2)).sum::<f64>().sqrt();
    let sy = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>().sqrt();
    assert!((cov / (sf * sy)).abs() < 0.05);

    assert_eq!(m.predict_batch(&xs[..50]).unwrap(), ys[..50].to_vec());
}

#[test]
fn metrics_match_hand_loops() {
    let mut rng = rng_stream(2, "test-metrics");
    let p: Vec<f64> = (0..500).map(|_| rng.random_range(-2.0..2.0)).collect();
    let t: Vec<f64> = (0..500).map(|_| rng.random_range(-2.0..2.0)).collect();
    let mut acc = 0.0;
    for i in 0..500 {
        acc += (p[i] - t[i]) * (p[i] - t[i]);
    }
    assert!((mse(&p, &t).unwrap() - acc / 500.0).abs() <= 1e-12);

    let labels: Vec<f64> = (0..500).map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }).collect();
    let probs: Vec<f64> = (0..500).map(|_| rng.random::<f64>()).collect();
    let wrong = probs.iter().zip(&labels).filter(|(q, l)| (**q >= 0.5) != (**l == 1.0)).count();
    assert_eq!(mce(&probs, &labels).unwrap(), wrong as f64 / 500.0);
    let zeros = labels.iter().filter(|l| **l == 0.0).count();
    assert_eq!(mce(&[0.6; 500], &labels).unwrap(), zeros as f64 / 500.0);
}

fn small_config(seed: u64) -> ExperimentConfig {
    ExperimentConfig { n: 120, n_ptr: 300, repetitions: 4, seed, ..Default::default() }
}

#[test]
fn experiments_are_deterministic() {
    let sc = scenario_regression();
    let a = run_experiment(&sc, &small_config(5)).unwrap();
    let b = run_experiment(&sc, &small_config(5)).unwrap();
    assert_eq!(a.rows, b.rows);
    assert_eq!(a.rows.len(), 12);
    let c = run_experiment(&sc, &small_config(6)).unwrap();
    assert_ne!(a.rows, c.rows);
    for rows in a.rows.chunks(3) {
        let methods: Vec<Method> = rows.iter().map(|r| r.method).collect();
        assert_eq!(methods, vec![Method::SingleTask, Method::Fsp, Method::Pretrained]);
    }
}

#[test]
fn exact_recovery_gives_a_degenerate_slope() {
    let noiseless = Scenario {
        noise: NoiseLaw::homoskedastic(0.0),
        pretrained: PretrainedSpec::Truth,
        ..scenario_regression()
    };
    let base = ExperimentConfig { repetitions: 2, ..Default::default() };
    let res = rate_slope_experiment(&noiseless, &[100, 200, 400], Method::Pretrained, &base).unwrap();
    assert!(res.mean_metric.iter().all(|m| *m == 0.0));
    assert!(res.slope.is_none());
    assert!(rate_slope_experiment(&noiseless, &[100, 200, 200], Method::Pretrained, &base).is_err());
}

#[test]
fn zero_pretrained_scenario_runs() {
    let sc = Scenario {
        pretrained: PretrainedSpec::Zero,
        domain: Domain::cube(2, -0.5, 0.5).unwrap(),
        f_star: Arc::new(regression_truth),
        ..scenario_regression()
    };
    let res = run_experiment(&sc, &small_config(1)).unwrap();
    let ptr = res.mean(Method::Pretrained).unwrap();
    assert!(ptr > 0.3, "zero model mse {ptr}");
}
