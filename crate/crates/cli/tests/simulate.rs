mod common;

use common::{code, fsp, read_json, run, stderr, write};

fn simulate(out: &std::path::Path, seed: u64) -> std::process::Output {
    run(fsp().args(["simulate", "--scenario", "regression", "--n", "300", "--repetitions", "5", "--seed", &seed.to_string(), "--out"]).arg(out))
}

#[test]
fn writes_three_files_and_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let out = simulate(&a, 7);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for f in ["repetitions.csv", "summary.csv", "report.json"] {
        assert!(a.join(f).is_file(), "{f}");
    }
    assert_eq!(code(&simulate(&b, 7)), 0);
    for f in ["repetitions.csv", "summary.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let reps = std::fs::read_to_string(a.join("repetitions.csv")).unwrap();
    assert_eq!(reps.lines().count(), 1 + 5 * 3);
    assert!(reps.starts_with("repetition,method,metric,theta1,theta2,bandwidth,validation_score\n"));

    let report = read_json(&a.join("report.json"));
    assert_eq!(report["config"]["seed"], 7);
    assert_eq!(report["config"]["n"], 300);
    assert_eq!(report["metric"], "mse");
    assert_eq!(report["summary"].as_array().unwrap().len(), 3);
    assert!(stderr(&simulate(&b, 7)).contains("resolved config"));
}

#[test]
fn unknown_scenario_lists_valid_names() {
    let out = run(fsp().args(["simulate", "--scenario", "nonsense"]));
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    for name in ["regression", "classification", "adversarial"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"scenario": "regression", "budget": 10}"#);
    let out = run(fsp().args(["simulate", "--config"]).arg(&cfg));
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("budget"), "{}", stderr(&out));

    let nested = write(dir.path(), "n.json", r#"{"fit": {"retrieval": {"pilot_fraktion": 0.3}}}"#);
    assert_eq!(code(&run(fsp().args(["simulate", "--config"]).arg(&nested))), 2);
    assert_eq!(code(&run(fsp().args(["simulate", "--bogus-flag"]))), 2);
}

#[test]
fn seed_precedence_is_flag_then_env_then_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"n": 60, "n_ptr": 100, "repetitions": 1, "seed": 4}"#);
    let seed_of = |name: &str, flag: Option<&str>, env: Option<&str>| {
        let out_dir = dir.path().join(name);
        let mut cmd = fsp();
        cmd.args(["simulate", "--config"]).arg(&cfg).arg("--out").arg(&out_dir);
        if let Some(f) = flag {
            cmd.args(["--seed", f]);
        }
        if let Some(e) = env {
            cmd.env("FSP_SEED", e);
        }
        let out = run(&mut cmd);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        read_json(&out_dir.join("report.json"))["config"]["seed"].as_u64().unwrap()
    };
    assert_eq!(seed_of("file", None, None), 4);
    assert_eq!(seed_of("env", None, Some("9")), 9);
    assert_eq!(seed_of("flag", Some("3"), Some("9")), 3);

    let no_file = dir.path().join("default");
    let out = run(fsp().args(["simulate", "--n", "60", "--n-ptr", "100", "--repetitions", "1", "--out"]).arg(&no_file));
    assert_eq!(code(&out), 0);
    assert_eq!(read_json(&no_file.join("report.json"))["config"]["seed"], 0);

    let env_run = dir.path().join("env");
    let flag_run = dir.path().join("flag9");
    let out = run(fsp().args(["simulate", "--config"]).arg(&cfg).args(["--seed", "9", "--out"]).arg(&flag_run));
    assert_eq!(code(&out), 0);
    let a = std::fs::read(env_run.join("repetitions.csv")).unwrap();
    let b = std::fs::read(flag_run.join("repetitions.csv")).unwrap();
    assert_eq!(a, b);

    let bad = run(fsp().args(["simulate", "--config"]).arg(&cfg).env("FSP_SEED", "abc"));
    assert_eq!(code(&bad), 2);
}
