use std::path::Path;
use std::process::{Command, Output};

use mixsaem::data::{load_csv, CsvOptions, Schema};
use mixsaem::model::ModelParams;

fn mixsaem(args: &[&str], paths: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mixsaem"));
    cmd.args(args);
    for (flag, path) in paths {
        cmd.arg(flag).arg(path);
    }
    cmd.output().unwrap()
}

fn ok(out: Output) -> Output {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn simulate(dir: &Path, seed: &str, n: usize) {
    let cfg = dir.with_extension("json");
    std::fs::write(&cfg, format!(r#"{{"design": {{"n": {n}}}}}"#)).unwrap();
    ok(mixsaem(&["simulate", "--seed", seed], &[("--config", &cfg), ("--out-dir", dir)]));
}

#[test]
fn simulate_is_deterministic_and_parses_back() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    simulate(&a, "5", 300);
    simulate(&b, "5", 300);
    simulate(&c, "6", 300);
    let read = |d: &Path| std::fs::read(d.join("data.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    let schema = Schema::load(a.join("schema.json")).unwrap();
    let ds = load_csv(a.join("data.csv"), &schema, &CsvOptions::default()).unwrap();
    assert_eq!((ds.n_rows(), ds.n_columns()), (300, 7));
    assert!(ds.is_fully_observed());
    let truth = ModelParams::load(a.join("truth.json")).unwrap();
    assert_eq!(truth.beta.len(), 8);
    assert!(a.join("config.json").exists());
}

#[test]
fn inject_masks_requested_fraction() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    simulate(&sim, "1", 1000);
    let inj = tmp.path().join("inj");
    ok(mixsaem(
        &["inject", "--mechanism", "mcar", "--rate", "0.3", "--seed", "2"],
        &[
            ("--input", &sim.join("data.csv")),
            ("--schema", &sim.join("schema.json")),
            ("--out-dir", &inj),
        ],
    ));
    let schema = Schema::load(inj.join("schema.json")).unwrap();
    let ds = load_csv(inj.join("data.csv"), &schema, &CsvOptions::default()).unwrap();
    let frac = ds.missing_count() as f64 / 7000.0;
    assert!((frac - 0.3).abs() < 0.03, "{frac}");

    let mar = tmp.path().join("mar");
    ok(mixsaem(
        &["inject", "--mechanism", "mar", "--rate", "0.3", "--seed", "2"],
        &[
            ("--input", &sim.join("data.csv")),
            ("--schema", &sim.join("schema.json")),
            ("--out-dir", &mar),
        ],
    ));
    let ds = load_csv(mar.join("data.csv"), &schema, &CsvOptions::default()).unwrap();
    for j in [2, 4, 6] {
        assert_eq!(ds.observed_column(j).len(), 1000);
    }
}

#[test]
fn saem_on_complete_data_matches_full_fit() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    simulate(&sim, "3", 500);
    let cfg = tmp.path().join("fit.json");
    std::fs::write(&cfg, r#"{"saem": {"iterations": 60, "loglik_samples": 0}}"#).unwrap();
    let data = sim.join("data.csv");
    let schema = sim.join("schema.json");
    let fit = |method: &str, dir: &Path| {
        ok(mixsaem(
            &["fit", "--method", method],
            &[("--config", &cfg), ("--input", &data), ("--schema", &schema), ("--out-dir", dir)],
        ));
        ModelParams::load(dir.join("params.json")).unwrap()
    };
    let saem = fit("saem", &tmp.path().join("saem"));
    let full = fit("full", &tmp.path().join("full"));
    for (a, b) in saem.beta.iter().zip(&full.beta) {
        assert!((a - b).abs() < 1e-3, "{a} vs {b}");
    }
    let trajectory = std::fs::read_to_string(tmp.path().join("saem/trajectory.csv")).unwrap();
    assert!(trajectory.starts_with("iteration,step_size,beta_0,"));
    assert_eq!(trajectory.lines().count(), 61);
}

#[test]
fn invalid_method_exits_with_usage_code() {
    let tmp = tempfile::tempdir().unwrap();
    let out = mixsaem(&["fit", "--method", "mice"], &[("--out-dir", tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mice"));
    let out = mixsaem(&["inject", "--mechanism", "mnar"], &[("--out-dir", tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = mixsaem(
        &["fit"],
        &[
            ("--input", &tmp.path().join("absent.csv")),
            ("--schema", &tmp.path().join("absent.json")),
            ("--out-dir", tmp.path()),
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn fit_then_predict_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    simulate(&sim, "4", 400);
    let inj = tmp.path().join("inj");
    ok(mixsaem(
        &["inject", "--rate", "0.2", "--seed", "1"],
        &[
            ("--input", &sim.join("data.csv")),
            ("--schema", &sim.join("schema.json")),
            ("--out-dir", &inj),
        ],
    ));
    let cfg = tmp.path().join("fit.json");
    std::fs::write(&cfg, r#"{"saem": {"iterations": 40, "loglik_samples": 0}}"#).unwrap();
    let fit = tmp.path().join("fit");
    ok(mixsaem(
        &["fit"],
        &[
            ("--config", &cfg),
            ("--input", &inj.join("data.csv")),
            ("--schema", &inj.join("schema.json")),
            ("--out-dir", &fit),
        ],
    ));
    let pred = tmp.path().join("pred");
    let predict = |dir: &Path| {
        ok(mixsaem(
            &["predict", "--samples", "50", "--seed", "9"],
            &[
                ("--input", &inj.join("data.csv")),
                ("--schema", &inj.join("schema.json")),
                ("--params", &fit.join("params.json")),
                ("--out-dir", dir),
            ],
        ));
        std::fs::read_to_string(dir.join("predictions.csv")).unwrap()
    };
    let text = predict(&pred);
    assert_eq!(text, predict(&tmp.path().join("pred2")));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("id,probability,class,mc_samples"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 400);
    for r in &rows {
        let p: f64 = r[1].parse().unwrap();
        assert!((0.0..=1.0).contains(&p));
        assert_eq!(r[2], if p >= 0.5 { "1" } else { "0" });
    }
}

#[test]
fn benchmark_writes_all_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bench.json");
    std::fs::write(&cfg, r#"{"saem": {"iterations": 30}, "design": {"n": 300}}"#).unwrap();
    let out = tmp.path().join("bench");
    let run = ok(mixsaem(
        &["benchmark", "--runs", "2", "--method", "saem,mm,cc,full", "--mechanism", "mar", "--export-splits"],
        &[("--config", &cfg), ("--out-dir", &out)],
    ));
    for f in [
        "bias_rmse.csv",
        "runs_long.csv",
        "summary.csv",
        "summary.txt",
        "timings.csv",
        "failures.csv",
        "config.json",
    ] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let runs_long = std::fs::read_to_string(out.join("runs_long.csv")).unwrap();
    for m in ["saem", "mm", "cc", "full"] {
        assert!(runs_long.contains(&format!(",{m},")), "{m} missing from runs_long.csv");
    }
    assert!(!String::from_utf8_lossy(&run.stdout).is_empty());
    for f in ["train_000.csv", "test_000.csv", "train_001.csv", "test_001.csv"] {
        assert!(out.join("splits").join(f).exists(), "{f} missing");
    }
    let snapshot = std::fs::read_to_string(out.join("config.json")).unwrap();
    assert!(snapshot.contains("\"runs\": 2"));
}
