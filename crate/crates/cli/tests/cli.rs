use std::path::Path;
use std::process::{Command, Output};

use sparsekern::regression::r2_score;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sparsekern"));
    cmd.env_remove("SPARSEKERN_THREADS");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Kronecker sequence in `[-pi, pi]^l`: well spread and deterministic.
fn inputs(n: usize, l: usize, offset: usize) -> Vec<Vec<f64>> {
    let primes = [2.0f64, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0, 23.0, 29.0];
    (0..n)
        .map(|i| {
            (0..l)
                .map(|j| {
                    let t = ((i + offset + 1) as f64 * primes[j].sqrt()).fract();
                    (2.0 * t - 1.0) * std::f64::consts::PI
                })
                .collect()
        })
        .collect()
}

fn write_dataset(path: &Path, rows: &[Vec<f64>], target: impl Fn(&[f64]) -> f64) {
    let l = rows[0].len();
    let mut text: String = (0..l).map(|j| format!("x{j},")).collect::<String>() + "y\n";
    for r in rows {
        for v in r {
            text += &format!("{v},");
        }
        text += &format!("{}\n", target(r));
    }
    std::fs::write(path, text).unwrap();
}

fn read_predictions(text: &str) -> Vec<f64> {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("prediction"));
    lines.map(|l| l.parse().unwrap()).collect()
}

fn sin_sum(x: &[f64]) -> f64 {
    x.iter().map(|v| v.sin()).sum()
}

#[test]
fn fit_then_predict_reproduces_train_r2() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.csv");
    let rows = inputs(150, 3, 0);
    write_dataset(&train, &rows, |x| x[0].sin() + 0.5 * x[1] * x[2]);
    let out = run(&[
        "fit",
        "--data",
        train.to_str().unwrap(),
        "--degree",
        "regular:2",
        "--m",
        "200",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("metrics.json")).unwrap()).unwrap();
    let pred = run(&[
        "predict",
        "--model",
        dir.path().join("model.json").to_str().unwrap(),
        "--data",
        train.to_str().unwrap(),
    ]);
    assert!(pred.status.success(), "{}", stderr(&pred));
    let p = read_predictions(&String::from_utf8(pred.stdout.clone()).unwrap());
    assert_eq!(p.len(), 150);
    let y: Vec<f64> = rows.iter().map(|x| x[0].sin() + 0.5 * x[1] * x[2]).collect();
    assert_eq!(r2_score(&y, &p).unwrap(), metrics["train_r2"].as_f64().unwrap());

    let again = run(&[
        "predict",
        "--model",
        dir.path().join("model.json").to_str().unwrap(),
        "--data",
        train.to_str().unwrap(),
    ]);
    assert_eq!(again.stdout, pred.stdout);
}

#[test]
fn additive_target_is_learned_by_degree_one_features() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = (dir.path().join("train.csv"), dir.path().join("test.csv"));
    write_dataset(&train, &inputs(2000, 8, 0), sin_sum);
    let test_rows = inputs(500, 8, 5000);
    write_dataset(&test, &test_rows, sin_sum);
    let out = run(&[
        "fit",
        "--data",
        train.to_str().unwrap(),
        "--degree",
        "regular:1",
        "--nonlinearity",
        "cosine",
        "--m",
        "2400",
        "--seed",
        "3",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let pred = run(&[
        "predict",
        "--model",
        dir.path().join("model.json").to_str().unwrap(),
        "--data",
        test.to_str().unwrap(),
    ]);
    let p = read_predictions(&String::from_utf8(pred.stdout).unwrap());
    let y: Vec<f64> = test_rows.iter().map(|x| sin_sum(x)).collect();
    let r2 = r2_score(&y, &p).unwrap();
    assert!(r2 > 0.9, "test R^2 {r2}");
}

#[test]
fn invalid_degree_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.csv");
    write_dataset(&train, &inputs(20, 2, 0), sin_sum);
    let out = run(&["fit", "--data", train.to_str().unwrap(), "--degree", "regular:0"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(!stderr(&out).is_empty());
    assert!(out.stdout.is_empty());
}

#[test]
fn unknown_flags_and_bad_values_exit_with_2() {
    assert_eq!(run(&["fit", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(run(&["study", "stability", "--p", "1.5"]).status.code(), Some(2));
    assert_eq!(run(&["study", "polytest", "--d-grid", "0,3"]).status.code(), Some(2));
    let out = bin().args(["study", "stability"]).env("SPARSEKERN_THREADS", "many").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_data_file_is_a_runtime_error() {
    let out = run(&["fit", "--data", "/nonexistent/train.csv"]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
}

fn fitted_model(dir: &Path) -> std::path::PathBuf {
    let train = dir.join("train.csv");
    write_dataset(&train, &inputs(60, 3, 0), sin_sum);
    let out = run(&["fit", "--data", train.to_str().unwrap(), "--m", "40", "--lambda", "0.1", "--out-dir", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    dir.join("model.json")
}

#[test]
fn empty_data_gives_empty_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let model = fitted_model(dir.path());
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let out = run(&["predict", "--model", model.to_str().unwrap(), "--data", empty.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(out.stdout.is_empty());

    let header_only = dir.path().join("header.csv");
    std::fs::write(&header_only, "x0,x1,x2\n").unwrap();
    let out = run(&["predict", "--model", model.to_str().unwrap(), "--data", header_only.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "prediction\n");
}

#[test]
fn missing_input_column_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let model = fitted_model(dir.path());
    let narrow = dir.path().join("narrow.csv");
    std::fs::write(&narrow, "x0,x1\n0.1,0.2\n").unwrap();
    let out = run(&["predict", "--model", model.to_str().unwrap(), "--data", narrow.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn predictions_can_go_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let model = fitted_model(dir.path());
    let dest = dir.path().join("pred.csv");
    let data = dir.path().join("train.csv");
    let out = run(&[
        "predict",
        "--model",
        model.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--output",
        dest.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert_eq!(read_predictions(&std::fs::read_to_string(dest).unwrap()).len(), 60);
}

fn study(dir: &Path, args: &[&str]) -> Output {
    let mut full = vec!["study"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--out-dir", dir.to_str().unwrap()]);
    run(&full)
}

#[test]
fn stability_study_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(study(a.path(), &["stability", "--seed", "7"]).status.success());
    assert!(study(b.path(), &["stability", "--seed", "7"]).status.success());
    let read = |d: &Path, f: &str| std::fs::read(d.join(f)).unwrap();
    assert_eq!(read(a.path(), "stability.csv"), read(b.path(), "stability.csv"));
    assert_eq!(read(a.path(), "stability.meta.json"), read(b.path(), "stability.meta.json"));
}

#[test]
fn convergence_study_error_decreases() {
    let dir = tempfile::tempdir().unwrap();
    let out = study(dir.path(), &["convergence", "--m-grid", "256,1024,4096,16384"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    let sup: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(sup.len(), 4);
    assert!(sup.windows(2).all(|w| w[1] < w[0]), "{sup:?}");
}

#[test]
fn polytest_default_grid_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = study(dir.path(), &["polytest", "--n-test", "2000"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("polytest.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 4);
    assert_eq!(csv.lines().next().unwrap(), "d,n,test_mse,lambda");
}

#[test]
fn thread_count_does_not_change_artifacts() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["eigen", "--n", "120", "--l", "6", "--seed", "5"];
    let mut one = vec!["--threads", "1"];
    one.extend_from_slice(&args);
    assert!(study(a.path(), &one).status.success());
    let out = bin()
        .args(["study", "eigen", "--n", "120", "--l", "6", "--seed", "5", "--out-dir", b.path().to_str().unwrap()])
        .env("SPARSEKERN_THREADS", "4")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    for f in ["eigen.csv", "eigen.meta.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
    }
}
