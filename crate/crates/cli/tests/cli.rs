use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn frlsc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_frlsc"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = frlsc(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn synth(dir: &Path, name: &str) {
    ok(
        dir,
        &[
            "synth",
            "--n-per-class",
            "8",
            "--m",
            "24",
            "--output",
            name,
            "--seed",
            "3",
        ],
    );
}

#[test]
fn train_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "lag.csv");
    ok(
        d,
        &[
            "train", "--data", "lag.csv", "--model", "m.json", "--lambda", "0.1", "--k", "6",
        ],
    );
    assert!(d.join("m.json").exists());
    let report = json(d.join("train_report.json"));
    assert_eq!(report["lambda"], 0.1);
    assert!(report["tuning"].is_null());
    assert_eq!(report["diagnostics"]["delta"].as_array().unwrap().len(), 6);

    let first = ok(d, &["predict", "--data", "lag.csv", "--model", "m.json"]);
    let first_json = std::fs::read_to_string(d.join("predict_report.json")).unwrap();
    let second = ok(d, &["predict", "--data", "lag.csv", "--model", "m.json"]);
    assert_eq!(first, second);
    assert_eq!(
        first_json,
        std::fs::read_to_string(d.join("predict_report.json")).unwrap()
    );
    assert!(d.join("predict_report.txt").exists());

    let text = ok(d, &["evaluate", "--data", "lag.csv", "--model", "m.json"]);
    assert!(text.contains("Total Recognition Rate ="));
    let eval = json(d.join("evaluate_report.json"));
    assert!(eval["accuracy"].as_f64().unwrap() > 0.5);
    assert!(d.join("evaluate_confusion.csv").exists());
}

#[test]
fn omitted_lambda_runs_the_search() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "lag.json");
    ok(
        d,
        &[
            "train",
            "--data",
            "lag.json",
            "--k",
            "6",
            "--lambdas",
            "0.01,1",
        ],
    );
    let report = json(d.join("train_report.json"));
    let lambda = report["lambda"].as_f64().unwrap();
    assert!(lambda == 0.01 || lambda == 1.0);
    assert_eq!(report["tuning"]["lambda"].as_f64().unwrap(), lambda);
    assert_eq!(report["tuning"]["points"].as_array().unwrap().len(), 10);
    assert!(d.join("model.json").exists());
}

#[test]
fn discarded_energy_shrinks_with_k() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "lag.csv");
    let mut ratios = Vec::new();
    for k in ["1", "2", "4", "8"] {
        ok(
            d,
            &["train", "--data", "lag.csv", "--lambda", "0.1", "--k", k],
        );
        let r = json(d.join("train_report.json"));
        ratios.push(r["diagnostics"]["discarded_energy_ratio"].as_f64().unwrap());
    }
    assert!(ratios.windows(2).all(|w| w[1] < w[0]), "{ratios:?}");
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "lag.csv");
    std::fs::write(
        d.join("run.toml"),
        "data = \"lag.csv\"\nlambda = 0.5\nk = 4\nseed = 9\n",
    )
    .unwrap();
    ok(d, &["train", "--config", "run.toml", "--k", "5"]);
    let r = json(d.join("train_report.json"));
    assert_eq!(r["lambda"], 0.5);
    assert_eq!(r["k"], 5);
    assert_eq!(r["seed"], 9);
    assert_eq!(r["config_file"], "run.toml");
}

#[test]
fn configuration_errors_exit_2_and_list_every_field() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = frlsc(
        d,
        &[
            "train",
            "--lambda",
            "-1",
            "--kernel",
            "cubic",
            "--step-at",
            "1.5",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for field in ["data: required", "lambda:", "kernel:", "step_at:"] {
        assert!(err.contains(field), "{field} missing from {err}");
    }
    std::fs::write(d.join("bad.toml"), "lamda = 1\n").unwrap();
    let out = frlsc(d, &["train", "--config", "bad.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn data_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("empty.csv"), "").unwrap();
    let out = frlsc(d, &["train", "--data", "empty.csv", "--lambda", "1"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error in data"));

    synth(d, "lag.csv");
    ok(
        d,
        &["train", "--data", "lag.csv", "--lambda", "1", "--k", "3"],
    );
    std::fs::write(
        d.join("other.csv"),
        "id,class,channel,v0,v1\na,zz,0,1,2\na,zz,1,1,2\na,zz,2,1,2\n",
    )
    .unwrap();
    let out = frlsc(
        d,
        &["evaluate", "--data", "other.csv", "--model", "model.json"],
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn verify_passes_and_rejects_corrupt_models() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let text = ok(d, &["verify"]);
    assert!(!text.contains("FAIL"));
    assert_eq!(text.matches("PASS").count(), 6);
    let report = json(d.join("verify_report.json"));
    assert_eq!(report["passed"], true);

    synth(d, "lag.csv");
    ok(
        d,
        &["train", "--data", "lag.csv", "--lambda", "1", "--k", "3"],
    );
    ok(d, &["verify", "--model", "model.json", "--instances", "2"]);
    let model = std::fs::read_to_string(d.join("model.json")).unwrap();
    std::fs::write(
        d.join("broken.json"),
        model.replacen("\"mu\":[1.3", "\"mu\":[1.2", 1),
    )
    .unwrap();
    let out = frlsc(d, &["verify", "--model", "broken.json"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("format error"));
}

#[test]
fn verify_failure_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    // a coarse spectral grid cannot meet the eigenpair bound
    let out = frlsc(
        dir.path(),
        &["verify", "--spectral-m", "5", "--instances", "1"],
    );
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn benchmark_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = [
        "benchmark",
        "--n-per-class",
        "9",
        "--classes",
        "3",
        "--m",
        "16",
        "--k",
        "6",
        "--seed",
        "4",
        "--sigma-factors",
        "0.5,1,2",
        "--lambdas",
        "0.01,1",
    ];
    let a = ok(d, &args);
    let ja = std::fs::read_to_string(d.join("benchmark_report.json")).unwrap();
    let b = ok(d, &args);
    let jb = std::fs::read_to_string(d.join("benchmark_report.json")).unwrap();
    assert_eq!((a.clone(), ja.clone()), (b, jb));
    assert_eq!(a.matches("Total Recognition Rate").count(), 2);
    let r: Value = serde_json::from_str(&ja).unwrap();
    assert_eq!(r["seed"], 4);
    assert!(r["delta_points"].is_number());
    assert!(
        d.join("benchmark_functional.csv").exists() && d.join("benchmark_baseline.csv").exists()
    );
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "lag.csv");
    let mut models = Vec::new();
    for w in ["1", "3"] {
        ok(
            d,
            &[
                "train",
                "--data",
                "lag.csv",
                "--k",
                "6",
                "--workers",
                w,
                "--model",
                "w.json",
            ],
        );
        models.push(std::fs::read_to_string(d.join("w.json")).unwrap());
    }
    assert_eq!(models[0], models[1]);
}
