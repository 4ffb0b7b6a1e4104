use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use censored_svm::censoring::ipcw_weights;
use censored_svm::data::{load_csv, write_csv};
use censored_svm::simulation::{generate, SimulationSetting};
use censored_svm::solver::fit;
use censored_svm::{CensoredSvmModel, CensoringMethod, FitConfig, KernelSpec, LossSpec, ResponseTransform};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_censored-svm"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn training_csv(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let s = SimulationSetting::new(1).unwrap().with_c0(3.0).unwrap();
    let sim = generate(&s, n, seed).unwrap();
    let path = dir.join("train.csv");
    write_csv(&sim.data, &path, "time", "status").unwrap();
    path
}

const FIT: &[&str] = &[
    "fit", "--data", "train.csv", "--time", "time", "--status", "status", "--loss", "absolute", "--kernel", "rbf:0.1",
    "--lambda", "0.01", "--censoring", "km", "--out", "m.json",
];

#[test]
fn fit_then_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let train = training_csv(dir.path(), 60, 1);
    let out = run(dir.path(), FIT);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("\"lambda\":0.01"), "config is echoed: {stderr}");

    let out = run(dir.path(), &["predict", "--model", "m.json", "--data", "train.csv", "--clipped", "--out", "p.csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    // In-memory fit with the same settings.
    let data = load_csv(&train, "time", "status").unwrap();
    let cens = CensoringMethod::Km.fit(&data, 0.05).unwrap();
    let w = ipcw_weights(&cens, &data).unwrap();
    let model = fit(
        &data,
        &w,
        ResponseTransform::Identity,
        LossSpec::absolute(),
        KernelSpec::gaussian(0.1).unwrap(),
        0.01,
        &FitConfig::default(),
    )
    .unwrap();
    // The per-sweep history is diagnostic only and not serialized.
    let mut model = model;
    model.diagnostics.history.clear();
    let saved = CensoredSvmModel::from_json(&std::fs::read_to_string(dir.path().join("m.json")).unwrap()).unwrap();
    assert_eq!(saved, model);

    let mut rdr = csv::Reader::from_path(dir.path().join("p.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(headers.iter().collect::<Vec<_>>(), vec!["z1", "time", "status", "prediction"]);
    let mut rows = 0;
    for (rec, s) in rdr.records().zip(data.samples()) {
        let rec = rec.unwrap();
        let p: f64 = rec[3].parse().unwrap();
        assert_eq!(p, model.predict(&s.z, true).unwrap());
        rows += 1;
    }
    assert_eq!(rows, 60);
}

#[test]
fn missing_data_flag_is_user_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["fit", "--lambda", "0.1", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--data"));
    assert!(!dir.path().join("m.json").exists());
}

#[test]
fn unknown_flag_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    training_csv(dir.path(), 10, 2);
    let mut args = FIT.to_vec();
    args.push("--bogus");
    assert_eq!(run(dir.path(), &args).status.code(), Some(1));
}

#[test]
fn bad_values_are_user_errors() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("train.csv"), "z1,time,status\n0.1,1.0,1\nabc,2.0,0\n").unwrap();
    let out = run(dir.path(), FIT);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 2"));

    training_csv(dir.path(), 10, 3);
    let mut args = FIT.to_vec();
    args[10] = "rbf:-1";
    assert_eq!(run(dir.path(), &args).status.code(), Some(1));
    let out = run(dir.path(), &["calibrate", "--setting", "5"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    for verb in ["fit", "predict", "cv", "simulate", "calibrate"] {
        let out = bin().args([verb, "--help"]).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{verb}");
    }
}

#[test]
fn cv_writes_report_and_model() {
    let dir = tempfile::tempdir().unwrap();
    training_csv(dir.path(), 40, 4);
    let out = run(
        dir.path(),
        &[
            "cv", "--data", "train.csv", "--cv", "3", "--grid-invlambda", "0.1,1", "--grid-sigma", "0.1,0.4", "--seed",
            "7", "--out", "cv.json", "--model-out", "m.json",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("selected inv_lambda"));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("cv.json")).unwrap()).unwrap();
    assert_eq!(report["pairs"].as_array().unwrap().len(), 4);
    assert!(dir.path().join("m.json").exists());
}

#[test]
fn simulate_smallest_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &[
            "simulate", "--settings", "1", "--ns", "50", "--reps", "1", "--methods", "cox-median", "--n-eval", "2000",
            "--calibration-draws", "100000", "--out", "b.csv", "--summary", "s.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("setting,n,rep,method,risk"));
    assert!(lines[1].starts_with("1,50,0,cox-median,"));
    assert!(dir.path().join("s.csv").exists());
}
