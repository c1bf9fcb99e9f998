use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mrc_core::dataio::write_libsvm;
use mrc_core::synth::{gaussian_classes, GaussianSpec};

fn mrc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mrc"))
        .args(args)
        .env_remove("MRC_EPS1")
        .output()
        .expect("spawn mrc")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn data(dir: &Path, name: &str, n: usize, d: usize, seed: u64) -> PathBuf {
    let ds = gaussian_classes(&GaussianSpec {
        n,
        d,
        n_classes: 3,
        separation: 2.0,
        seed,
    })
    .unwrap();
    let p = dir.join(name);
    write_libsvm(&ds, &p).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn no_arguments_is_a_usage_error() {
    assert_eq!(code(&mrc(&[])), 2);
    assert_eq!(code(&mrc(&["train", "--data", "x.svm"])), 2);
}

#[test]
fn bad_option_values_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let train = data(dir.path(), "t.svm", 60, 3, 1);
    let out = dir.path().join("m.json");
    let o = mrc(&["train", "--data", s(&train), "--out", s(&out), "--eps1", "-1"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    let o = Command::new(env!("CARGO_BIN_EXE_mrc"))
        .args(["train", "--data", s(&train), "--out", s(&out)])
        .env("MRC_EPS1", "abc")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
}

#[test]
fn train_predict_evaluate_round() {
    let dir = tempfile::tempdir().unwrap();
    let train = data(dir.path(), "train.svm", 150, 4, 2);
    let test = data(dir.path(), "test.svm", 40, 4, 3);
    let model = dir.path().join("model.json");
    let trace = dir.path().join("trace.csv");
    let report = dir.path().join("report.json");
    let o = mrc(&[
        "train", "--data", s(&train), "--out", s(&model), "--trace", s(&trace), "--report", s(&report),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("certificate:"));
    let t = fs::read_to_string(&trace).unwrap();
    assert!(t.starts_with("k,R_k,num_constraints,num_features,eps1_hat,eps2_hat,wall_seconds\n"));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert!(r["worst_case_risk"].as_f64().unwrap() > 0.0);
    assert!(r["wall_seconds"].is_null());

    let preds = dir.path().join("p.csv");
    let o = mrc(&["predict", "--model", s(&model), "--data", s(&test), "--out", s(&preds)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let p = fs::read_to_string(&preds).unwrap();
    let mut lines = p.lines();
    assert_eq!(lines.next(), Some("row_index,predicted_label,score_margin"));
    assert_eq!(lines.count(), 40);

    let o = mrc(&["evaluate", "--model", s(&model), "--data", s(&test)]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.starts_with("CE = "), "{out}");
    assert!(out.contains("R  = ") && out.contains("CE <= R: "));

    let o = mrc(&["evaluate", "--model", s(&model), "--data", s(&test), "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["n_samples"], 40);
}

#[test]
fn outputs_are_reproducible_without_timings() {
    let dir = tempfile::tempdir().unwrap();
    let train = data(dir.path(), "train.svm", 120, 3, 4);
    let run = |tag: &str| {
        let m = dir.path().join(format!("m{tag}.json"));
        let t = dir.path().join(format!("t{tag}.csv"));
        let r = dir.path().join(format!("r{tag}.json"));
        let o = mrc(&[
            "train", "--data", s(&train), "--features", "rff", "--rff-dim", "30", "--seed", "9", "--out", s(&m), "--trace",
            s(&t), "--report", s(&r),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        [m, t, r].map(|p| fs::read(p).unwrap())
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn mismatched_dimension_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let train = data(dir.path(), "train.svm", 60, 3, 5);
    let wide = data(dir.path(), "wide.svm", 20, 5, 6);
    let model = dir.path().join("m.json");
    assert_eq!(code(&mrc(&["train", "--data", s(&train), "--out", s(&model)])), 0);
    let o = mrc(&["predict", "--model", s(&model), "--data", s(&wide)]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("error:"));
}

#[test]
fn missing_output_directory_fails_before_training() {
    let dir = tempfile::tempdir().unwrap();
    let train = data(dir.path(), "train.svm", 60, 3, 7);
    let out = dir.path().join("nope").join("m.json");
    let o = mrc(&["train", "--data", s(&train), "--out", s(&out)]);
    assert_eq!(code(&o), 3);
    assert!(stdout(&o).is_empty());
}

#[test]
fn missing_input_and_bad_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.json");
    assert_eq!(code(&mrc(&["train", "--data", "/nonexistent.svm", "--out", s(&out)])), 3);
    let bogus = dir.path().join("bogus.json");
    fs::write(&bogus, "{\"format_version\": \"other\"}").unwrap();
    let d = data(dir.path(), "d.svm", 10, 2, 8);
    assert_eq!(code(&mrc(&["evaluate", "--model", s(&bogus), "--data", s(&d)])), 3);
}

#[test]
fn baseline_respects_cap() {
    let dir = tempfile::tempdir().unwrap();
    let d = data(dir.path(), "d.svm", 30, 2, 9);
    let o = mrc(&["baseline", "--data", s(&d), "--json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["num_constraints"], 210);
    // 30 · 7 = 210 rows exceeds a cap of 100.
    let o = mrc(&["baseline", "--data", s(&d), "--cap", "100"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn bench_writes_table() {
    let o = mrc(&["bench", "--samples", "40,60", "--classes", "2", "--dim", "3", "--no-timings"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "setting,method,wall_seconds,R,AE");
    assert_eq!(lines.len(), 5);
    assert!(lines[2].contains(",full_lp,0.000000,"));
}
