use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use symlab::io::{read_tensor, write_tensor};
use symlab::Tensor;

fn symlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symlab"))
        .current_dir(dir)
        .env_remove("SYMLAB_WORKERS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn ising_default_run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = symlab(dir.path(), &["--out", "a", "--seed", "9", "ising"]);
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    let b = symlab(dir.path(), &["--out", "b", "--seed", "9", "ising"]);
    assert_eq!(code(&b), 0);
    for f in ["ising_h0.csv", "ising_h0.45.csv", "resolved_config.json"] {
        let x = fs::read(dir.path().join("a").join(f)).unwrap();
        assert_eq!(x, fs::read(dir.path().join("b").join(f)).unwrap(), "{f}");
    }
    let csv = fs::read_to_string(dir.path().join("a/ising_h0.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1001);
    let snap: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("a/resolved_config.json")).unwrap()).unwrap();
    assert_eq!(snap["config"]["side"], 5);
    assert_eq!(snap["config"]["seed"], 9);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&symlab(dir.path(), &["ising", "--side", "1"])), 2);
    fs::write(dir.path().join("bad.json"), r#"{"side": 4, "colour": 1}"#).unwrap();
    let out = symlab(dir.path(), &["--config", "bad.json", "ising"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("colour"));
    assert_eq!(code(&symlab(dir.path(), &["--config", "missing.json", "ising"])), 2);
    assert_eq!(code(&symlab(dir.path(), &["frobnicate"])), 2);
    assert_eq!(code(&symlab(dir.path(), &["--workers", "0", "ising"])), 2);
}

#[test]
fn expand_scales_images_and_warns_on_large_factors() {
    let dir = tempfile::tempdir().unwrap();
    let img = Tensor::new(vec![32, 32, 3], (0..3072).map(|i| i as f64 / 3072.0).collect()).unwrap();
    write_tensor(&dir.path().join("img.f64"), &img).unwrap();

    let out = symlab(dir.path(), &["--out", "x", "expand", "--input", "img.f64", "--factor", "2"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let big = read_tensor(&dir.path().join("x/expanded_k2_fill0.5.f64")).unwrap();
    assert_eq!(big.shape(), [64, 64, 3]);
    assert_eq!(big.at(&[2, 4, 1]), img.at(&[1, 2, 1]));
    assert_eq!(big.at(&[1, 0, 0]), 0.5);
    assert!(!stderr(&out).contains("warning"));

    let out = symlab(
        dir.path(),
        &["--out", "y", "expand", "--input", "img.f64", "--factor", "5", "--first-kernel", "3"],
    );
    assert_eq!(code(&out), 0);
    assert!(stderr(&out).contains("warning"));

    let out = symlab(dir.path(), &["--out", "z", "expand", "--input", "img.f64", "--factor", "0"]);
    assert_eq!(code(&out), 2);

    let out = symlab(
        dir.path(),
        &["--out", "s", "expand", "--input", "img.f64", "--factor", "1", "--factor", "3", "--fill", "0", "--fill", "random"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let sweep = fs::read_to_string(dir.path().join("s/sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 5);
    assert!(dir.path().join("s/expanded_k3_random.f64").exists());
}

#[test]
fn malformed_tensor_files_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let img = Tensor::new(vec![2, 2, 1], vec![1.0; 4]).unwrap();
    write_tensor(&dir.path().join("img.f64"), &img).unwrap();
    fs::write(dir.path().join("img.f64"), [0u8; 13]).unwrap();
    let out = symlab(dir.path(), &["expand", "--input", "img.f64"]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn enumerate_is_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let one = symlab(dir.path(), &["--out", "w1", "--workers", "1", "enumerate"]);
    assert_eq!(code(&one), 0, "{}", stderr(&one));
    let four = symlab(dir.path(), &["--out", "w4", "--workers", "4", "enumerate"]);
    assert_eq!(code(&four), 0);
    let names: Vec<_> = fs::read_dir(dir.path().join("w1"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(names.len(), 12);
    for name in names {
        if name == "resolved_config.json" {
            continue;
        }
        let a = fs::read(dir.path().join("w1").join(&name)).unwrap();
        assert_eq!(a, fs::read(dir.path().join("w4").join(&name)).unwrap(), "{name:?}");
    }
    let head = fs::read_to_string(dir.path().join("w1/convnet_baseline.csv")).unwrap();
    assert!(head.starts_with("rank,loss,multiplicity_group_id\n"));
    let cmp: serde_json::Value = serde_json::from_slice(
        &fs::read(dir.path().join("w1/compare_convnet_equivariant_vs_convnet_wrong_equivariant.json")).unwrap(),
    )
    .unwrap();
    assert!(cmp["min_loss_b"].as_f64() > cmp["min_loss_a"].as_f64());
}

#[test]
fn enumerate_config_runs_named_specs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{
        "runs": [
            {"name": "raw", "spec": {"family": "scalar_net", "variant": "raw"}, "data": {"kind": "scalar_grid", "m": 8}},
            {"name": "bias", "spec": {"family": "scalar_net", "variant": "raw", "bias": "enumerated_first_layer"}, "data": {"kind": "scalar_grid", "m": 8}}
        ],
        "compare": [["raw", "bias"]]
    }"#;
    fs::write(dir.path().join("e.json"), cfg).unwrap();
    let out = symlab(dir.path(), &["--config", "e.json", "--out", "e", "enumerate"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(dir.path().join("e/compare_raw_vs_bias.json").exists());
    let bad = cfg.replace("\"bias\"]", "\"nope\"]");
    fs::write(dir.path().join("bad.json"), bad).unwrap();
    assert_eq!(code(&symlab(dir.path(), &["--config", "bad.json", "enumerate"])), 2);
}

#[test]
fn qcd_eos_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let out = symlab(dir.path(), &["--out", "q", "qcd", "eos"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("q/eos.csv")).unwrap();
    assert!(csv.starts_with("T_GeV,P_over_T4,eps_over_T4,s_over_T3\n"));
    assert_eq!(csv.lines().count(), 42);

    fs::write(
        dir.path().join("fit.json"),
        r#"{"fit": {"optimizer": {"kind": "adam", "lr": 0.01}, "epochs": 5, "seed": 0}}"#,
    )
    .unwrap();
    let out = symlab(dir.path(), &["--config", "fit.json", "--out", "f", "qcd", "fit", "--target", "q/eos.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("f/fit_report.json")).unwrap()).unwrap();
    assert_eq!(report["raw"]["rows"].as_array().unwrap().len(), 41);
    assert_eq!(report["expanded"]["loss_trace"].as_array().unwrap().len(), 5);
    let mae = fs::read_to_string(dir.path().join("f/mae.csv")).unwrap();
    assert!(mae.starts_with("T_GeV,raw_abs_error,expanded_abs_error\n"));

    assert_eq!(code(&symlab(dir.path(), &["qcd", "fit", "--target", "absent.csv"])), 2);
    fs::write(dir.path().join("junk.csv"), "T_GeV,P_over_T4,eps_over_T4\n0.2,abc,1\n").unwrap();
    assert_eq!(code(&symlab(dir.path(), &["qcd", "fit", "--target", "junk.csv"])), 3);
}

#[test]
fn replica_reports_and_cache() {
    let dir = tempfile::tempdir().unwrap();
    let spec = |arch: &str| {
        format!(
            r#"{{"arch": "{arch}", "dataset": {{"kind": "bars", "n": 30, "test_n": 30, "seed": 1}},
                "seeds": [1, 2, 3], "train": {{"optimizer": {{"kind": "adam", "lr": 0.01}}, "epochs": 2, "batch_size": 10}}}}"#
        )
    };
    let cfg = format!(r#"{{"specs": [{}, {}]}}"#, spec("simple_cnn"), spec("flip_equivariance_cnn"));
    fs::write(dir.path().join("r.json"), cfg).unwrap();
    let out = symlab(dir.path(), &["--config", "r.json", "--out", "r", "replica"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let table = fs::read_to_string(dir.path().join("r/comparison.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("r/reports/simple_cnn.json")).unwrap()).unwrap();
    assert_eq!(report["distances"].as_array().unwrap().len(), 3);
    assert_eq!(report["spec_hash"].as_str().unwrap().len(), 64);
    let cached = fs::read_dir(dir.path().join("r/cache")).unwrap().count();
    assert_eq!(cached, 2);

    let again = symlab(dir.path(), &["--config", "r.json", "--out", "r", "replica"]);
    assert_eq!(code(&again), 0);
    assert_eq!(fs::read_to_string(dir.path().join("r/comparison.csv")).unwrap(), table);
}
