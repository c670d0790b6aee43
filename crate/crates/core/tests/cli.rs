//! End-to-end runs of the `sphconv` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use num_complex::Complex64;
use serde_json::Value;
use tempfile::TempDir;

use sphconv::io::{load_sph, load_spec, save_spec};
use sphconv::synth::random_bandlimited_signal;
use sphconv::{Bandwidth, SpectralCoeffs};

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sphconv"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok_json(args: &[&str], dir: &Path) -> Value {
    let out = run(args, dir);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn ok(args: &[&str], dir: &Path) {
    let out = run(args, dir);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

const TETRA: &str = "OFF\n4 4 0\n1 1 1\n1 -1 -1\n-1 1 -1\n-1 -1 1\n3 0 1 2\n3 0 3 1\n3 0 2 3\n3 1 3 2\n";

const NET: &str = r#"{
  "input_bandwidth": 8,
  "layers": [
    {"in_channels": 1, "out_channels": 4, "filter_mode": {"anchored": 3}, "pool": "sp", "nonlinearity": "relu"},
    {"in_channels": 4, "out_channels": 4, "filter_mode": {"anchored": 3}, "pool": "none", "nonlinearity": "relu"}
  ],
  "head": "wgap",
  "num_classes": 3,
  "architecture": {"kind": "single"},
  "sp_smoothing": false
}"#;

#[test]
fn transform_round_trip_through_files() {
    let dir = TempDir::new().unwrap();
    let f = random_bandlimited_signal(Bandwidth::new(16).unwrap(), 2, 3);
    sphconv::io::save_sph(dir.path().join("f.sph"), &f, sphconv::io::Dtype::F64).unwrap();
    ok(&["sft", "f.sph", "-o", "f.spec"], dir.path());
    ok(&["isft", "f.spec", "-o", "g.sph"], dir.path());
    let g = load_sph(dir.path().join("g.sph")).unwrap();
    assert!(g.max_abs_diff(&f) < 1e-9);
    ok(&["sft", "f.sph", "-o", "d.spec", "--method", "direct"], dir.path());
    let d = load_spec(dir.path().join("d.spec")).unwrap();
    assert!(d.max_abs_diff(&load_spec(dir.path().join("f.spec")).unwrap()) < 1e-9);
}

#[test]
fn convolution_and_pooling_commands() {
    let dir = TempDir::new().unwrap();
    let f = random_bandlimited_signal(Bandwidth::new(8).unwrap(), 1, 4);
    sphconv::io::save_sph(dir.path().join("f.sph"), &f, sphconv::io::Dtype::F32).unwrap();
    ok(&["sft", "f.sph", "-o", "f.spec"], dir.path());
    fs::write(
        dir.path().join("h.json"),
        r#"{"mode": "anchored", "bandwidth": 8, "degrees": [0, 7], "values": [1.0, 0.0]}"#,
    )
    .unwrap();
    ok(&["conv", "f.spec", "--filter", "h.json", "-o", "y.spec"], dir.path());
    assert_eq!(load_spec(dir.path().join("y.spec")).unwrap().bandwidth().get(), 8);
    for (input, kind) in [("f.spec", "sp"), ("f.sph", "sp"), ("f.sph", "wap"), ("f.sph", "max"), ("f.spec", "max")] {
        let out = format!("p_{kind}_{input}");
        ok(&["pool", input, "--kind", kind, "-o", &out], dir.path());
        let b = if input.ends_with("spec") {
            load_spec(dir.path().join(&out)).unwrap().bandwidth()
        } else {
            load_sph(dir.path().join(&out)).unwrap().bandwidth()
        };
        assert_eq!(b.get(), 4, "{kind} on {input}");
    }
}

#[test]
fn mesh_projection_is_reproducible() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("t.off"), TETRA).unwrap();
    let args = ["mesh2sphere", "t.off", "-b", "8", "-o", "a.sph", "--jitter", "0.1", "--rotate", "7"];
    let meta = ok_json(&args, dir.path());
    assert_eq!(meta["faces"], 4);
    let first = fs::read(dir.path().join("a.sph")).unwrap();
    ok(&args, dir.path());
    assert_eq!(first, fs::read(dir.path().join("a.sph")).unwrap());
    let s = load_sph(dir.path().join("a.sph")).unwrap();
    assert_eq!((s.bandwidth().get(), s.channels()), (8, 2));
}

#[test]
fn synth_train_infer_pipeline() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("net.json"), NET).unwrap();
    let synth = ["synth", "--kind", "blobs", "--classes", "3", "--count", "12", "--seed", "5", "-b", "8", "-o", "data"];
    ok(&synth, dir.path());
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("data/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["samples"].as_array().unwrap().len(), 12);
    let first = fs::read(dir.path().join("data/sample_00000.sph")).unwrap();
    ok(&synth, dir.path());
    assert_eq!(first, fs::read(dir.path().join("data/sample_00000.sph")).unwrap());

    let train = ["train", "--config", "net.json", "--data", "data", "--seed", "1", "--epochs", "2", "-o", "m.ckpt"];
    let log = ok_json(&train, dir.path());
    assert_eq!(log["epochs"].as_array().unwrap().len(), 2);
    let ckpt = fs::read(dir.path().join("m.ckpt")).unwrap();
    ok(&train, dir.path());
    assert_eq!(ckpt, fs::read(dir.path().join("m.ckpt")).unwrap(), "seeded training is deterministic");

    let pred = ok_json(&["infer", "data/sample_00001.sph", "--config", "net.json", "--net", "m.ckpt"], dir.path());
    let probs: Vec<f64> = pred["probabilities"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(probs.len(), 3);
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(pred["class"].as_u64().unwrap() < 3);
}

#[test]
fn align_reports_rotation_and_error() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("t.off"), TETRA).unwrap();
    let v = ok_json(&["align", "t.off", "t.off", "-b", "8", "--grid", "8", "--truth", "0,0,0"], dir.path());
    assert_eq!(v["rotation_zyz"].as_array().unwrap().len(), 3);
    assert!(v["angular_error"].as_f64().unwrap() < 1.0);
    assert_eq!(v["degenerate"], false);
}

#[test]
fn equivariance_report_zero_row() {
    let dir = TempDir::new().unwrap();
    let linear = NET.replace("\"relu\"", "\"none\"");
    let cfg = format!(
        r#"{{"rows": [{{"network": {linear}, "bandlimit": true}}], "stimuli": "smooth_signals", "samples": 3}}"#
    );
    fs::write(dir.path().join("eq.json"), cfg).unwrap();
    let out = run(&["equiv-report", "--config", "eq.json", "--seed", "4", "--table"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("16²/blim/lin/sp/untrained"));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    for e in v[0]["per_layer_error"].as_array().unwrap() {
        assert!(e.as_f64().unwrap() < 1e-6);
    }
}

#[test]
fn bench_reports_both_methods() {
    let v = ok_json(&["bench-sft", "--bandwidths", "8,16", "--reps", "2"], Path::new("."));
    let entries = v["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 2);
    assert!(entries[0]["direct_median_s"].as_f64().unwrap() > 0.0);
    assert!(entries[1]["sepvar_median_s"].as_f64().unwrap() > 0.0);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let here = dir.path();
    assert_eq!(run(&[], here).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"], here).status.code(), Some(1));
    assert_eq!(run(&["sft", "x.sph"], here).status.code(), Some(1), "missing -o");
    assert_eq!(run(&["mesh2sphere", "t.off", "-b", "0", "-o", "x"], here).status.code(), Some(1));
    assert_eq!(run(&["--help"], here).status.code(), Some(0));

    assert_eq!(run(&["sft", "missing.sph", "-o", "x.spec"], here).status.code(), Some(2));
    fs::write(here.join("bad.sph"), b"NOPE0000").unwrap();
    let out = run(&["sft", "bad.sph", "-o", "x.spec"], here);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty() && !out.stderr.is_empty());

    // A spectrum without conjugate symmetry has no real synthesis.
    let b = Bandwidth::new(4).unwrap();
    let mut c = SpectralCoeffs::zeros(b, 1);
    c.set(0, 2, 1, Complex64::new(1.0, 0.0));
    c.set_real_origin(false);
    save_spec(here.join("complex.spec"), &c).unwrap();
    assert_eq!(run(&["isft", "complex.spec", "-o", "y.sph"], here).status.code(), Some(3));
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("t.off"), TETRA).unwrap();
    ok(&["--threads", "1", "mesh2sphere", "t.off", "-b", "8", "-o", "one.sph"], dir.path());
    ok(&["--threads", "3", "mesh2sphere", "t.off", "-b", "8", "-o", "three.sph"], dir.path());
    assert_eq!(
        fs::read(dir.path().join("one.sph")).unwrap(),
        fs::read(dir.path().join("three.sph")).unwrap()
    );
}
