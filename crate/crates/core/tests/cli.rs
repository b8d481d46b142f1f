use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use chansbgm::pipeline::{load_batch, load_dataset, load_model};

const BIN: &str = env!("CARGO_BIN_EXE_chansbgm");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_simo(dir: &Path, samples: usize) -> std::path::PathBuf {
    let cfg = dir.join("synth.json");
    fs::write(
        &cfg,
        format!(r#"{{"kind": "simo", "samples": {samples}, "antennas": 8, "grid_size": 32, "quadrature_points": 256}}"#),
    )
    .unwrap();
    let out = dir.join("data");
    ok(&["synth", "--config", s(&cfg), "--seed", "11", "--out", s(&out)]);
    out
}

#[test]
fn single_sample_smoke_run() {
    let tmp = tempfile::tempdir().unwrap();
    let data = small_simo(tmp.path(), 1);
    let d = load_dataset(&data).unwrap();
    assert_eq!(d.channels.len(), 1);
    assert_eq!(d.observations.len(), 1);
    assert_eq!(d.ground_truth.unwrap().len(), 1);
}

#[test]
fn full_pipeline_and_file_contracts() {
    let tmp = tempfile::tempdir().unwrap();
    let data = small_simo(tmp.path(), 80);
    let model = tmp.path().join("model");
    ok(&["fit", "--dataset", s(&data), "--K", "3", "--max-iters", "30", "--seed", "2", "--out", s(&model)]);
    let (m, _) = load_model(&model).unwrap();
    assert_eq!(m.components(), 3);
    let trace = fs::read_to_string(model.join("em_trace.csv")).unwrap();
    assert!(trace.lines().count() > 2);

    let batch = tmp.path().join("batch");
    ok(&["generate", "--model", s(&model), "--n", "25", "--p-max", "3", "--render", "--seed", "4", "--out", s(&batch)]);
    let (b, _) = load_batch(&batch).unwrap();
    assert_eq!(b.len(), 25);
    assert!(b.channels.is_some());
    assert!(b.params.iter().all(|v| v.iter().filter(|z| z.norm() > 0.0).count() <= 3));

    let report = tmp.path().join("report");
    ok(&["metrics", "--batch", s(&batch), "--reference", s(&data), "--out", s(&report)]);
    let profile = fs::read_to_string(report.join("profile.csv")).unwrap();
    assert_eq!(profile.lines().count(), 1 + 32);
    let total: f64 = profile.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(report.join("metrics.json")).unwrap()).unwrap();
    assert!(json["spread_w1_rad"].as_f64().unwrap() >= 0.0);

    let own = tmp.path().join("own");
    ok(&["metrics", "--batch", s(&batch), "--reference", s(&batch), "--out", s(&own)]);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(own.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(json["leakage"].as_f64().unwrap(), 0.0);
}

#[test]
fn refit_is_bit_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let data = small_simo(tmp.path(), 60);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        ok(&["fit", "--dataset", s(&data), "--K", "2", "--max-iters", "20", "--seed", "9", "--out", s(out)]);
    }
    for f in ["model.json", "model.bin", "em_trace.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn empty_generation_is_a_valid_batch() {
    let tmp = tempfile::tempdir().unwrap();
    let data = small_simo(tmp.path(), 30);
    let model = tmp.path().join("model");
    ok(&["fit", "--dataset", s(&data), "--K", "1", "--max-iters", "5", "--out", s(&model)]);
    let batch = tmp.path().join("batch");
    ok(&["generate", "--model", s(&model), "--n", "0", "--out", s(&batch)]);
    assert_eq!(load_batch(&batch).unwrap().0.len(), 0);
}

#[test]
fn kronecker_models_store_factor_variances() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("ofdm.json");
    fs::write(&cfg, r#"{"kind": "ofdm", "samples": 40, "doppler_grid": 8, "delay_grid": 10}"#).unwrap();
    let data = tmp.path().join("data");
    ok(&["synth", "--config", s(&cfg), "--seed", "3", "--out", s(&data)]);
    let model = tmp.path().join("model");
    ok(&["fit", "--dataset", s(&data), "--K", "2", "--variance-form", "kronecker", "--max-iters", "5", "--out", s(&model)]);
    let bin = fs::metadata(model.join("model.bin")).unwrap().len();
    assert_eq!(bin, 8 * (2 + 2 * (8 + 10)));
}

#[test]
fn errors_map_to_exit_codes() {
    assert_eq!(run(&["fit"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing");
    let out = run(&["fit", "--dataset", s(&missing), "--out", s(&tmp.path().join("m"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    let data = small_simo(tmp.path(), 10);
    let out = run(&["fit", "--dataset", s(&data), "--model", "msbl", "--K", "3", "--out", s(&tmp.path().join("m"))]);
    assert_eq!(out.status.code(), Some(1));

    let model = tmp.path().join("model");
    ok(&["fit", "--dataset", s(&data), "--K", "1", "--max-iters", "2", "--out", s(&model)]);
    let batch = tmp.path().join("batch");
    ok(&["generate", "--model", s(&model), "--n", "3", "--out", s(&batch)]);
    let out = run(&["metrics", "--batch", s(&batch), "--channel-metrics", "--out", s(&tmp.path().join("r"))]);
    assert_eq!(out.status.code(), Some(1));

    let swap = tmp.path().join("swap.json");
    fs::write(&swap, r#"{"variant": "ofdm", "subcarriers": 20, "symbols": 18, "subcarrier_spacing": 60000.0, "symbol_duration": 0.000285714}"#).unwrap();
    let out = run(&["generate", "--model", s(&model), "--n", "3", "--render", "--swap-config", s(&swap), "--out", s(&tmp.path().join("g"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn selfcheck_passes() {
    let out = ok(&["selfcheck"]);
    assert!(out.lines().count() >= 5);
    assert!(!out.contains("FAILED"));
}
