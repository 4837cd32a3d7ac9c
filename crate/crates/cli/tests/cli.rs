use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use eprsim::config::RunConfig;
use serde_json::Value;

fn eprsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eprsim")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let mut v = serde_json::to_value(RunConfig::reference()).unwrap();
    edit(&mut v);
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    path
}

fn small(v: &mut Value) {
    v["acquisition"]["n_frames"] = 300.into();
    v["acquisition"]["n_points"] = 1025.into();
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn predict_defaults() {
    let o = eprsim(&["predict", "--reproducible"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let p = &v["result"]["prediction"];
    assert!((p["eta_total"].as_f64().unwrap() - 0.714).abs() < 0.005);
    assert!((p["eta_meas"].as_f64().unwrap() - 0.7594).abs() < 1e-3);
}

#[test]
fn predict_unit_efficiency_without_squeezing_is_zero_db() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", |v| {
        let e = &mut v["experiment"];
        for k in ["eta_state", "eta_opa", "eta_hd", "eta_extra"] {
            e[k] = 1.0.into();
        }
        e["r0"] = 0.0.into();
        v["target_squeezing_db"] = Value::Null;
    });
    let o = eprsim(&["predict", "--config", s(&cfg), "--reproducible"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    for c in v["result"]["prediction"]["combos"].as_array().unwrap() {
        assert!(c["low_frequency_db"].as_f64().unwrap().abs() < 1e-9, "{c}");
    }
}

#[test]
fn sweep_is_monotone_in_gain() {
    let o = eprsim(&["sweep-gain", "--gains", "0,5,10,15,20,25,30"]);
    assert_eq!(code(&o), 0);
    let mut r = csv::Reader::from_reader(&o.stdout[..]);
    let h = r.headers().unwrap().clone();
    let col = |name: &str| h.iter().position(|c| c == name).unwrap();
    let (em, xm) = (col("eta_meas"), col("x_minus_db"));
    let rows: Vec<(f64, f64)> = r
        .records()
        .map(|rec| {
            let rec = rec.unwrap();
            (rec[em].parse().unwrap(), rec[xm].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 7);
    for w in rows.windows(2) {
        assert!(w[1].0 > w[0].0);
        assert!(w[1].1 < w[0].1);
    }
}

#[test]
fn simulate_then_analyze_matches_prediction() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", small);
    let frames = dir.path().join("frames");
    let o = eprsim(&["simulate", "--config", s(&cfg), "--out", s(&frames)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("analysis");
    let o = eprsim(&["analyze", "--config", s(&cfg), "--frames", s(&frames), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&out.join("report.json"));
    assert!(out.join("autocorrelation.csv").exists());

    let o = eprsim(&["predict", "--config", s(&cfg), "--reproducible"]);
    let pred: Value = serde_json::from_slice(&o.stdout).unwrap();
    let combos = pred["result"]["prediction"]["combos"].as_array().unwrap();
    for c in report["result"]["combos"].as_array().unwrap() {
        let p = combos.iter().find(|p| p["label"] == c["label"]).unwrap();
        let got = c["noise_power_db"].as_f64().unwrap();
        let want = p["pointwise_db"].as_f64().unwrap();
        assert!((got - want).abs() < 0.15, "{}: {got} vs {want}", c["label"]);
    }
}

#[test]
fn reproducible_output_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", |v| {
        v["acquisition"]["n_frames"] = 20.into();
        v["acquisition"]["n_points"] = 513.into();
    });
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = eprsim(&["report", "--config", s(&cfg), "--out", s(&out), "--seed", "7", "--reproducible"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out.join("report.json")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn empty_frames_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", |v| {
        v["acquisition"]["n_frames"] = 4.into();
        v["acquisition"]["n_points"] = 128.into();
    });
    let frames = dir.path().join("frames");
    let o = eprsim(&["simulate", "--config", s(&cfg), "--out", s(&frames)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::write(frames.join(eprsim_cli::SHOT_FILE), b"").unwrap();
    let o = eprsim(&["analyze", "--config", s(&cfg), "--frames", s(&frames)]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&eprsim(&["analyze", "--frames", s(&dir.path().join("missing"))])), 4);
}

#[test]
fn mismatched_sample_rate_is_a_model_error() {
    let dir = tempfile::tempdir().unwrap();
    let tiny = |fs: f64| {
        move |v: &mut Value| {
            v["acquisition"]["n_frames"] = 4.into();
            v["acquisition"]["n_points"] = 128.into();
            v["acquisition"]["fs_hz"] = fs.into();
        }
    };
    let a = write_config(dir.path(), "a.json", tiny(256e9));
    let b = write_config(dir.path(), "b.json", tiny(128e9));
    let fa = dir.path().join("fa");
    let fb = dir.path().join("fb");
    let o = eprsim(&["simulate", "--config", s(&a), "--out", s(&fa)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = eprsim(&["simulate", "--config", s(&b), "--out", s(&fb)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::copy(fb.join(eprsim_cli::SHOT_FILE), fa.join(eprsim_cli::SHOT_FILE)).unwrap();
    let o = eprsim(&["analyze", "--config", s(&a), "--frames", s(&fa)]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn bad_configs_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_config(dir.path(), "u.json", |v| v["bogus"] = 1.into());
    assert_eq!(code(&eprsim(&["predict", "--config", s(&unknown)])), 2);
    let bad_eta = write_config(dir.path(), "e.json", |v| v["experiment"]["eta_hd"] = 1.5.into());
    assert_eq!(code(&eprsim(&["predict", "--config", s(&bad_eta)])), 2);
    assert_eq!(code(&eprsim(&["predict", "--no-such-flag"])), 2);
}

#[test]
fn fit_recovers_sweep_efficiencies() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = dir.path().join("sweep");
    assert_eq!(code(&eprsim(&["sweep-gain", "--out", s(&sweep)])), 0);
    let out = dir.path().join("fit");
    let o = eprsim(&[
        "fit",
        "--observations",
        s(&sweep.join("sweep.csv")),
        "--r0",
        "1.1708483195764015",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let f = &read_json(&out.join("fit.json"))["result"];
    assert!((f["eta_pre"].as_f64().unwrap() - 0.94 * 0.767).abs() < 1e-3, "{f}");
    assert!((f["eta_post"].as_f64().unwrap() - 0.36 * 2.0 / 3.0).abs() < 1e-3, "{f}");
}
