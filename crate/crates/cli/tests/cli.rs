use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn xxz(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xxz"))
        .args(args)
        .arg("--out")
        .arg(dir.join("out"))
        .env_remove("XXZ_CACHE_DIR")
        .output()
        .expect("binary runs")
}

fn record(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON record")
}

#[test]
fn onepoint_at_time_zero_is_a_unit_mass() {
    let dir = tempfile::tempdir().unwrap();
    let out = xxz(dir.path(), &["onepoint", "--t", "0", "--y", "3,5", "--x-min", "0", "--x-max", "6"]);
    assert_eq!(out.status.code(), Some(0));
    let rec = record(&out);
    for e in rec["entries"].as_array().unwrap() {
        let expected = if e["x"] == 3 { 1.0 } else { 0.0 };
        assert!((e["value"].as_f64().unwrap() - expected).abs() < 1e-9, "{e}");
    }
}

#[test]
fn boiden_columns_agree() {
    let dir = tempfile::tempdir().unwrap();
    let out = xxz(dir.path(), &["freefermion", "--boiden", "--t", "1", "--x", "-1"]);
    assert_eq!(out.status.code(), Some(0));
    let e = &record(&out)["entries"][0];
    assert!((e["value"].as_f64().unwrap() - e["toeplitz"].as_f64().unwrap()).abs() < 1e-10);

    let csv = std::fs::read_dir(dir.path().join("out"))
        .unwrap()
        .map(|f| f.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "csv"))
        .unwrap();
    let text = std::fs::read_to_string(csv).unwrap();
    assert!(text.starts_with("x,value,abs_error,difference,toeplitz\n"));
}

#[test]
fn verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = xxz(dir.path(), &["verify"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(record(&out)["passed"], true);
}

#[test]
fn cache_hit_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let args = ["onepoint", "--t", "0.7", "--x-min", "-2", "--x-max", "2", "--cache-dir", cache.to_str().unwrap()];
    let first = xxz(dir.path(), &args);
    let second = xxz(dir.path(), &args);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(std::fs::read_dir(&cache).unwrap().count(), 1);

    // worker count is not part of the run id
    let third = xxz(dir.path(), &[&args[..], &["--workers", "2"]].concat());
    assert_eq!(first.stdout, third.stdout);
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.cfg");
    std::fs::write(&file, "# step initial state\ndelta = -0.4\nt = 0.5\ny = 1,2\nx_min = 0\nx_max = 1\n").unwrap();
    let out = xxz(dir.path(), &["onepoint", "--config", file.to_str().unwrap(), "--set", "x_max=3"]);
    assert_eq!(out.status.code(), Some(0));
    let rec = record(&out);
    assert_eq!(rec["params"]["delta"], -0.4);
    assert_eq!(rec["entries"].as_array().unwrap().len(), 4);
}

#[test]
fn bad_config_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.cfg");
    std::fs::write(&file, "delta = 0.5\ncolour = red\n").unwrap();
    let out = xxz(dir.path(), &["onepoint", "--config", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(record(&out)["error"]["kind"], "invalid_config");

    assert_eq!(xxz(dir.path(), &["onepoint", "--y", "2,1"]).status.code(), Some(4));
    assert_eq!(xxz(dir.path(), &["onepoint", "--method", "magic"]).status.code(), Some(4));
    assert_eq!(xxz(dir.path(), &["nonsense"]).status.code(), Some(4));
}

#[test]
fn out_of_range_series_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = xxz(dir.path(), &["series", "--t", "5", "--x", "0"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn plot_rebuilds_artifacts_from_a_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = xxz(dir.path(), &["oracle", "--t", "0.5", "--particle", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let json = dir.path().join("saved.json");
    std::fs::write(&json, &out.stdout).unwrap();
    let plot = xxz(dir.path(), &["plot", "--input", json.to_str().unwrap()]);
    assert_eq!(plot.status.code(), Some(0));
    let svg = std::fs::read_to_string(dir.path().join("out/saved.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count(), record(&out)["entries"].as_array().unwrap().len());
}
