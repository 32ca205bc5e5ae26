use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn cfg(name: &str) -> String {
    configs().join(name).to_string_lossy().into_owned()
}

fn serpent(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_serpent"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("SERPENT_OUT")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn target_follow_rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["sim2d", "--config", &cfg("fig3.cfg"), "--scenario", "target", "--seed", "7"];
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(serpent(&args, &a).status.code(), Some(0));
    assert_eq!(serpent(&args, &b).status.code(), Some(0));
    for f in ["trajectory.csv", "metrics.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let head = std::fs::read_to_string(a.join("trajectory.csv")).unwrap();
    assert!(head.starts_with("t,seg,x,y,theta\n"));
}

#[test]
fn progress_is_json_lines() {
    let tmp = tempfile::tempdir().unwrap();
    let o = serpent(&["sim2d", "--config", &cfg("open.cfg"), "--scenario", "target", "--seed", "1"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(!stdout.is_empty());
    for line in stdout.lines() {
        serde_json::from_str::<Value>(line).unwrap_or_else(|e| panic!("{line}: {e}"));
    }
}

#[test]
fn missing_target_is_invalid_input() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("no_target.cfg");
    std::fs::write(&path, "[world]\nbounds = [0.0, 0.0, 5.0, 5.0]\n").unwrap();
    let o = serpent(
        &["sim2d", "--config", path.to_str().unwrap(), "--scenario", "target", "--seed", "0"],
        &tmp.path().join("out"),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("world.target"), "{}", stderr(&o));
}

#[test]
fn missing_config_file_is_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = serpent(&["sim2d", "--config", "/nonexistent/x.cfg", "--scenario", "random"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn zero_duration_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let o = serpent(&["dyn3d", "--gait", &cfg("dyn3d.cfg"), "--duration", "0"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unstable_timestep_reports_the_bound() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("dt.cfg");
    std::fs::write(&path, "[dyn3d]\ndt = 1e-3\n").unwrap();
    let o = serpent(&["dyn3d", "--gait", path.to_str().unwrap()], &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("dyn3d.dt") && err.contains("7.745967e-4"), "{err}");
}

#[test]
fn reversed_sweep_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let o = serpent(&["lattice", "--sweep", "beta_scale=2:1:3"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("reversed"), "{}", stderr(&o));
}

#[test]
fn uncoupled_sweep_keeps_initial_order_parameter() {
    let tmp = tempfile::tempdir().unwrap();
    let o = serpent(
        &["lattice", "--config", &cfg("lattice_homogeneous.cfg"), "--sweep", "beta_scale=0:0:1", "--seed", "5"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut rows = csv::Reader::from_path(tmp.path().join("sweep.csv")).unwrap();
    let row = rows.records().next().unwrap().unwrap();
    let r: f64 = row[2].parse().unwrap();
    // identical free oscillators rotate rigidly, so r stays at its initial value
    let ls = serpent::load_config(cfg("lattice_homogeneous.cfg")).unwrap().lattice;
    let init = ls.initial_phases(5);
    let (c, s) = init.iter().fold((0.0, 0.0), |(c, s), p| (c + p.cos(), s + p.sin()));
    let expected = c.hypot(s) / init.len() as f64;
    assert!((r - expected).abs() < 1e-9, "{r} vs {expected}");
}

#[test]
fn sealed_target_exhausts_budget_but_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let o = serpent(&["sim2d", "--config", &cfg("sealed.cfg"), "--scenario", "target", "--seed", "0"], tmp.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(tmp.path().join("trajectory.csv").is_file());
    let m = json(tmp.path().join("metrics.json"));
    assert!(m["time_to_target"].is_null(), "{m}");
}

#[test]
fn manifest_records_config_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let path = cfg("open.cfg");
    let o = serpent(&["sim2d", "--config", &path, "--scenario", "target", "--seed", "2"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m = json(tmp.path().join("manifest.json"));
    let expected = serpent::output::sha256_hex(&std::fs::read(&path).unwrap());
    assert_eq!(m["config"]["sha256"], Value::String(expected));
    assert_eq!(m["seeds"], serde_json::json!([2]));
}

#[test]
fn compare_target_against_random_batches() {
    let tmp = tempfile::tempdir().unwrap();
    let rw = tmp.path().join("rw");
    let tf = tmp.path().join("tf");
    let seeds = "0..6";
    let a = serpent(&["sim2d", "--config", &cfg("fig3.cfg"), "--scenario", "random", "--seed", seeds], &rw);
    assert!(matches!(a.status.code(), Some(0 | 3)), "{}", stderr(&a));
    let b = serpent(&["sim2d", "--config", &cfg("fig3.cfg"), "--scenario", "target", "--seed", seeds], &tf);
    assert_eq!(b.status.code(), Some(0), "{}", stderr(&b));
    let out = tmp.path().join("cmp");
    let c = serpent(
        &["compare", rw.to_str().unwrap(), tf.to_str().unwrap()],
        &out,
    );
    assert_eq!(c.status.code(), Some(0), "{}", stderr(&c));
    let cmp = json(out.join("comparison.json"));
    assert_eq!(cmp["seeds"].as_array().unwrap().len(), 6);
    assert_eq!(cmp["candidate_reached"], 6);
    assert_eq!(cmp["candidate_collisions"], 0);
    assert!(cmp["baseline_reached"].as_u64().unwrap() <= 6);
}
