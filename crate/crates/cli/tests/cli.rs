use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rydberg-gate"));
    cmd.env_remove("RYDBERG_GATE_ATOMIC_DATA");
    cmd
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn bundled_table() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/rb87.toml")
}

fn manifest(path: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(path).unwrap();
    let line = text.lines().next().unwrap().strip_prefix("# manifest: ").expect("manifest line");
    serde_json::from_str(line).unwrap()
}

#[test]
fn basis_output_and_overwrite_guard() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["basis", "--out", "b.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("165 states"));
    let text = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 1 + 165);
    let m = manifest(&dir.path().join("b.csv"));
    assert_eq!(m["command"], "basis");
    assert_eq!(m["basis_fingerprints"].as_array().unwrap().len(), 1);

    let again = run(dir.path(), &["basis", "--out", "b.csv"]);
    assert_eq!(again.status.code(), Some(4));
    let forced = run(dir.path(), &["basis", "--out", "b.csv", "--force"]);
    assert!(forced.status.success());

    let pair = run(dir.path(), &["basis", "--pattern", "r_g_r", "--out", "p.csv"]);
    assert!(pair.status.success());
    assert!(String::from_utf8_lossy(&pair.stdout).contains("26 states"));
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["phases", "--pattern", "r_x_r"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["basis", "--workers", "0"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["truth-table", "--tau", "1000"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["scan", "--E-min", "0.2", "--E-max", "0.1"]).status.code(), Some(2));
    std::fs::write(dir.path().join("bad.toml"), "unknown_key = 1\n").unwrap();
    assert_eq!(run(dir.path(), &["basis", "--config", "bad.toml"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["no-such-command"]).status.code(), Some(2));
}

#[test]
fn missing_atomic_data_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["--atomic-data", "missing.toml", "basis"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.toml"));
}

#[test]
fn atomic_data_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("table.toml");
    let text = std::fs::read_to_string(bundled_table()).unwrap();
    std::fs::write(&table, text.replace("rb87-2024.1", "custom-table")).unwrap();
    let out = bin()
        .current_dir(dir.path())
        .env("RYDBERG_GATE_ATOMIC_DATA", &table)
        .args(["basis", "--out", "b.csv"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(&dir.path().join("b.csv"));
    assert_eq!(m["atomic_data_version"], "custom-table");
}

#[test]
fn truth_table_outputs_are_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.csv", "b.csv"] {
        let out = run(dir.path(), &["truth-table", "--out", name]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for ext in ["csv", "json"] {
        let a = std::fs::read(dir.path().join(format!("a.{ext}"))).unwrap();
        let b = std::fs::read(dir.path().join(format!("b.{ext}"))).unwrap();
        assert_eq!(a, b);
    }
    let csv = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2 + 64);
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("a.json")).unwrap()).unwrap();
    assert_eq!(json["data"]["responses"].as_array().unwrap().len(), 8);
    assert_eq!(json["data"]["operating_point"]["magnetic_g"], 3.5);
    assert!(json["manifest"]["magnetic_field_convention"].as_str().unwrap().contains("antiparallel"));
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "decay = false\n[point]\nspacing_um = 25.0\n[scan]\nelectric_min = 0.114\nelectric_max = 0.120\npoints = 7\n",
    )
    .unwrap();
    let out = run(dir.path(), &["--config", "run.toml", "scan", "--mode", "two-atom", "--out", "s.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(text.lines().count(), 2 + 7);
    let m = manifest(&dir.path().join("s.csv"));
    assert_eq!(m["config"]["command"]["spacing_um"], 25.0);
    assert_eq!(m["config"]["common"]["decay"], false);
    // Without decay the norm stays 1.
    let last = text.lines().last().unwrap();
    let norm: f64 = last.split(',').nth(3).unwrap().parse().unwrap();
    assert!((norm - 1.0).abs() < 1e-9);
}

#[test]
fn phases_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["phases", "--pattern", "r_g_r", "--pattern", "g_r_r", "--steps", "20", "--out", "ph.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("ph.csv")).unwrap();
    assert_eq!(text.lines().count(), 2 + 2 * 21);
    assert!(text.lines().nth(1).unwrap().starts_with("pattern,t_us,p,phase_rad,norm"));
    let out = run(dir.path(), &["trace", "--mode", "two-atom", "--R", "25", "--tau", "1", "--steps", "10", "--out", "t.csv"]);
    assert!(out.status.success());
    assert_eq!(std::fs::read_to_string(dir.path().join("t.csv")).unwrap().lines().count(), 2 + 11);
}

#[test]
fn optimizer_failure_exits_3_with_log() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("opt.toml"),
        "[optimizer]\nspacing_um = 30.0\nscan_points = 11\nmagnetic_grid = [0.0]\nmin_separation_widths = 1000.0\n",
    )
    .unwrap();
    let out = run(dir.path(), &["--config", "opt.toml", "optimize", "--out", "o.json"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("different interatomic distance"));
    assert!(dir.path().join("o.csv").exists());
    assert!(!dir.path().join("o.json").exists());
}
