//! End-to-end runs of the `hamsearch` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const AKLT: &str = r#"
schema_version = 1

[system]
model = { name = "heisenberg_bilinear_biquadratic" }
twice_sz = 0
train_sizes = [4]

[reference]
kind = "named"
state = "aklt_periodic"

[loss]
gauge = { kind = "freeze_one", index = 0, value = 1.0 }

[optimizer]
record_timing = false

[search]
start_box = [[0.5, 1.5], [-1.0, 1.0]]
"#;

const SCAN: &str = r#"
schema_version = 1

[system]
model = { name = "transverse_field_ising" }
train_sizes = [6]

[parametrization]
kind = "polynomial"
n_params = 2
bounds = [[0.5, 1.5], [0.0, 2.0]]
outputs = [
  [{ coefficient = 1.0, powers = [1, 0] }],
  [{ coefficient = 1.0, powers = [1, 1] }],
]

[reference]
kind = "point"
params = [0.9, 0.7]

[optimizer]
record_timing = false
max_iters = 20

[scan]
n1 = 4
n2 = 5
start = [1.3, 1.7]
"#;

fn hamsearch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hamsearch"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn validate_accepts_good_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "aklt.toml", AKLT);
    let o = hamsearch(&["validate-config", "--config", &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("ok"));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", &AKLT.replace("record_timing", "record_timings"));
    let o = hamsearch(&["validate-config", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("record_timings"), "{}", stderr(&o));
}

#[test]
fn wrong_schema_version_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "v9.toml", &AKLT.replace("schema_version = 1", "schema_version = 9"));
    let o = hamsearch(&["recover", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("schema"), "{}", stderr(&o));
}

#[test]
fn missing_config_file_is_a_config_error() {
    let o = hamsearch(&["validate-config", "--config", "/nonexistent/hamsearch.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn recover_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "aklt.toml", AKLT);
    let out = dir.path().join("out");
    let o = hamsearch(&["recover", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(table.contains("biquadratic"), "{table}");
    for f in ["report.json", "trace.csv", "config.toml", "references/N4.amp"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let report = fs::read_to_string(out.join("report.json")).unwrap();
    assert!(report.contains("\"schema_version\": 1"));
    // The persisted config is itself a valid input.
    let again = hamsearch(&["validate-config", "--config", out.join("config.toml").to_str().unwrap()]);
    assert!(again.status.success(), "{}", stderr(&again));
}

#[test]
fn seed_flag_gives_reproducible_traces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "aklt.toml", AKLT);
    let run = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        let o = hamsearch(&["recover", "--config", &cfg, "--seed", seed, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read_to_string(out.join("trace.csv")).unwrap()
    };
    let a = run("11", "a");
    let b = run("11", "b");
    let c = run("12", "c");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn scan_writes_grid_and_paths() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "scan.toml", SCAN);
    let out = dir.path().join("scan");
    let o = hamsearch(&["scan", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["grid.csv", "trace_cgd.csv", "trace_sd.csv", "scan.json", "config.toml"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let grid = fs::read_to_string(out.join("grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 1 + 4 * 5);
}

#[test]
fn bench_writes_timings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "aklt.toml", AKLT);
    let out = dir.path().join("bench");
    let o = hamsearch(&["bench", "--config", &cfg, "--out", out.to_str().unwrap(), "--threads", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let json = fs::read_to_string(out.join("bench.json")).unwrap();
    for op in ["matvec", "eigs_low", "evaluate_loss", "fd_gradient"] {
        assert!(json.contains(op), "missing {op}");
    }
}
