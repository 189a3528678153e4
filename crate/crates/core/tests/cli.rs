use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fslab-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn fslab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fslab")).args(args).output().unwrap()
}

const GRID: &str = "[grid]\ndim_N = 2\npoints_M = 32\nextent_L = 8.0\n[frac]\norder_s = 0.5\n";

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("lab.toml");
    let grid = if body.contains("[grid]") { "" } else { GRID };
    std::fs::write(&path, format!("output_dir = \"{}\"\n{body}{grid}", dir.join("out").display())).unwrap();
    path
}

#[test]
fn sharp_constant_default_sweep_has_twenty_rows() {
    let dir = scratch("sharp");
    let cfg = write_config(&dir, "");
    let out = fslab(&["sharp-constant", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("out/sharp-constant/sharp_constant.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("N,s,two_star,S_star"));
    assert_eq!(lines.count(), 20);
    let manifest = std::fs::read_to_string(dir.join("out/manifest.json")).unwrap();
    assert!(manifest.contains("sharp_constant.csv"));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn invalid_order_exits_with_validation_code() {
    let dir = scratch("bad-s");
    let cfg = write_config(&dir, "[grid]\ndim_N = 2\npoints_M = 32\nextent_L = 8.0\n[frac]\norder_s = 1.5\n");
    let out = fslab(&["norms", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("frac.order_s") && err.contains("0 < s < N/2"), "{err}");
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn overrides_are_applied_and_unknown_keys_rejected() {
    let dir = scratch("override");
    let cfg = write_config(&dir, "");
    let cfg = cfg.to_str().unwrap();
    assert_eq!(fslab(&["sharp-constant", "--config", cfg, "frac.order_s=3.0"]).status.code(), Some(2));
    assert_eq!(fslab(&["sharp-constant", "--config", cfg, "bogus.key=1"]).status.code(), Some(2));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn missing_config_is_an_io_error() {
    let out = fslab(&["norms", "--config", "/nonexistent/fslab.toml"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn plotdata_from_sharp_constant_report() {
    let dir = scratch("plot");
    let cfg = write_config(&dir, "");
    assert!(fslab(&["sharp-constant", "--config", cfg.to_str().unwrap()]).status.success());
    let report = dir.join("out/sharp-constant/sharp_constant.csv");
    let target = dir.join("plot.csv");
    let out = fslab(&["emit-plotdata", "--output", target.to_str().unwrap(), report.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&target).unwrap();
    assert!(text.starts_with("series,x,y\n"));
    assert_eq!(text.lines().count(), 21);
    let _ = std::fs::remove_dir_all(&dir);
}
