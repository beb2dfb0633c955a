//! Black-box tests of the command-line interface: exit codes, config
//! validation, and byte-deterministic outputs.

use std::path::Path;
use std::process::Command;

fn mvslab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mvslab"))
}

fn write_config(dir: &Path, radii: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    let text = format!(
        r#"{{
  "schema_version": 1,
  "geometry": {{ "kind": "disk", "radius": 1.0 }},
  "mesh_h": 0.05,
  "x0": [0.0, 0.0],
  "radii": {radii},
  "harnack": {{ "s": 0.25, "samples": 4 }}
}}"#
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn mesh_green_sweep_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[0.3, 0.4]");
    for sub in ["mesh", "green", "sweep", "membrane", "r0", "harnack"] {
        let out = mvslab()
            .args([sub, "--config"])
            .arg(&cfg)
            .arg("--output")
            .arg(dir.path())
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{sub} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    assert!(dir.path().join("summary.json").exists());
    assert!(dir.path().join("sweep.csv").exists());
    assert!(dir.path().join("mesh.vtk").exists());
}

#[test]
fn nonincreasing_radii_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[0.4, 0.3]");
    let out = mvslab()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .arg("--output")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("strictly increasing"), "stderr: {err}");
}

#[test]
fn bad_schema_version_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.json");
    std::fs::write(
        &path,
        r#"{"schema_version": 99, "geometry": {"kind": "disk", "radius": 1.0},
           "mesh_h": 0.1, "radii": [0.3]}"#,
    )
    .unwrap();
    let out = mvslab()
        .args(["mesh", "--config"])
        .arg(&path)
        .arg("--output")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_exit_two() {
    let out = mvslab().arg("mesh").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_outputs_are_byte_deterministic() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let cfg = write_config(d1.path(), "[0.3, 0.4]");
    for dir in [d1.path(), d2.path()] {
        let out = mvslab()
            .args(["sweep", "--config"])
            .arg(&cfg)
            .arg("--output")
            .arg(dir)
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    for name in ["summary.json", "sweep.csv", "sweep.vtk"] {
        let a = std::fs::read(d1.path().join(name)).unwrap();
        let b = std::fs::read(d2.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn harnack_seed_changes_csv_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[0.3]");
    let run = |seed: &str, out: &Path| {
        let st = mvslab()
            .args(["harnack", "--seed", seed, "--config"])
            .arg(&cfg)
            .arg("--output")
            .arg(out)
            .status()
            .unwrap();
        assert!(st.success());
        std::fs::read(out.join("harnack.csv")).unwrap()
    };
    let a1 = run("7", dir.path());
    let a2 = run("7", dir.path());
    assert_eq!(a1, a2, "same seed must reproduce byte-identical output");
    let b = run("8", dir.path());
    assert_ne!(a1, b, "different seeds should vary the ensemble");
}

#[test]
fn hyperbolic_mesh_area_matches_closed_form() {
    // geodesic disk of radius rho has area 2 pi (cosh(rho) - 1)
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.json");
    std::fs::write(
        &path,
        r#"{"schema_version": 1, "geometry": {"kind": "hyperbolic-disk", "rho": 1.5},
           "mesh_h": 0.02, "radii": [0.3]}"#,
    )
    .unwrap();
    let out = mvslab()
        .args(["mesh", "--config"])
        .arg(&path)
        .arg("--output")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    let area = summary["metric_area"].as_f64().unwrap();
    let exact = 2.0 * std::f64::consts::PI * (1.5f64.cosh() - 1.0);
    assert!((area - exact).abs() / exact < 0.01, "area {area} vs {exact}");
}
