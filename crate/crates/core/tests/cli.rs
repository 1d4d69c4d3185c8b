//! End-to-end tests of the `balayage` binary: exit codes, bundled configs,
//! and output determinism.

use std::path::{Path, PathBuf};
use std::process::Command;

fn balayage() -> Command {
    Command::new(env!("CARGO_BIN_EXE_balayage"))
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

#[test]
fn run_bundled_circle_atoms_config() {
    let out = tempfile::tempdir().unwrap();
    let config = repo_root().join("configs/circle_atoms.json");
    let output = balayage()
        .args(["run", config.to_str().unwrap(), "--out", out.path().to_str().unwrap()])
        .env("BALAYAGE_LOG", "error")
        .output()
        .unwrap();
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let summary = std::fs::read_to_string(out.path().join("circle_atoms_summary.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&summary).unwrap();
    // all of the swept mass lands on the sink node
    assert!((parsed["nu_total"].as_f64().unwrap() + 1.0).abs() < 1e-9);
    assert_eq!(parsed["converged"].as_bool().unwrap(), true);
    assert!(out.path().join("circle_atoms_fields.csv").exists());
}

#[test]
fn summaries_are_byte_identical_across_runs() {
    let config = repo_root().join("configs/sphere_cap.json");
    let mut contents = Vec::new();
    for _ in 0..2 {
        let out = tempfile::tempdir().unwrap();
        let status = balayage()
            .args(["run", config.to_str().unwrap(), "--out", out.path().to_str().unwrap()])
            .env("BALAYAGE_LOG", "error")
            .status()
            .unwrap();
        assert!(status.success());
        contents.push(std::fs::read(out.path().join("sphere_cap_summary.json")).unwrap());
    }
    assert_eq!(contents[0], contents[1]);
}

#[test]
fn malformed_config_exits_one_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\n  \"scenarios\": [ { \"name\": 3 } ]\n}\n").unwrap();
    let output = balayage()
        .args(["run", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("bad.json:2"), "diagnostic missing position: {stderr}");
}

#[test]
fn infeasible_mass_exits_one_citing_side_condition() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("infeasible.json");
    std::fs::write(
        &path,
        r#"{
            "scenarios": [{
                "name": "bad_mass",
                "task": "bal",
                "manifold": {"kind": "circle", "n_nodes": 64},
                "sigma": [{"atom": {"location": 0.5, "weight": 2.0}}]
            }]
        }"#,
    )
    .unwrap();
    let output = balayage()
        .args(["run", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()])
        .env("BALAYAGE_LOG", "error")
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(
        stdout.contains("integral(sigma) <= integral(lambda)"),
        "message should cite the side condition: {stdout}"
    );
}

#[test]
fn empty_scenario_list_exits_zero_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.json");
    std::fs::write(&path, r#"{"scenarios": []}"#).unwrap();
    let out_dir = dir.path().join("out");
    let status = balayage()
        .args(["run", path.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(std::fs::read_dir(&out_dir).unwrap().count(), 0);
}

#[test]
fn verify_filter_runs_a_fast_slice() {
    let output = balayage()
        .args(["verify", "--filter", "neumann"])
        .env("BALAYAGE_LOG", "error")
        .output()
        .unwrap();
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("radial neumann"), "{stdout}");
}

#[test]
fn verify_unknown_filter_errors() {
    let output = balayage().args(["verify", "--filter", "nonexistent-module"]).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
}
