use std::fs;
use std::process::{Command, Output};

fn explore(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_explore"))
        .args(args)
        .env("EXPLORE_LOG", "warn")
        .output()
        .unwrap()
}

fn bundled(name: &str) -> String {
    format!("{}/../../scenes/{name}.json", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn shapes_list_and_describe() {
    let out = explore(&["shapes", "list"]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().lines().count() >= 6);

    let out = explore(&["shapes", "describe", "sphere50"]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("radius 0.05 m"));

    let out = explore(&["shapes", "describe", "nosuch"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("sphere50"));
}

#[test]
fn describe_json_matches_bundled_file() {
    let out = explore(&["shapes", "describe", "can", "--json"]);
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        fs::read_to_string(bundled("can")).unwrap()
    );
}

#[test]
fn run_with_high_threshold_touches_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out = explore(&[
        "run",
        &bundled("sphere50"),
        "--out",
        out_dir.to_str().unwrap(),
        "--seed",
        "7",
        "--udrr-threshold",
        "1.1",
        "--grid",
        "12",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .starts_with("0 touches, stop udrr"));
    let csv = fs::read_to_string(out_dir.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    let config = fs::read_to_string(out_dir.join("config.json")).unwrap();
    assert!(config.contains("\"seed\": 7"));
    assert!(config.contains("\"grid_cells\": 12"));
}

#[test]
fn malformed_scene_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(
        &path,
        r#"{"name": "x", "shape": {"kind": "sphere", "radius": 0.05}, "camera": {"width": -3}}"#,
    )
    .unwrap();
    let out = explore(&[
        "run",
        path.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("camera.width"));
}

#[test]
fn missing_scene_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = explore(&["run", "/nonexistent/scene.json", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bad_policy_is_usage_error() {
    let out = explore(&["run", &bundled("sphere50"), "--out", "/tmp/x", "--policy", "greedy"]);
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("greedy"));
}
