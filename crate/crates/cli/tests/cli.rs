use std::path::Path;
use std::process::{Command, Output};

fn scenestyle(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scenestyle"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn toy() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let out = scenestyle(dir.path(), &["init-toy", "."]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    dir
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(scenestyle(dir.path(), &["run"]).status.code(), Some(2));
    std::fs::write(dir.path().join("bad.json"), r#"{"sede": 1}"#).unwrap();
    let out = scenestyle(dir.path(), &["--config", "bad.json", "run"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sede"));
    std::fs::write(dir.path().join("empty.json"), "{}").unwrap();
    assert_eq!(
        scenestyle(dir.path(), &["--config", "empty.json", "run"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        scenestyle(dir.path(), &["--stage", "paint", "run"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn structure_stage_writes_its_assignment() {
    let dir = toy();
    let out = scenestyle(
        dir.path(),
        &["--config", "pipeline.json", "run", "--stage", "structure"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("structure    done"), "{stdout}");
    assert!(stdout.contains("parts        pending"), "{stdout}");
    assert!(dir.path().join("out/structure/assignment.json").is_file());
    assert!(dir.path().join("out/state.json").is_file());
}

#[test]
fn detail_without_base_colors_exits_with_3() {
    let dir = toy();
    let out = scenestyle(
        dir.path(),
        &[
            "--config",
            "pipeline.json",
            "stylize-object",
            "--object",
            "chair0",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("base_colors.json"));
}

#[test]
fn bad_edit_spec_exits_with_2() {
    let dir = toy();
    let out = scenestyle(
        dir.path(),
        &[
            "--config",
            "pipeline.json",
            "export",
            "--relocate",
            "chair:dw=1",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn discover_parts_writes_labeling_and_audit() {
    let dir = toy();
    let cfg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("pipeline.json")).unwrap())
            .unwrap();
    std::fs::write(
        dir.path().join("mock.json"),
        cfg["backend"]["mock_table"].to_string(),
    )
    .unwrap();
    let args = [
        "discover-parts",
        "--mesh",
        "meshes/chair.obj",
        "--label",
        "a chair",
        "--mock-table",
        "mock.json",
        "--out",
        "dp",
    ];
    let out = scenestyle(dir.path(), &args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let labels: Vec<usize> = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("dp/labeling.json")).unwrap(),
    )
    .unwrap();
    let parts = labels.iter().max().unwrap() + 1;
    assert_eq!(parts, 2);
    let audit = std::fs::read_to_string(dir.path().join("dp/audit.jsonl")).unwrap();
    assert!(audit.lines().count() >= 1);
    for line in audit.lines() {
        serde_json::from_str::<serde_json::Value>(line).unwrap();
    }

    // Feeding the result back in is a fixed point.
    let again = scenestyle(
        dir.path(),
        &[
            "discover-parts",
            "--mesh",
            "meshes/chair.obj",
            "--label",
            "chair",
            "--mock-table",
            "mock.json",
            "--segments-in",
            "dp/labeling.json",
            "--out",
            "dp2",
        ],
    );
    assert!(
        again.status.success(),
        "{}",
        String::from_utf8_lossy(&again.stderr)
    );
    assert_eq!(
        std::fs::read(dir.path().join("dp/labeling.json")).unwrap(),
        std::fs::read(dir.path().join("dp2/labeling.json")).unwrap()
    );
}

#[test]
fn missing_mesh_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = scenestyle(
        dir.path(),
        &["discover-parts", "--mesh", "nope.obj", "--label", "chair"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_object_exits_with_2() {
    let dir = toy();
    let out = scenestyle(
        dir.path(),
        &[
            "--config",
            "pipeline.json",
            "stylize-object",
            "--object",
            "sofa",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
