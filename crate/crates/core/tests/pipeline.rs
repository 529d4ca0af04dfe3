use std::path::Path;

use scenestyle::pipeline::{Edit, Pipeline, PipelineConfig, Stage, STATE_FILE};
use scenestyle::synthetic::{write_toy_project, TOY_TARGET_TEXTURES};
use scenestyle::Error;

fn toy(dir: &Path) -> PipelineConfig {
    PipelineConfig::load(&write_toy_project(dir).unwrap()).unwrap()
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn toy_scene_runs_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy(dir.path());
    let out = cfg.out.clone();
    let t = std::time::Instant::now();
    let mut p = Pipeline::open(cfg, false).unwrap();
    let state = p.run(None).unwrap().clone();
    eprintln!("full run {:?}", t.elapsed());
    for s in Stage::ALL {
        assert!(state.is_done(s), "{s}");
    }
    let a = state.structure.as_ref().unwrap();
    let winner: Vec<&str> = a.candidates[a.winner]
        .textures
        .iter()
        .map(String::as_str)
        .collect();
    assert_eq!(winner, TOY_TARGET_TEXTURES);
    let labelings = state.labelings.as_ref().unwrap();
    assert_eq!(labelings["chair0"].segment_count(), 2);
    assert_eq!(labelings["table0"].segment_count(), 2);
    for f in [
        "export/chair0.ply",
        "export/table0.ply",
        "export/structure_assignment.json",
        "export/preview_00.png",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
    assert_eq!(
        state
            .exports
            .as_ref()
            .unwrap()
            .iter()
            .filter(|p| p.extension().unwrap() == "png")
            .count(),
        20
    );
    let saved = scenestyle::pipeline::PipelineState::load(&out.join(STATE_FILE)).unwrap();
    assert!(
        saved == state,
        "state.json differs from the in-memory state"
    );
}

#[test]
fn missing_library_halts_at_structure() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = toy(dir.path());
    cfg.library = Some(dir.path().join("no_such_dir"));
    let out = cfg.out.clone();
    let mut p = Pipeline::open(cfg, false).unwrap();
    let err = p.run(None).unwrap_err();
    assert!(matches!(err, Error::Stage { .. }), "{err}");
    assert!(matches!(err.root(), Error::EmptyLibrary), "{err}");
    assert!(!p.state().is_done(Stage::Structure));
    assert!(!p.state().is_done(Stage::Parts));
    assert!(p.state().labelings.is_none());
    // The failure is still recorded on disk.
    let saved = scenestyle::pipeline::PipelineState::load(&out.join(STATE_FILE)).unwrap();
    assert!(saved.completed.is_empty());
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let base = toy(dir.path());

    let mut straight = base.clone();
    straight.out = dir.path().join("straight");
    let mut p = Pipeline::open(straight.clone(), false).unwrap();
    p.run(Some(Stage::BaseColors)).unwrap();

    let mut split = base.clone();
    split.out = dir.path().join("split");
    Pipeline::open(split.clone(), false)
        .unwrap()
        .run(Some(Stage::Parts))
        .unwrap();
    let mut q = Pipeline::open(split.clone(), true).unwrap();
    assert!(q.state().is_done(Stage::Parts));
    assert!(!q.state().is_done(Stage::BaseColors));
    q.run(Some(Stage::BaseColors)).unwrap();

    for f in [
        "parts/labelings.json",
        "base_colors/base_colors.json",
        "structure/assignment.json",
    ] {
        assert!(
            read(&straight.out.join(f)) == read(&split.out.join(f)),
            "{f} differs after resume"
        );
    }

    // A different seed invalidates the saved state.
    let mut reseeded = split.clone();
    reseeded.seed = 7;
    let r = Pipeline::open(reseeded, true).unwrap();
    assert!(r.state().completed.is_empty());
}

#[test]
fn detail_requires_base_colors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy(dir.path());
    let mut p = Pipeline::open(cfg, false).unwrap();
    p.run(Some(Stage::Parts)).unwrap();
    let err = p.run_stage(Stage::Detail).unwrap_err();
    assert!(
        matches!(err.root(), Error::MissingUpstream(f) if f == "base_colors.json"),
        "{err}"
    );
}

#[test]
fn relocation_moves_geometry_and_keeps_colors() {
    use scenestyle::io::load_mesh;
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = toy(dir.path());
    // Skip the expensive stages: gray structure, vertex base colors.
    cfg.stages.detail = false;
    cfg.stages.base_colors = false;
    let out = cfg.out.clone();
    Pipeline::open(cfg.clone(), false)
        .unwrap()
        .run(None)
        .unwrap();
    let before = load_mesh(&out.join("export/chair0.ply")).unwrap();

    cfg.edits = vec![
        Edit::relocate("chair0:dx=0.5,dz=-0.25").unwrap(),
        Edit::replicate("table0:dx=1").unwrap(),
    ];
    let mut p = Pipeline::open(cfg, true).unwrap();
    p.run(None).unwrap();
    let after = load_mesh(&out.join("export/chair0.ply")).unwrap();
    assert_eq!(after.colors, before.colors);
    assert_eq!(after.mesh.faces, before.mesh.faces);
    for (a, b) in after.mesh.vertices.iter().zip(&before.mesh.vertices) {
        let d = a - b;
        assert!(
            (d.x - 0.5).abs() < 1e-5 && d.y.abs() < 1e-5 && (d.z + 0.25).abs() < 1e-5,
            "{d:?}"
        );
    }
    assert!(out.join("export/table0_copy1.ply").is_file());
}
