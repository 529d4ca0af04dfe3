//! `scenestyle`: runs the stylization pipeline or any single stage of it.
//!
//! Exit codes: 0 success, 2 configuration error, 3 stage failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use scenestyle::geometry::PartLabeling;
use scenestyle::io::{load_mesh, write_atomic};
use scenestyle::losses::{BackendConfig, BackendKind, MockTable};
use scenestyle::partdiscovery::{discover_parts, discover_parts_from, DiscoveryConfig};
use scenestyle::pipeline::{Edit, Pipeline, PipelineConfig, Stage};
use scenestyle::scene::{validate_scene, SceneDescription, SceneObject};
use scenestyle::stylize::BaseColorTable;
use scenestyle::Error;

#[derive(Parser)]
#[command(
    name = "scenestyle",
    version,
    about = "Part-aware stylization of labeled 3D indoor scenes"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Pipeline config JSON.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Embedding backend: mock or real.
    #[arg(long, global = true)]
    backend: Option<BackendKind>,
    /// With `run`, stop after this stage.
    #[arg(long, global = true)]
    stage: Option<Stage>,
    /// Reuse up-to-date stage outputs in the output directory.
    #[arg(long, global = true)]
    resume: bool,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every enabled stage in order.
    Run,
    /// Discover texture parts on one mesh.
    DiscoverParts(DiscoverArgs),
    /// Retrieve structure textures.
    StylizeStructure,
    /// Optimize one base color per part across the scene.
    AssignBaseColors,
    /// Train the per-object style fields.
    StylizeObject(ObjectArgs),
    /// Write stylized meshes and previews, applying scene edits.
    Export(ExportArgs),
    /// Write the synthetic toy project (scene, textures, target, config).
    InitToy {
        /// Destination directory.
        dir: PathBuf,
    },
}

#[derive(Args)]
struct DiscoverArgs {
    #[arg(long)]
    mesh: PathBuf,
    /// Class label, e.g. "chair" or "a chair".
    #[arg(long)]
    label: String,
    /// Mock prompt table JSON (substring -> color or per-tag colors).
    #[arg(long)]
    mock_table: Option<PathBuf>,
    /// Initial labeling JSON; skips super-segmentation.
    #[arg(long)]
    segments_in: Option<PathBuf>,
}

#[derive(Args)]
struct ObjectArgs {
    /// Object id to train; repeatable. Defaults to every object.
    #[arg(long)]
    object: Vec<String>,
    /// Base color table to use instead of the base_colors stage output.
    #[arg(long)]
    base_colors: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    /// Translate an object: `ID:dx=1.0,dy=0,dz=0`.
    #[arg(long)]
    relocate: Vec<String>,
    /// Drop an object.
    #[arg(long)]
    remove: Vec<String>,
    /// Add a translated copy: `ID:dx=1.0`.
    #[arg(long)]
    replicate: Vec<String>,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    error: Error,
}

fn config_error(error: Error) -> Failure {
    Failure { code: 2, error }
}

fn stage_error(error: Error) -> Failure {
    Failure { code: 3, error }
}

type Outcome = std::result::Result<(), Failure>;

fn load_config(g: &Global) -> std::result::Result<PipelineConfig, Failure> {
    let path = g
        .config
        .as_ref()
        .ok_or_else(|| config_error(Error::InvalidConfig("--config is required".into())))?;
    let mut cfg = PipelineConfig::load(path).map_err(config_error)?;
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if let Some(kind) = g.backend {
        cfg.backend.backend = kind;
    }
    if let Some(out) = &g.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn open(cfg: PipelineConfig, resume: bool) -> std::result::Result<Pipeline, Failure> {
    Pipeline::open(cfg, resume).map_err(config_error)
}

fn report(p: &Pipeline) {
    for s in Stage::ALL {
        let status = if p.state().is_done(s) {
            "done"
        } else if p.config().stages.enabled(s) {
            "pending"
        } else {
            "disabled"
        };
        println!("{:<12} {status}", s.name());
    }
    println!("output: {}", p.out_dir().display());
}

fn run(g: &Global) -> Outcome {
    let mut p = open(load_config(g)?, g.resume)?;
    p.run(g.stage).map_err(stage_error)?;
    report(&p);
    Ok(())
}

fn single_stage(g: &Global, stage: Stage) -> Outcome {
    let mut p = open(load_config(g)?, true)?;
    p.run_stage(stage).map_err(stage_error)?;
    report(&p);
    Ok(())
}

fn stylize_object(g: &Global, args: &ObjectArgs) -> Outcome {
    let mut p = open(load_config(g)?, true)?;
    if let Some(path) = &args.base_colors {
        let text = std::fs::read_to_string(path).map_err(|e| {
            config_error(Error::InvalidConfig(format!(
                "cannot read {}: {e}",
                path.display()
            )))
        })?;
        let table = BaseColorTable::from_json(&text).map_err(config_error)?;
        p.supply_base_colors(table).map_err(config_error)?;
    }
    let result = if args.object.is_empty() {
        p.run_stage(Stage::Detail)
    } else {
        p.run_detail(&args.object)
    };
    result.map_err(|e| match e {
        // Bad object ids are rejected before the stage starts.
        Error::InvalidConfig(_) => config_error(e),
        e => stage_error(e),
    })?;
    report(&p);
    Ok(())
}

fn export(g: &Global, args: &ExportArgs) -> Outcome {
    let mut cfg = load_config(g)?;
    let edits = args
        .relocate
        .iter()
        .map(|s| Edit::relocate(s))
        .chain(args.remove.iter().map(|s| Edit::remove(s)))
        .chain(args.replicate.iter().map(|s| Edit::replicate(s)))
        .collect::<scenestyle::Result<Vec<_>>>()
        .map_err(config_error)?;
    cfg.edits.extend(edits);
    let mut p = open(cfg, true)?;
    p.run_stage(Stage::Export).map_err(stage_error)?;
    report(&p);
    Ok(())
}

fn strip_article(label: &str) -> &str {
    let l = label.trim();
    l.strip_prefix("a ")
        .or_else(|| l.strip_prefix("an "))
        .unwrap_or(l)
        .trim()
}

fn discover(g: &Global, args: &DiscoverArgs) -> Outcome {
    let loaded = load_mesh(&args.mesh).map_err(config_error)?;
    let label = strip_article(&args.label).to_string();
    let scene = validate_scene(SceneDescription {
        structure: Vec::new(),
        objects: vec![SceneObject {
            id: "object".into(),
            class_label: label.clone(),
            description: None,
            mesh: loaded.mesh,
            placement: Default::default(),
        }],
        scene_type: "a room".into(),
        structure_prompt: String::new(),
    })
    .map_err(config_error)?;
    let mesh = scene.unit_mesh(0);

    let table: MockTable = match &args.mock_table {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                config_error(Error::InvalidConfig(format!(
                    "cannot read {}: {e}",
                    path.display()
                )))
            })?;
            serde_json::from_str(&text)
                .map_err(|e| config_error(Error::InvalidConfig(e.to_string())))?
        }
        None => MockTable::new(),
    };
    let kind = g.backend.unwrap_or_default();
    let backend = BackendConfig {
        backend: kind,
        ..BackendConfig::mock(table)
    }
    .build()
    .map_err(config_error)?;
    let mut cfg = match kind {
        BackendKind::Mock => DiscoveryConfig::default(),
        BackendKind::Real => DiscoveryConfig::real(),
    };
    cfg.seed = g.seed.unwrap_or(0);

    let discovery = match &args.segments_in {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                config_error(Error::InvalidConfig(format!(
                    "cannot read {}: {e}",
                    path.display()
                )))
            })?;
            let initial = PartLabeling::from_json(&text).map_err(config_error)?;
            discover_parts_from(&mesh, initial, &label, backend.as_ref(), &cfg)
        }
        None => discover_parts(&mesh, &label, backend.as_ref(), &cfg),
    }
    .map_err(|e| stage_error(e.in_stage("parts")))?;

    let out = g.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let write = |name: &str, text: &str| {
        write_atomic(&out.join(name), text.as_bytes()).map_err(stage_error)
    };
    write("labeling.json", &(discovery.labeling.to_json() + "\n"))?;
    write("audit.jsonl", &discovery.audit_jsonl())?;
    println!(
        "{} parts from {} segments in {} rounds; wrote {}",
        discovery.labeling.segment_count(),
        discovery.initial.segment_count(),
        discovery.round_count(),
        out.join("labeling.json").display()
    );
    Ok(())
}

fn init_toy(dir: &Path) -> Outcome {
    let config = scenestyle::synthetic::write_toy_project(dir).map_err(stage_error)?;
    println!("wrote {}", config.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let g = &cli.global;
    let outcome = match &cli.command {
        Command::Run => run(g),
        Command::DiscoverParts(a) => discover(g, a),
        Command::StylizeStructure => single_stage(g, Stage::Structure),
        Command::AssignBaseColors => single_stage(g, Stage::BaseColors),
        Command::StylizeObject(a) => stylize_object(g, a),
        Command::Export(a) => export(g, a),
        Command::InitToy { dir } => init_toy(dir),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.error);
            ExitCode::from(f.code)
        }
    }
}
