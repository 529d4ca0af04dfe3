//! Stage orchestration, checkpoints and export.
//!
//! Output layout, relative to the configured output directory:
//!
//! ```text
//! state.json                      PipelineState
//! structure/assignment.json       winning texture per structure element
//! structure/scores.csv            every scored candidate
//! parts/labelings.json            object id -> per-face part ids
//! parts/{id}.audit.jsonl          one record per discovery round
//! parts/rounds.csv
//! base_colors/base_colors.json    BaseColorTable
//! base_colors/loss.csv
//! detail/{id}.lnsf                field checkpoint
//! detail/{id}.colors.json         final vertex colors and displacement
//! detail/{id}.loss.csv
//! export/{id}.ply                 world-space mesh with vertex colors
//! export/structure_assignment.json
//! export/preview_{nn}.png         one per scene camera
//! cache/                          spectral bases
//! ```
//!
//! Every stage draws from its own seeded stream, so a resumed run produces
//! the same bytes as an uninterrupted one.

mod config;
mod edit;
mod state;

pub use config::{OptimizerOverrides, PipelineConfig, PreviewConfig, Stage, StageToggles};
pub use edit::{apply_edits, Edit, ExportObject};
pub use state::{FieldArtifact, PipelineState};

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::Matrix4;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::StyleSpec;
use crate::error::{Error, Result};
use crate::geometry::PartLabeling;
use crate::io::ply::write_ply;
use crate::io::scene_file::load_scene;
use crate::io::write_atomic;
use crate::losses::EmbeddingBackend;
use crate::partdiscovery::discover_parts;
use crate::render::{rasterize, scene_camera_set, Paint, RenderSettings, Shading, Surface};
use crate::scene::{validate_scene, ValidatedScene};
use crate::stylize::base_colors::GRAY;
use crate::stylize::structure::structure_surfaces;
use crate::stylize::{
    assign_base_colors, compose_style_prompt, displaced_mesh, retrieve_structure_textures,
    train_lnsf, train_lnsf_with_displacement, BaseColorTable, ObjectGeometry, StructureAssignment,
    TextureLibrary,
};

pub const STATE_FILE: &str = "state.json";
pub const BASE_COLORS_FILE: &str = "base_colors.json";
pub const LABELINGS_FILE: &str = "labelings.json";
pub const ASSIGNMENT_FILE: &str = "assignment.json";

/// Seed of the stream owned by (`stage`, `index`) under a global seed.
pub fn derive_seed(seed: u64, stage: Stage, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stage as u64) << 32) | index as u64);
    rng.next_u64()
}

fn stage_rng(seed: u64, stage: Stage, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stage, index))
}

/// Length-prefixed SHA-256 over tagged parts.
struct Fingerprint(Sha256);

impl Fingerprint {
    fn new(tag: &str) -> Self {
        let mut f = Fingerprint(Sha256::new());
        f.bytes(tag.as_bytes());
        f
    }

    fn bytes(&mut self, b: &[u8]) -> &mut Self {
        self.0.update((b.len() as u64).to_le_bytes());
        self.0.update(b);
        self
    }

    fn json<T: Serialize + ?Sized>(&mut self, v: &T) -> &mut Self {
        self.bytes(&serde_json::to_vec(v).expect("serializable"))
    }

    fn finish(self) -> String {
        hex::encode(self.0.finalize())
    }
}

fn manifest_hash(cfg: &PipelineConfig, scene: &ValidatedScene, style: &StyleSpec) -> String {
    let mut f = Fingerprint::new("manifest");
    let desc = scene.description();
    f.bytes(desc.scene_type.as_bytes())
        .bytes(desc.structure_prompt.as_bytes());
    for s in &desc.structure {
        f.bytes(s.id.as_bytes())
            .json(&s.class)
            .bytes(&s.mesh.content_bytes())
            .json(&s.uv)
            .json(&s.texture_id);
    }
    for o in &desc.objects {
        f.bytes(o.id.as_bytes())
            .bytes(o.class_label.as_bytes())
            .json(&o.description)
            .bytes(&o.mesh.content_bytes())
            .json(&o.placement.to_row_major());
    }
    let img = &style.target_image;
    f.json(&[img.width, img.height]).json(&img.pixels);
    f.bytes(style.style_text.as_bytes()).json(&style.weights);
    f.json(&cfg.backend).json(&cfg.seed);
    f.finish()
}

/// Final per-vertex colors and displacement of one object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectColors {
    pub colors: Vec<[f64; 3]>,
    pub displacement: Vec<f64>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    write_atomic(path, text.as_bytes())
}

/// Drives the stages over one output directory.
pub struct Pipeline {
    config: PipelineConfig,
    scene: ValidatedScene,
    style: StyleSpec,
    backend: Arc<dyn EmbeddingBackend>,
    state: PipelineState,
}

impl Pipeline {
    /// Loads and validates every input. With `resume`, picks up the state
    /// in the output directory when it was produced from the same inputs.
    pub fn open(config: PipelineConfig, resume: bool) -> Result<Self> {
        config.check()?;
        let scene = validate_scene(load_scene(&config.scene)?)?;
        let style = StyleSpec::load(&config.style)?;
        let backend = config.backend.build()?;
        Pipeline::with_parts(config, scene, style, backend, resume)
    }

    /// [`Pipeline::open`] with inputs already in memory.
    pub fn with_parts(
        config: PipelineConfig,
        scene: ValidatedScene,
        style: StyleSpec,
        backend: Arc<dyn EmbeddingBackend>,
        resume: bool,
    ) -> Result<Self> {
        let manifest = manifest_hash(&config, &scene, &style);
        let path = config.out.join(STATE_FILE);
        let state = match resume && path.is_file() {
            true => {
                let s = PipelineState::load(&path)?;
                if s.manifest == manifest {
                    s
                } else {
                    log::warn!("inputs changed since the saved state; starting over");
                    PipelineState::new(manifest)
                }
            }
            false => PipelineState::new(manifest),
        };
        Ok(Pipeline {
            config,
            scene,
            style,
            backend,
            state,
        })
    }

    pub fn state(&self) -> &PipelineState {
        &self.state
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn scene(&self) -> &ValidatedScene {
        &self.scene
    }

    pub fn out_dir(&self) -> &Path {
        &self.config.out
    }

    fn path(&self, stage: Stage, file: &str) -> PathBuf {
        self.config.out.join(stage.name()).join(file)
    }

    fn rel(&self, stage: Stage, file: &str) -> PathBuf {
        PathBuf::from(stage.name()).join(file)
    }

    fn save_state(&self) -> Result<()> {
        self.state.save(&self.config.out.join(STATE_FILE))
    }

    /// Runs every enabled stage in order, skipping up-to-date ones, and
    /// stops after `until` when given.
    pub fn run(&mut self, until: Option<Stage>) -> Result<&PipelineState> {
        for stage in Stage::ALL {
            if self.config.stages.enabled(stage) {
                self.run_stage(stage)?;
            }
            if until == Some(stage) {
                break;
            }
        }
        Ok(&self.state)
    }

    /// Runs one stage from the upstream outputs held in the state. Errors
    /// carry the stage name; the state is saved either way.
    pub fn run_stage(&mut self, stage: Stage) -> Result<()> {
        self.run_stage_for(stage, None)
    }

    /// Trains fields only for `objects`, keeping the others' artifacts.
    pub fn run_detail(&mut self, objects: &[String]) -> Result<()> {
        for id in objects {
            if self.scene.object_index(id).is_none() {
                return Err(Error::InvalidConfig(format!("unknown object {id:?}")));
            }
        }
        self.run_stage_for(Stage::Detail, Some(objects))
    }

    fn run_stage_for(&mut self, stage: Stage, only: Option<&[String]>) -> Result<()> {
        let result = self.try_stage(stage, only);
        self.save_state()?;
        result.map_err(|e| e.in_stage(stage.name()))
    }

    fn try_stage(&mut self, stage: Stage, only: Option<&[String]>) -> Result<()> {
        let hash = self.stage_hash(stage)?;
        if self.state.completed.get(&stage) == Some(&hash) && self.outputs_on_disk(stage) {
            log::info!("{stage}: up to date");
            return Ok(());
        }
        for later in Stage::ALL.into_iter().filter(|s| *s >= stage) {
            self.state.clear(later);
        }
        log::info!("{stage}: running");
        let complete = match stage {
            Stage::Structure => self.structure_stage().map(|_| true),
            Stage::Parts => self.parts_stage().map(|_| true),
            Stage::BaseColors => self.base_colors_stage().map(|_| true),
            Stage::Detail => self.detail_stage(only),
            Stage::Export => self.export_stage().map(|_| true),
        }?;
        if complete {
            self.state.completed.insert(stage, hash);
        }
        Ok(())
    }

    fn outputs_on_disk(&self, stage: Stage) -> bool {
        match stage {
            Stage::Detail => self.state.fields.values().all(|a| {
                self.config.out.join(&a.checkpoint).is_file()
                    && self.config.out.join(&a.colors).is_file()
            }),
            Stage::Export => self
                .state
                .exports
                .iter()
                .flatten()
                .all(|p| self.config.out.join(p).is_file()),
            _ => true,
        }
    }

    fn stage_hash(&self, stage: Stage) -> Result<String> {
        let c = &self.config;
        let mut f = Fingerprint::new(stage.name());
        f.bytes(self.state.manifest.as_bytes());
        match stage {
            Stage::Structure => {
                f.json(&c.library).json(&c.structure_candidates);
                match c.library.as_deref().map(TextureLibrary::load) {
                    Some(Ok(lib)) => {
                        for t in lib.textures() {
                            f.json(&t.entry).json(&t.image.pixels);
                        }
                    }
                    _ => {
                        f.bytes(b"no library");
                    }
                }
            }
            Stage::Parts => {
                f.json(&c.discovery_config());
            }
            Stage::BaseColors => {
                f.json(&c.base_colors).json(&c.base_color_optimizer());
                f.json(&self.structure_input()?);
                f.json(&self.labeling_inputs()?);
            }
            Stage::Detail => {
                for i in 0..self.scene.objects().len() {
                    f.bytes(self.object_hash(i)?.as_bytes());
                }
            }
            Stage::Export => {
                f.json(&c.preview)
                    .json(&c.edits)
                    .json(&c.detail.displacement_bound);
                f.json(&self.structure_input()?);
                f.json(&self.labeling_inputs()?);
                f.json(&self.base_input()?);
                if c.stages.detail {
                    for o in self.scene.objects() {
                        let a = self
                            .state
                            .fields
                            .get(&o.id)
                            .ok_or_else(|| Error::MissingUpstream(format!("{}.lnsf", o.id)))?;
                        f.bytes(a.hash.as_bytes());
                    }
                }
            }
        }
        Ok(f.finish())
    }

    fn object_hash(&self, i: usize) -> Result<String> {
        let c = &self.config;
        let base = self.base_input()?;
        let labelings = self.labeling_inputs()?;
        let id = &self.scene.objects()[i].id;
        let mut f = Fingerprint::new("detail object");
        f.bytes(self.state.manifest.as_bytes()).bytes(id.as_bytes());
        f.json(&c.detail_settings())
            .json(&c.detail_optimizer())
            .json(&c.displacement);
        f.json(&base.object(id)).json(&labelings[i]);
        Ok(f.finish())
    }

    fn library(&self) -> Result<TextureLibrary> {
        match &self.config.library {
            Some(dir) => TextureLibrary::load(dir),
            None => Err(Error::EmptyLibrary),
        }
    }

    /// The structure assignment, `None` when the stage is disabled.
    fn structure_input(&self) -> Result<Option<&StructureAssignment>> {
        if !self.config.stages.structure {
            return Ok(None);
        }
        self.state
            .structure
            .as_ref()
            .map(Some)
            .ok_or_else(|| Error::MissingUpstream(ASSIGNMENT_FILE.into()))
    }

    /// One labeling per object; a single part each when parts is disabled.
    fn labeling_inputs(&self) -> Result<Vec<PartLabeling>> {
        let objects = self.scene.objects();
        if !self.config.stages.parts {
            return objects
                .iter()
                .map(|o| PartLabeling::single(o.mesh.face_count()))
                .collect();
        }
        let map = self
            .state
            .labelings
            .as_ref()
            .ok_or_else(|| Error::MissingUpstream(LABELINGS_FILE.into()))?;
        objects
            .iter()
            .map(|o| {
                map.get(&o.id).cloned().ok_or_else(|| {
                    Error::MissingUpstream(format!("{LABELINGS_FILE} entry {}", o.id))
                })
            })
            .collect()
    }

    /// Base colors; gray per part when the stage is disabled.
    fn base_input(&self) -> Result<BaseColorTable> {
        if self.config.stages.base_colors {
            return self
                .state
                .base_colors
                .clone()
                .ok_or_else(|| Error::MissingUpstream(BASE_COLORS_FILE.into()));
        }
        let mut table = BaseColorTable::new();
        for (o, l) in self.scene.objects().iter().zip(self.labeling_inputs()?) {
            table.insert(o.id.clone(), vec![GRAY; l.segment_count()])?;
        }
        Ok(table)
    }

    /// Uses an externally produced base color table as the stage output.
    pub fn supply_base_colors(&mut self, table: BaseColorTable) -> Result<()> {
        for o in self.scene.objects() {
            if table.object(&o.id).is_none() {
                return Err(Error::MissingBaseColor {
                    object: o.id.clone(),
                    segment: 0,
                });
            }
        }
        let mut f = Fingerprint::new("supplied");
        f.bytes(table.to_json().as_bytes());
        let hash = f.finish();
        self.state.base_colors = Some(table);
        self.state.completed.insert(Stage::BaseColors, hash);
        self.save_state()
    }

    fn structure_stage(&mut self) -> Result<()> {
        let library = self.library()?;
        if self.scene.structure().is_empty() {
            return Err(Error::InvalidConfig(
                "scene has no structure elements; disable the structure stage".into(),
            ));
        }
        let mut rng = stage_rng(self.config.seed, Stage::Structure, 0);
        let a = retrieve_structure_textures(
            self.scene.structure(),
            &self.scene.description().structure_prompt,
            &library,
            &self.style.target_image,
            self.style.weights.lambda1,
            self.backend.as_ref(),
            self.config.structure_candidates,
            &mut rng,
        )?;
        let mut csv = String::from("candidate,textures,hist,clip,score\n");
        for (i, c) in a.candidates.iter().enumerate() {
            let _ = writeln!(
                csv,
                "{i},{},{},{},{}",
                c.textures.join(";"),
                c.hist,
                c.clip,
                c.score
            );
        }
        write_json(&self.path(Stage::Structure, ASSIGNMENT_FILE), &a)?;
        write_atomic(&self.path(Stage::Structure, "scores.csv"), csv.as_bytes())?;
        self.state.logs.insert(
            Stage::Structure,
            vec![self.rel(Stage::Structure, "scores.csv")],
        );
        self.state.structure = Some(a);
        Ok(())
    }

    fn parts_stage(&mut self) -> Result<()> {
        let base = self.config.discovery_config();
        let seed = self.config.seed;
        let indices: Vec<usize> = (0..self.scene.objects().len()).collect();
        let scene = &self.scene;
        let backend = self.backend.as_ref();
        let found = crate::par::map(&indices, |&i| {
            let mut cfg = base;
            cfg.seed = derive_seed(seed, Stage::Parts, i);
            discover_parts(
                &scene.unit_mesh(i),
                &scene.objects()[i].class_label,
                backend,
                &cfg,
            )
        });
        let mut labelings = BTreeMap::new();
        let mut csv = String::from("object,round,segments_before,segments_after\n");
        let mut logs = vec![self.rel(Stage::Parts, "rounds.csv")];
        for (o, d) in self.scene.objects().iter().zip(found) {
            let d = d?;
            for r in &d.rounds {
                let _ = writeln!(
                    csv,
                    "{},{},{},{}",
                    o.id, r.round, r.segments_before, r.segments_after
                );
            }
            let audit = format!("{}.audit.jsonl", o.id);
            write_atomic(&self.path(Stage::Parts, &audit), d.audit_jsonl().as_bytes())?;
            logs.push(self.rel(Stage::Parts, &audit));
            log::info!(
                "{}: {} parts in {} rounds",
                o.id,
                d.labeling.segment_count(),
                d.round_count()
            );
            labelings.insert(o.id.clone(), d.labeling);
        }
        write_json(&self.path(Stage::Parts, LABELINGS_FILE), &labelings)?;
        write_atomic(&self.path(Stage::Parts, "rounds.csv"), csv.as_bytes())?;
        self.state.logs.insert(Stage::Parts, logs);
        self.state.labelings = Some(labelings);
        Ok(())
    }

    fn base_colors_stage(&mut self) -> Result<()> {
        let labelings = self.labeling_inputs()?;
        let library;
        let textures = match self.structure_input()? {
            Some(a) => {
                library = self.library()?;
                a.resolve(self.scene.structure(), &library)?
            }
            None => Vec::new(),
        };
        let prompts: Vec<String> = self
            .scene
            .objects()
            .iter()
            .map(|o| compose_style_prompt(&o.text(), &self.style.style_text))
            .collect();
        let opt = self.config.base_color_optimizer().with_seed(derive_seed(
            self.config.seed,
            Stage::BaseColors,
            0,
        ));
        let mut rng = stage_rng(self.config.seed, Stage::BaseColors, 0);
        let run = assign_base_colors(
            &self.scene,
            &labelings,
            &self.style,
            &prompts,
            &textures,
            self.backend.as_ref(),
            &opt,
            &self.config.base_colors,
            &mut rng,
        )?;
        let mut csv = String::from("step,hist,object_clip,scene_clip,total\n");
        for s in &run.steps {
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                s.step, s.hist, s.object_clip, s.scene_clip, s.total
            );
        }
        write_atomic(
            &self.path(Stage::BaseColors, BASE_COLORS_FILE),
            run.table.to_json().as_bytes(),
        )?;
        write_atomic(&self.path(Stage::BaseColors, "loss.csv"), csv.as_bytes())?;
        self.state.logs.insert(
            Stage::BaseColors,
            vec![self.rel(Stage::BaseColors, "loss.csv")],
        );
        self.state.base_colors = Some(run.table);
        Ok(())
    }

    /// Trains stale fields, `parallel_objects` at a time. Returns whether
    /// every object now has a current field.
    fn detail_stage(&mut self, only: Option<&[String]>) -> Result<bool> {
        let base = self.base_input()?;
        let labelings = self.labeling_inputs()?;
        let objects = self.scene.objects();
        let mut todo = Vec::new();
        for (i, o) in objects.iter().enumerate() {
            let hash = self.object_hash(i)?;
            let current = self.state.fields.get(&o.id).is_some_and(|a| {
                a.hash == hash
                    && self.config.out.join(&a.checkpoint).is_file()
                    && self.config.out.join(&a.colors).is_file()
            });
            if !current && only.is_none_or(|ids| ids.contains(&o.id)) {
                todo.push((i, hash));
            } else if !current {
                self.state.fields.remove(&o.id);
            }
        }
        let cache = self.config.out.join("cache");
        let settings = self.config.detail_settings();
        let opt = self.config.detail_optimizer();
        for chunk in todo.chunks(self.config.parallel_objects) {
            let trained = crate::par::map(chunk, |(i, _)| {
                let o = &objects[*i];
                let geom = ObjectGeometry::build(
                    &o.mesh,
                    &labelings[*i],
                    settings.fourier_seed,
                    Some(&cache),
                )?;
                let prompt = compose_style_prompt(&o.text(), &self.style.style_text);
                let opt = opt.with_seed(derive_seed(self.config.seed, Stage::Detail, *i));
                let mut rng = stage_rng(self.config.seed, Stage::Detail, *i);
                let train = if self.config.displacement {
                    train_lnsf_with_displacement
                } else {
                    train_lnsf
                };
                let t = train(
                    &o.id,
                    &geom,
                    &base,
                    &prompt,
                    &self.style,
                    self.backend.as_ref(),
                    &opt,
                    &settings,
                    &mut rng,
                )?;
                Ok::<_, Error>((t, opt.seed))
            });
            for ((i, hash), result) in chunk.iter().zip(trained) {
                let (t, seed) = result?;
                let id = &objects[*i].id;
                let extra = serde_json::json!({"object": id, "seed": seed, "steps": t.steps.len()});
                let (ckpt, colors, loss) = (
                    format!("{id}.lnsf"),
                    format!("{id}.colors.json"),
                    format!("{id}.loss.csv"),
                );
                write_atomic(&self.path(Stage::Detail, &ckpt), &t.field.to_bytes(&extra))?;
                write_json(
                    &self.path(Stage::Detail, &colors),
                    &ObjectColors {
                        colors: t.final_colors,
                        displacement: t.displacement,
                    },
                )?;
                let mut csv = String::from("step,color_loss,geometry_loss\n");
                for s in &t.steps {
                    let _ = writeln!(csv, "{},{},{}", s.step, s.color_loss, s.geometry_loss);
                }
                write_atomic(&self.path(Stage::Detail, &loss), csv.as_bytes())?;
                let logs = self.state.logs.entry(Stage::Detail).or_default();
                let rel = PathBuf::from(Stage::Detail.name()).join(&loss);
                if !logs.contains(&rel) {
                    logs.push(rel);
                }
                self.state.fields.insert(
                    id.clone(),
                    FieldArtifact {
                        checkpoint: self.rel(Stage::Detail, &ckpt),
                        colors: self.rel(Stage::Detail, &colors),
                        steps: t.steps.len(),
                        hash: hash.clone(),
                    },
                );
            }
            self.save_state()?;
        }
        Ok(objects
            .iter()
            .all(|o| self.state.fields.contains_key(&o.id)))
    }

    /// Stylized objects in world space, before edits.
    pub fn stylized_objects(&self) -> Result<Vec<ExportObject>> {
        let labelings = self.labeling_inputs()?;
        let base = self.base_input()?;
        let mut out = Vec::new();
        for (i, o) in self.scene.objects().iter().enumerate() {
            let (colors, displacement) = if self.config.stages.detail {
                let a = self
                    .state
                    .fields
                    .get(&o.id)
                    .ok_or_else(|| Error::MissingUpstream(format!("{}.lnsf", o.id)))?;
                let c: ObjectColors = serde_json::from_str(&std::fs::read_to_string(
                    self.config.out.join(&a.colors),
                )?)?;
                (c.colors, c.displacement)
            } else {
                let segs = labelings[i].vertex_segments(&o.mesh);
                let colors = segs
                    .iter()
                    .map(|&s| base.get(&o.id, s))
                    .collect::<Result<Vec<_>>>()?;
                (colors, Vec::new())
            };
            let mesh = if displacement.iter().any(|&d| d != 0.0) {
                let ub = self.scene.unit_box(i);
                let unit = o.mesh.transformed(&ub.matrix());
                let back =
                    Matrix4::new_translation(&ub.center) * Matrix4::new_scaling(1.0 / ub.scale);
                displaced_mesh(&unit, &displacement)?.transformed(&(o.placement.matrix * back))
            } else {
                self.scene.world_mesh(i)
            };
            if colors.len() != mesh.vertex_count() {
                return Err(Error::LengthMismatch(format!(
                    "{} colors for object {}",
                    colors.len(),
                    o.id
                )));
            }
            out.push(ExportObject {
                id: o.id.clone(),
                mesh,
                colors,
            });
        }
        Ok(out)
    }

    /// Renders the structure and `objects` from every scene camera.
    pub fn previews(&self, objects: &[ExportObject]) -> Result<Vec<crate::Raster>> {
        let library;
        let textures = match self.structure_input()? {
            Some(a) => {
                library = self.library()?;
                a.resolve(self.scene.structure(), &library)?
            }
            None => Vec::new(),
        };
        let mut surfaces = if textures.is_empty() {
            self.scene
                .structure()
                .iter()
                .map(|e| Surface::new(&e.mesh, Paint::Constant(GRAY)))
                .collect()
        } else {
            structure_surfaces(self.scene.structure(), &textures)
        };
        surfaces.extend(
            objects
                .iter()
                .map(|o| Surface::new(&o.mesh, Paint::vertex_colors(&o.mesh, &o.colors))),
        );
        let settings = RenderSettings {
            width: self.config.preview.width,
            height: self.config.preview.height,
            shading: Shading::Lambertian,
            ..RenderSettings::default()
        };
        let poses = scene_camera_set(&self.scene)?;
        let renders = crate::par::map(&poses, |pose| {
            rasterize(&surfaces, pose, &settings).map(|o| o.image)
        });
        renders.into_iter().collect()
    }

    fn export_stage(&mut self) -> Result<()> {
        let objects = apply_edits(self.stylized_objects()?, &self.config.edits)?;
        let mut files = Vec::new();
        for o in &objects {
            let name = format!("{}.ply", o.id);
            write_atomic(
                &self.path(Stage::Export, &name),
                write_ply(&o.mesh, &o.colors)?.as_bytes(),
            )?;
            files.push(self.rel(Stage::Export, &name));
        }
        if let Some(a) = self.structure_input()? {
            write_json(&self.path(Stage::Export, "structure_assignment.json"), a)?;
            files.push(self.rel(Stage::Export, "structure_assignment.json"));
        }
        for (k, img) in self.previews(&objects)?.iter().enumerate() {
            let name = format!("preview_{k:02}.png");
            img.save_png(&self.path(Stage::Export, &name))?;
            files.push(self.rel(Stage::Export, &name));
        }
        self.state.exports = Some(files);
        Ok(())
    }
}

/// Runs the whole pipeline from a config.
pub fn run_pipeline(config: PipelineConfig) -> Result<PipelineState> {
    let mut p = Pipeline::open(config, false)?;
    p.run(None)?;
    Ok(p.state)
}
