//! Detail stylization: per-object style-field training over augmented views,
//! with an optional displacement branch.

use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::base_colors::BaseColorTable;
use super::field::{FieldInputs, FieldSpec, Lnsf, SPECTRAL_DIM};
use crate::config::{OptimizerConfig, StyleSpec};
use crate::error::{Error, Result};
use crate::geometry::{cached_basis, laplace_beltrami_basis, FrequencyMatrix, PartLabeling};
use crate::losses::{clip_loss, clip_loss_grad, EmbeddingBackend};
use crate::mesh::{TriangleMesh, Vec3};
use crate::optim::Adam;
use crate::render::{
    augment_view_crop, composite_background, composite_backward, directional_prompt, rasterize,
    sample_object_camera, BackgroundMode, CameraPose, ObjectCameraConfig, Paint, RenderSettings,
    Shading, Surface,
};
use crate::scene::UnitBox;

/// How the field output is added to the base color.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComposeMode {
    /// `clamp(base + α·F, 0, 1)`.
    #[default]
    Eq5,
    /// `0.5 + 0.5·F`: the field alone, centered on gray.
    Supp,
}

impl std::str::FromStr for ComposeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eq5" => Ok(ComposeMode::Eq5),
            "supp" => Ok(ComposeMode::Supp),
            other => Err(Error::InvalidConfig(format!(
                "unknown compose mode {other:?}"
            ))),
        }
    }
}

/// Final color of one channel and its derivative with respect to the field
/// output. The clamp passes no gradient outside (0, 1).
pub fn compose_channel(base: f64, field: f64, alpha: f64, mode: ComposeMode) -> (f64, f64) {
    match mode {
        ComposeMode::Eq5 => {
            let c = base + alpha * field;
            if c <= 0.0 {
                (0.0, 0.0)
            } else if c >= 1.0 {
                (1.0, 0.0)
            } else {
                (c, alpha)
            }
        }
        ComposeMode::Supp => (0.5 + 0.5 * field, 0.5),
    }
}

/// A mesh in its unit box with the field inputs of each vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectGeometry {
    pub mesh: TriangleMesh,
    pub labeling: PartLabeling,
    pub inputs: FieldInputs,
}

impl ObjectGeometry {
    /// Normalizes `mesh` to its unit box and computes up to 128 spectral
    /// functions, through the sidecar cache when `cache_dir` is given.
    pub fn build(
        mesh: &TriangleMesh,
        labeling: &PartLabeling,
        fourier_seed: u64,
        cache_dir: Option<&Path>,
    ) -> Result<Self> {
        labeling.check_mesh(mesh)?;
        let unit = mesh.transformed(&UnitBox::of(mesh).matrix());
        let k = SPECTRAL_DIM.min(unit.vertex_count());
        let basis = match cache_dir {
            Some(dir) => cached_basis(&unit, k, dir)?,
            None => laplace_beltrami_basis(&unit, k)?,
        };
        let inputs = FieldInputs::new(
            &unit,
            labeling,
            &basis,
            &FrequencyMatrix::sample(fourier_seed),
        )?;
        Ok(ObjectGeometry {
            mesh: unit,
            labeling: labeling.clone(),
            inputs,
        })
    }

    /// Base color of every vertex from its majority segment.
    pub fn vertex_base(&self, base: &BaseColorTable, object: &str) -> Result<Vec<[f64; 3]>> {
        self.inputs
            .segments
            .iter()
            .map(|&s| base.get(object, s))
            .collect()
    }
}

/// Composes per-vertex base colors with a field output (first three columns).
pub fn compose_colors(
    output: &Array2<f64>,
    vertex_base: &[[f64; 3]],
    alpha: f64,
    mode: ComposeMode,
) -> Vec<[f64; 3]> {
    vertex_base
        .iter()
        .enumerate()
        .map(|(v, b)| std::array::from_fn(|k| compose_channel(b[k], output[(v, k)], alpha, mode).0))
        .collect()
}

/// Final per-vertex colors of an object under a field.
pub fn eval_final_colors(
    field: &Lnsf,
    geometry: &ObjectGeometry,
    base: &BaseColorTable,
    object: &str,
    alpha: f64,
    mode: ComposeMode,
) -> Result<Vec<[f64; 3]>> {
    let vertex_base = geometry.vertex_base(base, object)?;
    let out = field.evaluate(&geometry.inputs)?;
    Ok(compose_colors(&out, &vertex_base, alpha, mode))
}

/// Per-vertex displacement `bound · F₃`, zero for color-only fields.
pub fn displacements(output: &Array2<f64>, bound: f64) -> Vec<f64> {
    if output.ncols() < 4 {
        return vec![0.0; output.nrows()];
    }
    output.column(3).iter().map(|f| bound * f).collect()
}

/// Moves each vertex along its normal.
pub fn displaced_mesh(mesh: &TriangleMesh, displacement: &[f64]) -> Result<TriangleMesh> {
    if displacement.len() != mesh.vertex_count() {
        return Err(Error::LengthMismatch(
            "one displacement per vertex required".into(),
        ));
    }
    let vertices: Vec<Vec3> = mesh
        .vertices
        .iter()
        .zip(&mesh.normals)
        .zip(displacement)
        .map(|((p, n), d)| p + n * *d)
        .collect();
    let mut out = TriangleMesh::new(vertices, mesh.faces.clone())?;
    out.face_groups = mesh.face_groups.clone();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetailConfig {
    pub views_per_step: usize,
    /// Render size, crop range, jitter and encoder resolution.
    pub render: RenderSettings,
    pub camera: ObjectCameraConfig,
    pub compose: ComposeMode,
    /// Largest displacement, in unit-box units.
    pub displacement_bound: f64,
    pub fourier_seed: u64,
}

impl Default for DetailConfig {
    fn default() -> Self {
        DetailConfig {
            views_per_step: 1,
            render: RenderSettings::square(224),
            camera: ObjectCameraConfig::default(),
            compose: ComposeMode::Eq5,
            displacement_bound: 0.05,
            fourier_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetailStep {
    pub step: usize,
    pub color_loss: f64,
    pub geometry_loss: f64,
}

/// Step-at-a-time field training for one object.
pub struct LnsfTrainer<'a> {
    geometry: &'a ObjectGeometry,
    vertex_base: Vec<[f64; 3]>,
    prompt: String,
    backend: &'a dyn EmbeddingBackend,
    cfg: DetailConfig,
    alpha: f64,
    field: Lnsf,
    adams: Vec<Adam>,
    steps: usize,
}

impl<'a> LnsfTrainer<'a> {
    /// `prompt` is the style-augmented object text; view prefixes are added
    /// per sample.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        geometry: &'a ObjectGeometry,
        vertex_base: Vec<[f64; 3]>,
        prompt: impl Into<String>,
        alpha: f64,
        displacement: bool,
        backend: &'a dyn EmbeddingBackend,
        opt: &OptimizerConfig,
        cfg: &DetailConfig,
    ) -> Result<Self> {
        opt.check()?;
        cfg.render.check()?;
        if cfg.views_per_step == 0 {
            return Err(Error::InvalidConfig("views_per_step must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidConfig(format!(
                "alpha {alpha} outside [0, 1]"
            )));
        }
        if !(cfg.displacement_bound >= 0.0 && cfg.displacement_bound.is_finite()) {
            return Err(Error::InvalidConfig(
                "displacement_bound must be finite and >= 0".into(),
            ));
        }
        if displacement && cfg.displacement_bound > 0.0 && !cfg.render.position_gradients {
            return Err(Error::GradientUnsupported);
        }
        if vertex_base.len() != geometry.mesh.vertex_count() {
            return Err(Error::LengthMismatch(
                "one base color per vertex required".into(),
            ));
        }
        let segments = geometry.labeling.segment_count();
        let spec = if displacement {
            FieldSpec::with_displacement(segments, opt.seed)
        } else {
            FieldSpec::color(segments, opt.seed)
        };
        let field = Lnsf::new(spec)?;
        let adams = field
            .tensors()
            .iter()
            .map(|t| Adam::new(*opt, t.len()))
            .collect();
        Ok(LnsfTrainer {
            geometry,
            vertex_base,
            prompt: prompt.into(),
            backend,
            cfg: *cfg,
            alpha,
            field,
            adams,
            steps: 0,
        })
    }

    pub fn field(&self) -> &Lnsf {
        &self.field
    }

    pub fn into_field(self) -> Lnsf {
        self.field
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    fn displacing(&self) -> bool {
        self.field.spec().has_displacement() && self.cfg.displacement_bound > 0.0
    }

    fn current_mesh(&self, output: &Array2<f64>) -> Result<TriangleMesh> {
        if self.displacing() {
            displaced_mesh(
                &self.geometry.mesh,
                &displacements(output, self.cfg.displacement_bound),
            )
        } else {
            Ok(self.geometry.mesh.clone())
        }
    }

    pub fn final_colors(&self) -> Result<Vec<[f64; 3]>> {
        let out = self.field.evaluate(&self.geometry.inputs)?;
        Ok(compose_colors(
            &out,
            &self.vertex_base,
            self.alpha,
            self.cfg.compose,
        ))
    }

    pub fn displacement(&self) -> Result<Vec<f64>> {
        let out = self.field.evaluate(&self.geometry.inputs)?;
        Ok(if self.displacing() {
            displacements(&out, self.cfg.displacement_bound)
        } else {
            vec![0.0; out.nrows()]
        })
    }

    /// Unaugmented color loss from a fixed pose, for monitoring.
    pub fn view_loss(&self, pose: &CameraPose) -> Result<f64> {
        let out = self.field.evaluate(&self.geometry.inputs)?;
        let colors = compose_colors(&out, &self.vertex_base, self.alpha, self.cfg.compose);
        let mesh = self.current_mesh(&out)?;
        let settings = RenderSettings {
            shading: Shading::Unshaded,
            position_gradients: false,
            ..self.cfg.render
        };
        let r = rasterize(
            &[Surface::new(&mesh, Paint::vertex_colors(&mesh, &colors))],
            pose,
            &settings,
        )?;
        clip_loss(
            &r.image,
            &directional_prompt(pose.view_tag, &self.prompt)?,
            self.backend,
        )
    }

    /// Renders, augments and scores one view, returning the loss and
    /// `∂L/∂pixel` pulled back to the unaugmented render.
    fn augmented_grad(
        &self,
        surface: Surface,
        pose: &CameraPose,
        settings: &RenderSettings,
        rng: &mut impl Rng,
    ) -> Result<(f64, crate::render::RenderOutput, Vec<[f64; 3]>)> {
        let surfaces = [surface];
        let r = rasterize(&surfaces, pose, settings)?;
        let mode = BackgroundMode::ALL[rng.random_range(0..BackgroundMode::ALL.len())];
        let composed = composite_background(&r.image, mode, rng);
        let (img, crop) = augment_view_crop(&composed, rng, settings);
        let prompt = directional_prompt(pose.view_tag, &self.prompt)?;
        let (loss, g) = clip_loss_grad(&img, &prompt, self.backend)?;
        let g = composite_backward(&composed, &crop.backward(&g));
        Ok((loss, r, g))
    }

    /// One Adam step on the mean loss over `views_per_step` augmented views.
    pub fn step(&mut self, rng: &mut impl Rng) -> Result<DetailStep> {
        let cache = self.field.forward(&self.geometry.inputs)?;
        let out = cache.output();
        let n = out.nrows();
        let (alpha, mode) = (self.alpha, self.cfg.compose);
        let mut colors = Vec::with_capacity(n);
        let mut dcolor = Vec::with_capacity(n);
        for (v, b) in self.vertex_base.iter().enumerate() {
            let pairs: [(f64, f64); 3] =
                std::array::from_fn(|k| compose_channel(b[k], out[(v, k)], alpha, mode));
            colors.push(pairs.map(|p| p.0));
            dcolor.push(pairs.map(|p| p.1));
        }
        let mesh = self.current_mesh(out)?;
        let color_settings = RenderSettings {
            shading: Shading::Unshaded,
            position_gradients: false,
            ..self.cfg.render
        };
        let geo_settings = RenderSettings {
            shading: Shading::Lambertian,
            position_gradients: true,
            ..self.cfg.render
        };
        let scale = 1.0 / self.cfg.views_per_step as f64;
        let mut g_out = Array2::zeros(out.raw_dim());
        let mut record = DetailStep {
            step: self.steps,
            color_loss: 0.0,
            geometry_loss: 0.0,
        };
        for _ in 0..self.cfg.views_per_step {
            let view = sample_object_camera(rng, &self.cfg.camera);
            let surface = Surface::new(&mesh, Paint::vertex_colors(&mesh, &colors));
            let (loss, r, g) =
                self.augmented_grad(surface.clone(), &view.pose, &color_settings, rng)?;
            record.color_loss += scale * loss;
            for (v, cg) in r.color_grad(&[surface], 0, &g).iter().enumerate() {
                for k in 0..3 {
                    g_out[(v, k)] += scale * cg[k] * dcolor[v][k];
                }
            }
            if self.displacing() {
                let surface = Surface::new(&mesh, Paint::Constant([0.7; 3]));
                let (loss, r, g) =
                    self.augmented_grad(surface.clone(), &view.pose, &geo_settings, rng)?;
                record.geometry_loss += scale * loss;
                let bound = self.cfg.displacement_bound;
                for (v, gp) in r.position_grad(&[surface], 0, &g)?.iter().enumerate() {
                    g_out[(v, 3)] += scale * bound * gp.dot(&self.geometry.mesh.normals[v]);
                }
            }
        }
        let grad = self.field.backward(&cache, &g_out);
        let total = record.color_loss + record.geometry_loss;
        if !total.is_finite() || !grad.is_finite() {
            return Err(Error::NonFiniteLoss {
                step: self.steps,
                detail: format!("style field loss {total} for {:?}", self.prompt),
            });
        }
        for ((adam, p), g) in self
            .adams
            .iter_mut()
            .zip(self.field.tensors_mut())
            .zip(grad.tensors())
        {
            adam.step(p, g);
        }
        self.steps += 1;
        Ok(record)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedField {
    pub field: Lnsf,
    pub final_colors: Vec<[f64; 3]>,
    /// Per-vertex offsets along the normal; all zero without the branch.
    pub displacement: Vec<f64>,
    pub steps: Vec<DetailStep>,
}

#[allow(clippy::too_many_arguments)]
fn train(
    geometry: &ObjectGeometry,
    vertex_base: Vec<[f64; 3]>,
    prompt: &str,
    style: &StyleSpec,
    displacement: bool,
    backend: &dyn EmbeddingBackend,
    opt: &OptimizerConfig,
    cfg: &DetailConfig,
    rng: &mut impl Rng,
) -> Result<TrainedField> {
    let mut trainer = LnsfTrainer::new(
        geometry,
        vertex_base,
        prompt,
        style.weights.alpha,
        displacement,
        backend,
        opt,
        cfg,
    )?;
    let steps = (0..opt.iterations)
        .map(|_| trainer.step(rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainedField {
        final_colors: trainer.final_colors()?,
        displacement: trainer.displacement()?,
        field: trainer.into_field(),
        steps,
    })
}

/// Trains a color-only field for `object` against `prompt` (the
/// style-augmented object text). Base colors and labels are read, never
/// written.
#[allow(clippy::too_many_arguments)]
pub fn train_lnsf(
    object: &str,
    geometry: &ObjectGeometry,
    base: &BaseColorTable,
    prompt: &str,
    style: &StyleSpec,
    backend: &dyn EmbeddingBackend,
    opt: &OptimizerConfig,
    cfg: &DetailConfig,
    rng: &mut impl Rng,
) -> Result<TrainedField> {
    let vertex_base = geometry.vertex_base(base, object)?;
    train(
        geometry,
        vertex_base,
        prompt,
        style,
        false,
        backend,
        opt,
        cfg,
        rng,
    )
}

/// [`train_lnsf`] with a fourth displacement output, adding the embedding
/// loss of an untextured shaded render.
#[allow(clippy::too_many_arguments)]
pub fn train_lnsf_with_displacement(
    object: &str,
    geometry: &ObjectGeometry,
    base: &BaseColorTable,
    prompt: &str,
    style: &StyleSpec,
    backend: &dyn EmbeddingBackend,
    opt: &OptimizerConfig,
    cfg: &DetailConfig,
    rng: &mut impl Rng,
) -> Result<TrainedField> {
    let vertex_base = geometry.vertex_base(base, object)?;
    train(
        geometry,
        vertex_base,
        prompt,
        style,
        true,
        backend,
        opt,
        cfg,
        rng,
    )
}
