//! Scene-wide base-color assignment: one free RGB per discovered part,
//! optimized jointly over all objects.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::library::Texture;
use super::structure::structure_surfaces;
use crate::config::{OptimizerConfig, StyleSpec};
use crate::error::{Error, Result};
use crate::geometry::PartLabeling;
use crate::losses::{clip_loss_grad, hist_loss_grad, soft_color_histogram, EmbeddingBackend};
use crate::mesh::TriangleMesh;
use crate::optim::Adam;
use crate::render::{
    directional_prompt, rasterize, sample_object_camera, scene_camera_set, ObjectCameraConfig,
    Paint, RenderSettings, Shading, Surface,
};
use crate::scene::ValidatedScene;

pub const GRAY: [f64; 3] = [0.5, 0.5, 0.5];

/// Object id → one color per part, indexed by segment id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BaseColorTable {
    objects: BTreeMap<String, Vec<[f64; 3]>>,
}

impl BaseColorTable {
    pub fn new() -> Self {
        BaseColorTable::default()
    }

    pub fn insert(&mut self, object: impl Into<String>, colors: Vec<[f64; 3]>) -> Result<()> {
        if colors.iter().flatten().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::OutOfRange("base colors must lie in [0, 1]".into()));
        }
        self.objects.insert(object.into(), colors);
        Ok(())
    }

    pub fn get(&self, object: &str, segment: usize) -> Result<[f64; 3]> {
        self.objects
            .get(object)
            .and_then(|c| c.get(segment))
            .copied()
            .ok_or_else(|| Error::MissingBaseColor {
                object: object.to_string(),
                segment,
            })
    }

    pub fn object(&self, object: &str) -> Option<&[[f64; 3]]> {
        self.objects.get(object).map(Vec::as_slice)
    }

    /// Colors of `object` for segments `0..segments`.
    pub fn object_colors(&self, object: &str, segments: usize) -> Result<Vec<[f64; 3]>> {
        (0..segments).map(|s| self.get(object, s)).collect()
    }

    pub fn objects(&self) -> impl Iterator<Item = (&str, &[[f64; 3]])> {
        self.objects.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn part_count(&self) -> usize {
        self.objects.values().map(Vec::len).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let table: BaseColorTable = serde_json::from_str(text)
            .map_err(|e| Error::parse("base color table", e.to_string()))?;
        for (id, colors) in &table.objects {
            if colors.iter().flatten().any(|c| !(0.0..=1.0).contains(c)) {
                return Err(Error::OutOfRange(format!(
                    "base colors of {id} outside [0, 1]"
                )));
            }
        }
        Ok(table)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaseColorConfig {
    pub object_resolution: usize,
    pub scene_resolution: usize,
    pub views_per_object: usize,
    pub camera: ObjectCameraConfig,
}

impl Default for BaseColorConfig {
    fn default() -> Self {
        BaseColorConfig {
            object_resolution: 128,
            scene_resolution: 128,
            views_per_object: 1,
            camera: ObjectCameraConfig::default(),
        }
    }
}

/// Loss terms of one step, before weighting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseColorStep {
    pub step: usize,
    pub hist: f64,
    pub object_clip: f64,
    pub scene_clip: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaseColorRun {
    pub table: BaseColorTable,
    pub steps: Vec<BaseColorStep>,
}

/// Optimizes part colors from gray. Each step renders the scene from one
/// sampled scene camera (structure textured, objects in place) and every
/// object from `views_per_object` sampled object cameras, and minimizes
/// `hist_weight·hist + λ2·Σ_i mean_views clip_i + λ3·clip_scene`.
/// Terms with zero weight are neither rendered nor scored.
#[allow(clippy::too_many_arguments)]
pub fn assign_base_colors(
    scene: &ValidatedScene,
    labelings: &[PartLabeling],
    style: &StyleSpec,
    prompts: &[String],
    structure_textures: &[&Texture],
    backend: &dyn EmbeddingBackend,
    opt: &OptimizerConfig,
    cfg: &BaseColorConfig,
    rng: &mut impl Rng,
) -> Result<BaseColorRun> {
    opt.check()?;
    style.check()?;
    let objects = scene.objects();
    if labelings.len() != objects.len() || prompts.len() != objects.len() {
        return Err(Error::LengthMismatch(format!(
            "{} objects, {} labelings, {} prompts",
            objects.len(),
            labelings.len(),
            prompts.len()
        )));
    }
    if !structure_textures.is_empty() && structure_textures.len() != scene.structure().len() {
        return Err(Error::LengthMismatch(
            "one texture per structure element required".into(),
        ));
    }
    if cfg.views_per_object == 0 {
        return Err(Error::InvalidConfig("views_per_object must be >= 1".into()));
    }
    let w = style.weights;
    let world: Vec<TriangleMesh> = (0..objects.len()).map(|i| scene.world_mesh(i)).collect();
    let unit: Vec<TriangleMesh> = (0..objects.len()).map(|i| scene.unit_mesh(i)).collect();
    for (l, m) in labelings.iter().zip(&world) {
        l.check_mesh(m)?;
    }
    let use_scene = w.hist_weight != 0.0 || w.lambda3 != 0.0;
    let use_objects = w.lambda2 != 0.0;
    let scene_cams = if use_scene {
        scene_camera_set(scene)?
    } else {
        Vec::new()
    };
    let target_hist = if w.hist_weight != 0.0 {
        Some(soft_color_histogram(&style.target_image)?)
    } else {
        None
    };
    let scene_prompt = scene.description().scene_type.clone();
    let scene_settings =
        RenderSettings::square(cfg.scene_resolution).with_shading(Shading::Unshaded);
    let object_settings =
        RenderSettings::square(cfg.object_resolution).with_shading(Shading::Unshaded);

    let offsets: Vec<usize> = labelings
        .iter()
        .scan(0, |acc, l| {
            let o = *acc;
            *acc += 3 * l.segment_count();
            Some(o)
        })
        .collect();
    let n_params: usize = labelings.iter().map(|l| 3 * l.segment_count()).sum();
    let mut params: Vec<f64> = GRAY.repeat(n_params / 3);
    let mut adam = Adam::new(*opt, n_params);
    let mut steps = Vec::with_capacity(opt.iterations);

    for step in 0..opt.iterations {
        let colors: Vec<Vec<[f64; 3]>> = labelings
            .iter()
            .zip(&offsets)
            .map(|(l, &o)| {
                params[o..o + 3 * l.segment_count()]
                    .chunks_exact(3)
                    .map(|c| [c[0], c[1], c[2]])
                    .collect()
            })
            .collect();
        let mut grad = vec![0.0; n_params];
        let mut record = BaseColorStep {
            step,
            hist: 0.0,
            object_clip: 0.0,
            scene_clip: 0.0,
            total: 0.0,
        };

        if use_scene {
            let cam = &scene_cams[rng.random_range(0..scene_cams.len())];
            let mut surfaces = if structure_textures.is_empty() {
                scene
                    .structure()
                    .iter()
                    .map(|e| Surface::new(&e.mesh, Paint::Constant(GRAY)))
                    .collect()
            } else {
                structure_surfaces(scene.structure(), structure_textures)
            };
            let first = surfaces.len();
            for (i, m) in world.iter().enumerate() {
                surfaces.push(Surface::new(
                    m,
                    Paint::face_classes(labelings[i].labels(), &colors[i]),
                ));
            }
            let out = rasterize(&surfaces, cam, &scene_settings)?;
            let mut g_img = out.image.zero_grad();
            if let Some(th) = &target_hist {
                let (l, g) = hist_loss_grad(&out.image, th)?;
                record.hist = l;
                accumulate(&mut g_img, &g, w.hist_weight);
            }
            if w.lambda3 != 0.0 {
                let (l, g) = clip_loss_grad(&out.image, &scene_prompt, backend)?;
                record.scene_clip = l;
                accumulate(&mut g_img, &g, w.lambda3);
            }
            for i in 0..world.len() {
                scatter(
                    &mut grad[offsets[i]..],
                    &out.color_grad(&surfaces, first + i, &g_img),
                );
            }
        }

        if use_objects {
            let views: Vec<(usize, crate::render::ObjectView)> = (0..unit.len())
                .flat_map(|i| (0..cfg.views_per_object).map(move |_| i))
                .map(|i| (i, sample_object_camera(rng, &cfg.camera)))
                .collect();
            let results =
                crate::par::map(&views, |(i, view)| -> Result<(usize, f64, Vec<[f64; 3]>)> {
                    let surfaces = [Surface::new(
                        &unit[*i],
                        Paint::face_classes(labelings[*i].labels(), &colors[*i]),
                    )];
                    let out = rasterize(&surfaces, &view.pose, &object_settings)?;
                    let prompt = directional_prompt(view.pose.view_tag, &prompts[*i])?;
                    let (l, g) = clip_loss_grad(&out.image, &prompt, backend)?;
                    Ok((*i, l, out.color_grad(&surfaces, 0, &g)))
                });
            let scale = w.lambda2 / cfg.views_per_object as f64;
            for r in results {
                let (i, l, g) = r?;
                record.object_clip += l / cfg.views_per_object as f64;
                let scaled: Vec<[f64; 3]> = g.iter().map(|c| c.map(|x| x * scale)).collect();
                scatter(&mut grad[offsets[i]..], &scaled);
            }
        }

        record.total = w.hist_weight * record.hist
            + w.lambda2 * record.object_clip
            + w.lambda3 * record.scene_clip;
        if !record.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss {
                step,
                detail: format!("base color loss terms {record:?}"),
            });
        }
        steps.push(record);
        adam.step(&mut params, &grad);
        for p in &mut params {
            *p = p.clamp(0.0, 1.0);
        }
    }

    let mut table = BaseColorTable::new();
    for ((o, l), &off) in objects.iter().zip(labelings).zip(&offsets) {
        let colors = params[off..off + 3 * l.segment_count()]
            .chunks_exact(3)
            .map(|c| [c[0], c[1], c[2]])
            .collect();
        table.insert(o.id.clone(), colors)?;
    }
    Ok(BaseColorRun { table, steps })
}

fn accumulate(into: &mut [[f64; 3]], g: &[[f64; 3]], weight: f64) {
    for (a, b) in into.iter_mut().zip(g) {
        for k in 0..3 {
            a[k] += weight * b[k];
        }
    }
}

fn scatter(into: &mut [f64], g: &[[f64; 3]]) {
    for (s, c) in g.iter().enumerate() {
        for k in 0..3 {
            into[3 * s + k] += c[k];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::rgb_delta_e;
    use crate::config::StyleWeights;
    use crate::losses::MockOracleBackend;
    use crate::raster::Raster;
    use crate::scene::validate_scene;
    use crate::synthetic;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (ValidatedScene, Vec<PartLabeling>) {
        let scene = validate_scene(synthetic::toy_scene()).unwrap();
        let labelings = (0..scene.objects().len())
            .map(|i| {
                let faces = scene.objects()[i].mesh.face_count();
                PartLabeling::compact(
                    &(0..faces)
                        .map(|f| usize::from(f >= faces / 2))
                        .collect::<Vec<_>>(),
                )
                .unwrap()
            })
            .collect();
        (scene, labelings)
    }

    fn style(lambda2: f64, lambda3: f64) -> StyleSpec {
        let mut s = StyleSpec::new(Raster::filled(8, 8, [0.5, 0.5, 0.5]), "").unwrap();
        s.weights = StyleWeights {
            lambda2,
            lambda3,
            hist_weight: 0.0,
            ..StyleWeights::default()
        };
        s
    }

    #[test]
    fn table_json_round_trip_and_missing_color() {
        let mut t = BaseColorTable::new();
        t.insert("chair0", vec![[0.1, 0.2, 0.3]]).unwrap();
        let back = BaseColorTable::from_json(&t.to_json()).unwrap();
        assert_eq!(back, t);
        assert!(matches!(
            back.get("chair0", 1),
            Err(Error::MissingBaseColor { .. })
        ));
        assert!(t.insert("x", vec![[1.5, 0.0, 0.0]]).is_err());
    }

    #[test]
    fn scene_prompt_pulls_every_part_to_blue() {
        let (scene, labelings) = setup();
        let backend = MockOracleBackend::with_colors([("bedroom", [0.0, 0.0, 1.0])]);
        let prompts: Vec<String> = scene.objects().iter().map(|o| o.text()).collect();
        let opt = OptimizerConfig::default()
            .with_lr(0.02)
            .with_iterations(150);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = BaseColorConfig::default();
        let run = assign_base_colors(
            &scene,
            &labelings,
            &style(0.0, 0.2),
            &prompts,
            &[],
            &backend,
            &opt,
            &cfg,
            &mut rng,
        )
        .unwrap();
        assert_eq!(run.table.part_count(), 4);
        for (_, colors) in run.table.objects() {
            for &c in colors {
                assert!(rgb_delta_e(c, [0.0, 0.0, 1.0]).unwrap() < 2.0, "{c:?}");
            }
        }
    }

    #[test]
    fn object_prompts_separate() {
        let (scene, labelings) = setup();
        let backend = MockOracleBackend::with_colors([
            ("chair", [0.9, 0.1, 0.1]),
            ("table", [0.1, 0.8, 0.1]),
        ]);
        let prompts: Vec<String> = scene.objects().iter().map(|o| o.text()).collect();
        let opt = OptimizerConfig::default()
            .with_lr(0.02)
            .with_iterations(150);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = BaseColorConfig::default();
        let run = assign_base_colors(
            &scene,
            &labelings,
            &style(0.2, 0.0),
            &prompts,
            &[],
            &backend,
            &opt,
            &cfg,
            &mut rng,
        )
        .unwrap();
        for (id, target) in [("chair0", [0.9, 0.1, 0.1]), ("table0", [0.1, 0.8, 0.1])] {
            for &c in run.table.object(id).unwrap() {
                assert!(rgb_delta_e(c, target).unwrap() < 2.0, "{id}: {c:?}");
            }
        }
    }

    #[test]
    fn misaligned_inputs_are_rejected() {
        let (scene, labelings) = setup();
        let backend = MockOracleBackend::with_colors([]);
        let opt = OptimizerConfig::default().with_iterations(1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = assign_base_colors(
            &scene,
            &labelings,
            &style(0.2, 0.2),
            &[],
            &[],
            &backend,
            &opt,
            &BaseColorConfig::default(),
            &mut rng,
        );
        assert!(matches!(r, Err(Error::LengthMismatch(_))));
    }
}
