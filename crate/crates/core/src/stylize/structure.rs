//! Structure texture retrieval: score joint texture assignments of the bare
//! room against the target image and keep the best.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::library::{Texture, TextureLibrary};
use crate::error::{Error, Result};
use crate::losses::{
    clip_loss, histogram_distance, soft_color_histogram, ColorHistogram, EmbeddingBackend,
};
use crate::raster::Raster;
use crate::render::camera::scene_camera_poses;
use crate::render::{rasterize, CameraPose, Paint, RenderOutput, RenderSettings, Shading, Surface};
use crate::scene::StructureElement;

pub const DEFAULT_CANDIDATES: usize = 64;
pub const STRUCTURE_RESOLUTION: usize = 128;

/// `hist_loss(render, target) + λ1 · clip_loss(render, prompt)`; the clip
/// term is skipped when `λ1 = 0`.
pub fn score_structure_candidate(
    render: &Raster,
    target: &Raster,
    prompt: &str,
    lambda1: f64,
    backend: &dyn EmbeddingBackend,
) -> Result<f64> {
    let target_hist = soft_color_histogram(target)?;
    Ok(score_parts(render, &target_hist, prompt, lambda1, backend)?.2)
}

fn score_parts(
    render: &Raster,
    target_hist: &ColorHistogram,
    prompt: &str,
    lambda1: f64,
    backend: &dyn EmbeddingBackend,
) -> Result<(f64, f64, f64)> {
    let hist = histogram_distance(&soft_color_histogram(render)?, target_hist);
    let clip = if lambda1 != 0.0 {
        clip_loss(render, prompt, backend)?
    } else {
        0.0
    };
    Ok((hist, clip, hist + lambda1 * clip))
}

/// Structure surfaces with the given texture per element.
pub fn structure_surfaces<'a>(
    structure: &'a [StructureElement],
    textures: &[&'a Texture],
) -> Vec<Surface<'a>> {
    structure
        .iter()
        .zip(textures)
        .map(|(e, t)| {
            Surface::new(
                &e.mesh,
                Paint::Textured {
                    uv: &e.uv,
                    texture: &t.image,
                    tiling: t.entry.tiling,
                },
            )
        })
        .collect()
}

pub fn structure_render_settings() -> RenderSettings {
    RenderSettings::square(STRUCTURE_RESOLUTION).with_shading(Shading::Unshaded)
}

/// The interior scene camera that sees the most structure pixels.
pub fn structure_camera(structure: &[StructureElement]) -> Result<CameraPose> {
    let mut boxes = structure.iter().map(|s| s.mesh.bounding_box());
    let first = boxes.next().ok_or(Error::EmptyScene)?;
    let (lo, hi) = boxes.fold(first, |(lo, hi), (a, b)| (lo.inf(&a), hi.sup(&b)));
    let surfaces: Vec<Surface> = structure
        .iter()
        .map(|e| Surface::new(&e.mesh, Paint::Constant([0.5; 3])))
        .collect();
    let settings = RenderSettings {
        width: 96,
        height: 64,
        ..RenderSettings::default()
    };
    let mut best: Option<(usize, CameraPose)> = None;
    for pose in scene_camera_poses(lo, hi, true) {
        let seen = match rasterize(&surfaces, &pose, &settings) {
            Ok(out) => out.fragments.iter().filter(|f| f.is_some()).count(),
            Err(Error::EmptyRender) => 0,
            Err(e) => return Err(e),
        };
        if best.as_ref().is_none_or(|(n, _)| seen > *n) {
            best = Some((seen, pose));
        }
    }
    Ok(best.expect("twenty poses").1)
}

pub fn render_structure(
    structure: &[StructureElement],
    textures: &[&Texture],
    camera: &CameraPose,
    settings: &RenderSettings,
) -> Result<RenderOutput> {
    rasterize(&structure_surfaces(structure, textures), camera, settings)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    /// Texture id per structure element, in element order.
    pub textures: Vec<String>,
    pub hist: f64,
    pub clip: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureAssignment {
    /// Element id → texture id of the winning candidate.
    pub textures: BTreeMap<String, String>,
    pub camera: CameraPose,
    pub winner: usize,
    pub candidates: Vec<CandidateScore>,
}

impl StructureAssignment {
    pub fn winning_score(&self) -> f64 {
        self.candidates[self.winner].score
    }

    /// Textures in element order, for rendering.
    pub fn resolve<'a>(
        &self,
        structure: &[StructureElement],
        library: &'a TextureLibrary,
    ) -> Result<Vec<&'a Texture>> {
        structure
            .iter()
            .map(|e| {
                let id = self.textures.get(&e.id).ok_or_else(|| {
                    Error::InvalidConfig(format!("no texture assigned to {}", e.id))
                })?;
                library
                    .get(id)
                    .ok_or_else(|| Error::InvalidConfig(format!("texture {id} not in library")))
            })
            .collect()
    }
}

/// Candidate assignments: every combination when there are at most `n`,
/// otherwise `n` distinct draws (fewer if distinct draws run out).
fn candidates(choices: &[Vec<usize>], n: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    let total = choices
        .iter()
        .try_fold(1usize, |acc, c| acc.checked_mul(c.len()))
        .unwrap_or(usize::MAX);
    if total <= n {
        return (0..total)
            .map(|mut k| {
                choices
                    .iter()
                    .map(|c| {
                        let pick = c[k % c.len()];
                        k /= c.len();
                        pick
                    })
                    .collect()
            })
            .collect();
    }
    let mut out: Vec<Vec<usize>> = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n && attempts < 16 * n {
        attempts += 1;
        let cand: Vec<usize> = choices
            .iter()
            .map(|c| c[rng.random_range(0..c.len())])
            .collect();
        if !out.contains(&cand) {
            out.push(cand);
        }
    }
    out
}

/// Scores up to `n` joint assignments (one class-compatible texture per
/// element) on the bare-room render and returns the arg-min with all scores.
#[allow(clippy::too_many_arguments)]
pub fn retrieve_structure_textures(
    structure: &[StructureElement],
    prompt: &str,
    library: &TextureLibrary,
    target: &Raster,
    lambda1: f64,
    backend: &dyn EmbeddingBackend,
    n: usize,
    rng: &mut impl Rng,
) -> Result<StructureAssignment> {
    if n == 0 {
        return Err(Error::InvalidConfig("candidate count must be >= 1".into()));
    }
    if library.is_empty() {
        return Err(Error::EmptyLibrary);
    }
    let choices: Vec<Vec<usize>> = structure
        .iter()
        .map(|e| library.compatible(e.class))
        .collect();
    if choices.iter().any(Vec::is_empty) {
        return Err(Error::EmptyLibrary);
    }
    let camera = structure_camera(structure)?;
    let settings = structure_render_settings();
    let target_hist = soft_color_histogram(target)?;
    let cands = candidates(&choices, n, rng);
    let all = library.textures();
    let scored = crate::par::map(&cands, |cand| -> Result<CandidateScore> {
        let textures: Vec<&Texture> = cand.iter().map(|&i| &all[i]).collect();
        let out = render_structure(structure, &textures, &camera, &settings)?;
        let (hist, clip, score) = score_parts(&out.image, &target_hist, prompt, lambda1, backend)?;
        Ok(CandidateScore {
            textures: textures.iter().map(|t| t.entry.id.clone()).collect(),
            hist,
            clip,
            score,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let winner = (0..scored.len())
        .min_by(|&a, &b| scored[a].score.total_cmp(&scored[b].score))
        .expect("at least one candidate");
    Ok(StructureAssignment {
        textures: structure
            .iter()
            .zip(&scored[winner].textures)
            .map(|(e, t)| (e.id.clone(), t.clone()))
            .collect(),
        camera,
        winner,
        candidates: scored,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::MockOracleBackend;
    use crate::scene::validate_scene;
    use crate::stylize::library::TextureEntry;
    use crate::synthetic;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn library(colors: &[[f64; 3]]) -> TextureLibrary {
        let textures = colors
            .iter()
            .enumerate()
            .map(|(i, &c)| Texture {
                entry: TextureEntry {
                    id: format!("t{i}"),
                    path: format!("t{i}.png").into(),
                    tiling: 1.0,
                    classes: vec![],
                },
                image: Raster::filled(8, 8, c),
            })
            .collect();
        TextureLibrary::new(textures).unwrap()
    }

    #[test]
    fn candidate_arithmetic() {
        let img = Raster::filled(4, 4, [1.0, 0.0, 0.0]);
        let backend = MockOracleBackend::with_colors([]);
        assert!(
            score_structure_candidate(&img, &img, "a room", 0.0, &backend)
                .unwrap()
                .abs()
                < 1e-7
        );
        let green = Raster::filled(4, 4, [0.0, 1.0, 0.0]);
        let s = score_structure_candidate(&img, &green, "a room", 0.2, &backend).unwrap();
        let hist = crate::losses::hist_loss(&img, &green).unwrap();
        let clip = clip_loss(&img, "a room", &backend).unwrap();
        assert!((s - (hist + 0.2 * clip)).abs() < 1e-12);
    }

    #[test]
    fn single_texture_library_collapses_to_one_candidate() {
        let scene = validate_scene(synthetic::toy_scene()).unwrap();
        let lib = library(&[[0.3, 0.5, 0.7]]);
        let backend = MockOracleBackend::with_colors([]);
        let target = Raster::filled(8, 8, [0.5, 0.5, 0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = retrieve_structure_textures(
            scene.structure(),
            "a room",
            &lib,
            &target,
            0.2,
            &backend,
            64,
            &mut rng,
        )
        .unwrap();
        assert_eq!(a.candidates.len(), 1);
        assert!(a.textures.values().all(|t| t == "t0"));
    }

    #[test]
    fn target_render_wins() {
        let scene = validate_scene(synthetic::toy_scene()).unwrap();
        let lib = library(&[[0.9, 0.1, 0.1], [0.1, 0.8, 0.2], [0.2, 0.2, 0.9]]);
        let backend = MockOracleBackend::with_colors([]);
        let camera = structure_camera(scene.structure()).unwrap();
        let pick = [&lib.textures()[1], &lib.textures()[2]];
        let target = render_structure(
            scene.structure(),
            &pick,
            &camera,
            &structure_render_settings(),
        )
        .unwrap()
        .image;
        for lambda1 in [0.0, 0.2] {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let a = retrieve_structure_textures(
                scene.structure(),
                "a room",
                &lib,
                &target,
                lambda1,
                &backend,
                64,
                &mut rng,
            )
            .unwrap();
            assert_eq!(a.candidates.len(), 9);
            assert_eq!(a.candidates[a.winner].textures, vec!["t1", "t2"]);
            assert!(a.candidates.iter().all(|c| a.winning_score() <= c.score));
        }
    }

    #[test]
    fn sampling_is_seeded() {
        let choices = vec![(0..5).collect::<Vec<_>>(); 4];
        let a = candidates(&choices, 10, &mut ChaCha8Rng::seed_from_u64(1));
        let b = candidates(&choices, 10, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
        let all = candidates(&choices, 1000, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(all.len(), 625);
    }
}
