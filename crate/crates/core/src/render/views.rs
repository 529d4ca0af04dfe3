//! Scene camera set with an object coverage check.

use super::camera::{scene_camera_poses, CameraPose};
use super::rasterizer::{rasterize, Paint, RenderSettings, Surface};
use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;
use crate::scene::ValidatedScene;

const COVERAGE_WIDTH: usize = 96;
const COVERAGE_HEIGHT: usize = 64;

/// Twenty fixed poses covering the scene; fails if some object is never seen.
pub fn scene_camera_set(scene: &ValidatedScene) -> Result<Vec<CameraPose>> {
    let poses = match scene.structure_bounds() {
        Some((lo, hi)) => scene_camera_poses(lo, hi, true),
        None => {
            let (lo, hi) = scene.bounds();
            scene_camera_poses(lo, hi, false)
        }
    };
    let counts = object_visibility(scene, &poses)?;
    for (i, obj) in scene.objects().iter().enumerate() {
        if counts.iter().all(|c| c[i] == 0) {
            return Err(Error::CoverageFailure(obj.id.clone()));
        }
    }
    Ok(poses)
}

/// Visible pixel count of each object from each pose, with occlusion.
pub fn object_visibility(scene: &ValidatedScene, poses: &[CameraPose]) -> Result<Vec<Vec<usize>>> {
    let objects: Vec<TriangleMesh> = (0..scene.objects().len())
        .map(|i| scene.world_mesh(i))
        .collect();
    let mut surfaces: Vec<Surface> = scene
        .structure()
        .iter()
        .map(|e| Surface::new(&e.mesh, Paint::Constant([0.5; 3])))
        .collect();
    let first_object = surfaces.len();
    surfaces.extend(
        objects
            .iter()
            .map(|m| Surface::new(m, Paint::Constant([0.5; 3]))),
    );
    let settings = RenderSettings {
        width: COVERAGE_WIDTH,
        height: COVERAGE_HEIGHT,
        ..RenderSettings::default()
    };
    poses
        .iter()
        .map(|pose| match rasterize(&surfaces, pose, &settings) {
            Ok(out) => Ok((0..objects.len())
                .map(|i| out.surface_pixels(first_object + i))
                .collect()),
            Err(Error::EmptyRender) => Ok(vec![0; objects.len()]),
            Err(e) => Err(e),
        })
        .collect()
}
