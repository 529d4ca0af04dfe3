//! Camera poses, object-view sampling and the fixed scene camera set.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewTag {
    Front,
    Side,
    Back,
}

impl ViewTag {
    /// Tag for a signed azimuth in degrees from the object front.
    pub fn from_azimuth(signed_deg: f64) -> ViewTag {
        let a = signed_deg.abs();
        if a <= 60.0 {
            ViewTag::Front
        } else if a >= 120.0 {
            ViewTag::Back
        } else {
            ViewTag::Side
        }
    }

    pub fn prefix(self) -> &'static str {
        match self {
            ViewTag::Front => "front view of ",
            ViewTag::Side => "side view of ",
            ViewTag::Back => "back view of ",
        }
    }
}

/// A pinhole camera looking from `eye` at `target`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub eye: [f64; 3],
    pub target: [f64; 3],
    pub up: [f64; 3],
    pub fov_y_deg: f64,
    pub view_tag: ViewTag,
}

/// Orthonormal camera frame: `right`, `up`, and `forward` toward the target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraFrame {
    pub eye: Vec3,
    pub right: Vec3,
    pub up: Vec3,
    pub forward: Vec3,
}

impl CameraPose {
    pub fn look_at(
        eye: Vec3,
        target: Vec3,
        up: Vec3,
        fov_y_deg: f64,
        view_tag: ViewTag,
    ) -> Result<Self> {
        let pose = CameraPose {
            eye: eye.into(),
            target: target.into(),
            up: up.into(),
            fov_y_deg,
            view_tag,
        };
        pose.frame()?;
        Ok(pose)
    }

    pub fn eye(&self) -> Vec3 {
        Vec3::from(self.eye)
    }

    pub fn target(&self) -> Vec3 {
        Vec3::from(self.target)
    }

    pub fn radius(&self) -> f64 {
        (self.eye() - self.target()).norm()
    }

    pub fn frame(&self) -> Result<CameraFrame> {
        let d = self.target() - self.eye();
        if !(d.norm() > 1e-12) || !(self.fov_y_deg > 0.0 && self.fov_y_deg < 180.0) {
            return Err(Error::InvalidConfig(
                "camera needs distinct eye/target and fov in (0, 180)".into(),
            ));
        }
        let forward = d.normalize();
        let right = forward.cross(&Vec3::from(self.up));
        if right.norm() < 1e-9 {
            return Err(Error::InvalidConfig(
                "camera up is parallel to the view direction".into(),
            ));
        }
        let right = right.normalize();
        Ok(CameraFrame {
            eye: self.eye(),
            right,
            up: right.cross(&forward),
            forward,
        })
    }
}

/// Object-view sampling around a mesh normalized to the unit box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObjectCameraConfig {
    pub radius: f64,
    pub elevation_min_deg: f64,
    pub elevation_max_deg: f64,
    pub azimuth_sigma_deg: f64,
    /// Azimuth of the object front, measured from +Y toward +X.
    pub front_azimuth_deg: f64,
    pub fov_y_deg: f64,
}

impl Default for ObjectCameraConfig {
    fn default() -> Self {
        ObjectCameraConfig {
            radius: 2.0,
            elevation_min_deg: 10.0,
            elevation_max_deg: 80.0,
            azimuth_sigma_deg: 45.0,
            front_azimuth_deg: 0.0,
            fov_y_deg: 60.0,
        }
    }
}

/// A sampled object view with its angles; azimuth is wrapped to `[0, 360)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectView {
    pub pose: CameraPose,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

/// Signed form of a wrapped azimuth, in `(-180, 180]`.
pub fn signed_azimuth(wrapped_deg: f64) -> f64 {
    if wrapped_deg > 180.0 {
        wrapped_deg - 360.0
    } else {
        wrapped_deg
    }
}

/// Camera on the sphere of radius `r` around the origin at the given angles
/// relative to the object front.
pub fn orbit_camera(cfg: &ObjectCameraConfig, azimuth_deg: f64, elevation_deg: f64) -> CameraPose {
    let az = (azimuth_deg + cfg.front_azimuth_deg).to_radians();
    let el = elevation_deg.to_radians();
    let eye = Vec3::new(az.sin() * el.cos(), az.cos() * el.cos(), el.sin()) * cfg.radius;
    CameraPose {
        eye: eye.into(),
        target: [0.0; 3],
        up: [0.0, 0.0, 1.0],
        fov_y_deg: cfg.fov_y_deg,
        view_tag: ViewTag::from_azimuth(signed_azimuth(azimuth_deg.rem_euclid(360.0))),
    }
}

/// Azimuth from a wrapped Gaussian around the front, elevation uniform.
pub fn sample_object_camera(rng: &mut impl Rng, cfg: &ObjectCameraConfig) -> ObjectView {
    let normal = Normal::new(0.0, cfg.azimuth_sigma_deg.max(0.0)).expect("finite sigma");
    let azimuth = normal.sample(rng).rem_euclid(360.0);
    let elevation = rng.random_range(cfg.elevation_min_deg..=cfg.elevation_max_deg);
    ObjectView {
        pose: orbit_camera(cfg, azimuth, elevation),
        azimuth_deg: azimuth,
        elevation_deg: elevation,
    }
}

/// Number of fixed scene cameras.
pub const SCENE_CAMERA_COUNT: usize = 20;

/// Twenty deterministic poses for a scene with bounds `(lo, hi)`.
///
/// With structure present, eyes sit on two interior rings and look across
/// the room toward the opposite side; otherwise they orbit outside.
pub fn scene_camera_poses(lo: Vec3, hi: Vec3, interior: bool) -> Vec<CameraPose> {
    let center = (lo + hi) * 0.5;
    let half = (hi - lo) * 0.5;
    let height = hi.z - lo.z;
    let mut poses = Vec::with_capacity(SCENE_CAMERA_COUNT);
    for ring in 0..2 {
        for i in 0..SCENE_CAMERA_COUNT / 2 {
            let theta = std::f64::consts::TAU * (i as f64 + 0.5 * ring as f64) / 10.0;
            let dir = Vec3::new(theta.cos(), theta.sin(), 0.0);
            let (eye, target, fov) = if interior {
                let spread = [0.55, 0.3][ring];
                let eye = Vec3::new(
                    center.x + dir.x * half.x * spread,
                    center.y + dir.y * half.y * spread,
                    lo.z + height * [0.6, 0.45][ring],
                );
                let target = Vec3::new(
                    center.x - dir.x * half.x * 0.5,
                    center.y - dir.y * half.y * 0.5,
                    lo.z + height * 0.2,
                );
                (eye, target, 75.0)
            } else {
                let r = half.norm().max(1e-3) * 2.2;
                let z = center.z + r * [0.45, 0.25][ring];
                (
                    Vec3::new(center.x + dir.x * r, center.y + dir.y * r, z),
                    center,
                    60.0,
                )
            };
            poses.push(CameraPose {
                eye: eye.into(),
                target: target.into(),
                up: [0.0, 0.0, 1.0],
                fov_y_deg: fov,
                view_tag: ViewTag::Front,
            });
        }
    }
    poses
}
