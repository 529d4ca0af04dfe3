//! Z-buffered perspective rasterizer with exact color gradients and
//! interior-pixel position gradients.

use serde::{Deserialize, Serialize};

use super::camera::{CameraFrame, CameraPose};
use crate::error::{Error, Result};
use crate::mesh::{TriangleMesh, Vec3};
use crate::raster::{ImageGrad, Raster, NO_TAG};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shading {
    Unshaded,
    /// Flat three-point Lambertian lighting fixed to the camera.
    Lambertian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackgroundMode {
    White,
    Black,
    Gaussian,
    Checkerboard,
}

impl BackgroundMode {
    pub const ALL: [BackgroundMode; 4] = [
        BackgroundMode::White,
        BackgroundMode::Black,
        BackgroundMode::Gaussian,
        BackgroundMode::Checkerboard,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderSettings {
    pub width: usize,
    pub height: usize,
    pub shading: Shading,
    pub background: BackgroundMode,
    /// Crop area as a fraction of the source image, `[lo, hi]`.
    pub crop_fraction: (f64, f64),
    /// Corner jitter of the perspective warp, relative to the crop size.
    pub jitter: f64,
    /// Side of the square image handed to the encoder.
    pub encoder_resolution: usize,
    pub near: f64,
    pub position_gradients: bool,
}

impl Default for RenderSettings {
    fn default() -> Self {
        RenderSettings {
            width: 224,
            height: 224,
            shading: Shading::Unshaded,
            background: BackgroundMode::White,
            crop_fraction: (0.10, 0.20),
            jitter: 0.2,
            encoder_resolution: 224,
            near: 1e-2,
            position_gradients: false,
        }
    }
}

impl RenderSettings {
    pub fn square(side: usize) -> Self {
        RenderSettings {
            width: side,
            height: side,
            ..RenderSettings::default()
        }
    }

    pub fn with_shading(mut self, shading: Shading) -> Self {
        self.shading = shading;
        self
    }

    pub fn check(&self) -> Result<()> {
        if self.width < 64 || self.height < 64 {
            return Err(Error::InvalidConfig(
                "render resolution must be at least 64x64".into(),
            ));
        }
        let (lo, hi) = self.crop_fraction;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(Error::InvalidConfig(
                "crop fraction range must lie in (0, 1]".into(),
            ));
        }
        if !(self.jitter >= 0.0 && self.jitter < 0.5)
            || self.encoder_resolution == 0
            || !(self.near > 0.0)
        {
            return Err(Error::InvalidConfig(
                "jitter must lie in [0, 0.5) and encoder resolution/near be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn focal(&self, fov_y_deg: f64) -> f64 {
        0.5 * self.height as f64 / (0.5 * fov_y_deg.to_radians()).tan()
    }
}

/// How a surface is colored.
#[derive(Debug, Clone)]
pub enum Paint<'a> {
    /// Corner `k` of face `f` takes `colors[corners[f][k]]`.
    Indexed {
        corners: Vec<[usize; 3]>,
        colors: &'a [[f64; 3]],
    },
    /// Tileable texture addressed by per-vertex UVs divided by `tiling`.
    Textured {
        uv: &'a [[f64; 2]],
        texture: &'a Raster,
        tiling: f64,
    },
    Constant([f64; 3]),
}

impl<'a> Paint<'a> {
    pub fn vertex_colors(mesh: &TriangleMesh, colors: &'a [[f64; 3]]) -> Self {
        Paint::Indexed {
            corners: mesh.faces.clone(),
            colors,
        }
    }

    /// One color per face class, e.g. per segment.
    pub fn face_classes(classes: &[usize], colors: &'a [[f64; 3]]) -> Self {
        Paint::Indexed {
            corners: classes.iter().map(|&c| [c; 3]).collect(),
            colors,
        }
    }
}

/// A mesh in world coordinates with its paint and optional per-face tags.
#[derive(Debug, Clone)]
pub struct Surface<'a> {
    pub mesh: &'a TriangleMesh,
    pub paint: Paint<'a>,
    pub tags: Option<&'a [u32]>,
}

impl<'a> Surface<'a> {
    pub fn new(mesh: &'a TriangleMesh, paint: Paint<'a>) -> Self {
        Surface {
            mesh,
            paint,
            tags: mesh.face_groups.as_deref(),
        }
    }
}

/// The surface point seen by one pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fragment {
    pub surface: u32,
    pub face: u32,
    /// Perspective-correct barycentric weights within the face.
    pub bary: [f64; 3],
    pub shade: f64,
    pub depth: f64,
    /// The face crossed the near plane; no position gradient flows.
    pub clipped: bool,
}

/// An image plus the per-pixel fragments that link it back to the inputs.
#[derive(Debug, Clone)]
pub struct RenderOutput {
    /// Background pixels are black; `coverage` is the 0/1 foreground mask.
    pub image: Raster,
    pub fragments: Vec<Option<Fragment>>,
    pub camera: CameraPose,
    pub settings: RenderSettings,
}

struct Lights;

impl Lights {
    const AMBIENT: f64 = 0.35;
    /// (weight, direction toward the light in camera right/up/back axes)
    const DIRECTIONAL: [(f64, [f64; 3]); 3] = [
        (0.45, [-0.5, 0.6, 1.0]),
        (0.15, [0.7, 0.1, 0.8]),
        (0.05, [0.0, 0.5, -1.0]),
    ];

    fn world_dirs(frame: &CameraFrame) -> [(f64, Vec3); 3] {
        Self::DIRECTIONAL.map(|(w, d)| {
            let v = frame.right * d[0] + frame.up * d[1] - frame.forward * d[2];
            (w, v.normalize())
        })
    }

    /// Shade and its gradient with respect to the unit normal.
    fn shade(frame: &CameraFrame, n: &Vec3) -> (f64, Vec3) {
        let mut s = Self::AMBIENT;
        let mut g = Vec3::zeros();
        for (w, l) in Self::world_dirs(frame) {
            let d = n.dot(&l);
            if d > 0.0 {
                s += w * d;
                g += l * w;
            }
        }
        (s, g)
    }
}

/// Unit face normal flipped toward the eye, with the flip sign.
fn facing_normal(mesh: &TriangleMesh, f: usize, eye: &Vec3) -> (Vec3, f64) {
    let n = mesh.face_normal(f);
    if n.dot(&(eye - mesh.face_centroid(f))) < 0.0 {
        (-n, -1.0)
    } else {
        (n, 1.0)
    }
}

#[derive(Clone, Copy)]
struct Projector {
    frame: CameraFrame,
    focal: f64,
    cx: f64,
    cy: f64,
}

impl Projector {
    fn new(camera: &CameraPose, settings: &RenderSettings) -> Result<Self> {
        Ok(Projector {
            frame: camera.frame()?,
            focal: settings.focal(camera.fov_y_deg),
            cx: settings.width as f64 / 2.0,
            cy: settings.height as f64 / 2.0,
        })
    }

    fn eye_space(&self, p: &Vec3) -> Vec3 {
        let d = p - self.frame.eye;
        Vec3::new(
            d.dot(&self.frame.right),
            d.dot(&self.frame.up),
            d.dot(&self.frame.forward),
        )
    }

    fn project(&self, c: &Vec3) -> [f64; 2] {
        [
            self.cx + self.focal * c.x / c.z,
            self.cy - self.focal * c.y / c.z,
        ]
    }
}

fn cross2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn sub2(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

/// Screen-space barycentrics of `p` and the signed doubled area.
fn screen_bary(q: &[[f64; 2]; 3], p: [f64; 2]) -> ([f64; 3], f64) {
    let e = [
        cross2(sub2(q[1], p), sub2(q[2], p)),
        cross2(sub2(q[2], p), sub2(q[0], p)),
        cross2(sub2(q[0], p), sub2(q[1], p)),
    ];
    let area = e[0] + e[1] + e[2];
    ([e[0] / area, e[1] / area, e[2] / area], area)
}

/// Clips a camera-space triangle to `z ≥ near`. Each output vertex carries
/// its barycentric coordinates in the original face.
fn clip_near(cam: &[Vec3; 3], near: f64) -> Vec<(Vec3, [f64; 3])> {
    const UNIT: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let mut out = Vec::with_capacity(4);
    for k in 0..3 {
        let (a, b) = (k, (k + 1) % 3);
        let (za, zb) = (cam[a].z, cam[b].z);
        if za >= near {
            out.push((cam[a], UNIT[a]));
        }
        if (za >= near) != (zb >= near) {
            let t = (near - za) / (zb - za);
            let p = cam[a] + (cam[b] - cam[a]) * t;
            let mut w = [0.0; 3];
            w[a] = 1.0 - t;
            w[b] = t;
            out.push((Vec3::new(p.x, p.y, near), w));
        }
    }
    out
}

/// Renders surfaces in order; depth ties keep the earlier fragment.
pub fn rasterize(
    surfaces: &[Surface],
    camera: &CameraPose,
    settings: &RenderSettings,
) -> Result<RenderOutput> {
    settings.check()?;
    let proj = Projector::new(camera, settings)?;
    let (w, h) = (settings.width, settings.height);
    let mut frags: Vec<Option<Fragment>> = vec![None; w * h];

    for (s, surface) in surfaces.iter().enumerate() {
        let mesh = surface.mesh;
        for (f, face) in mesh.faces.iter().enumerate() {
            let cam = face.map(|v| proj.eye_space(&mesh.vertices[v]));
            if cam.iter().all(|c| c.z < settings.near) {
                continue;
            }
            let shade = match settings.shading {
                Shading::Unshaded => 1.0,
                Shading::Lambertian => {
                    Lights::shade(&proj.frame, &facing_normal(mesh, f, &proj.frame.eye).0).0
                }
            };
            let clipped = cam.iter().any(|c| c.z < settings.near);
            let poly = if clipped {
                clip_near(&cam, settings.near)
            } else {
                vec![
                    (cam[0], [1.0, 0.0, 0.0]),
                    (cam[1], [0.0, 1.0, 0.0]),
                    (cam[2], [0.0, 0.0, 1.0]),
                ]
            };
            for t in 1..poly.len().saturating_sub(1) {
                let tri = [poly[0], poly[t], poly[t + 1]];
                let q = tri.map(|(c, _)| proj.project(&c));
                let area = cross2(sub2(q[1], q[0]), sub2(q[2], q[0]));
                if area.abs() < 1e-12 || !area.is_finite() {
                    continue;
                }
                let xs = q.map(|p| p[0]);
                let ys = q.map(|p| p[1]);
                let x0 = (xs.iter().cloned().fold(f64::INFINITY, f64::min) - 0.5)
                    .ceil()
                    .max(0.0) as usize;
                let y0 = (ys.iter().cloned().fold(f64::INFINITY, f64::min) - 0.5)
                    .ceil()
                    .max(0.0) as usize;
                let x1 = (xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - 0.5).floor();
                let y1 = (ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - 0.5).floor();
                if x1 < 0.0 || y1 < 0.0 {
                    continue;
                }
                let x1 = (x1 as usize).min(w - 1);
                let y1 = (y1 as usize).min(h - 1);
                for py in y0..=y1 {
                    for px in x0..=x1 {
                        let p = [px as f64 + 0.5, py as f64 + 0.5];
                        let (e, _) = screen_bary(&q, p);
                        if e.iter().any(|&x| x < 0.0) {
                            continue;
                        }
                        let u = [e[0] / tri[0].0.z, e[1] / tri[1].0.z, e[2] / tri[2].0.z];
                        let inv_depth = u[0] + u[1] + u[2];
                        let depth = 1.0 / inv_depth;
                        let idx = py * w + px;
                        if frags[idx].is_some_and(|fr| fr.depth <= depth) {
                            continue;
                        }
                        let mut bary = [0.0; 3];
                        for (k, (_, corner)) in tri.iter().enumerate() {
                            let wk = u[k] / inv_depth;
                            for j in 0..3 {
                                bary[j] += wk * corner[j];
                            }
                        }
                        frags[idx] = Some(Fragment {
                            surface: s as u32,
                            face: f as u32,
                            bary,
                            shade,
                            depth,
                            clipped,
                        });
                    }
                }
            }
        }
    }

    if frags.iter().all(Option::is_none) {
        return Err(Error::EmptyRender);
    }
    let mut pixels = vec![[0.0; 3]; w * h];
    let mut coverage = vec![0.0; w * h];
    let mut tags = vec![NO_TAG; w * h];
    for (i, fr) in frags.iter().enumerate() {
        let Some(fr) = fr else { continue };
        let surface = &surfaces[fr.surface as usize];
        let f = fr.face as usize;
        let base = fragment_color(surface, f, &fr.bary);
        pixels[i] = base.map(|c| c * fr.shade);
        coverage[i] = 1.0;
        if let Some(t) = surface.tags {
            tags[i] = t[f];
        }
    }
    Ok(RenderOutput {
        image: Raster {
            width: w,
            height: h,
            pixels,
            coverage: Some(coverage),
            tags: Some(tags),
        },
        fragments: frags,
        camera: *camera,
        settings: *settings,
    })
}

fn fragment_color(surface: &Surface, f: usize, bary: &[f64; 3]) -> [f64; 3] {
    match &surface.paint {
        Paint::Indexed { corners, colors } => {
            // Anchored at corner 0 so equal corner colors reproduce exactly.
            let [c0, c1, c2] = corners[f].map(|c| colors[c]);
            std::array::from_fn(|j| c0[j] + bary[1] * (c1[j] - c0[j]) + bary[2] * (c2[j] - c0[j]))
        }
        Paint::Textured {
            uv,
            texture,
            tiling,
        } => {
            let face = surface.mesh.faces[f];
            let mut t = [0.0; 2];
            for k in 0..3 {
                t[0] += bary[k] * uv[face[k]][0];
                t[1] += bary[k] * uv[face[k]][1];
            }
            texture.sample_tiled(t[0] / tiling, t[1] / tiling)
        }
        Paint::Constant(c) => *c,
    }
}

/// Convenience form for one vertex-colored mesh.
pub fn rasterize_vertex_colors(
    mesh: &TriangleMesh,
    colors: &[[f64; 3]],
    camera: &CameraPose,
    settings: &RenderSettings,
) -> Result<RenderOutput> {
    if colors.len() != mesh.vertex_count() {
        return Err(Error::LengthMismatch(format!(
            "{} colors for {} vertices",
            colors.len(),
            mesh.vertex_count()
        )));
    }
    rasterize(
        &[Surface::new(mesh, Paint::vertex_colors(mesh, colors))],
        camera,
        settings,
    )
}

impl RenderOutput {
    pub fn mask(&self) -> &[f64] {
        self.image
            .coverage
            .as_deref()
            .expect("renders carry coverage")
    }

    /// Foreground pixel count of one surface.
    pub fn surface_pixels(&self, surface: usize) -> usize {
        self.fragments
            .iter()
            .filter(|f| f.is_some_and(|f| f.surface as usize == surface))
            .count()
    }

    /// Gradient with respect to the color array of an indexed surface.
    /// Other paints receive no gradient and yield an empty vector.
    pub fn color_grad(
        &self,
        surfaces: &[Surface],
        surface: usize,
        grad: &ImageGrad,
    ) -> Vec<[f64; 3]> {
        let Paint::Indexed { corners, colors } = &surfaces[surface].paint else {
            return Vec::new();
        };
        let mut out = vec![[0.0; 3]; colors.len()];
        for (fr, g) in self.fragments.iter().zip(grad) {
            let Some(fr) = fr else { continue };
            if fr.surface as usize != surface {
                continue;
            }
            let c = corners[fr.face as usize];
            for k in 0..3 {
                let wgt = fr.shade * fr.bary[k];
                for j in 0..3 {
                    out[c[k]][j] += wgt * g[j];
                }
            }
        }
        out
    }

    /// Gradient with respect to the vertex positions of one surface, through
    /// the barycentric weights and the shading normal at interior pixels.
    pub fn position_grad(
        &self,
        surfaces: &[Surface],
        surface: usize,
        grad: &ImageGrad,
    ) -> Result<Vec<Vec3>> {
        if !self.settings.position_gradients {
            return Err(Error::GradientUnsupported);
        }
        let surf = &surfaces[surface];
        let mesh = surf.mesh;
        let proj = Projector::new(&self.camera, &self.settings)?;
        let w = self.settings.width;
        let lambert = self.settings.shading == Shading::Lambertian;
        let mut out = vec![Vec3::zeros(); mesh.vertex_count()];
        for (i, (fr, g)) in self.fragments.iter().zip(grad).enumerate() {
            let Some(fr) = fr else { continue };
            if fr.surface as usize != surface || fr.clipped {
                continue;
            }
            let f = fr.face as usize;
            let face = mesh.faces[f];
            let cols: [[f64; 3]; 3] = match &surf.paint {
                Paint::Indexed { corners, colors } => corners[f].map(|c| colors[c]),
                Paint::Constant(c) => [*c; 3],
                Paint::Textured { .. } => continue,
            };
            let dot = |c: &[f64; 3]| c[0] * g[0] + c[1] * g[1] + c[2] * g[2];
            let wb = fr.bary;

            // Barycentric path: pixel = shade * Σ w_k col_k.
            let gw: [f64; 3] = std::array::from_fn(|k| fr.shade * dot(&cols[k]));
            let cam = face.map(|v| proj.eye_space(&mesh.vertices[v]));
            let q = cam.map(|c| proj.project(&c));
            let p = [(i % w) as f64 + 0.5, (i / w) as f64 + 0.5];
            let (e, area) = screen_bary(&q, p);
            let u: [f64; 3] = std::array::from_fn(|k| e[k] / cam[k].z);
            let s = u[0] + u[1] + u[2];
            let mean_g = gw[0] * wb[0] + gw[1] * wb[1] + gw[2] * wb[2];
            let gu: [f64; 3] = std::array::from_fn(|k| (gw[k] - mean_g) / s);
            let ge: [f64; 3] = std::array::from_fn(|k| gu[k] / cam[k].z);
            let gz: [f64; 3] = std::array::from_fn(|k| -gu[k] * e[k] / (cam[k].z * cam[k].z));
            let mean_e = ge[0] * e[0] + ge[1] * e[1] + ge[2] * e[2];
            let g_edge: [f64; 3] = std::array::from_fn(|k| (ge[k] - mean_e) / area);
            // E_k = cross2(q_{k+1} - p, q_{k+2} - p)
            let mut gq = [[0.0; 2]; 3];
            for k in 0..3 {
                let (a, b) = ((k + 1) % 3, (k + 2) % 3);
                let va = sub2(q[a], p);
                let vb = sub2(q[b], p);
                gq[a][0] += g_edge[k] * vb[1];
                gq[a][1] -= g_edge[k] * vb[0];
                gq[b][0] -= g_edge[k] * va[1];
                gq[b][1] += g_edge[k] * va[0];
            }
            let fr_ = &proj.frame;
            for k in 0..3 {
                let c = cam[k];
                let dqx = (fr_.right / c.z - fr_.forward * (c.x / (c.z * c.z))) * proj.focal;
                let dqy = -(fr_.up / c.z - fr_.forward * (c.y / (c.z * c.z))) * proj.focal;
                out[face[k]] += dqx * gq[k][0] + dqy * gq[k][1] + fr_.forward * gz[k];
            }

            // Shading path through the face normal.
            if lambert {
                let mut base = [0.0; 3];
                for k in 0..3 {
                    for j in 0..3 {
                        base[j] += wb[k] * cols[k][j];
                    }
                }
                let (n, sign) = facing_normal(mesh, f, &fr_.eye);
                let (_, gn) = Lights::shade(fr_, &n);
                let gn = gn * dot(&base);
                let cross = mesh.face_cross(f);
                let len = cross.norm();
                let nh = cross / len;
                let gc = (gn - nh * nh.dot(&gn)) * (sign / len);
                let v = face.map(|x| mesh.vertices[x]);
                let (e1, e2) = (v[1] - v[0], v[2] - v[0]);
                let g1 = e2.cross(&gc);
                let g2 = gc.cross(&e1);
                out[face[1]] += g1;
                out[face[2]] += g2;
                out[face[0]] -= g1 + g2;
            }
        }
        Ok(out)
    }
}
