//! WebAssembly bindings for the static demo page in `www/`.
//!
//! The exported functions take and return RGBA byte buffers so the page can
//! blit them straight into a canvas. The logic lives in plain functions that
//! return `scenestyle::Result`, so it is testable off the browser.

use scenestyle::geometry::{laplace_beltrami_basis, PartLabeling, SpectralBasis};
use scenestyle::losses::{
    histogram_distance, soft_color_histogram, ColorHistogram, MockColors, MockOracleBackend,
    MockTable, BINS,
};
use scenestyle::partdiscovery::{discover_parts, DiscoveryConfig};
use scenestyle::render::camera::orbit_camera;
use scenestyle::render::{rasterize, ObjectCameraConfig, Paint, RenderSettings, Shading, Surface};
use scenestyle::scene::UnitBox;
use scenestyle::synthetic::{part_suite, SyntheticPartMesh};
use scenestyle::{Error, Raster, Result, TriangleMesh};
use wasm_bindgen::prelude::*;

/// Eigenfunctions computed per object; enough to show low and mid frequencies.
pub const EIGEN_COUNT: usize = 16;

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Names of the synthetic objects the viewer can load.
#[wasm_bindgen]
pub fn object_names() -> Vec<String> {
    part_suite().into_iter().map(|p| p.name).collect()
}

/// Soft RGB-uv histogram of an RGBA image as three side-by-side heat maps,
/// one per channel, each `BINS` pixels square.
pub fn histogram_panels(rgba: &[u8], width: usize, height: usize) -> Result<Raster> {
    let h = histogram_of(rgba, width, height)?;
    let peak = h
        .values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    Ok(Raster::from_fn(3 * BINS, BINS, |x, y| {
        let (c, u) = (x / BINS, x % BINS);
        // v grows upward on screen.
        let t = (h.values[[c, u, BINS - 1 - y]] / peak).sqrt();
        let mut px = [0.08 * (1.0 - t); 3];
        px[c] += t;
        px
    }))
}

fn histogram_of(rgba: &[u8], width: usize, height: usize) -> Result<ColorHistogram> {
    if rgba.len() != 4 * width * height || width == 0 || height == 0 {
        return Err(Error::InvalidConfig(format!(
            "expected {width}x{height} RGBA bytes, got {}",
            rgba.len()
        )));
    }
    soft_color_histogram(&Raster::from_rgba8(width, height, rgba))
}

#[wasm_bindgen]
pub fn histogram_rgba(
    rgba: &[u8],
    width: usize,
    height: usize,
) -> std::result::Result<Vec<u8>, JsError> {
    histogram_panels(rgba, width, height)
        .map(|r| r.to_rgba8())
        .map_err(js)
}

/// `‖√H1 − √H2‖₂` between the soft histograms of two RGBA images, in `[0, √2]`.
pub fn image_distance(
    a: &[u8],
    aw: usize,
    ah: usize,
    b: &[u8],
    bw: usize,
    bh: usize,
) -> Result<f64> {
    Ok(histogram_distance(
        &histogram_of(a, aw, ah)?,
        &histogram_of(b, bw, bh)?,
    ))
}

#[wasm_bindgen]
pub fn histogram_distance_rgba(
    a: &[u8],
    aw: usize,
    ah: usize,
    b: &[u8],
    bw: usize,
    bh: usize,
) -> std::result::Result<f64, JsError> {
    image_distance(a, aw, ah, b, bw, bh).map_err(js)
}

/// Blue, white, red for negative, zero, positive.
fn diverging(t: f64) -> [f64; 3] {
    let t = t.clamp(-1.0, 1.0);
    if t < 0.0 {
        [1.0 + t, 1.0 + 0.6 * t, 1.0]
    } else {
        [1.0, 1.0 - 0.6 * t, 1.0 - t]
    }
}

/// One synthetic object normalized to the unit box, with its lazily computed
/// spectral basis and the latest discovered parts.
#[wasm_bindgen]
pub struct Viewer {
    mesh: TriangleMesh,
    name: String,
    materials: Vec<[f64; 3]>,
    basis: Option<SpectralBasis>,
    parts: Option<(PartLabeling, Vec<[f64; 3]>)>,
}

impl Viewer {
    pub fn open(name: &str) -> Result<Viewer> {
        let SyntheticPartMesh {
            name,
            mesh,
            materials,
            ..
        } = part_suite()
            .into_iter()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown object {name:?}")))?;
        let mesh = mesh.transformed(&UnitBox::of(&mesh).matrix());
        Ok(Viewer {
            mesh,
            name,
            materials,
            basis: None,
            parts: None,
        })
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    fn render(&self, paint: Paint, size: usize, azimuth: f64, elevation: f64) -> Result<Raster> {
        let camera = orbit_camera(&ObjectCameraConfig::default(), azimuth, elevation);
        let settings = RenderSettings::square(size).with_shading(Shading::Lambertian);
        let out = rasterize(&[Surface::new(&self.mesh, paint)], &camera, &settings)?;
        let mask = out.image.coverage.clone().unwrap_or_default();
        let mut img = out.image;
        for (p, &m) in img.pixels.iter_mut().zip(&mask) {
            if m == 0.0 {
                *p = [1.0; 3];
            }
        }
        Ok(img)
    }

    /// The object painted with its ground-truth materials.
    pub fn materials_image(&self, size: usize, azimuth: f64, elevation: f64) -> Result<Raster> {
        let groups: Vec<usize> = match &self.mesh.face_groups {
            Some(g) => g.iter().map(|&g| g as usize).collect(),
            None => vec![0; self.mesh.faces.len()],
        };
        self.render(
            Paint::face_classes(&groups, &self.materials),
            size,
            azimuth,
            elevation,
        )
    }

    /// Runs part discovery against a mock oracle that wants the material
    /// colors, and returns the number of parts found.
    pub fn run_discovery(&mut self, merge_threshold: f64, seed: u64) -> Result<usize> {
        let table: MockTable = [(
            format!("a {}", self.name),
            MockColors::PerTag(self.materials.clone()),
        )]
        .into_iter()
        .collect();
        let backend = MockOracleBackend::new(&table)?;
        let cfg = DiscoveryConfig {
            merge_threshold,
            seed,
            ..DiscoveryConfig::default()
        };
        let d = discover_parts(&self.mesh, &self.name, &backend, &cfg)?;
        let n = d.labeling.segment_count();
        self.parts = Some((d.labeling, d.part_colors));
        Ok(n)
    }

    /// Discovered parts in their optimized colors.
    pub fn parts_image(&self, size: usize, azimuth: f64, elevation: f64) -> Result<Raster> {
        let (labeling, colors) = self
            .parts
            .as_ref()
            .ok_or_else(|| Error::MissingUpstream("discovered parts".into()))?;
        self.render(
            Paint::face_classes(labeling.labels(), colors),
            size,
            azimuth,
            elevation,
        )
    }

    pub fn basis(&mut self) -> Result<&SpectralBasis> {
        if self.basis.is_none() {
            self.basis = Some(laplace_beltrami_basis(
                &self.mesh,
                EIGEN_COUNT.min(self.mesh.vertices.len()),
            )?);
        }
        Ok(self.basis.as_ref().expect("just computed"))
    }

    /// Eigenfunction `j` on the surface, scaled so its largest magnitude is 1.
    pub fn eigen_image(
        &mut self,
        j: usize,
        size: usize,
        azimuth: f64,
        elevation: f64,
    ) -> Result<Raster> {
        let basis = self.basis()?;
        if j >= basis.k() {
            return Err(Error::InvalidConfig(format!(
                "eigenfunction {j} out of range 0..{}",
                basis.k()
            )));
        }
        let f = basis.eigenfunction(j);
        let peak = f
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let colors: Vec<[f64; 3]> = f.iter().map(|v| diverging(v / peak)).collect();
        self.render(
            Paint::vertex_colors(&self.mesh, &colors),
            size,
            azimuth,
            elevation,
        )
    }
}

#[wasm_bindgen]
impl Viewer {
    #[wasm_bindgen(constructor)]
    pub fn new(name: &str) -> std::result::Result<Viewer, JsError> {
        Viewer::open(name).map_err(js)
    }

    #[wasm_bindgen(js_name = vertexCount)]
    pub fn vertex_count(&self) -> usize {
        self.mesh.vertices.len()
    }

    #[wasm_bindgen(js_name = faceCount)]
    pub fn face_count(&self) -> usize {
        self.mesh.faces.len()
    }

    #[wasm_bindgen(js_name = renderMaterials)]
    pub fn render_materials(
        &self,
        size: usize,
        azimuth: f64,
        elevation: f64,
    ) -> std::result::Result<Vec<u8>, JsError> {
        self.materials_image(size, azimuth, elevation)
            .map(|r| r.to_rgba8())
            .map_err(js)
    }

    pub fn discover(
        &mut self,
        merge_threshold: f64,
        seed: u32,
    ) -> std::result::Result<usize, JsError> {
        self.run_discovery(merge_threshold, u64::from(seed))
            .map_err(js)
    }

    #[wasm_bindgen(js_name = renderParts)]
    pub fn render_parts(
        &self,
        size: usize,
        azimuth: f64,
        elevation: f64,
    ) -> std::result::Result<Vec<u8>, JsError> {
        self.parts_image(size, azimuth, elevation)
            .map(|r| r.to_rgba8())
            .map_err(js)
    }

    #[wasm_bindgen(js_name = eigenCount)]
    pub fn eigen_count(&mut self) -> std::result::Result<usize, JsError> {
        self.basis().map(|b| b.k()).map_err(js)
    }

    pub fn eigenvalue(&mut self, j: usize) -> std::result::Result<f64, JsError> {
        let b = self.basis().map_err(js)?;
        b.eigenvalues()
            .get(j)
            .copied()
            .ok_or_else(|| JsError::new("eigenvalue index out of range"))
    }

    #[wasm_bindgen(js_name = renderEigenfunction)]
    pub fn render_eigenfunction(
        &mut self,
        j: usize,
        size: usize,
        azimuth: f64,
        elevation: f64,
    ) -> std::result::Result<Vec<u8>, JsError> {
        self.eigen_image(j, size, azimuth, elevation)
            .map(|r| r.to_rgba8())
            .map_err(js)
    }
}
