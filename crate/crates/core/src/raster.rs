//! RGB rasters in `[0, 1]` with optional coverage and material-tag channels.

use std::path::Path;

use crate::error::{Error, Result};

/// Tag value for pixels not covered by any tagged face.
pub const NO_TAG: u32 = u32::MAX;

/// An RGB image. `coverage` marks rendered foreground (1) versus
/// background (0); `tags` holds the material group of the visible face.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[f64; 3]>,
    pub coverage: Option<Vec<f64>>,
    pub tags: Option<Vec<u32>>,
}

/// Per-pixel gradient of a scalar with respect to an image.
pub type ImageGrad = Vec<[f64; 3]>;

impl Raster {
    pub fn filled(width: usize, height: usize, color: [f64; 3]) -> Self {
        Raster {
            width,
            height,
            pixels: vec![color; width * height],
            coverage: None,
            tags: None,
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> [f64; 3]) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Raster {
            width,
            height,
            pixels,
            coverage: None,
            tags: None,
        }
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn at(&self, x: usize, y: usize) -> [f64; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn zero_grad(&self) -> ImageGrad {
        vec![[0.0; 3]; self.pixels.len()]
    }

    /// Mean color over all pixels.
    pub fn mean_color(&self) -> [f64; 3] {
        let mut acc = [0.0; 3];
        for p in &self.pixels {
            for k in 0..3 {
                acc[k] += p[k];
            }
        }
        let n = self.pixels.len().max(1) as f64;
        acc.map(|v| v / n)
    }

    pub fn check(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.pixels.len() != self.width * self.height {
            return Err(Error::InvalidConfig("raster is empty or mis-sized".into()));
        }
        if self.pixels.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::OutOfRange("raster has non-finite pixels".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path)?.to_rgb8();
        Ok(Self::from_rgb8(
            img.width() as usize,
            img.height() as usize,
            img.as_raw(),
        ))
    }

    pub fn from_rgb8(width: usize, height: usize, data: &[u8]) -> Self {
        Raster {
            width,
            height,
            pixels: data
                .chunks_exact(3)
                .map(|c| [c[0], c[1], c[2]].map(|v| v as f64 / 255.0))
                .collect(),
            coverage: None,
            tags: None,
        }
    }

    pub fn from_rgba8(width: usize, height: usize, data: &[u8]) -> Self {
        Raster {
            width,
            height,
            pixels: data
                .chunks_exact(4)
                .map(|c| [c[0], c[1], c[2]].map(|v| v as f64 / 255.0))
                .collect(),
            coverage: None,
            tags: None,
        }
    }

    pub fn to_rgb8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .flat_map(|p| p.map(|c| (c.clamp(0.0, 1.0) * 255.0).round() as u8))
            .collect()
    }

    pub fn to_rgba8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .flat_map(|p| {
                let [r, g, b] = p.map(|c| (c.clamp(0.0, 1.0) * 255.0).round() as u8);
                [r, g, b, 255]
            })
            .collect()
    }

    pub fn png_bytes(&self) -> Result<Vec<u8>> {
        let buf = image::RgbImage::from_raw(self.width as u32, self.height as u32, self.to_rgb8())
            .ok_or_else(|| Error::InvalidConfig("raster buffer size".into()))?;
        let mut out = std::io::Cursor::new(Vec::new());
        buf.write_to(&mut out, image::ImageFormat::Png)?;
        Ok(out.into_inner())
    }

    /// Writes an 8-bit PNG atomically.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, &self.png_bytes()?)
    }

    /// Bilinear resize of the color channels (coverage/tags are dropped).
    pub fn resized(&self, width: usize, height: usize) -> Raster {
        if width == self.width && height == self.height {
            return Raster {
                coverage: None,
                tags: None,
                ..self.clone()
            };
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        Raster::from_fn(width, height, |x, y| {
            self.sample_bilinear((x as f64 + 0.5) * sx, (y as f64 + 0.5) * sy)
        })
    }

    /// Samples at continuous pixel coordinates (pixel centers at +0.5),
    /// clamping to the edge.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (idx, w) in bilinear_taps(self.width, self.height, x, y) {
            for k in 0..3 {
                out[k] += w * self.pixels[idx][k];
            }
        }
        out
    }

    /// Samples with wrap-around, for tileable textures; `(u, v)` in texture
    /// periods.
    pub fn sample_tiled(&self, u: f64, v: f64) -> [f64; 3] {
        let fx = u.rem_euclid(1.0) * self.width as f64;
        let fy = v.rem_euclid(1.0) * self.height as f64;
        let x = (fx as usize).min(self.width - 1);
        let y = (fy as usize).min(self.height - 1);
        self.at(x, y)
    }
}

/// The four bilinear taps (pixel index, weight) for a continuous coordinate
/// with clamp-to-edge addressing.
pub fn bilinear_taps(width: usize, height: usize, x: f64, y: f64) -> [(usize, f64); 4] {
    let fx = (x - 0.5).clamp(0.0, (width - 1) as f64);
    let fy = (y - 0.5).clamp(0.0, (height - 1) as f64);
    let x0 = fx.floor() as usize;
    let y0 = fy.floor() as usize;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let tx = fx - x0 as f64;
    let ty = fy - y0 as f64;
    [
        (y0 * width + x0, (1.0 - tx) * (1.0 - ty)),
        (y0 * width + x1, tx * (1.0 - ty)),
        (y1 * width + x0, (1.0 - tx) * ty),
        (y1 * width + x1, tx * ty),
    ]
}
