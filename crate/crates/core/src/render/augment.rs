//! Background compositing and perspective crop augmentation, each with its
//! backward pass.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::rasterizer::{BackgroundMode, RenderSettings};
use crate::raster::{bilinear_taps, ImageGrad, Raster};

/// Checkerboard cell size in pixels.
pub const CHECKER_CELL: usize = 8;
const CHECKER_TONES: [f64; 2] = [0.85, 0.15];

/// Replaces background pixels per `mode`: `out = m·fg + (1 − m)·bg` with
/// `m` the coverage channel. Coverage and tags are kept.
pub fn composite_background(image: &Raster, mode: BackgroundMode, rng: &mut impl Rng) -> Raster {
    let (w, h) = (image.width, image.height);
    let mask = image.coverage.clone().unwrap_or_else(|| vec![1.0; w * h]);
    let background: Vec<[f64; 3]> = match mode {
        BackgroundMode::White => vec![[1.0; 3]; w * h],
        BackgroundMode::Black => vec![[0.0; 3]; w * h],
        BackgroundMode::Gaussian => {
            let normal = Normal::new(0.5, 0.25).expect("valid sigma");
            (0..w * h)
                .map(|_| std::array::from_fn(|_| f64::clamp(normal.sample(rng), 0.0, 1.0)))
                .collect()
        }
        BackgroundMode::Checkerboard => {
            let ox = rng.random_range(0..2 * CHECKER_CELL);
            let oy = rng.random_range(0..2 * CHECKER_CELL);
            (0..w * h)
                .map(|i| {
                    let cell = ((i % w + ox) / CHECKER_CELL + (i / w + oy) / CHECKER_CELL) % 2;
                    [CHECKER_TONES[cell]; 3]
                })
                .collect()
        }
    };
    let pixels = image
        .pixels
        .iter()
        .zip(&background)
        .zip(&mask)
        .map(|((fg, bg), &m)| std::array::from_fn(|k| m * fg[k] + (1.0 - m) * bg[k]))
        .collect();
    Raster {
        pixels,
        ..image.clone()
    }
}

/// Backward of [`composite_background`]: only foreground pixels pass.
pub fn composite_backward(image: &Raster, grad: &ImageGrad) -> ImageGrad {
    match &image.coverage {
        Some(mask) => grad
            .iter()
            .zip(mask)
            .map(|(g, &m)| g.map(|x| x * m))
            .collect(),
        None => grad.clone(),
    }
}

/// Projective map of the unit square onto a quad with corners ordered
/// (0,0), (1,0), (1,1), (0,1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography([f64; 8]);

impl Homography {
    pub fn square_to_quad(q: &[[f64; 2]; 4]) -> Homography {
        let [[x0, y0], [x1, y1], [x2, y2], [x3, y3]] = *q;
        let (dx1, dx2, dx3) = (x1 - x2, x3 - x2, x0 - x1 + x2 - x3);
        let (dy1, dy2, dy3) = (y1 - y2, y3 - y2, y0 - y1 + y2 - y3);
        let det = dx1 * dy2 - dx2 * dy1;
        let (g, h) = if det.abs() > 1e-12 {
            ((dx3 * dy2 - dx2 * dy3) / det, (dx1 * dy3 - dx3 * dy1) / det)
        } else {
            (0.0, 0.0)
        };
        Homography([
            x1 - x0 + g * x1,
            x3 - x0 + h * x3,
            x0,
            y1 - y0 + g * y1,
            y3 - y0 + h * y3,
            y0,
            g,
            h,
        ])
    }

    pub fn apply(&self, u: f64, v: f64) -> [f64; 2] {
        let [a, b, c, d, e, f, g, h] = self.0;
        let z = g * u + h * v + 1.0;
        [(a * u + b * v + c) / z, (d * u + e * v + f) / z]
    }
}

/// One sampled crop and the linear map it applied.
#[derive(Debug, Clone)]
pub struct ViewCrop {
    /// Area of the crop rectangle over the source area.
    pub area_fraction: f64,
    /// `(x, y, width, height)` of the crop before jitter, in source pixels.
    pub rect: [f64; 4],
    /// Jittered corners actually sampled.
    pub corners: [[f64; 2]; 4],
    source_len: usize,
    taps: Vec<[(usize, f64); 4]>,
}

impl ViewCrop {
    /// Pulls an output-image gradient back to the source image.
    pub fn backward(&self, grad: &ImageGrad) -> ImageGrad {
        let mut out = vec![[0.0; 3]; self.source_len];
        for (taps, g) in self.taps.iter().zip(grad) {
            for &(i, w) in taps {
                for k in 0..3 {
                    out[i][k] += w * g[k];
                }
            }
        }
        out
    }
}

/// Random perspective warp plus a crop covering a `crop_fraction` share of
/// the source, resampled to `encoder_resolution` squared.
pub fn augment_view_crop(
    image: &Raster,
    rng: &mut impl Rng,
    settings: &RenderSettings,
) -> (Raster, ViewCrop) {
    let (sw, sh) = (image.width as f64, image.height as f64);
    let (lo, hi) = settings.crop_fraction;
    let area = rng.random_range(lo..=hi);
    let (cw, ch) = (sw * area.sqrt(), sh * area.sqrt());
    let x0 = rng.random_range(0.0..=(sw - cw).max(0.0));
    let y0 = rng.random_range(0.0..=(sh - ch).max(0.0));
    let base = [[x0, y0], [x0 + cw, y0], [x0 + cw, y0 + ch], [x0, y0 + ch]];
    let corners = base.map(|[x, y]| {
        let jx = rng.random_range(-1.0..=1.0) * settings.jitter * cw;
        let jy = rng.random_range(-1.0..=1.0) * settings.jitter * ch;
        [(x + jx).clamp(0.0, sw), (y + jy).clamp(0.0, sh)]
    });
    let hom = Homography::square_to_quad(&corners);
    let r = settings.encoder_resolution;
    let mut taps = Vec::with_capacity(r * r);
    let mut pixels = Vec::with_capacity(r * r);
    let mut coverage = image.coverage.as_ref().map(|_| Vec::with_capacity(r * r));
    let mut tags = image.tags.as_ref().map(|_| Vec::with_capacity(r * r));
    for y in 0..r {
        for x in 0..r {
            let [px, py] = hom.apply((x as f64 + 0.5) / r as f64, (y as f64 + 0.5) / r as f64);
            let t = bilinear_taps(image.width, image.height, px, py);
            let mut c = [0.0; 3];
            for &(i, w) in &t {
                for k in 0..3 {
                    c[k] += w * image.pixels[i][k];
                }
            }
            pixels.push(c);
            if let (Some(out), Some(src)) = (coverage.as_mut(), image.coverage.as_ref()) {
                out.push(t.iter().map(|&(i, w)| w * src[i]).sum());
            }
            if let (Some(out), Some(src)) = (tags.as_mut(), image.tags.as_ref()) {
                let nx = (px.floor().max(0.0) as usize).min(image.width - 1);
                let ny = (py.floor().max(0.0) as usize).min(image.height - 1);
                out.push(src[ny * image.width + nx]);
            }
            taps.push(t);
        }
    }
    let out = Raster {
        width: r,
        height: r,
        pixels,
        coverage,
        tags,
    };
    let crop = ViewCrop {
        area_fraction: area,
        rect: [x0, y0, cw, ch],
        corners,
        source_len: image.len(),
        taps,
    };
    (out, crop)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn masked_image() -> Raster {
        let mut img = Raster::from_fn(64, 64, |x, y| [x as f64 / 63.0, y as f64 / 63.0, 0.3]);
        img.coverage = Some(
            (0..64 * 64)
                .map(|i| if (i % 64) < 32 { 1.0 } else { 0.0 })
                .collect(),
        );
        img
    }

    #[test]
    fn white_and_black_fill_background_only() {
        let img = masked_image();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for (mode, fill) in [
            (BackgroundMode::White, [1.0; 3]),
            (BackgroundMode::Black, [0.0; 3]),
        ] {
            let out = composite_background(&img, mode, &mut rng);
            for (i, p) in out.pixels.iter().enumerate() {
                if i % 64 < 32 {
                    assert_eq!(*p, img.pixels[i]);
                } else {
                    assert_eq!(*p, fill);
                }
            }
            assert_eq!(out.coverage, img.coverage);
        }
    }

    #[test]
    fn gaussian_background_is_clamped_and_centered() {
        let img = masked_image();
        let out = composite_background(
            &img,
            BackgroundMode::Gaussian,
            &mut ChaCha8Rng::seed_from_u64(1),
        );
        let bg: Vec<f64> = (0..64 * 64)
            .filter(|i| i % 64 >= 32)
            .flat_map(|i| out.pixels[i])
            .collect();
        assert!(bg.iter().all(|v| (0.0..=1.0).contains(v)));
        let mean = bg.iter().sum::<f64>() / bg.len() as f64;
        assert!((mean - 0.5).abs() < 0.02);
    }

    #[test]
    fn checkerboard_phase_is_seeded() {
        let img = masked_image();
        let a = composite_background(
            &img,
            BackgroundMode::Checkerboard,
            &mut ChaCha8Rng::seed_from_u64(5),
        );
        let b = composite_background(
            &img,
            BackgroundMode::Checkerboard,
            &mut ChaCha8Rng::seed_from_u64(5),
        );
        assert_eq!(a.pixels, b.pixels);
        // Cells are 8 pixels wide: two tones alternate along a row.
        let row: Vec<f64> = (32..64).map(|x| a.pixels[x][0]).collect();
        let changes = row.windows(2).filter(|w| w[0] != w[1]).count();
        assert!((3..=4).contains(&changes));
    }

    #[test]
    fn composite_backward_masks_gradient() {
        let img = masked_image();
        let g = composite_backward(&img, &vec![[1.0, 2.0, 3.0]; 64 * 64]);
        assert_eq!(g[0], [1.0, 2.0, 3.0]);
        assert_eq!(g[63], [0.0; 3]);
    }

    #[test]
    fn full_crop_without_jitter_is_a_resize() {
        let img = masked_image();
        let settings = RenderSettings {
            crop_fraction: (1.0, 1.0),
            jitter: 0.0,
            encoder_resolution: 32,
            ..RenderSettings::square(64)
        };
        let (out, crop) = augment_view_crop(&img, &mut ChaCha8Rng::seed_from_u64(2), &settings);
        let resized = img.resized(32, 32);
        for (a, b) in out.pixels.iter().zip(&resized.pixels) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-12);
            }
        }
        assert_eq!(crop.area_fraction, 1.0);
    }

    #[test]
    fn crop_areas_stay_in_range_and_repeat() {
        let img = masked_image();
        let settings = RenderSettings {
            encoder_resolution: 4,
            ..RenderSettings::square(64)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let (_, crop) = augment_view_crop(&img, &mut rng, &settings);
            assert!((0.10..=0.20).contains(&crop.area_fraction));
            let [_, _, w, h] = crop.rect;
            assert!((w * h / (64.0 * 64.0) - crop.area_fraction).abs() < 1e-12);
        }
        let a = augment_view_crop(&img, &mut ChaCha8Rng::seed_from_u64(9), &settings).0;
        let b = augment_view_crop(&img, &mut ChaCha8Rng::seed_from_u64(9), &settings).0;
        assert_eq!(a.pixels, b.pixels);
    }

    #[test]
    fn crop_backward_is_the_adjoint() {
        let img = masked_image();
        let settings = RenderSettings {
            encoder_resolution: 16,
            ..RenderSettings::square(64)
        };
        let (out, crop) = augment_view_crop(&img, &mut ChaCha8Rng::seed_from_u64(4), &settings);
        let g: ImageGrad = (0..256)
            .map(|i| [(i as f64).sin(), 0.5, (i as f64 * 0.1).cos()])
            .collect();
        let lhs: f64 = out
            .pixels
            .iter()
            .zip(&g)
            .map(|(p, g)| p[0] * g[0] + p[1] * g[1] + p[2] * g[2])
            .sum();
        let back = crop.backward(&g);
        let rhs: f64 = img
            .pixels
            .iter()
            .zip(&back)
            .map(|(p, g)| p[0] * g[0] + p[1] * g[1] + p[2] * g[2])
            .sum();
        assert!((lhs - rhs).abs() < 1e-9);
    }

    #[test]
    fn homography_maps_corners() {
        let q = [[1.0, 2.0], [9.0, 1.5], [10.0, 8.0], [0.5, 7.0]];
        let h = Homography::square_to_quad(&q);
        for (i, (u, v)) in [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
            .into_iter()
            .enumerate()
        {
            let p = h.apply(u, v);
            assert!((p[0] - q[i][0]).abs() < 1e-9 && (p[1] - q[i][1]).abs() < 1e-9);
        }
    }
}
