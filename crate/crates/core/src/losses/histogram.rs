//! Differentiable RGB-uv color histogram and the Hellinger-style histogram
//! loss.

use ndarray::{Array2, Array3, Axis};

use crate::error::{Error, Result};
use crate::raster::{ImageGrad, Raster};

pub const BINS: usize = 64;
pub const BOUNDARY: f64 = 3.0;
pub const TAU: f64 = 0.02;
pub const EPS: f64 = 1e-6;
/// Pixels below this intensity are excluded.
pub const MIN_INTENSITY: f64 = 1e-6;

/// Normalized `(3, h, h)` histogram over log-chroma `(u, v)` per anchor
/// channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorHistogram {
    pub values: Array3<f64>,
}

/// Bin centers: `h` points evenly spanning `[-3, 3]`.
pub fn bin_centers() -> Vec<f64> {
    (0..BINS)
        .map(|i| -BOUNDARY + 2.0 * BOUNDARY * i as f64 / (BINS - 1) as f64)
        .collect()
}

/// The two other channels paired with each anchor: u = log(c/c1), v = log(c/c2).
const PAIRS: [(usize, usize); 3] = [(1, 2), (0, 2), (0, 1)];

fn kernel(d: f64) -> f64 {
    1.0 / (1.0 + (d / TAU).powi(2))
}

/// Everything the backward pass needs.
struct Forward {
    kept: Vec<usize>,
    weight: Vec<f64>,
    /// Per anchor channel: (Ku, Kv), each `N × h`.
    kernels: Vec<(Array2<f64>, Array2<f64>)>,
    /// Per anchor channel: (u, v) per kept pixel.
    coords: Vec<(Vec<f64>, Vec<f64>)>,
    raw: Array3<f64>,
    total: f64,
}

fn forward(image: &Raster) -> Result<Forward> {
    image.check()?;
    let kept: Vec<usize> = (0..image.len())
        .filter(|&i| {
            let p = image.pixels[i];
            (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() >= MIN_INTENSITY
        })
        .collect();
    if kept.is_empty() {
        return Err(Error::DegenerateImage);
    }
    let centers = bin_centers();
    let weight: Vec<f64> = kept
        .iter()
        .map(|&i| {
            let p = image.pixels[i];
            (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
        })
        .collect();
    let n = kept.len();
    let mut raw = Array3::zeros((3, BINS, BINS));
    let mut kernels = Vec::with_capacity(3);
    let mut coords = Vec::with_capacity(3);
    for (c, &(c1, c2)) in PAIRS.iter().enumerate() {
        let log = |i: usize, ch: usize| (image.pixels[i][ch] + EPS).ln();
        let u: Vec<f64> = kept.iter().map(|&i| log(i, c) - log(i, c1)).collect();
        let v: Vec<f64> = kept.iter().map(|&i| log(i, c) - log(i, c2)).collect();
        let ku = Array2::from_shape_fn((n, BINS), |(p, b)| kernel(u[p] - centers[b]));
        let kv = Array2::from_shape_fn((n, BINS), |(p, b)| kernel(v[p] - centers[b]));
        let mut wku = ku.clone();
        for (mut row, w) in wku.axis_iter_mut(Axis(0)).zip(&weight) {
            row *= *w;
        }
        raw.index_axis_mut(Axis(0), c).assign(&wku.t().dot(&kv));
        kernels.push((ku, kv));
        coords.push((u, v));
    }
    let total = raw.sum();
    Ok(Forward {
        kept,
        weight,
        kernels,
        coords,
        raw,
        total,
    })
}

/// Soft histogram of an image, normalized to sum 1.
pub fn soft_color_histogram(image: &Raster) -> Result<ColorHistogram> {
    let f = forward(image)?;
    Ok(ColorHistogram {
        values: f.raw / f.total,
    })
}

/// Histogram plus a closure-free backward: maps `dL/dH` to `dL/dpixels`.
pub fn soft_color_histogram_vjp(
    image: &Raster,
    grad_h: &Array3<f64>,
) -> Result<(ColorHistogram, ImageGrad)> {
    let f = forward(image)?;
    let h = &f.raw / f.total;
    // Through the normalization H = raw / Σ raw.
    let inner = (grad_h * &h).sum();
    let g_raw = (grad_h - inner) / f.total;

    let centers = bin_centers();
    let mut out = vec![[0.0; 3]; image.len()];
    let mut g_weight = vec![0.0; f.kept.len()];
    for (c, &(c1, c2)) in PAIRS.iter().enumerate() {
        let (ku, kv) = &f.kernels[c];
        let (u, v) = &f.coords[c];
        let g = g_raw.index_axis(Axis(0), c);
        // raw_c = Kuᵀ diag(w) Kv
        let a = kv.dot(&g.t()); // N × h, pairs with Ku
        let b = ku.dot(&g); // N × h, pairs with Kv
        for (p, &i) in f.kept.iter().enumerate() {
            let w = f.weight[p];
            let mut gu = 0.0;
            let mut gv = 0.0;
            let mut gw = 0.0;
            for bin in 0..BINS {
                let (kuv, kvv) = (ku[(p, bin)], kv[(p, bin)]);
                gw += kuv * a[(p, bin)];
                let du = u[p] - centers[bin];
                let dv = v[p] - centers[bin];
                gu += a[(p, bin)] * (-2.0 * du / (TAU * TAU)) * kuv * kuv;
                gv += b[(p, bin)] * (-2.0 * dv / (TAU * TAU)) * kvv * kvv;
            }
            g_weight[p] += gw;
            gu *= w;
            gv *= w;
            let px = image.pixels[i];
            let inv = |ch: usize| 1.0 / (px[ch] + EPS);
            out[i][c] += (gu + gv) * inv(c);
            out[i][c1] -= gu * inv(c1);
            out[i][c2] -= gv * inv(c2);
        }
    }
    for (p, &i) in f.kept.iter().enumerate() {
        let px = image.pixels[i];
        for k in 0..3 {
            out[i][k] += g_weight[p] * px[k] / f.weight[p];
        }
    }
    Ok((ColorHistogram { values: h }, out))
}

/// `‖√H1 − √H2‖₂`.
pub fn histogram_distance(a: &ColorHistogram, b: &ColorHistogram) -> f64 {
    a.values
        .iter()
        .zip(b.values.iter())
        .map(|(x, y)| (x.sqrt() - y.sqrt()).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Histogram loss between two images.
pub fn hist_loss(image: &Raster, target: &Raster) -> Result<f64> {
    Ok(histogram_distance(
        &soft_color_histogram(image)?,
        &soft_color_histogram(target)?,
    ))
}

/// Histogram loss against a cached target histogram, with its gradient.
pub fn hist_loss_grad(image: &Raster, target: &ColorHistogram) -> Result<(f64, ImageGrad)> {
    let h = soft_color_histogram(image)?;
    let loss = histogram_distance(&h, target);
    if loss == 0.0 {
        return Ok((0.0, image.zero_grad()));
    }
    let grad_h = ndarray::Zip::from(&h.values)
        .and(&target.values)
        .map_collect(|&x, &y| {
            if x > 0.0 {
                (x.sqrt() - y.sqrt()) / (2.0 * loss * x.sqrt())
            } else {
                0.0
            }
        });
    let (_, g) = soft_color_histogram_vjp(image, &grad_h)?;
    Ok((loss, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_image(w: usize, h: usize, seed: f64) -> Raster {
        Raster::from_fn(w, h, |x, y| {
            let t = seed + x as f64 * 0.61 + y as f64 * 1.37;
            [
                0.5 + 0.45 * (t * 1.1).sin(),
                0.5 + 0.45 * (t * 0.7 + 1.0).cos(),
                0.5 + 0.45 * (t * 1.9 + 2.0).sin(),
            ]
        })
    }

    #[test]
    fn sums_to_one() {
        let h = soft_color_histogram(&sample_image(8, 8, 0.3)).unwrap();
        assert!((h.values.sum() - 1.0).abs() < 1e-12);
        assert!(h.values.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn black_image_is_degenerate() {
        let r = soft_color_histogram(&Raster::filled(4, 4, [0.0; 3]));
        assert!(matches!(r, Err(Error::DegenerateImage)));
    }

    #[test]
    fn identical_images_have_zero_loss() {
        let a = sample_image(8, 8, 0.1);
        assert!(hist_loss(&a, &a).unwrap() < 1e-7);
    }

    #[test]
    fn disjoint_support_gives_sqrt_two() {
        let mut a = Array3::zeros((3, BINS, BINS));
        let mut b = Array3::zeros((3, BINS, BINS));
        a[(0, 3, 4)] = 0.25;
        a[(1, 10, 10)] = 0.75;
        b[(2, 40, 1)] = 1.0;
        let d = histogram_distance(&ColorHistogram { values: a }, &ColorHistogram { values: b });
        assert!((d - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let img = sample_image(8, 8, 0.7);
        let target = soft_color_histogram(&sample_image(8, 8, 2.9)).unwrap();
        let (_, g) = hist_loss_grad(&img, &target).unwrap();
        let eps = 1e-6;
        for &(p, c) in &[(0usize, 0usize), (9, 1), (27, 2), (63, 0), (40, 2)] {
            let mut plus = img.clone();
            plus.pixels[p][c] += eps;
            let mut minus = img.clone();
            minus.pixels[p][c] -= eps;
            let fd = (hist_loss_grad(&plus, &target).unwrap().0
                - hist_loss_grad(&minus, &target).unwrap().0)
                / (2.0 * eps);
            assert!(
                (fd - g[p][c]).abs() <= 1e-4 * fd.abs().max(1e-6),
                "pixel {p} ch {c}: {fd} vs {}",
                g[p][c]
            );
        }
    }

    fn argmax(h: &ColorHistogram) -> (usize, usize, usize) {
        let mut best = ((0, 0, 0), f64::MIN);
        for ((c, i, j), &x) in h.values.indexed_iter() {
            if x > best.1 {
                best = ((c, i, j), x);
            }
        }
        best.0
    }

    // Reference values from an independent numpy implementation of the same
    // histogram definition.
    const ORACLE_A: [[[f64; 3]; 3]; 2] = [
        [[0.9, 0.2, 0.1], [0.3, 0.6, 0.2], [0.5, 0.5, 0.5]],
        [[0.1, 0.2, 0.8], [0.7, 0.7, 0.1], [0.25, 0.4, 0.35]],
    ];
    const ORACLE_B: [[[f64; 3]; 3]; 2] = [
        [[0.2, 0.8, 0.3], [0.6, 0.1, 0.6], [0.4, 0.4, 0.9]],
        [[0.8, 0.5, 0.2], [0.1, 0.1, 0.1], [0.33, 0.66, 0.99]],
    ];

    fn from_rows(rows: &[[[f64; 3]; 3]; 2]) -> Raster {
        Raster::from_fn(3, 2, |x, y| rows[y][x])
    }

    #[test]
    fn matches_numpy_oracle() {
        let ha = soft_color_histogram(&from_rows(&ORACLE_A)).unwrap();
        let hb = soft_color_histogram(&from_rows(&ORACLE_B)).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1e-12);
        assert!(close(ha.values[(0, 38, 44)], 2.047192610505483e-07));
        assert!(close(ha.values[(1, 31, 32)], 0.003041428628345791));
        assert!(close(ha.values[(2, 10, 20)], 2.5167379755294615e-05));
        assert_eq!(argmax(&ha), (2, 11, 11));
        assert!(close(histogram_distance(&ha, &hb), 1.3488162749702588));
    }

    #[test]
    fn mid_gray_concentrates_at_the_origin() {
        let h = soft_color_histogram(&Raster::filled(8, 8, [0.5; 3])).unwrap();
        let (_, i, j) = argmax(&h);
        assert!((31..=32).contains(&i) && (31..=32).contains(&j));
        let block = |lo: usize, hi: usize| -> f64 {
            let mut s = 0.0;
            for c in 0..3 {
                for i in lo..hi {
                    for j in lo..hi {
                        s += h.values[(c, i, j)];
                    }
                }
            }
            s
        };
        // The heavy-tailed kernel leaves about 71% in the 3×3 block.
        assert!((block(30, 33) - 0.7101257245880953).abs() < 1e-9);
        assert!((block(30, 34) - 0.7982556092932505).abs() < 1e-9);
    }

    #[test]
    fn in_range_color_argmax_matches_hard_binning() {
        // Nearest-bin oracle: u = ln(0.8/0.4), v = ln(0.8/0.3) on anchor R.
        let h = soft_color_histogram(&Raster::filled(4, 4, [0.8, 0.4, 0.3])).unwrap();
        let centers = bin_centers();
        let nearest = |x: f64| {
            (0..BINS)
                .min_by(|&a, &b| (centers[a] - x).abs().total_cmp(&(centers[b] - x).abs()))
                .unwrap()
        };
        let u = ((0.8 + EPS) / (0.4 + EPS)).ln();
        let v = ((0.8 + EPS) / (0.3 + EPS)).ln();
        assert_eq!(argmax(&h), (0, nearest(u), nearest(v)));
        assert_eq!(argmax(&h), (0, 39, 42));
    }

    #[test]
    fn pure_red_mass_sits_on_the_channels_with_an_in_range_coordinate() {
        // Anchor R has both log-ratios near 13.8, far outside the grid, so
        // its mass vanishes; G and B keep v = 0 in range.
        let h = soft_color_histogram(&Raster::filled(8, 8, [1.0, 0.0, 0.0])).unwrap();
        let mass = |c: usize| h.values.index_axis(Axis(0), c).sum();
        assert!((mass(0) - 1.86108131e-04).abs() < 1e-10);
        assert!((mass(1) - mass(2)).abs() < 1e-12);
        assert_eq!(argmax(&h).1, 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn symmetric_and_bounded(s1 in 0.0f64..10.0, s2 in 0.0f64..10.0) {
            let a = sample_image(6, 5, s1);
            let b = sample_image(6, 5, s2);
            let ab = hist_loss(&a, &b).unwrap();
            let ba = hist_loss(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-9);
            prop_assert!((0.0..=2f64.sqrt() + 1e-12).contains(&ab));
        }
    }
}
