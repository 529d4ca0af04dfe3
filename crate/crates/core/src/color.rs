//! sRGB to CIE L*a*b* (D65, 2° observer) and the ΔE76 color difference.

use crate::error::{Error, Result};

/// Linear sRGB to XYZ (D65).
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];

/// Reference white: the XYZ image of linear (1,1,1), so neutral grays land
/// exactly on a* = b* = 0.
const WHITE: [f64; 3] = [
    RGB_TO_XYZ[0][0] + RGB_TO_XYZ[0][1] + RGB_TO_XYZ[0][2],
    RGB_TO_XYZ[1][0] + RGB_TO_XYZ[1][1] + RGB_TO_XYZ[1][2],
    RGB_TO_XYZ[2][0] + RGB_TO_XYZ[2][1] + RGB_TO_XYZ[2][2],
];

const RANGE_SLACK: f64 = 1e-9;

/// Gamma-decodes one sRGB component.
pub fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// Converts an sRGB color with components in `[0, 1]` to L*a*b*.
pub fn rgb_to_lab(rgb: [f64; 3]) -> Result<[f64; 3]> {
    for (i, &c) in rgb.iter().enumerate() {
        if !c.is_finite() || !(-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&c) {
            return Err(Error::OutOfRange(format!("rgb component {i} = {c}")));
        }
    }
    let lin = rgb.map(|c| srgb_to_linear(c.clamp(0.0, 1.0)));
    let xyz: [f64; 3] =
        std::array::from_fn(|r| (0..3).map(|k| RGB_TO_XYZ[r][k] * lin[k]).sum::<f64>());
    let fx = lab_f(xyz[0] / WHITE[0]);
    let fy = lab_f(xyz[1] / WHITE[1]);
    let fz = lab_f(xyz[2] / WHITE[2]);
    Ok([116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)])
}

/// Euclidean distance in L*a*b*.
pub fn delta_e76(a: [f64; 3], b: [f64; 3]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// ΔE76 between two sRGB colors.
pub fn rgb_delta_e(a: [f64; 3], b: [f64; 3]) -> Result<f64> {
    Ok(delta_e76(rgb_to_lab(a)?, rgb_to_lab(b)?))
}
