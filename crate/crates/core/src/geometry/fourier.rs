//! Random Fourier positional encoding `γ(p) = [cos 2πBp, sin 2πBp]`.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Vec3;

pub const FREQUENCY_ROWS: usize = 128;
pub const FREQUENCY_SIGMA: f64 = 5.0;
/// Output width: a cosine and a sine block of `FREQUENCY_ROWS` each.
pub const FOURIER_DIM: usize = 2 * FREQUENCY_ROWS;

/// `B ∈ R^{128×3}` with entries from `N(0, 5²)`, reproducible from its seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyMatrix {
    pub seed: u64,
    rows: Vec<[f64; 3]>,
}

impl FrequencyMatrix {
    pub fn sample(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, FREQUENCY_SIGMA).expect("valid sigma");
        let rows = (0..FREQUENCY_ROWS)
            .map(|_| {
                [
                    normal.sample(&mut rng),
                    normal.sample(&mut rng),
                    normal.sample(&mut rng),
                ]
            })
            .collect();
        FrequencyMatrix { seed, rows }
    }

    pub fn rows(&self) -> &[[f64; 3]] {
        &self.rows
    }

    /// Frobenius norm of B.
    pub fn norm(&self) -> f64 {
        self.rows
            .iter()
            .flatten()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    /// Encodes one point into `out` (length 256).
    pub fn encode_into(&self, p: &Vec3, out: &mut [f64]) {
        let tau = std::f64::consts::TAU;
        for (r, b) in self.rows.iter().enumerate() {
            let phase = tau * (b[0] * p.x + b[1] * p.y + b[2] * p.z);
            let (s, c) = phase.sin_cos();
            out[r] = c;
            out[FREQUENCY_ROWS + r] = s;
        }
    }

    pub fn encode(&self, p: &Vec3) -> Vec<f64> {
        let mut out = vec![0.0; FOURIER_DIM];
        self.encode_into(p, &mut out);
        out
    }
}

/// Encodes every point; one row of 256 values per point.
pub fn fourier_features(points: &[Vec3], b: &FrequencyMatrix) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((points.len(), FOURIER_DIM));
    for (i, p) in points.iter().enumerate() {
        if !p.iter().all(|x| x.is_finite()) {
            return Err(Error::OutOfRange(format!("point {i} is not finite")));
        }
        b.encode_into(p, out.row_mut(i).as_slice_mut().expect("row is contiguous"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn origin_encodes_to_ones_then_zeros() {
        let b = FrequencyMatrix::sample(17);
        let g = b.encode(&Vec3::zeros());
        assert!(g[..128].iter().all(|&x| x == 1.0));
        assert!(g[128..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn seed_reproduces_bits() {
        let p = Vec3::new(1.0, 0.0, 0.0);
        let a = FrequencyMatrix::sample(17).encode(&p);
        let b = FrequencyMatrix::sample(17).encode(&p);
        assert_eq!(
            a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
        assert_ne!(FrequencyMatrix::sample(18), FrequencyMatrix::sample(17));
    }

    #[test]
    fn entries_have_sigma_five() {
        let b = FrequencyMatrix::sample(3);
        let xs: Vec<f64> = b.rows().iter().flatten().copied().collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64).sqrt();
        assert!(
            mean.abs() < 1.0 && (sd - 5.0).abs() < 1.0,
            "mean {mean} sd {sd}"
        );
    }

    #[test]
    fn non_finite_point_is_rejected() {
        let b = FrequencyMatrix::sample(0);
        assert!(fourier_features(&[Vec3::new(f64::NAN, 0.0, 0.0)], &b).is_err());
    }

    proptest! {
        #[test]
        fn squared_norm_is_128(x in -10.0f64..10.0, y in -10.0f64..10.0, z in -10.0f64..10.0) {
            let g = FrequencyMatrix::sample(5).encode(&Vec3::new(x, y, z));
            let n2: f64 = g.iter().map(|v| v * v).sum();
            prop_assert!((n2 - 128.0).abs() < 1e-9);
        }

        #[test]
        fn lipschitz_per_pair(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0,
                              dx in -1e-3f64..1e-3, dy in -1e-3f64..1e-3, dz in -1e-3f64..1e-3) {
            let b = FrequencyMatrix::sample(9);
            let p = Vec3::new(x, y, z);
            let d = Vec3::new(dx, dy, dz);
            let (g0, g1) = (b.encode(&p), b.encode(&(p + d)));
            let bound = std::f64::consts::TAU * b.norm() * d.norm() * 2f64.sqrt();
            for r in 0..FREQUENCY_ROWS {
                let pair = ((g1[r] - g0[r]).powi(2) + (g1[128 + r] - g0[128 + r]).powi(2)).sqrt();
                prop_assert!(pair <= bound + 1e-12);
            }
        }
    }
}
