//! The local neural style field: an MLP from per-vertex features to a
//! bounded color (and optional displacement) residual.

use ndarray::{s, Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    fourier_features, FrequencyMatrix, PartLabeling, SpectralBasis, FOURIER_DIM,
};
use crate::mesh::TriangleMesh;

pub const HIDDEN_WIDTH: usize = 256;
pub const HIDDEN_LAYERS: usize = 5;
pub const SPECTRAL_DIM: usize = 128;
pub const SEGMENT_EMBEDDING: usize = 16;
/// Fourier ⊕ spectral ⊕ segment embedding.
pub const INPUT_DIM: usize = FOURIER_DIM + SPECTRAL_DIM + SEGMENT_EMBEDDING;

/// Per-vertex inputs that do not depend on the field parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldInputs {
    /// `n × (FOURIER_DIM + SPECTRAL_DIM)`: γ(p) then φ(p), zero-padded when
    /// the basis has fewer than 128 functions.
    pub features: Array2<f64>,
    /// Segment id of each vertex.
    pub segments: Vec<usize>,
}

impl FieldInputs {
    /// `mesh` must already be in its unit box.
    pub fn new(
        mesh: &TriangleMesh,
        labeling: &PartLabeling,
        basis: &SpectralBasis,
        frequencies: &FrequencyMatrix,
    ) -> Result<Self> {
        labeling.check_mesh(mesh)?;
        let n = mesh.vertex_count();
        if basis.vertex_count() != n {
            return Err(Error::LengthMismatch(format!(
                "basis covers {} vertices, mesh has {n}",
                basis.vertex_count()
            )));
        }
        let gamma = fourier_features(&mesh.vertices, frequencies)?;
        let k = basis.k().min(SPECTRAL_DIM);
        let mut features = Array2::zeros((n, FOURIER_DIM + SPECTRAL_DIM));
        features.slice_mut(s![.., ..FOURIER_DIM]).assign(&gamma);
        for v in 0..n {
            let row = basis.row(v);
            for j in 0..k {
                features[(v, FOURIER_DIM + j)] = row[j];
            }
        }
        Ok(FieldInputs {
            features,
            segments: labeling.vertex_segments(mesh),
        })
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub input_dim: usize,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    /// 3 (color) or 4 (color + displacement).
    pub outputs: usize,
    pub segments: usize,
    pub seed: u64,
}

impl FieldSpec {
    pub fn color(segments: usize, seed: u64) -> Self {
        FieldSpec {
            input_dim: INPUT_DIM,
            hidden_width: HIDDEN_WIDTH,
            hidden_layers: HIDDEN_LAYERS,
            outputs: 3,
            segments,
            seed,
        }
    }

    pub fn with_displacement(segments: usize, seed: u64) -> Self {
        FieldSpec {
            outputs: 4,
            ..FieldSpec::color(segments, seed)
        }
    }

    pub fn has_displacement(&self) -> bool {
        self.outputs == 4
    }
}

/// Parameters in a fixed order: segment embedding, then `(W, b)` per layer.
/// `W` is `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lnsf {
    spec: FieldSpec,
    embedding: Array2<f64>,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

/// Activations kept for the backward pass.
pub struct ForwardCache {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    output: Array2<f64>,
    segments: Vec<usize>,
}

impl ForwardCache {
    /// Field output, `n × outputs`, in (−1, 1).
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }
}

/// Gradients shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrad {
    pub embedding: Array2<f64>,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl FieldGrad {
    pub fn is_finite(&self) -> bool {
        self.embedding.iter().all(|x| x.is_finite())
            && self.weights.iter().flatten().all(|x| x.is_finite())
            && self.biases.iter().flatten().all(|x| x.is_finite())
    }

    /// Flat views in parameter order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = vec![self.embedding.as_slice().expect("contiguous")];
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.push(w.as_slice().expect("contiguous"));
            out.push(b.as_slice().expect("contiguous"));
        }
        out
    }
}

const MAGIC: &[u8; 8] = b"SSLNSF01";

impl Lnsf {
    /// He-initialized hidden layers, N(0, 1) segment embeddings and an all-zero
    /// output layer, drawn from `spec.seed`.
    pub fn new(spec: FieldSpec) -> Result<Self> {
        if spec.input_dim != INPUT_DIM || spec.hidden_layers == 0 || spec.hidden_width == 0 {
            return Err(Error::InvalidConfig(format!(
                "unsupported field shape {spec:?}"
            )));
        }
        if !(spec.outputs == 3 || spec.outputs == 4) || spec.segments == 0 {
            return Err(Error::InvalidConfig(
                "field needs 3 or 4 outputs and >= 1 segment".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
        let embedding = Array2::from_shape_simple_fn((spec.segments, SEGMENT_EMBEDDING), || {
            std_normal.sample(&mut rng)
        });
        let mut weights = Vec::with_capacity(spec.hidden_layers + 1);
        let mut biases = Vec::with_capacity(spec.hidden_layers + 1);
        let mut fan_in = spec.input_dim;
        for _ in 0..spec.hidden_layers {
            let he = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("finite std");
            weights.push(Array2::from_shape_simple_fn(
                (spec.hidden_width, fan_in),
                || he.sample(&mut rng),
            ));
            biases.push(Array1::zeros(spec.hidden_width));
            fan_in = spec.hidden_width;
        }
        weights.push(Array2::zeros((spec.outputs, fan_in)));
        biases.push(Array1::zeros(spec.outputs));
        Ok(Lnsf {
            spec,
            embedding,
            weights,
            biases,
        })
    }

    pub fn spec(&self) -> &FieldSpec {
        &self.spec
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = vec![self.embedding.as_slice().expect("contiguous")];
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.push(w.as_slice().expect("contiguous"));
            out.push(b.as_slice().expect("contiguous"));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = vec![self.embedding.as_slice_mut().expect("contiguous")];
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            out.push(w.as_slice_mut().expect("contiguous"));
            out.push(b.as_slice_mut().expect("contiguous"));
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|x| x.is_finite()))
    }

    fn assemble(&self, inputs: &FieldInputs) -> Result<Array2<f64>> {
        if inputs.features.ncols() != FOURIER_DIM + SPECTRAL_DIM
            || inputs.features.nrows() != inputs.len()
        {
            return Err(Error::LengthMismatch(
                "field inputs have the wrong shape".into(),
            ));
        }
        if let Some(&s) = inputs.segments.iter().find(|&&s| s >= self.spec.segments) {
            return Err(Error::LabelMismatch(format!(
                "segment {s} but the field has {} embeddings",
                self.spec.segments
            )));
        }
        let mut x = Array2::zeros((inputs.len(), INPUT_DIM));
        x.slice_mut(s![.., ..FOURIER_DIM + SPECTRAL_DIM])
            .assign(&inputs.features);
        for (v, &seg) in inputs.segments.iter().enumerate() {
            x.slice_mut(s![v, FOURIER_DIM + SPECTRAL_DIM..])
                .assign(&self.embedding.row(seg));
        }
        Ok(x)
    }

    pub fn forward(&self, inputs: &FieldInputs) -> Result<ForwardCache> {
        let mut h = self.assemble(inputs)?;
        let last = self.weights.len() - 1;
        let mut layer_inputs = Vec::with_capacity(self.weights.len());
        let mut pre = Vec::with_capacity(last);
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = h.dot(&w.t()) + b;
            layer_inputs.push(h);
            if l == last {
                return Ok(ForwardCache {
                    inputs: layer_inputs,
                    pre,
                    output: z.mapv(f64::tanh),
                    segments: inputs.segments.clone(),
                });
            }
            h = z.mapv(|x| x.max(0.0));
            pre.push(z);
        }
        unreachable!("the output layer returns")
    }

    /// Field output alone.
    pub fn evaluate(&self, inputs: &FieldInputs) -> Result<Array2<f64>> {
        Ok(self.forward(inputs)?.output)
    }

    /// Gradient of a loss given `∂L/∂output` at the cached forward pass.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &Array2<f64>) -> FieldGrad {
        let last = self.weights.len() - 1;
        let mut weights = vec![Array2::zeros((0, 0)); self.weights.len()];
        let mut biases = vec![Array1::zeros(0); self.weights.len()];
        // tanh' = 1 − y²
        let mut dz = grad_output * &cache.output.mapv(|y| 1.0 - y * y);
        for l in (0..=last).rev() {
            weights[l] = dz.t().dot(&cache.inputs[l]);
            biases[l] = dz.sum_axis(Axis(0));
            let dh = dz.dot(&self.weights[l]);
            if l == 0 {
                let mut embedding = Array2::zeros(self.embedding.raw_dim());
                let off = FOURIER_DIM + SPECTRAL_DIM;
                for (v, &seg) in cache.segments.iter().enumerate() {
                    let mut row = embedding.row_mut(seg);
                    row += &dh.slice(s![v, off..]);
                }
                return FieldGrad {
                    embedding,
                    weights,
                    biases,
                };
            }
            dz = dh * &cache.pre[l - 1].mapv(|z| if z > 0.0 { 1.0 } else { 0.0 });
        }
        unreachable!("layer 0 returns")
    }

    /// Binary checkpoint: magic, u32 header length, JSON header, then every
    /// parameter as little-endian f64 in parameter order.
    pub fn to_bytes(&self, header_extra: &serde_json::Value) -> Vec<u8> {
        let header = serde_json::json!({
            "spec": self.spec,
            "parameters": self.parameter_count(),
            "extra": header_extra,
        });
        let header = serde_json::to_vec(&header).expect("serializable");
        let mut out = Vec::with_capacity(12 + header.len() + 8 * self.parameter_count());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for t in self.tensors() {
            for x in t {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    /// Inverse of [`Lnsf::to_bytes`]; returns the field and the extra header.
    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, serde_json::Value)> {
        let bad = |m: &str| Error::parse("field checkpoint", m);
        if bytes.len() < 12 || &bytes[..8] != MAGIC {
            return Err(bad("bad magic"));
        }
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let header: serde_json::Value = serde_json::from_slice(
            bytes
                .get(12..12 + hlen)
                .ok_or_else(|| bad("truncated header"))?,
        )
        .map_err(|e| bad(&e.to_string()))?;
        let spec: FieldSpec =
            serde_json::from_value(header["spec"].clone()).map_err(|e| bad(&e.to_string()))?;
        let mut field = Lnsf::new(spec)?;
        let mut data = bytes[12 + hlen..].chunks_exact(8);
        if data.len() != field.parameter_count() {
            return Err(bad("parameter count mismatch"));
        }
        for t in field.tensors_mut() {
            for (x, chunk) in t.iter_mut().zip(&mut data) {
                *x = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
            }
        }
        Ok((field, header["extra"].clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::laplace_beltrami_basis;
    use crate::synthetic::cube;

    fn inputs() -> FieldInputs {
        let mesh = cube(1.0);
        let lab = PartLabeling::compact(&(0..12).map(|f| f / 4).collect::<Vec<_>>()).unwrap();
        let basis = laplace_beltrami_basis(&mesh, 8).unwrap();
        FieldInputs::new(&mesh, &lab, &basis, &FrequencyMatrix::sample(0)).unwrap()
    }

    #[test]
    fn fresh_field_outputs_zero() {
        let f = Lnsf::new(FieldSpec::with_displacement(3, 9)).unwrap();
        let out = f.evaluate(&inputs()).unwrap();
        assert_eq!(out.dim(), (8, 4));
        assert!(out.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn shape_matches_architecture() {
        let f = Lnsf::new(FieldSpec::color(3, 0)).unwrap();
        let shapes: Vec<_> = f.weights.iter().map(|w| w.dim()).collect();
        assert_eq!(
            shapes,
            vec![
                (256, 400),
                (256, 256),
                (256, 256),
                (256, 256),
                (256, 256),
                (3, 256)
            ]
        );
        assert_eq!(f.embedding.dim(), (3, 16));
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut f = Lnsf::new(FieldSpec::color(2, 4)).unwrap();
        f.biases[5][1] = 0.25;
        let extra = serde_json::json!({"step": 7});
        let (g, e) = Lnsf::from_bytes(&f.to_bytes(&extra)).unwrap();
        assert_eq!(g, f);
        assert_eq!(e, extra);
        assert!(Lnsf::from_bytes(b"nonsense").is_err());
    }

    #[test]
    fn unknown_segment_is_rejected() {
        let f = Lnsf::new(FieldSpec::color(1, 0)).unwrap();
        assert!(matches!(
            f.evaluate(&inputs()),
            Err(Error::LabelMismatch(_))
        ));
    }

    #[test]
    fn backward_matches_finite_difference() {
        let x = inputs();
        let mut f = Lnsf::new(FieldSpec::with_displacement(3, 1)).unwrap();
        // A nonzero output layer so every parameter receives gradient.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = Normal::new(0.0, 0.05).unwrap();
        f.weights[5].mapv_inplace(|_| n.sample(&mut rng));
        let coef = Array2::from_shape_fn((8, 4), |(i, j)| ((i * 4 + j) as f64 * 0.37).sin());
        let loss = |f: &Lnsf| (f.evaluate(&x).unwrap() * &coef).sum();
        let grad = f.backward(&f.forward(&x).unwrap(), &coef);
        let flat: Vec<Vec<f64>> = grad.tensors().iter().map(|t| t.to_vec()).collect();
        let eps = 1e-6;
        for (t, idx) in [
            (0, 5),
            (0, 40),
            (1, 0),
            (1, 1000),
            (2, 17),
            (5, 300),
            (10, 9),
            (11, 2),
            (11, 3),
        ] {
            let mut a = f.clone();
            a.tensors_mut()[t][idx] += eps;
            let mut b = f.clone();
            b.tensors_mut()[t][idx] -= eps;
            let fd = (loss(&a) - loss(&b)) / (2.0 * eps);
            let an = flat[t][idx];
            assert!(
                (fd - an).abs() <= 1e-4 * an.abs().max(1e-3),
                "tensor {t}[{idx}]: {fd} vs {an}"
            );
        }
    }
}
