//! Deterministic oracle backend whose optimum is a known color per prompt.
//!
//! An image embeds as one block `(mean RGB, 1)` per material tag, averaged
//! over foreground pixels, and the whole vector is normalized. A prompt
//! embeds as `(color, 1)` per block from the table. With a single block this
//! is the plain mean-color oracle.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::backend::EmbeddingBackend;
use crate::error::{Error, Result};
use crate::raster::{ImageGrad, Raster, NO_TAG};

pub const GRAY: [f64; 3] = [0.5, 0.5, 0.5];

/// One color, or one color per material tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MockColors {
    One([f64; 3]),
    PerTag(Vec<[f64; 3]>),
}

impl MockColors {
    fn to_vec(&self) -> Vec<[f64; 3]> {
        match self {
            MockColors::One(c) => vec![*c],
            MockColors::PerTag(v) => v.clone(),
        }
    }
}

/// Prompt substring → color(s). Matching is case-insensitive and picks the
/// longest key contained in the prompt.
pub type MockTable = BTreeMap<String, MockColors>;

#[derive(Debug, Clone)]
pub struct MockOracleBackend {
    entries: Vec<(String, Vec<[f64; 3]>)>,
    blocks: usize,
}

impl MockOracleBackend {
    pub fn new(table: &MockTable) -> Result<Self> {
        let mut entries = Vec::with_capacity(table.len());
        for (key, colors) in table {
            let colors = colors.to_vec();
            if colors.is_empty() || colors.iter().flatten().any(|c| !(0.0..=1.0).contains(c)) {
                return Err(Error::InvalidConfig(format!(
                    "mock colors for {key:?} must be nonempty and in [0, 1]"
                )));
            }
            entries.push((key.to_lowercase(), colors));
        }
        let blocks = entries.iter().map(|(_, c)| c.len()).max().unwrap_or(1);
        Ok(MockOracleBackend { entries, blocks })
    }

    /// Table with one color per prompt substring.
    pub fn with_colors<'a>(pairs: impl IntoIterator<Item = (&'a str, [f64; 3])>) -> Self {
        let table: MockTable = pairs
            .into_iter()
            .map(|(k, c)| (k.to_string(), MockColors::One(c)))
            .collect();
        MockOracleBackend::new(&table).expect("valid colors")
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    /// Target color of each block for a prompt; unknown prompts are gray.
    pub fn lookup(&self, prompt: &str) -> Vec<[f64; 3]> {
        let p = prompt.to_lowercase();
        let best = self
            .entries
            .iter()
            .filter(|(k, _)| p.contains(k.as_str()))
            .fold(None::<&(String, Vec<[f64; 3]>)>, |best, e| match best {
                Some(b) if b.0.len() >= e.0.len() => Some(b),
                _ => Some(e),
            });
        let colors = best.map_or_else(|| vec![GRAY], |(_, c)| c.clone());
        (0..self.blocks)
            .map(|t| colors[t.min(colors.len() - 1)])
            .collect()
    }

    /// Untagged pixels count as tag 0; tags past the last block share it.
    fn block_of(&self, image: &Raster, i: usize) -> usize {
        let tag = image
            .tags
            .as_ref()
            .map_or(0, |t| if t[i] == NO_TAG { 0 } else { t[i] as usize });
        tag.min(self.blocks - 1)
    }

    /// Unnormalized blocks and the coverage mass of each block.
    fn raw(&self, image: &Raster) -> (Vec<f64>, Vec<f64>) {
        let mut sums = vec![[0.0; 3]; self.blocks];
        let mut mass = vec![0.0; self.blocks];
        for i in 0..image.len() {
            let w = image.coverage.as_ref().map_or(1.0, |c| c[i]);
            if w <= 0.0 {
                continue;
            }
            let t = self.block_of(image, i);
            for k in 0..3 {
                sums[t][k] += w * image.pixels[i][k];
            }
            mass[t] += w;
        }
        let mut v = Vec::with_capacity(4 * self.blocks);
        for t in 0..self.blocks {
            if mass[t] > 0.0 {
                v.extend(sums[t].map(|s| s / mass[t]));
            } else {
                v.extend([0.0; 3]);
            }
            v.push(1.0);
        }
        (v, mass)
    }
}

fn normalized(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

impl EmbeddingBackend for MockOracleBackend {
    fn name(&self) -> &str {
        "mock"
    }

    fn dim(&self) -> usize {
        4 * self.blocks
    }

    fn embed_image(&self, image: &Raster) -> Result<Vec<f64>> {
        image.check()?;
        Ok(normalized(self.raw(image).0))
    }

    fn embed_text(&self, text: &str) -> Result<Vec<f64>> {
        let v = self
            .lookup(text)
            .into_iter()
            .flat_map(|c| [c[0], c[1], c[2], 1.0])
            .collect();
        Ok(normalized(v))
    }

    fn image_vjp(&self, image: &Raster, grad: &[f64]) -> Result<ImageGrad> {
        if grad.len() != self.dim() {
            return Err(Error::LengthMismatch(format!(
                "gradient has {} entries, expected {}",
                grad.len(),
                self.dim()
            )));
        }
        let (v, mass) = self.raw(image);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let e: Vec<f64> = v.iter().map(|x| x / norm).collect();
        let eg: f64 = e.iter().zip(grad).map(|(a, b)| a * b).sum();
        let gv: Vec<f64> = e
            .iter()
            .zip(grad)
            .map(|(e, g)| (g - e * eg) / norm)
            .collect();
        let mut out = image.zero_grad();
        for (i, o) in out.iter_mut().enumerate() {
            let w = image.coverage.as_ref().map_or(1.0, |c| c[i]);
            if w <= 0.0 {
                continue;
            }
            let t = self.block_of(image, i);
            for k in 0..3 {
                o[k] = w / mass[t] * gv[4 * t + k];
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn longest_match_wins_and_unknown_is_gray() {
        let m = MockOracleBackend::with_colors([
            ("chair", [1.0, 0.0, 0.0]),
            ("red chair", [0.0, 1.0, 0.0]),
        ]);
        assert_eq!(m.lookup("A Red Chair"), vec![[0.0, 1.0, 0.0]]);
        assert_eq!(m.lookup("front view of a chair"), vec![[1.0, 0.0, 0.0]]);
        assert_eq!(m.lookup("a table"), vec![GRAY]);
    }

    #[test]
    fn single_block_embeds_mean_color() {
        let m = MockOracleBackend::with_colors([("x", [0.0, 0.0, 1.0])]);
        let img = Raster::from_fn(2, 1, |x, _| {
            if x == 0 {
                [1.0, 0.0, 0.0]
            } else {
                [0.0, 1.0, 0.0]
            }
        });
        let e = m.embed_image(&img).unwrap();
        let n = (0.5f64 * 0.5 * 2.0 + 1.0).sqrt();
        for (a, b) in e.iter().zip([0.5 / n, 0.5 / n, 0.0, 1.0 / n]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn background_pixels_are_ignored() {
        let m = MockOracleBackend::with_colors([]);
        let mut img = Raster::from_fn(2, 1, |x, _| {
            if x == 0 {
                [1.0, 0.0, 0.0]
            } else {
                [0.0, 1.0, 0.0]
            }
        });
        img.coverage = Some(vec![1.0, 0.0]);
        let red = m
            .embed_image(&Raster::filled(1, 1, [1.0, 0.0, 0.0]))
            .unwrap();
        assert_eq!(m.embed_image(&img).unwrap(), red);
    }

    #[test]
    fn tags_select_blocks() {
        let table: MockTable = [(
            "a chair".to_string(),
            MockColors::PerTag(vec![[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]),
        )]
        .into_iter()
        .collect();
        let m = MockOracleBackend::new(&table).unwrap();
        assert_eq!(m.dim(), 8);
        let mut img = Raster::from_fn(2, 1, |x, _| {
            if x == 0 {
                [1.0, 0.0, 0.0]
            } else {
                [0.0, 0.0, 1.0]
            }
        });
        img.tags = Some(vec![0, 1]);
        let a = m.embed_image(&img).unwrap();
        let b = m.embed_text("front view of a chair").unwrap();
        let cos: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((cos - 1.0).abs() < 1e-15);
    }

    #[test]
    fn vjp_matches_finite_difference() {
        let m = MockOracleBackend::with_colors([]);
        let mut img = Raster::from_fn(3, 2, |x, y| {
            [0.1 + 0.2 * x as f64, 0.3 + 0.1 * y as f64, 0.6]
        });
        img.coverage = Some(vec![1.0, 1.0, 0.0, 1.0, 0.5, 1.0]);
        let g = [0.3, -0.7, 0.2, 0.5];
        let vjp = m.image_vjp(&img, &g).unwrap();
        let f = |im: &Raster| -> f64 {
            m.embed_image(im)
                .unwrap()
                .iter()
                .zip(&g)
                .map(|(a, b)| a * b)
                .sum()
        };
        let eps = 1e-6;
        for p in 0..6 {
            for k in 0..3 {
                let mut a = img.clone();
                a.pixels[p][k] += eps;
                let mut b = img.clone();
                b.pixels[p][k] -= eps;
                let fd = (f(&a) - f(&b)) / (2.0 * eps);
                assert!((fd - vjp[p][k]).abs() < 1e-8, "{fd} vs {}", vjp[p][k]);
            }
        }
    }

    #[test]
    fn table_parses_from_json() {
        let table: MockTable =
            serde_json::from_str(r#"{"a chair": [[1,0,0],[0,0,1]], "a bed": [0,1,0]}"#).unwrap();
        let m = MockOracleBackend::new(&table).unwrap();
        assert_eq!(m.blocks(), 2);
        assert_eq!(m.lookup("a bed"), vec![[0.0, 1.0, 0.0]; 2]);
        let bad: MockTable = serde_json::from_str(r#"{"x": [2,0,0]}"#).unwrap();
        assert!(MockOracleBackend::new(&bad).is_err());
    }
}
