//! Embedding-similarity losses.

use super::backend::EmbeddingBackend;
use crate::error::{Error, Result};
use crate::raster::{ImageGrad, Raster};

const MIN_NORM: f64 = 1e-12;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `1 − cos(a, b)`, in [0, 2].
pub fn cosine_loss(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(format!(
            "embeddings of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (norm(a), norm(b));
    if na < MIN_NORM || nb < MIN_NORM {
        return Err(Error::ZeroVector);
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok(1.0 - dot / (na * nb))
}

/// Loss and its gradient with respect to `a`.
pub fn cosine_loss_grad(a: &[f64], b: &[f64]) -> Result<(f64, Vec<f64>)> {
    let loss = cosine_loss(a, b)?;
    let (na, nb) = (norm(a), norm(b));
    let cos = 1.0 - loss;
    let grad = a
        .iter()
        .zip(b)
        .map(|(x, y)| -(y / (na * nb) - cos * x / (na * na)))
        .collect();
    Ok((loss, grad))
}

pub fn clip_loss(image: &Raster, text: &str, backend: &dyn EmbeddingBackend) -> Result<f64> {
    let e_img = backend.embed_image(image)?;
    let e_txt = backend.embed_text(text)?;
    cosine_loss(&e_img, &e_txt)
}

/// [`clip_loss`] and its gradient with respect to the image pixels.
pub fn clip_loss_grad(
    image: &Raster,
    text: &str,
    backend: &dyn EmbeddingBackend,
) -> Result<(f64, ImageGrad)> {
    let e_img = backend.embed_image(image)?;
    let e_txt = backend.embed_text(text)?;
    let (loss, g) = cosine_loss_grad(&e_img, &e_txt)?;
    Ok((loss, backend.image_vjp(image, &g)?))
}

/// `λ2 · Σ_i mean(object_losses[i]) + λ3 · scene_loss`.
pub fn combine_scene_loss(
    object_losses: &[Vec<f64>],
    scene_loss: f64,
    lambda2: f64,
    lambda3: f64,
) -> f64 {
    let objects: f64 = object_losses
        .iter()
        .filter(|views| !views.is_empty())
        .map(|views| views.iter().sum::<f64>() / views.len() as f64)
        .sum();
    lambda2 * objects + lambda3 * scene_loss
}

/// Scene-level embedding loss over per-object view sets and one scene render.
/// Terms with zero weight are not evaluated.
pub fn clip_scene_loss(
    object_renders: &[Vec<Raster>],
    object_prompts: &[String],
    scene_render: &Raster,
    scene_prompt: &str,
    lambda2: f64,
    lambda3: f64,
    backend: &dyn EmbeddingBackend,
) -> Result<f64> {
    if object_renders.len() != object_prompts.len() {
        return Err(Error::LengthMismatch(format!(
            "{} object render lists but {} prompts",
            object_renders.len(),
            object_prompts.len()
        )));
    }
    let mut object_losses = Vec::with_capacity(object_renders.len());
    if lambda2 != 0.0 {
        for (views, prompt) in object_renders.iter().zip(object_prompts) {
            let losses = views
                .iter()
                .map(|v| clip_loss(v, prompt, backend))
                .collect::<Result<Vec<_>>>()?;
            object_losses.push(losses);
        }
    }
    let scene = if lambda3 != 0.0 {
        clip_loss(scene_render, scene_prompt, backend)?
    } else {
        0.0
    };
    Ok(combine_scene_loss(&object_losses, scene, lambda2, lambda3))
}
