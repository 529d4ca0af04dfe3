//! Histogram and embedding losses, and the embedding backends.

mod backend;
mod clip;
mod histogram;
mod mock;
mod process;

pub use backend::{BackendConfig, BackendKind, EmbeddingBackend, COMMAND_ENV, WEIGHTS_ENV};
pub use clip::{
    clip_loss, clip_loss_grad, clip_scene_loss, combine_scene_loss, cosine_loss, cosine_loss_grad,
};
pub use histogram::{
    bin_centers, hist_loss, hist_loss_grad, histogram_distance, soft_color_histogram,
    soft_color_histogram_vjp, ColorHistogram, BINS, BOUNDARY, TAU,
};
pub use mock::{MockColors, MockOracleBackend, MockTable, GRAY};
pub use process::ProcessBackend;
