//! Scene stylization from a target image and a style text.
//!
//! The pipeline retrieves structure textures, discovers texture-parts on each
//! object, optimizes one base color per part across the scene, and trains a
//! per-object neural style field for detail. Every stage is driven through an
//! embedding backend, so the whole pipeline runs against the
//! deterministic mock as well as a real encoder.

// Index loops mirror the math; negated comparisons also reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod color;
pub mod config;
pub mod error;
pub mod geometry;
pub mod io;
pub mod losses;
pub mod mesh;
pub mod optim;
mod par;
pub mod partdiscovery;
pub mod pipeline;
pub mod raster;
pub mod render;
pub mod scene;
pub mod stylize;
pub mod synthetic;

pub use error::{Error, Result};
pub use mesh::{TriangleMesh, Vec3};
pub use raster::Raster;
