//! Cameras, the differentiable rasterizer, view augmentations and
//! view-conditioned prompts.

pub mod augment;
pub mod camera;
pub mod prompt;
pub mod rasterizer;
pub mod views;

pub use augment::{augment_view_crop, composite_background, composite_backward, ViewCrop};
pub use camera::{sample_object_camera, CameraPose, ObjectCameraConfig, ObjectView, ViewTag};
pub use prompt::directional_prompt;
pub use rasterizer::{
    rasterize, rasterize_vertex_colors, BackgroundMode, Fragment, Paint, RenderOutput,
    RenderSettings, Shading, Surface,
};
pub use views::scene_camera_set;
