//! Differentiable perspective projection and soft silhouette rasterization.

mod camera;
mod raster;
mod reference;
mod silhouette;

pub use camera::{project_var, CameraModel, Z_NEAR};
pub use raster::{
    render_silhouette, render_silhouette_plain, screen_distance, DEFAULT_SIGMA, HARD_SIGMA,
    LOGIT_CUT,
};
pub use reference::render_hard;
pub use silhouette::SilhouetteImage;

#[derive(Debug, thiserror::Error)]
pub enum RenderError {
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("sigma must be positive, got {0}")]
    InvalidSigma(f64),
    #[error("point behind near plane (z = {z})")]
    BehindCamera { z: f64 },
    #[error("image i/o: {0}")]
    Io(String),
}
