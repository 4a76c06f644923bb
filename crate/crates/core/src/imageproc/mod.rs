//! Non-differentiable preprocessing of reference images: segmentation to a
//! binary robot mask, skeletonization, centerline keypoint extraction, and
//! distance maps.

mod centerline;
mod distmap;
mod mask;
mod segment;
mod skeleton;

pub use centerline::{extract_keypoints, order_centerline, Centerline};
pub use distmap::{distance_map, DistanceMap};
pub use mask::MaskImage;
pub use segment::{color_segment, fill_holes, largest_component, rgb_to_hsv, HsvRange};
pub use skeleton::skeletonize;

#[derive(Debug, thiserror::Error)]
pub enum ImageProcError {
    #[error("mask has no positive pixels")]
    EmptyMask,
    #[error("skeleton is cyclic: no degree-1 endpoints to order from")]
    CyclicSkeleton,
    #[error("centerline too short: {points} pixels, need at least {needed}")]
    DegenerateCenterline { points: usize, needed: usize },
    #[error("invalid range: {0}")]
    InvalidRange(String),
    #[error("image i/o: {0}")]
    Io(String),
}
