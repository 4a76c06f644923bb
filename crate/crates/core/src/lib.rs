//! Robot state estimation from single binary mask images by differentiable
//! silhouette rendering.
//!
//! The library estimates two kinds of robot state by rendering a candidate
//! mesh as a soft silhouette and descending the image loss:
//!
//! - **Soft continuum arm shape**: three quadratic Bézier control points plus
//!   a per-cross-section radius profile, swept into a tubular mesh.
//! - **Rigid manipulator base pose**: a 6-DOF camera-to-base transform over a
//!   DH chain of primitive link meshes with learnable vertex offsets.
//!
//! Module map:
//!
//! - [`autodiff`] — tape-based reverse-mode differentiation over dense arrays
//! - [`geometry`] — Bézier curves, Frenet frames, tubular surface meshes
//! - [`kinematics`] — DH chains, primitive link meshes, SE(3) poses
//! - [`renderer`] — perspective projection and soft silhouette rasterization
//! - [`imageproc`] — mask segmentation, skeletonization, distance maps
//! - [`losses`] — mask / keypoint / distance / appearance objectives
//! - [`optimizer`] — the estimation loop: render, compare, descend
//! - [`pipeline`] — file formats, synthetic data, metrics, orchestration

pub mod autodiff;
pub mod geometry;
pub mod imageproc;
pub mod kinematics;
pub mod losses;
pub mod optimizer;
pub mod pipeline;
pub mod renderer;

pub use autodiff::{grad_check, Tape, Value, Var};
pub use geometry::{BezierState, TriangleMesh};




