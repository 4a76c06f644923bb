//! Differentiable tubular surface mesh of the soft continuum arm.
//!
//! A quadratic Bézier curve models the arm centerline; circular cross
//! sections of interpolated radius are swept along its Frenet–Serret frames
//! and triangulated into a watertight tube with capped ends.

mod bezier;
mod mesh;
mod tube;

pub use bezier::{
    bezier_derivatives, bezier_point, frenet_frame, BezierState, BezierVars, FrenetFrame,
    FRAME_DEGENERACY_TOL,
};
pub use mesh::{TapeMesh, TriangleMesh};
pub use tube::{build_tube_mesh, build_tube_mesh_plain, radius_at, tube_faces, tube_surface_point};
