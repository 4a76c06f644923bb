//! Rigid manipulator model: DH chain, primitive link meshes with learnable
//! vertex offsets, and the 6-DOF camera-from-base pose under estimation.

mod assemble;
mod chain;
mod primitives;
mod se3;

pub use assemble::{apply_offsets, assemble_robot_mesh, assemble_robot_mesh_plain, RigidVars};
pub use chain::{AttachTransform, DHLink, DHParams, KinematicChain, VertexOffsets};
pub use primitives::{primitive_mesh, PrimitiveShape};
pub use se3::{
    mat4_apply, mat4_identity, mat4_mul, rodrigues, rodrigues_var, rotation_angle_between,
    rotation_part, Mat4, PoseSE3, PoseVars,
};

/// Errors from chain construction, offsets, and the description format.
#[derive(Debug, thiserror::Error)]
pub enum KinematicsError {
    #[error("joint vector length {got} does not match link count {expected}")]
    JointCountMismatch { got: usize, expected: usize },
    #[error("offset set for link {link} has {got} entries, expected {expected}")]
    OffsetCardinality { link: usize, got: usize, expected: usize },
    #[error("primitive dimension must be positive: {0}")]
    NonPositiveDimension(String),
    #[error("robot description: {0}")]
    Description(String),
}
