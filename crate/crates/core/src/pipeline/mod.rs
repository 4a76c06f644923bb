//! Dataset ingestion, synthetic data, metrics, and the orchestration layer
//! behind the command-line interface.

mod formats;
mod metrics;
mod synthetic;

pub use formats::{
    load_camera, load_estimates, load_joints, save_camera, save_estimates, save_joints,
    write_trace_csv, Dataset, EstimateRecord, FrameRecord, GroundTruth, RigidTruth, ScenarioKind,
    SoftTruth,
};
pub use metrics::{
    centerline_error, pck, pose_errors, FrameMetrics, MetricReport, CENTERLINE_SAMPLES,
};
pub use synthetic::{
    apply_flip_noise, synth_generate, RigidScenario, SoftScenario, SyntheticConfig,
    TRUTH_CENTERLINE_SAMPLES,
};

use std::str::FromStr;

use crate::geometry::BezierState;
use crate::imageproc::{
    distance_map, extract_keypoints, order_centerline, skeletonize, ImageProcError, MaskImage,
};
use crate::kinematics::{KinematicChain, KinematicsError, PoseSE3, VertexOffsets};
use crate::losses::LossWeights;
use crate::optimizer::{OptimError, RigidPoseProblem, SoftShapeProblem};
use crate::renderer::{CameraModel, RenderError};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("i/o: {0}")]
    Io(String),
    #[error("parse: {0}")]
    Parse(String),
    #[error("validation: {0}")]
    Validation(String),
    #[error(transparent)]
    ImageProc(#[from] ImageProcError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Optim(#[from] OptimError),
}

impl PipelineError {
    /// Process exit code class: 2 for data/validation problems, 3 for
    /// numerical aborts during estimation.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Optim(
                OptimError::NumericalAbort { .. }
                | OptimError::Diverged { .. }
                | OptimError::InitRejected { .. },
            ) => 3,
            _ => 2,
        }
    }
}

/// Image border the arm is mounted on; the centerline is oriented to start
/// at the endpoint nearest this side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageSide {
    Left,
    Right,
    Top,
    Bottom,
}

impl ImageSide {
    pub fn hint_point(&self, cam: &CameraModel) -> [f64; 2] {
        let w = cam.width as f64;
        let h = cam.height as f64;
        match self {
            ImageSide::Left => [0.0, h / 2.0],
            ImageSide::Right => [w, h / 2.0],
            ImageSide::Top => [w / 2.0, 0.0],
            ImageSide::Bottom => [w / 2.0, h],
        }
    }
}

impl FromStr for ImageSide {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "left" => Ok(ImageSide::Left),
            "right" => Ok(ImageSide::Right),
            "top" => Ok(ImageSide::Top),
            "bottom" => Ok(ImageSide::Bottom),
            other => Err(format!("unknown image side {other:?} (left|right|top|bottom)")),
        }
    }
}

/// Preprocessing and problem assembly settings for shape reconstruction.
#[derive(Debug, Clone)]
pub struct ShapeSetup {
    pub keypoint_count: usize,
    pub base_side: ImageSide,
    pub n_s: usize,
    pub n_phi: usize,
    pub weights: LossWeights,
    pub fixed_base: Option<[f64; 3]>,
}

impl Default for ShapeSetup {
    fn default() -> Self {
        ShapeSetup {
            keypoint_count: 4,
            base_side: ImageSide::Left,
            n_s: 100,
            n_phi: 40,
            weights: LossWeights::shape_defaults(),
            fixed_base: None,
        }
    }
}

/// Build a soft-shape problem from a reference mask: skeletonize, order the
/// centerline from the configured base side, extract keypoints at uniform
/// arc fractions, and attach the given (or placeholder) initialization.
pub fn build_shape_problem(
    mask: MaskImage,
    cam: CameraModel,
    setup: &ShapeSetup,
    init: Option<BezierState>,
) -> Result<SoftShapeProblem, PipelineError> {
    if mask.is_empty_mask() {
        return Err(ImageProcError::EmptyMask.into());
    }
    let keypoints = if setup.weights.keypoint > 0.0 && setup.keypoint_count > 0 {
        let skeleton = skeletonize(&mask)?;
        let centerline = order_centerline(&skeleton, setup.base_side.hint_point(&cam))?;
        extract_keypoints(&centerline, setup.keypoint_count)?
    } else {
        Vec::new()
    };
    let init = init.unwrap_or_else(|| placeholder_state(&cam, setup.n_s));
    Ok(SoftShapeProblem {
        init,
        camera: cam,
        reference: mask,
        keypoints,
        weights: setup.weights,
        fixed_base: setup.fixed_base,
        n_s: setup.n_s,
        n_phi: setup.n_phi,
    })
}

/// Straight placeholder curve on the optical axis; callers that want a real
/// starting point replace it via `optimizer::random_init`.
fn placeholder_state(cam: &CameraModel, n_s: usize) -> BezierState {
    let z = 1000.0 * 0.5 / cam.fx.max(1.0) * cam.fx.max(1.0) / 1000.0; // 0.5 world units
    let z = z.max(0.5);
    BezierState {
        control_points: [[-0.05, 0.0, z], [0.0, 0.01, z], [0.05, 0.0, z]],
        radius_profile: vec![0.01; n_s],
    }
}

/// Build a rigid-pose problem from a reference mask, chain, and joints,
/// computing the scaled distance map.
pub fn build_pose_problem(
    mask: MaskImage,
    cam: CameraModel,
    chain: KinematicChain,
    joints: Vec<f64>,
    gamma: f64,
    weights: LossWeights,
    init: Option<PoseSE3>,
) -> Result<RigidPoseProblem, PipelineError> {
    if mask.is_empty_mask() {
        return Err(ImageProcError::EmptyMask.into());
    }
    let dm = distance_map(&mask, gamma)?;
    let init_offsets = VertexOffsets::zeros(&chain)?;
    Ok(RigidPoseProblem {
        chain,
        joints,
        init_pose: init.unwrap_or_else(|| PoseSE3::new([0.0; 3], [0.0, 0.0, 1.5])),
        init_offsets,
        camera: cam,
        reference: mask,
        distance_map: dm,
        weights,
    })
}
