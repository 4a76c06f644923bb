//! On-disk formats: camera files, joints files, dataset manifests, estimate
//! records, loss-trace CSV, and metric report CSV.
//!
//! Camera file (TOML, strict keys):
//! ```toml
//! fx = 300.0
//! fy = 300.0
//! cx = 160.0
//! cy = 120.0
//! width = 320
//! height = 240
//! ```
//!
//! Joints file: one frame per line, whitespace-separated joint angles in
//! radians. Dataset manifests and estimate records are JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::BezierState;
use crate::kinematics::PoseSE3;
use crate::optimizer::{Solution, TraceRow};
use crate::renderer::CameraModel;

use super::PipelineError;

pub fn load_camera(path: &Path) -> Result<CameraModel, PipelineError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
    let cam: CameraModel = toml::from_str(&text)
        .map_err(|e| PipelineError::Parse(format!("{}: {e}", path.display())))?;
    cam.validate().map_err(|e| PipelineError::Validation(e.to_string()))?;
    Ok(cam)
}

pub fn save_camera(path: &Path, cam: &CameraModel) -> Result<(), PipelineError> {
    let text = toml::to_string_pretty(cam).expect("camera serialization cannot fail");
    std::fs::write(path, text).map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))
}

/// Parse a joints file: one frame per line, radians.
pub fn load_joints(path: &Path) -> Result<Vec<Vec<f64>>, PipelineError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
    let mut frames = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut row = Vec::new();
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| {
                PipelineError::Parse(format!(
                    "{}:{}: invalid joint value {tok:?}",
                    path.display(),
                    ln + 1
                ))
            })?;
            row.push(v);
        }
        frames.push(row);
    }
    if frames.is_empty() {
        return Err(PipelineError::Validation(format!("{}: no joint frames", path.display())));
    }
    Ok(frames)
}

pub fn save_joints(path: &Path, frames: &[Vec<f64>]) -> Result<(), PipelineError> {
    let mut text = String::new();
    for row in frames {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        text.push_str(&cells.join(" "));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Soft,
    Rigid,
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScenarioKind::Soft => write!(f, "soft"),
            ScenarioKind::Rigid => write!(f, "rigid"),
        }
    }
}

/// Ground truth attached to a synthetic frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroundTruth {
    Soft(SoftTruth),
    Rigid(RigidTruth),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftTruth {
    pub state: BezierState,
    /// Dense centerline samples for nearest-point metric matching.
    pub centerline_3d: Vec<[f64; 3]>,
    pub centerline_2d: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidTruth {
    pub pose: PoseSE3,
    /// End effector in the camera frame.
    pub ee_camera: [f64; 3],
    pub ee_pixel: [f64; 2],
}

/// One dataset frame: mask path (relative to the manifest), optional joint
/// readings, optional ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub id: usize,
    pub mask: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joints: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<GroundTruth>,
}

/// Dataset manifest (`dataset.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub scenario: ScenarioKind,
    /// Millimeters per world unit (1.0 means the world is in millimeters).
    pub world_scale_mm: f64,
    pub camera: CameraModel,
    pub frames: Vec<FrameRecord>,
}

impl Dataset {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| PipelineError::Parse(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        let text = serde_json::to_string_pretty(self).expect("dataset serialization cannot fail");
        std::fs::write(path, text)
            .map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))
    }
}

/// Result of estimating one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub id: usize,
    pub solution: Solution,
    pub best_loss: f64,
    pub best_iteration: Option<usize>,
    pub restart_used: usize,
}

pub fn load_estimates(path: &Path) -> Result<Vec<EstimateRecord>, PipelineError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| PipelineError::Parse(format!("{}: {e}", path.display())))
}

pub fn save_estimates(path: &Path, records: &[EstimateRecord]) -> Result<(), PipelineError> {
    let text = serde_json::to_string_pretty(records).expect("estimate serialization cannot fail");
    std::fs::write(path, text).map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))
}

/// Loss-trace CSV. The guide column is the keypoint term for soft problems
/// and the distance term for rigid ones. Wall time is written as 0 unless
/// `timing` is set, keeping default outputs byte-reproducible.
pub fn write_trace_csv(
    path: &Path,
    rows: &[TraceRow],
    scenario: ScenarioKind,
    timing: bool,
) -> Result<(), PipelineError> {
    let guide = match scenario {
        ScenarioKind::Soft => "L_keypoint",
        ScenarioKind::Rigid => "L_dist",
    };
    let mut text = format!("iteration,L,L_mask,{guide},L_app,wall_ms\n");
    for r in rows {
        let wall = if timing { format!("{:.3}", r.wall_ms) } else { "0".to_string() };
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.iteration, r.total, r.mask, r.guide, r.appearance, wall
        ));
    }
    std::fs::write(path, text).map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))
}
