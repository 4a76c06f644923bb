//! Evaluation metrics: centerline errors, end-effector errors, PCK curves.

use serde::{Deserialize, Serialize};

use crate::geometry::BezierState;
use crate::kinematics::{rotation_angle_between, KinematicChain, PoseSE3};
use crate::renderer::CameraModel;

use super::PipelineError;

/// Default number of evaluation samples along the estimated centerline.
pub const CENTERLINE_SAMPLES: usize = 100;

/// Mean 2D (pixels) and 3D (millimeters) centerline errors of an estimated
/// curve against dense ground-truth samples, matched by nearest point.
pub fn centerline_error(
    est: &BezierState,
    gt_2d: &[[f64; 2]],
    gt_3d: &[[f64; 3]],
    cam: &CameraModel,
    n_pts: usize,
    world_scale_mm: f64,
) -> Result<(f64, f64), PipelineError> {
    if gt_2d.is_empty() || gt_3d.is_empty() {
        return Err(PipelineError::Validation("ground-truth centerline is empty".into()));
    }
    if n_pts < 2 {
        return Err(PipelineError::Validation("need at least 2 centerline samples".into()));
    }
    let mut sum_2d = 0.0;
    let mut sum_3d = 0.0;
    for i in 0..n_pts {
        let s = i as f64 / (n_pts - 1) as f64;
        let p = est.point(s);
        let uv = cam
            .project(p)
            .ok_or_else(|| PipelineError::Validation("estimated point behind camera".into()))?;
        let best_2d = gt_2d
            .iter()
            .map(|g| ((uv[0] - g[0]).powi(2) + (uv[1] - g[1]).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min);
        let best_3d = gt_3d
            .iter()
            .map(|g| {
                ((p[0] - g[0]).powi(2) + (p[1] - g[1]).powi(2) + (p[2] - g[2]).powi(2)).sqrt()
            })
            .fold(f64::INFINITY, f64::min);
        sum_2d += best_2d;
        sum_3d += best_3d;
    }
    Ok((sum_2d / n_pts as f64, sum_3d / n_pts as f64 * world_scale_mm))
}

/// End-effector position error (world units) and rotation error (degrees)
/// between an estimated and a true base pose over the same chain and joints.
pub fn pose_errors(
    chain: &KinematicChain,
    joints: &[f64],
    est: &PoseSE3,
    truth: &PoseSE3,
) -> Result<(f64, f64), PipelineError> {
    let ee = chain.end_effector_base(joints).map_err(|e| PipelineError::Validation(e.to_string()))?;
    let a = est.apply(ee);
    let b = truth.apply(ee);
    let ee_err = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
    let rot_rad = rotation_angle_between(&est.rotation_matrix(), &truth.rotation_matrix());
    Ok((ee_err, rot_rad.to_degrees()))
}

/// Percentage of correct keypoints: fraction of errors at or below each
/// threshold. Thresholds must be positive and sorted ascending.
pub fn pck(errors: &[f64], thresholds: &[f64]) -> Result<Vec<(f64, f64)>, PipelineError> {
    if errors.is_empty() {
        return Err(PipelineError::Validation("PCK of an empty error list".into()));
    }
    if thresholds.iter().any(|t| *t <= 0.0) || thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(PipelineError::Validation(
            "PCK thresholds must be positive and sorted".into(),
        ));
    }
    Ok(thresholds
        .iter()
        .map(|&t| {
            let hits = errors.iter().filter(|&&e| e <= t).count();
            (t, hits as f64 / errors.len() as f64)
        })
        .collect())
}

/// Per-frame errors plus aggregates and PCK curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub frames: Vec<FrameMetrics>,
    pub mean_2d_px: Option<f64>,
    pub std_2d_px: Option<f64>,
    pub mean_3d_mm: Option<f64>,
    pub std_3d_mm: Option<f64>,
    pub pck_2d: Vec<(f64, f64)>,
    pub pck_3d: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub id: usize,
    pub e2d_px: Option<f64>,
    pub e3d_mm: Option<f64>,
    pub rot_deg: Option<f64>,
}

fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
    Some((mean, var.sqrt()))
}

impl MetricReport {
    pub fn from_frames(
        frames: Vec<FrameMetrics>,
        pck2d_thresholds: &[f64],
        pck3d_thresholds: &[f64],
    ) -> Result<Self, PipelineError> {
        let e2: Vec<f64> = frames.iter().filter_map(|f| f.e2d_px).collect();
        let e3: Vec<f64> = frames.iter().filter_map(|f| f.e3d_mm).collect();
        let (mean_2d_px, std_2d_px) = mean_std(&e2).map(|(m, s)| (Some(m), Some(s))).unwrap_or((None, None));
        let (mean_3d_mm, std_3d_mm) = mean_std(&e3).map(|(m, s)| (Some(m), Some(s))).unwrap_or((None, None));
        let pck_2d = if e2.is_empty() { Vec::new() } else { pck(&e2, pck2d_thresholds)? };
        let pck_3d = if e3.is_empty() { Vec::new() } else { pck(&e3, pck3d_thresholds)? };
        Ok(MetricReport { frames, mean_2d_px, std_2d_px, mean_3d_mm, std_3d_mm, pck_2d, pck_3d })
    }

    /// Per-frame CSV with a trailing aggregate row.
    pub fn to_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        let mut text = String::from("frame,e2d_px,e3d_mm,rot_deg\n");
        for f in &self.frames {
            text.push_str(&format!(
                "{},{},{},{}\n",
                f.id,
                fmt(f.e2d_px),
                fmt(f.e3d_mm),
                fmt(f.rot_deg)
            ));
        }
        text.push_str(&format!(
            "mean,{},{},\nstd,{},{},\n",
            fmt(self.mean_2d_px),
            fmt(self.mean_3d_mm),
            fmt(self.std_2d_px),
            fmt(self.std_3d_mm)
        ));
        text
    }

    /// PCK CSV: `space,threshold,fraction` rows.
    pub fn pck_csv(&self) -> String {
        let mut text = String::from("space,threshold,fraction\n");
        for (t, f) in &self.pck_2d {
            text.push_str(&format!("2d,{t},{f}\n"));
        }
        for (t, f) in &self.pck_3d {
            text.push_str(&format!("3d,{t},{f}\n"));
        }
        text
    }
}
