//! Random in-frustum initialization with rejection on invisible renders.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{build_tube_mesh_plain, BezierState};
use crate::kinematics::{assemble_robot_mesh_plain, PoseSE3, VertexOffsets};
use crate::renderer::render_silhouette_plain;

use super::{EstimationProblem, OptimError};

/// Sampling ranges for [`random_init`]; depths are in world units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitConfig {
    /// Depth range for soft-shape control points.
    pub soft_depth: [f64; 2],
    /// Depth range for the rigid base origin.
    pub rigid_depth: [f64; 2],
    /// Constant initial cross-section radius for soft shapes.
    pub default_radius: f64,
    /// Fraction of image pixels the initial render must cover.
    pub min_positive_fraction: f64,
    /// Rejection-sampling attempt limit.
    pub max_attempts: usize,
    /// Margin (fraction of image size) kept from the borders when sampling
    /// projected positions.
    pub border_margin: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig {
            soft_depth: [0.2, 2.0],
            rigid_depth: [0.5, 3.0],
            default_radius: 0.01,
            min_positive_fraction: 0.01,
            max_attempts: 100,
            border_margin: 0.18,
        }
    }
}

/// Draw a fresh in-frustum initialization for the problem's state
/// parameters (vertex parameters reset to their neutral values), rejecting
/// candidates whose render covers less than the configured pixel fraction.
/// Deterministic for a fixed seed.
pub fn random_init(
    problem: &EstimationProblem,
    init: &InitConfig,
    sigma: f64,
    seed: u64,
) -> Result<EstimationProblem, OptimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match problem {
        EstimationProblem::SoftShape(p) => {
            let cam = p.camera;
            let margin_u = cam.width as f64 * init.border_margin;
            let margin_v = cam.height as f64 * init.border_margin;
            for _ in 0..init.max_attempts {
                let sample_point = |rng: &mut ChaCha8Rng| {
                    let z = rng.gen_range(init.soft_depth[0]..init.soft_depth[1]);
                    let u = rng.gen_range(margin_u..cam.width as f64 - margin_u);
                    let v = rng.gen_range(margin_v..cam.height as f64 - margin_v);
                    [(u - cam.cx) / cam.fx * z, (v - cam.cy) / cam.fy * z, z]
                };
                let c0 = sample_point(&mut rng);
                let c2 = sample_point(&mut rng);
                let mid = [
                    (c0[0] + c2[0]) / 2.0,
                    (c0[1] + c2[1]) / 2.0,
                    (c0[2] + c2[2]) / 2.0,
                ];
                let chord = ((c2[0] - c0[0]).powi(2)
                    + (c2[1] - c0[1]).powi(2)
                    + (c2[2] - c0[2]).powi(2))
                .sqrt();
                let bend = 0.25 * chord;
                let c1 = [
                    mid[0] + rng.gen_range(-bend..bend),
                    mid[1] + rng.gen_range(-bend..bend),
                    mid[2] + rng.gen_range(-bend..bend),
                ];
                let state = BezierState {
                    control_points: [c0, c1, c2],
                    radius_profile: vec![init.default_radius; p.n_s],
                };
                let mesh = build_tube_mesh_plain(&state, p.n_s, p.n_phi);
                let img = render_silhouette_plain(&mesh, &cam, sigma)?;
                let covered = img.count_above(0.5) as f64;
                if covered >= init.min_positive_fraction * (cam.width * cam.height) as f64 {
                    let mut out = p.clone();
                    out.init = state;
                    return Ok(EstimationProblem::SoftShape(out));
                }
            }
            Err(OptimError::InitRejected { attempts: init.max_attempts })
        }
        EstimationProblem::RigidPose(p) => {
            let cam = p.camera;
            let margin_u = cam.width as f64 * init.border_margin;
            let margin_v = cam.height as f64 * init.border_margin;
            let zero_offsets = VertexOffsets::zeros(&p.chain)?;
            for _ in 0..init.max_attempts {
                let z = rng.gen_range(init.rigid_depth[0]..init.rigid_depth[1]);
                let u = rng.gen_range(margin_u..cam.width as f64 - margin_u);
                let v = rng.gen_range(margin_v..cam.height as f64 - margin_v);
                let translation = [(u - cam.cx) / cam.fx * z, (v - cam.cy) / cam.fy * z, z];
                let rotation = uniform_axis_angle(&mut rng);
                let pose = PoseSE3 { rotation, translation };
                let mesh = assemble_robot_mesh_plain(&p.chain, &p.joints, &zero_offsets, &pose)?;
                let img = render_silhouette_plain(&mesh, &cam, sigma)?;
                let covered = img.count_above(0.5) as f64;
                if covered >= init.min_positive_fraction * (cam.width * cam.height) as f64 {
                    let mut out = p.clone();
                    out.init_pose = pose;
                    out.init_offsets = zero_offsets;
                    return Ok(EstimationProblem::RigidPose(out));
                }
            }
            Err(OptimError::InitRejected { attempts: init.max_attempts })
        }
    }
}

/// Uniform rotation via a normalized Gaussian quaternion, returned as
/// axis-angle.
fn uniform_axis_angle(rng: &mut ChaCha8Rng) -> [f64; 3] {
    // Box-Muller pairs; ChaCha keeps this reproducible across platforms.
    let mut normal = || {
        let u1: f64 = rng.gen_range(1e-12..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    let q = [normal(), normal(), normal(), normal()];
    let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    let (w, x, y, z) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
    let (w, x, y, z) = if w < 0.0 { (-w, -x, -y, -z) } else { (w, x, y, z) };
    let half = w.clamp(-1.0, 1.0).acos();
    let s = (1.0 - w * w).sqrt();
    if s < 1e-9 {
        return [0.0, 0.0, 0.0];
    }
    let angle = 2.0 * half;
    [x / s * angle, y / s * angle, z / s * angle]
}
