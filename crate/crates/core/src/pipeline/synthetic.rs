//! Self-closing synthetic scenes: known states rendered to reference masks
//! with recorded ground truth.
//!
//! Two standard scenarios mirror the physical setups. The soft arm lives in
//! a millimeter world (a ~190 mm tapered tube half a meter from the camera);
//! the manipulator lives in a meter world (a bent three-link cylinder chain
//! about 1.5 m out). Masks are hard-thresholded near-hard soft renders, so
//! the rasterizer under test also produces the references; the brute-force
//! hard rasterizer validates that independently in the test suites.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::{build_tube_mesh_plain, BezierState};
use crate::imageproc::MaskImage;
use crate::kinematics::{
    assemble_robot_mesh_plain, AttachTransform, DHLink, DHParams, KinematicChain, PoseSE3,
    PrimitiveShape, VertexOffsets,
};
use crate::renderer::{render_silhouette_plain, CameraModel, HARD_SIGMA};

use super::formats::{
    Dataset, FrameRecord, GroundTruth, RigidTruth, ScenarioKind, SoftTruth,
};
use super::PipelineError;

/// Number of dense ground-truth centerline samples; one more than twice the
/// evaluation sample count so evaluation parameters land exactly on truth
/// samples.
pub const TRUTH_CENTERLINE_SAMPLES: usize = 199;

/// Soft continuum scene in millimeters.
#[derive(Debug, Clone)]
pub struct SoftScenario {
    pub camera: CameraModel,
    pub n_s: usize,
    pub n_phi: usize,
    pub world_scale_mm: f64,
}

impl SoftScenario {
    pub fn standard() -> Self {
        SoftScenario {
            camera: CameraModel {
                fx: 300.0,
                fy: 300.0,
                cx: 160.0,
                cy: 120.0,
                width: 320,
                height: 240,
            },
            n_s: 100,
            n_phi: 40,
            world_scale_mm: 1.0,
        }
    }

    /// Nominal arm: ~190 mm long, tapered 10 mm to 6 mm, at 0.5 m depth.
    pub fn nominal_state(&self) -> BezierState {
        BezierState::new(
            [[-80.0, -40.0, 500.0], [0.0, 45.0, 510.0], [85.0, -15.0, 490.0]],
            taper_profile(self.n_s, 10.0, 6.0),
        )
    }

    /// Per-frame ground truth: the nominal curve with seeded perturbations
    /// of the free control points, rejected until fully in frame.
    pub fn ground_truth(&self, seed: u64) -> BezierState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7f4a_91d3);
        let nominal = self.nominal_state();
        loop {
            let mut state = nominal.clone();
            for k in 0..2 {
                state.control_points[0][k] += rng.gen_range(-12.0..12.0);
            }
            for point in state.control_points.iter_mut().skip(1) {
                point[0] += rng.gen_range(-25.0..25.0);
                point[1] += rng.gen_range(-25.0..25.0);
                point[2] += rng.gen_range(-18.0..18.0);
            }
            if self.state_in_frame(&state) {
                return state;
            }
        }
    }

    pub fn state_in_frame(&self, state: &BezierState) -> bool {
        let margin_u = 24.0;
        let margin_v = 20.0;
        (0..=10).all(|i| {
            let p = state.point(i as f64 / 10.0);
            match self.camera.project(p) {
                Some(uv) => {
                    uv[0] > margin_u
                        && uv[0] < self.camera.width as f64 - margin_u
                        && uv[1] > margin_v
                        && uv[1] < self.camera.height as f64 - margin_v
                }
                None => false,
            }
        })
    }

    pub fn render_mask(
        &self,
        state: &BezierState,
        noise: f64,
        noise_seed: u64,
    ) -> Result<MaskImage, PipelineError> {
        let mesh = build_tube_mesh_plain(state, self.n_s, self.n_phi);
        let img = render_silhouette_plain(&mesh, &self.camera, HARD_SIGMA)
            .map_err(|e| PipelineError::Validation(e.to_string()))?;
        let mask = img.to_mask(0.5);
        if mask.is_empty_mask() {
            return Err(PipelineError::Validation("synthetic state renders no pixels".into()));
        }
        Ok(apply_flip_noise(mask, noise, noise_seed))
    }

    pub fn truth_for(&self, state: &BezierState) -> SoftTruth {
        let mut centerline_3d = Vec::with_capacity(TRUTH_CENTERLINE_SAMPLES);
        let mut centerline_2d = Vec::with_capacity(TRUTH_CENTERLINE_SAMPLES);
        for i in 0..TRUTH_CENTERLINE_SAMPLES {
            let s = i as f64 / (TRUTH_CENTERLINE_SAMPLES - 1) as f64;
            let p = state.point(s);
            centerline_3d.push(p);
            centerline_2d.push(self.camera.project(p).expect("truth centerline in frame"));
        }
        SoftTruth { state: state.clone(), centerline_3d, centerline_2d }
    }
}

fn taper_profile(n: usize, base: f64, tip: f64) -> Vec<f64> {
    (0..n).map(|i| base + (tip - base) * i as f64 / (n - 1) as f64).collect()
}

/// Three-link cylinder manipulator scene in meters.
#[derive(Debug, Clone)]
pub struct RigidScenario {
    pub camera: CameraModel,
    pub chain: KinematicChain,
    pub joints: Vec<f64>,
    pub gamma: f64,
    pub world_scale_mm: f64,
}

impl RigidScenario {
    pub fn standard() -> Self {
        let along_x = AttachTransform {
            position: [0.0, 0.0, 0.0],
            axis_angle: [0.0, std::f64::consts::FRAC_PI_2, 0.0],
        };
        let link = |a: f64, alpha: f64, radius: f64| DHLink {
            dh: DHParams { a, alpha, d: 0.0, theta_offset: 0.0 },
            primitive: PrimitiveShape::Cylinder { radius, length: a, rings: 10 },
            attach: Some(AttachTransform { position: [-a / 2.0, 0.0, 0.0], ..along_x }),
        };
        RigidScenario {
            camera: CameraModel {
                fx: 280.0,
                fy: 280.0,
                cx: 160.0,
                cy: 120.0,
                width: 320,
                height: 240,
            },
            chain: KinematicChain::new(vec![
                link(0.30, 1.2, 0.045),
                link(0.26, -0.9, 0.038),
                link(0.22, 0.7, 0.032),
            ]),
            joints: vec![0.5, -0.8, 0.6],
            gamma: 100.0,
            world_scale_mm: 1000.0,
        }
    }

    /// Nominal camera-from-base pose for the scene.
    pub fn nominal_pose(&self) -> PoseSE3 {
        PoseSE3::new([2.6, -0.4, 0.3], [0.03, -0.02, 1.5])
    }

    /// Per-frame ground-truth pose: seeded perturbation of the nominal pose,
    /// rejected until the whole chain projects inside the frame.
    pub fn ground_truth(&self, seed: u64) -> PoseSE3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x2bd6_30e1);
        let nominal = self.nominal_pose();
        loop {
            let mut pose = nominal;
            for k in 0..3 {
                pose.rotation[k] += rng.gen_range(-0.35..0.35);
            }
            pose.translation[0] += rng.gen_range(-0.12..0.12);
            pose.translation[1] += rng.gen_range(-0.10..0.10);
            pose.translation[2] += rng.gen_range(-0.15..0.20);
            if self.pose_in_frame(&pose) {
                return pose;
            }
        }
    }

    pub fn pose_in_frame(&self, pose: &PoseSE3) -> bool {
        let margin_u = 26.0;
        let margin_v = 22.0;
        let transforms = match self.chain.link_transforms(&self.joints) {
            Ok(t) => t,
            Err(_) => return false,
        };
        let mut anchors = vec![[0.0, 0.0, 0.0]];
        for t in &transforms {
            anchors.push([t[0][3], t[1][3], t[2][3]]);
        }
        anchors.iter().all(|&a| {
            let p = pose.apply(a);
            match self.camera.project(p) {
                Some(uv) => {
                    uv[0] > margin_u
                        && uv[0] < self.camera.width as f64 - margin_u
                        && uv[1] > margin_v
                        && uv[1] < self.camera.height as f64 - margin_v
                }
                None => false,
            }
        })
    }

    pub fn render_mask(
        &self,
        pose: &PoseSE3,
        noise: f64,
        noise_seed: u64,
    ) -> Result<MaskImage, PipelineError> {
        let offsets = VertexOffsets::zeros(&self.chain)
            .map_err(|e| PipelineError::Validation(e.to_string()))?;
        let mesh = assemble_robot_mesh_plain(&self.chain, &self.joints, &offsets, pose)
            .map_err(|e| PipelineError::Validation(e.to_string()))?;
        let img = render_silhouette_plain(&mesh, &self.camera, HARD_SIGMA)
            .map_err(|e| PipelineError::Validation(e.to_string()))?;
        let mask = img.to_mask(0.5);
        if mask.is_empty_mask() {
            return Err(PipelineError::Validation("synthetic pose renders no pixels".into()));
        }
        Ok(apply_flip_noise(mask, noise, noise_seed))
    }

    pub fn truth_for(&self, pose: &PoseSE3) -> Result<RigidTruth, PipelineError> {
        let ee_base = self
            .chain
            .end_effector_base(&self.joints)
            .map_err(|e| PipelineError::Validation(e.to_string()))?;
        let ee_camera = pose.apply(ee_base);
        let ee_pixel = self
            .camera
            .project(ee_camera)
            .ok_or_else(|| PipelineError::Validation("end effector behind camera".into()))?;
        Ok(RigidTruth { pose: *pose, ee_camera, ee_pixel })
    }
}

/// Bernoulli pixel flips, independent per pixel.
pub fn apply_flip_noise(mask: MaskImage, rate: f64, seed: u64) -> MaskImage {
    if rate <= 0.0 {
        return mask;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x51f0_aa77);
    let (w, h) = (mask.width(), mask.height());
    let mut out = mask;
    for i in 0..h {
        for j in 0..w {
            if rng.gen_range(0.0..1.0) < rate {
                let v = out.at(i, j);
                out.set(i, j, 1 - v);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct SyntheticConfig {
    pub scenario: ScenarioKind,
    pub frames: usize,
    pub noise: f64,
    pub seed: u64,
}

/// Generate a dataset directory: mask images, `dataset.json`, `camera.toml`,
/// and for rigid scenes `description.toml` plus `joints.txt`.
pub fn synth_generate(
    cfg: &SyntheticConfig,
    out_dir: &std::path::Path,
) -> Result<Dataset, PipelineError> {
    std::fs::create_dir_all(out_dir.join("masks"))
        .map_err(|e| PipelineError::Io(format!("{}: {e}", out_dir.display())))?;
    let mut frames = Vec::with_capacity(cfg.frames);
    let (camera, world_scale_mm) = match cfg.scenario {
        ScenarioKind::Soft => {
            let scenario = SoftScenario::standard();
            for id in 0..cfg.frames {
                let seed = cfg.seed.wrapping_add(id as u64);
                let state = scenario.ground_truth(seed);
                let mask = scenario.render_mask(&state, cfg.noise, seed)?;
                let rel = format!("masks/frame_{id:04}.png");
                mask.save(&out_dir.join(&rel))
                    .map_err(|e| PipelineError::Io(e.to_string()))?;
                frames.push(FrameRecord {
                    id,
                    mask: rel,
                    joints: None,
                    truth: Some(GroundTruth::Soft(scenario.truth_for(&state))),
                });
            }
            (scenario.camera, scenario.world_scale_mm)
        }
        ScenarioKind::Rigid => {
            let scenario = RigidScenario::standard();
            std::fs::write(out_dir.join("description.toml"), scenario.chain.to_toml_string())
                .map_err(|e| PipelineError::Io(e.to_string()))?;
            let joint_rows: Vec<Vec<f64>> =
                (0..cfg.frames).map(|_| scenario.joints.clone()).collect();
            super::formats::save_joints(&out_dir.join("joints.txt"), &joint_rows)?;
            for id in 0..cfg.frames {
                let seed = cfg.seed.wrapping_add(id as u64);
                let pose = scenario.ground_truth(seed);
                let mask = scenario.render_mask(&pose, cfg.noise, seed)?;
                let rel = format!("masks/frame_{id:04}.png");
                mask.save(&out_dir.join(&rel))
                    .map_err(|e| PipelineError::Io(e.to_string()))?;
                frames.push(FrameRecord {
                    id,
                    mask: rel,
                    joints: Some(scenario.joints.clone()),
                    truth: Some(GroundTruth::Rigid(scenario.truth_for(&pose)?)),
                });
            }
            (scenario.camera, scenario.world_scale_mm)
        }
    };

    super::formats::save_camera(&out_dir.join("camera.toml"), &camera)?;
    let dataset = Dataset { scenario: cfg.scenario, world_scale_mm, camera, frames };
    dataset.save(&out_dir.join("dataset.json"))?;
    Ok(dataset)
}
