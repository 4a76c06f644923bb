//! The estimation loop: reconstruct the mesh from current parameters, render
//! its silhouette, evaluate the loss against the reference, and descend both
//! state and vertex parameters simultaneously, tracking the best-loss state
//! seen. Supports plain gradient descent (the default) and an
//! adaptive-moment variant behind a config flag, a divergence guard, and
//! optional random restarts.

mod init;
mod model;

pub use init::{random_init, InitConfig};

use serde::{Deserialize, Serialize};

use crate::geometry::BezierState;
use crate::imageproc::{DistanceMap, ImageProcError, MaskImage};
use crate::kinematics::{KinematicChain, KinematicsError, PoseSE3, VertexOffsets};
use crate::losses::LossWeights;
use crate::renderer::{CameraModel, RenderError, SilhouetteImage, DEFAULT_SIGMA};

use model::{model_for, ParamGroup, ParamKind};

/// Loss value beyond which the step is treated as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, thiserror::Error)]
pub enum OptimError {
    #[error("non-finite {what} at iteration {iteration}")]
    NumericalAbort { what: &'static str, iteration: usize, last: Box<Solution> },
    #[error("loss diverged past {DIVERGENCE_LIMIT:e} after {halvings} learning-rate halvings")]
    Diverged { halvings: usize },
    #[error("no visible initialization found in {attempts} attempts")]
    InitRejected { attempts: usize },
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    ImageProc(#[from] ImageProcError),
}

/// Soft continuum shape reconstruction instance.
#[derive(Debug, Clone)]
pub struct SoftShapeProblem {
    pub init: BezierState,
    pub camera: CameraModel,
    pub reference: MaskImage,
    /// `(arc fraction, pixel)` pairs from the reference centerline.
    pub keypoints: Vec<(f64, [f64; 2])>,
    pub weights: LossWeights,
    /// Pin the base control point to a known position and freeze it.
    pub fixed_base: Option<[f64; 3]>,
    pub n_s: usize,
    pub n_phi: usize,
}

/// Rigid manipulator pose estimation instance.
#[derive(Debug, Clone)]
pub struct RigidPoseProblem {
    pub chain: KinematicChain,
    pub joints: Vec<f64>,
    pub init_pose: PoseSE3,
    pub init_offsets: VertexOffsets,
    pub camera: CameraModel,
    pub reference: MaskImage,
    pub distance_map: DistanceMap,
    pub weights: LossWeights,
}

#[derive(Debug, Clone)]
pub enum EstimationProblem {
    SoftShape(SoftShapeProblem),
    RigidPose(RigidPoseProblem),
}

impl EstimationProblem {
    pub fn camera(&self) -> &CameraModel {
        match self {
            EstimationProblem::SoftShape(p) => &p.camera,
            EstimationProblem::RigidPose(p) => &p.camera,
        }
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        match self {
            EstimationProblem::SoftShape(p) => {
                p.camera.validate()?;
                p.weights.validate().map_err(OptimError::Invalid)?;
                p.init.validate().map_err(OptimError::Invalid)?;
                if (p.reference.width(), p.reference.height()) != (p.camera.width, p.camera.height)
                {
                    return Err(OptimError::Invalid(format!(
                        "reference mask {}x{} does not match camera {}x{}",
                        p.reference.width(),
                        p.reference.height(),
                        p.camera.width,
                        p.camera.height
                    )));
                }
                if p.init.radius_profile.len() != p.n_s {
                    return Err(OptimError::Invalid(format!(
                        "radius profile length {} does not match ring count {}",
                        p.init.radius_profile.len(),
                        p.n_s
                    )));
                }
                if p.n_s < 2 || p.n_phi < 3 {
                    return Err(OptimError::Invalid(format!(
                        "tube resolution {}x{} too small",
                        p.n_s, p.n_phi
                    )));
                }
                Ok(())
            }
            EstimationProblem::RigidPose(p) => {
                p.camera.validate()?;
                p.weights.validate().map_err(OptimError::Invalid)?;
                p.chain.validate()?;
                p.init_offsets.validate_against(&p.chain)?;
                if p.joints.len() != p.chain.links.len() {
                    return Err(KinematicsError::JointCountMismatch {
                        got: p.joints.len(),
                        expected: p.chain.links.len(),
                    }
                    .into());
                }
                if (p.reference.width(), p.reference.height()) != (p.camera.width, p.camera.height)
                {
                    return Err(OptimError::Invalid(format!(
                        "reference mask {}x{} does not match camera {}x{}",
                        p.reference.width(),
                        p.reference.height(),
                        p.camera.width,
                        p.camera.height
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Gradient update rule for both parameter sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateRule {
    /// Plain simultaneous gradient descent.
    #[default]
    GradientDescent,
    /// Adam-style adaptive moments at the same learning rates.
    AdaptiveMoment,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimConfig {
    pub iterations: usize,
    pub lr_state: f64,
    pub lr_verts: f64,
    pub sigma: f64,
    pub rng_seed: u64,
    pub update_rule: UpdateRule,
    /// Total attempts; restarts beyond the first draw fresh random inits.
    pub restarts: usize,
    /// Keep a silhouette snapshot every n iterations (0 = none).
    pub snapshot_every: usize,
    pub init: InitConfig,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            iterations: 200,
            lr_state: 0.2,
            lr_verts: 0.2,
            sigma: DEFAULT_SIGMA,
            rng_seed: 0,
            update_rule: UpdateRule::GradientDescent,
            restarts: 1,
            snapshot_every: 0,
            init: InitConfig::default(),
        }
    }
}

impl OptimConfig {
    /// Shape-reconstruction settings: 200 iterations at learning rate 0.2.
    pub fn shape_defaults() -> Self {
        OptimConfig::default()
    }

    /// Pose-estimation settings: 500 iterations, 1e-2 for the pose and 1e-4
    /// for the vertex offsets.
    pub fn pose_defaults() -> Self {
        OptimConfig { iterations: 500, lr_state: 1e-2, lr_verts: 1e-4, ..OptimConfig::default() }
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        if !(self.lr_state > 0.0) || !(self.lr_verts > 0.0) {
            return Err(OptimError::Invalid(format!(
                "learning rates must be positive: state {}, verts {}",
                self.lr_state, self.lr_verts
            )));
        }
        if !(self.sigma > 0.0) {
            return Err(OptimError::Invalid(format!("sigma must be positive: {}", self.sigma)));
        }
        if self.restarts == 0 {
            return Err(OptimError::Invalid("restarts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Estimated parameters of one problem variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Solution {
    Soft(BezierState),
    Rigid { pose: PoseSE3, offsets: VertexOffsets },
}

impl Solution {
    pub fn as_soft(&self) -> &BezierState {
        match self {
            Solution::Soft(s) => s,
            Solution::Rigid { .. } => panic!("expected soft solution"),
        }
    }

    pub fn as_rigid(&self) -> (&PoseSE3, &VertexOffsets) {
        match self {
            Solution::Rigid { pose, offsets } => (pose, offsets),
            Solution::Soft(_) => panic!("expected rigid solution"),
        }
    }
}

/// One row of the per-iteration loss trace. `guide` is the keypoint term for
/// shape problems and the distance term for pose problems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub total: f64,
    pub mask: f64,
    pub guide: f64,
    pub appearance: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct EstimateResult {
    /// Best-loss parameters over all evaluated iterations (the
    /// initialization when no iteration ran).
    pub solution: Solution,
    /// Minimum evaluated loss; infinite when no iteration ran.
    pub best_loss: f64,
    pub best_iteration: Option<usize>,
    /// Set when the loop body never executed.
    pub no_iterations: bool,
    pub trace: Vec<TraceRow>,
    /// Index of the restart that produced the returned solution.
    pub restart_used: usize,
    /// Keypoint evaluations that fell behind the camera across the run.
    pub behind_camera_events: usize,
    pub lr_halvings: usize,
    pub renders: Vec<(usize, SilhouetteImage)>,
}

/// Run the full estimation, honoring restarts: restart 0 uses the problem's
/// own initialization, later restarts draw random in-frustum inits seeded by
/// `rng_seed + restart`.
pub fn estimate(
    problem: &EstimationProblem,
    config: &OptimConfig,
) -> Result<EstimateResult, OptimError> {
    problem.validate()?;
    config.validate()?;

    let mut best: Option<EstimateResult> = None;
    for restart in 0..config.restarts.max(1) {
        let drawn;
        let current: &EstimationProblem = if restart == 0 {
            problem
        } else {
            drawn = random_init(
                problem,
                &config.init,
                config.sigma,
                config.rng_seed.wrapping_add(restart as u64),
            )?;
            &drawn
        };
        let mut result = run_single(current, config)?;
        result.restart_used = restart;
        let better = match &best {
            None => true,
            Some(b) => result.best_loss < b.best_loss,
        };
        if better {
            best = Some(result);
        }
    }
    Ok(best.expect("at least one restart ran"))
}

fn run_single(
    problem: &EstimationProblem,
    config: &OptimConfig,
) -> Result<EstimateResult, OptimError> {
    let model = model_for(problem);
    let mut groups = model.initial_groups();
    let mut lr_state = config.lr_state;
    let mut lr_verts = config.lr_verts;
    let mut halvings = 0usize;
    let mut behind_events = 0usize;

    let mut best_groups: Option<(f64, Vec<ParamGroup>, usize)> = None;
    let mut trace = Vec::with_capacity(config.iterations);
    let mut renders = Vec::new();
    let mut adam = AdamState::new(&groups);

    for iteration in 0..config.iterations {
        let started = std::time::Instant::now();
        let tape = crate::autodiff::Tape::new();
        let keep = config.snapshot_every > 0 && iteration % config.snapshot_every == 0;
        let built = model.build_loss(&tape, &groups, config.sigma, keep)?;
        let loss = built.total.scalar_value();
        behind_events += built.behind_camera;

        if !loss.is_finite() {
            let last = best_groups
                .as_ref()
                .map(|(_, g, _)| model.solution(g))
                .unwrap_or_else(|| model.solution(&groups));
            return Err(OptimError::NumericalAbort {
                what: "loss",
                iteration,
                last: Box::new(last),
            });
        }

        if loss > DIVERGENCE_LIMIT {
            halvings += 1;
            if halvings > 3 {
                return Err(OptimError::Diverged { halvings });
            }
            lr_state /= 2.0;
            lr_verts /= 2.0;
            if let Some((_, g, _)) = &best_groups {
                groups = g.clone();
            }
            adam = AdamState::new(&groups);
            trace.push(TraceRow {
                iteration,
                total: loss,
                mask: built.mask,
                guide: built.guide,
                appearance: built.appearance,
                wall_ms: started.elapsed().as_secs_f64() * 1e3,
            });
            continue;
        }

        if best_groups.as_ref().map_or(true, |(l, _, _)| loss < *l) {
            best_groups = Some((loss, groups.clone(), iteration));
        }
        if let Some(img) = built.silhouette {
            renders.push((iteration, img));
        }

        tape.backward(built.total);
        let mut grads = Vec::with_capacity(groups.len());
        for leaf in &built.leaves {
            let g = leaf.grad();
            if g.iter().any(|x| !x.is_finite()) {
                let last = best_groups
                    .as_ref()
                    .map(|(_, g2, _)| model.solution(g2))
                    .unwrap_or_else(|| model.solution(&groups));
                return Err(OptimError::NumericalAbort {
                    what: "gradient",
                    iteration,
                    last: Box::new(last),
                });
            }
            grads.push(g);
        }

        adam.step += 1;
        for (gi, (group, grad)) in groups.iter_mut().zip(&grads).enumerate() {
            if group.frozen {
                continue;
            }
            let lr = match group.kind {
                ParamKind::State => lr_state,
                ParamKind::Verts => lr_verts,
            };
            match config.update_rule {
                UpdateRule::GradientDescent => {
                    for (v, g) in group.values.iter_mut().zip(grad) {
                        *v -= lr * g;
                    }
                }
                UpdateRule::AdaptiveMoment => {
                    adam.update(gi, lr, &mut group.values, grad);
                }
            }
        }

        trace.push(TraceRow {
            iteration,
            total: loss,
            mask: built.mask,
            guide: built.guide,
            appearance: built.appearance,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        });
    }

    let (solution, best_loss, best_iteration, no_iterations) = match &best_groups {
        Some((loss, g, iter)) => (model.solution(g), *loss, Some(*iter), false),
        None => (model.solution(&groups), f64::INFINITY, None, true),
    };
    Ok(EstimateResult {
        solution,
        best_loss,
        best_iteration,
        no_iterations,
        trace,
        restart_used: 0,
        behind_camera_events: behind_events,
        lr_halvings: halvings,
        renders,
    })
}

struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPSILON: f64 = 1e-8;

impl AdamState {
    fn new(groups: &[ParamGroup]) -> Self {
        AdamState {
            m: groups.iter().map(|g| vec![0.0; g.values.len()]).collect(),
            v: groups.iter().map(|g| vec![0.0; g.values.len()]).collect(),
            step: 0,
        }
    }

    fn update(&mut self, group: usize, lr: f64, values: &mut [f64], grad: &[f64]) {
        let t = self.step as f64;
        let bc1 = 1.0 - ADAM_BETA1.powf(t);
        let bc2 = 1.0 - ADAM_BETA2.powf(t);
        for k in 0..values.len() {
            let m = &mut self.m[group][k];
            let v = &mut self.v[group][k];
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * grad[k];
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * grad[k] * grad[k];
            let mh = *m / bc1;
            let vh = *v / bc2;
            values[k] -= lr * mh / (vh.sqrt() + ADAM_EPSILON);
        }
    }
}

/// Re-evaluate the loss of a solved state (used to confirm the reported
/// minimum and to render final silhouettes).
pub fn evaluate_loss(
    problem: &EstimationProblem,
    solution: &Solution,
    sigma: f64,
) -> Result<f64, OptimError> {
    let swapped = swap_init(problem, solution);
    let model = model_for(&swapped);
    let groups = model.initial_groups();
    let tape = crate::autodiff::Tape::new();
    let built = model.build_loss(&tape, &groups, sigma, false)?;
    Ok(built.total.scalar_value())
}

/// Render the silhouette of a solved state.
pub fn render_solution(
    problem: &EstimationProblem,
    solution: &Solution,
    sigma: f64,
) -> Result<SilhouetteImage, OptimError> {
    let swapped = swap_init(problem, solution);
    let model = model_for(&swapped);
    let groups = model.initial_groups();
    let tape = crate::autodiff::Tape::new();
    let built = model.build_loss(&tape, &groups, sigma, true)?;
    Ok(built.silhouette.expect("render requested"))
}

fn swap_init(problem: &EstimationProblem, solution: &Solution) -> EstimationProblem {
    match (problem, solution) {
        (EstimationProblem::SoftShape(p), Solution::Soft(s)) => {
            let mut q = p.clone();
            q.init = s.clone();
            // The solved state already honors the pin; avoid re-freezing so
            // evaluation works for arbitrary states too.
            q.fixed_base = None;
            EstimationProblem::SoftShape(q)
        }
        (EstimationProblem::RigidPose(p), Solution::Rigid { pose, offsets }) => {
            let mut q = p.clone();
            q.init_pose = *pose;
            q.init_offsets = offsets.clone();
            EstimationProblem::RigidPose(q)
        }
        _ => panic!("solution variant does not match problem variant"),
    }
}
