//! The two estimation models behind one parameter-group interface.

use crate::autodiff::{inverse_softplus, softplus, Tape, Value, Var};
use crate::geometry::{build_tube_mesh, BezierState, BezierVars};
use crate::kinematics::{assemble_robot_mesh, PoseSE3, PoseVars, RigidVars, VertexOffsets};
use crate::losses::{pose_loss, shape_loss};
use crate::renderer::{render_silhouette, SilhouetteImage};

use super::{EstimationProblem, OptimError, RigidPoseProblem, Solution, SoftShapeProblem};

/// Which learning rate a parameter group follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum ParamKind {
    State,
    Verts,
}

#[derive(Debug, Clone)]
pub(super) struct ParamGroup {
    pub values: Vec<f64>,
    pub kind: ParamKind,
    pub frozen: bool,
}

pub(super) struct BuiltLoss<'t> {
    pub total: Var<'t>,
    pub mask: f64,
    pub guide: f64,
    pub appearance: f64,
    pub behind_camera: usize,
    pub leaves: Vec<Var<'t>>,
    pub silhouette: Option<SilhouetteImage>,
}

pub(super) trait Model {
    fn initial_groups(&self) -> Vec<ParamGroup>;
    fn build_loss<'t>(
        &self,
        tape: &'t Tape,
        groups: &[ParamGroup],
        sigma: f64,
        keep_render: bool,
    ) -> Result<BuiltLoss<'t>, OptimError>;
    fn solution(&self, groups: &[ParamGroup]) -> Solution;
}

pub(super) struct SoftModel<'p> {
    pub problem: &'p SoftShapeProblem,
}

impl Model for SoftModel<'_> {
    fn initial_groups(&self) -> Vec<ParamGroup> {
        let [c0, c1, c2] = self.problem.init.control_points;
        let base = self.problem.fixed_base.unwrap_or(c0);
        let raw: Vec<f64> =
            self.problem.init.radius_profile.iter().map(|&r| inverse_softplus(r)).collect();
        vec![
            ParamGroup {
                values: base.to_vec(),
                kind: ParamKind::State,
                frozen: self.problem.fixed_base.is_some(),
            },
            ParamGroup { values: c1.to_vec(), kind: ParamKind::State, frozen: false },
            ParamGroup { values: c2.to_vec(), kind: ParamKind::State, frozen: false },
            ParamGroup { values: raw, kind: ParamKind::Verts, frozen: false },
        ]
    }

    fn build_loss<'t>(
        &self,
        tape: &'t Tape,
        groups: &[ParamGroup],
        sigma: f64,
        keep_render: bool,
    ) -> Result<BuiltLoss<'t>, OptimError> {
        let p = self.problem;
        let c0 = tape.leaf(Value::row(groups[0].values.clone()));
        let c1 = tape.leaf(Value::row(groups[1].values.clone()));
        let c2 = tape.leaf(Value::row(groups[2].values.clone()));
        let radius_raw = tape.leaf(Value::row(groups[3].values.clone()));
        let vars = BezierVars { c0, c1, c2, radius_raw };
        let mesh = build_tube_mesh(tape, &vars, p.n_s, p.n_phi);
        let render = render_silhouette(tape, &mesh, &p.camera, sigma)?;
        let loss =
            shape_loss(tape, render, &p.reference, &vars, &p.camera, &p.keypoints, &p.weights);
        Ok(BuiltLoss {
            total: loss.total,
            mask: loss.mask.scalar_value(),
            guide: loss.keypoint.scalar_value(),
            appearance: 0.0,
            behind_camera: loss.behind_camera,
            leaves: vec![c0, c1, c2, radius_raw],
            silhouette: keep_render.then(|| render.with_value(SilhouetteImage::from_value)),
        })
    }

    fn solution(&self, groups: &[ParamGroup]) -> Solution {
        let pick3 = |g: &ParamGroup| [g.values[0], g.values[1], g.values[2]];
        let profile: Vec<f64> = groups[3].values.iter().map(|&raw| softplus(raw)).collect();
        Solution::Soft(BezierState {
            control_points: [pick3(&groups[0]), pick3(&groups[1]), pick3(&groups[2])],
            radius_profile: profile,
        })
    }
}

pub(super) struct RigidModel<'p> {
    pub problem: &'p RigidPoseProblem,
}

impl Model for RigidModel<'_> {
    fn initial_groups(&self) -> Vec<ParamGroup> {
        let p = self.problem;
        let mut groups = vec![
            ParamGroup {
                values: p.init_pose.rotation.to_vec(),
                kind: ParamKind::State,
                frozen: false,
            },
            ParamGroup {
                values: p.init_pose.translation.to_vec(),
                kind: ParamKind::State,
                frozen: false,
            },
        ];
        for link in &p.init_offsets.per_link {
            groups.push(ParamGroup {
                values: link.iter().flatten().copied().collect(),
                kind: ParamKind::Verts,
                frozen: false,
            });
        }
        groups
    }

    fn build_loss<'t>(
        &self,
        tape: &'t Tape,
        groups: &[ParamGroup],
        sigma: f64,
        keep_render: bool,
    ) -> Result<BuiltLoss<'t>, OptimError> {
        let p = self.problem;
        let omega = tape.leaf(Value::row(groups[0].values.clone()));
        let trans = tape.leaf(Value::row(groups[1].values.clone()));
        let mut offsets = Vec::with_capacity(groups.len() - 2);
        let mut leaves = vec![omega, trans];
        for g in &groups[2..] {
            let n = g.values.len() / 3;
            let leaf = tape.leaf(Value::new(g.values.clone(), n, 3));
            offsets.push(leaf);
            leaves.push(leaf);
        }
        let vars = RigidVars { pose: PoseVars { omega, trans }, offsets };
        let mesh = assemble_robot_mesh(tape, &p.chain, &p.joints, &vars)?;
        let render = render_silhouette(tape, &mesh, &p.camera, sigma)?;
        let loss = pose_loss(tape, render, &p.reference, &p.distance_map, &p.weights);
        Ok(BuiltLoss {
            total: loss.total,
            mask: loss.mask.scalar_value(),
            guide: loss.dist.scalar_value(),
            appearance: loss.appearance.scalar_value(),
            behind_camera: 0,
            leaves,
            silhouette: keep_render.then(|| render.with_value(SilhouetteImage::from_value)),
        })
    }

    fn solution(&self, groups: &[ParamGroup]) -> Solution {
        let pose = PoseSE3 {
            rotation: [groups[0].values[0], groups[0].values[1], groups[0].values[2]],
            translation: [groups[1].values[0], groups[1].values[1], groups[1].values[2]],
        };
        let per_link = groups[2..]
            .iter()
            .map(|g| g.values.chunks(3).map(|c| [c[0], c[1], c[2]]).collect())
            .collect();
        Solution::Rigid { pose, offsets: VertexOffsets { per_link } }
    }
}

pub(super) fn model_for(problem: &EstimationProblem) -> Box<dyn Model + '_> {
    match problem {
        EstimationProblem::SoftShape(p) => Box::new(SoftModel { problem: p }),
        EstimationProblem::RigidPose(p) => Box::new(RigidModel { problem: p }),
    }
}
