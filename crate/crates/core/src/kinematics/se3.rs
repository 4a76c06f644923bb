//! SE(3) poses as axis-angle plus translation, with the Rodrigues map on and
//! off the tape.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Value, Var};

/// Homogeneous 4x4 transform, row-major.
pub type Mat4 = [[f64; 4]; 4];

pub fn mat4_identity() -> Mat4 {
    let mut m = [[0.0; 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn mat4_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn mat4_apply(m: &Mat4, p: [f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (i, row) in m.iter().take(3).enumerate() {
        out[i] = row[0] * p[0] + row[1] * p[1] + row[2] * p[2] + row[3];
    }
    out
}

pub fn rotation_part(m: &Mat4) -> [[f64; 3]; 3] {
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        r[i].copy_from_slice(&m[i][..3]);
    }
    r
}

/// 6-DOF rigid pose: axis-angle rotation and translation. Three unconstrained
/// rotation parameters suit plain gradient descent; no renormalization step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseSE3 {
    pub rotation: [f64; 3],
    pub translation: [f64; 3],
}

impl PoseSE3 {
    pub fn identity() -> Self {
        PoseSE3 { rotation: [0.0; 3], translation: [0.0; 3] }
    }

    pub fn new(rotation: [f64; 3], translation: [f64; 3]) -> Self {
        PoseSE3 { rotation, translation }
    }

    /// Rotation matrix by the Rodrigues exponential, with a second-order
    /// Taylor branch below 1e-8 radians.
    pub fn rotation_matrix(&self) -> [[f64; 3]; 3] {
        rodrigues(self.rotation)
    }

    /// Full homogeneous matrix.
    pub fn matrix(&self) -> Mat4 {
        let r = self.rotation_matrix();
        let t = self.translation;
        [
            [r[0][0], r[0][1], r[0][2], t[0]],
            [r[1][0], r[1][1], r[1][2], t[1]],
            [r[2][0], r[2][1], r[2][2], t[2]],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }

    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        mat4_apply(&self.matrix(), p)
    }
}

/// Rodrigues exponential of an axis-angle vector.
pub fn rodrigues(omega: [f64; 3]) -> [[f64; 3]; 3] {
    let sq = omega[0] * omega[0] + omega[1] * omega[1] + omega[2] * omega[2];
    let theta = sq.sqrt();
    let (a, b) = if theta < 1e-8 {
        (1.0 - sq / 6.0, 0.5 - sq / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / sq)
    };
    let k = hat(omega);
    let kk = mat3_mul(&k, &k);
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] = (if i == j { 1.0 } else { 0.0 }) + a * k[i][j] + b * kk[i][j];
        }
    }
    r
}

fn hat(w: [f64; 3]) -> [[f64; 3]; 3] {
    [[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]]
}

fn mat3_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Relative rotation angle between two rotation matrices, radians.
pub fn rotation_angle_between(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> f64 {
    // trace(a * b^T)
    let mut tr = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            tr += a[i][j] * b[i][j];
        }
    }
    ((tr - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

/// Pose parameters bound to a tape: `omega` and `trans` as `(1, 3)` leaves.
pub struct PoseVars<'t> {
    pub omega: Var<'t>,
    pub trans: Var<'t>,
}

impl<'t> PoseVars<'t> {
    pub fn from_pose(tape: &'t Tape, pose: &PoseSE3) -> Self {
        PoseVars {
            omega: tape.leaf(Value::vec3(pose.rotation)),
            trans: tape.leaf(Value::vec3(pose.translation)),
        }
    }

    pub fn to_pose(&self) -> PoseSE3 {
        PoseSE3 { rotation: self.omega.vec3_value(), translation: self.trans.vec3_value() }
    }

    /// Differentiable rotation matrix node.
    pub fn rotation_var(&self, tape: &'t Tape) -> Var<'t> {
        rodrigues_var(tape, self.omega)
    }
}

/// Rodrigues exponential recorded on the tape.
///
/// The Taylor branch activates below 1e-6 radians: the norm primitive clamps
/// its radicand at 1e-12, so the exact formula would be wrong in
/// [1e-8, 1e-6) anyway, and the Taylor error there is below 1e-17.
pub fn rodrigues_var<'t>(tape: &'t Tape, omega: Var<'t>) -> Var<'t> {
    let w = omega.vec3_value();
    let sq_raw = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
    let identity = tape.constant(Value::matrix3([
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
    ]));
    let k = omega.hat();
    let kk = k.matmul(k);
    if sq_raw.sqrt() < 1e-6 {
        let sq = omega.dot(omega);
        let a = sq.scale(-1.0 / 6.0).offset(1.0);
        let b = sq.scale(-1.0 / 24.0).offset(0.5);
        identity.add(k.mul(a)).add(kk.mul(b))
    } else {
        let sq = omega.dot(omega);
        let theta = sq.sqrt();
        let a = theta.sin().div(theta);
        let b = theta.cos().neg().offset(1.0).div(sq);
        identity.add(k.mul(a)).add(kk.mul(b))
    }
}
