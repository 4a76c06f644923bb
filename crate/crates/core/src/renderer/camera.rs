//! Pinhole camera and differentiable perspective projection.

use serde::{Deserialize, Serialize};

use crate::autodiff::{CustomOp, Tape, Value, Var};

use super::RenderError;

/// Points closer than this to the image plane are clipped: faces touching
/// them are culled whole and keypoint terms are flagged invalid.
pub const Z_NEAR: f64 = 1e-3;

/// Perspective camera: `u = fx * x / z + cx`, `v = fy * y / z + cy`, with
/// `u` along columns and `v` along rows; pixel centers at integer + 0.5.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), RenderError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(RenderError::InvalidCamera(format!(
                "focal lengths must be positive: fx={}, fy={}",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(RenderError::InvalidCamera("zero image dimensions".into()));
        }
        if !(0.0..self.width as f64).contains(&self.cx)
            || !(0.0..self.height as f64).contains(&self.cy)
        {
            return Err(RenderError::InvalidCamera(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    /// Plain projection; `None` when the point is at or behind the near plane.
    pub fn project(&self, p: [f64; 3]) -> Option<[f64; 2]> {
        if p[2] <= Z_NEAR {
            return None;
        }
        Some([self.fx * p[0] / p[2] + self.cx, self.fy * p[1] / p[2] + self.cy])
    }

    pub fn contains_pixel(&self, uv: [f64; 2]) -> bool {
        uv[0] >= 0.0 && uv[0] < self.width as f64 && uv[1] >= 0.0 && uv[1] < self.height as f64
    }
}

#[derive(Debug)]
struct ProjectOp {
    cam: CameraModel,
}

impl CustomOp for ProjectOp {
    fn name(&self) -> &'static str {
        "project"
    }

    fn backward(&self, out_grad: &[f64], _out: &Value, inputs: &[&Value]) -> Vec<Vec<f64>> {
        let p = inputs[0].as_vec3();
        let (gu, gv) = (out_grad[0], out_grad[1]);
        let z = p[2];
        vec![vec![
            gu * self.cam.fx / z,
            gv * self.cam.fy / z,
            -(gu * self.cam.fx * p[0] + gv * self.cam.fy * p[1]) / (z * z),
        ]]
    }
}

/// Differentiable projection of a 3D point node to a `(1, 2)` pixel node.
pub fn project_var<'t>(
    tape: &'t Tape,
    cam: &CameraModel,
    point: Var<'t>,
) -> Result<Var<'t>, RenderError> {
    let p = point.vec3_value();
    let uv = cam.project(p).ok_or(RenderError::BehindCamera { z: p[2] })?;
    Ok(tape.custom(&[point], Value::row(uv.to_vec()), Box::new(ProjectOp { cam: *cam })))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{diff_fn, grad_check};
    use approx::assert_abs_diff_eq;

    fn cam() -> CameraModel {
        CameraModel { fx: 100.0, fy: 100.0, cx: 50.0, cy: 50.0, width: 100, height: 100 }
    }

    #[test]
    fn optical_axis_hits_principal_point() {
        for z in [0.1, 1.0, 57.0] {
            assert_eq!(cam().project([0.0, 0.0, z]), Some([50.0, 50.0]));
        }
    }

    #[test]
    fn example_projection() {
        let uv = cam().project([1.0, 0.0, 2.0]).unwrap();
        assert_eq!(uv, [100.0, 50.0]);
    }

    #[test]
    fn doubling_depth_halves_offsets() {
        let c = cam();
        let near = c.project([0.3, -0.4, 1.0]).unwrap();
        let far = c.project([0.3, -0.4, 2.0]).unwrap();
        assert_abs_diff_eq!((far[0] - c.cx) * 2.0, near[0] - c.cx, epsilon = 1e-12);
        assert_abs_diff_eq!((far[1] - c.cy) * 2.0, near[1] - c.cy, epsilon = 1e-12);
    }

    #[test]
    fn points_behind_near_plane_are_clipped() {
        assert_eq!(cam().project([0.0, 0.0, 0.0]), None);
        assert_eq!(cam().project([0.0, 0.0, -1.0]), None);
        let tape = Tape::new();
        let p = tape.leaf(Value::vec3([0.0, 0.0, -0.5]));
        assert!(matches!(
            project_var(&tape, &cam(), p),
            Err(RenderError::BehindCamera { .. })
        ));
    }

    #[test]
    fn projection_gradient_matches_finite_differences() {
        let c = cam();
        let f = diff_fn(move |t, x| {
            let e0 = t.constant(Value::vec3([1.0, 0.0, 0.0]));
            let e1 = t.constant(Value::vec3([0.0, 1.0, 0.0]));
            let e2 = t.constant(Value::vec3([0.0, 0.0, 1.0]));
            let p = e0.mul(x.index(0)).add(e1.mul(x.index(1))).add(e2.mul(x.index(2)));
            let uv = project_var(t, &c, p).unwrap();
            let w = t.constant(Value::row(vec![0.7, -1.3]));
            uv.mul(w).sum()
        });
        let err = grad_check(f, &[0.4, -0.2, 1.7], 1e-6);
        assert!(err < 1e-8, "projection gradient mismatch: {err}");
    }

    #[test]
    fn invalid_cameras_rejected() {
        let mut c = cam();
        c.fx = 0.0;
        assert!(c.validate().is_err());
        let mut c = cam();
        c.cx = 100.0;
        assert!(c.validate().is_err());
        assert!(cam().validate().is_ok());
    }
}
