//! Differentiable objective terms and their weighted combinations.
//!
//! Shape reconstruction descends `w_mask * L_mask + w_keypoint * L_keypoint`;
//! pose estimation descends `w_mask * L_mask + w_dist * L_dist +
//! w_app * L_app`. All terms are nonnegative and vanish at a perfect fit.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::geometry::{bezier_point, BezierVars};
use crate::imageproc::{DistanceMap, MaskImage};
use crate::renderer::{project_var, CameraModel};

/// Replaces a keypoint term whose 3D point fell behind the camera: a large
/// constant with zero gradient, so the remaining terms can pull the state
/// back in front.
pub const BEHIND_CAMERA_PENALTY: f64 = 1e4;

/// Weights of the loss terms. Shape defaults follow `w_mask = 1`,
/// `w_keypoint = 100`; pose defaults set mask, distance, and appearance
/// weights to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub mask: f64,
    pub keypoint: f64,
    pub dist: f64,
    pub appearance: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { mask: 1.0, keypoint: 0.0, dist: 0.0, appearance: 0.0 }
    }
}

impl LossWeights {
    pub fn shape_defaults() -> Self {
        LossWeights { mask: 1.0, keypoint: 100.0, dist: 0.0, appearance: 0.0 }
    }

    pub fn pose_defaults() -> Self {
        LossWeights { mask: 1.0, keypoint: 0.0, dist: 1.0, appearance: 1.0 }
    }

    pub fn validate(&self) -> Result<(), String> {
        let all = [self.mask, self.keypoint, self.dist, self.appearance];
        if all.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(format!("loss weights must be nonnegative and finite: {self:?}"));
        }
        if all.iter().all(|&w| w == 0.0) {
            return Err("at least one loss weight must be positive".into());
        }
        Ok(())
    }
}

/// Sum of squared per-pixel differences between the rendered silhouette and
/// the binary reference mask.
pub fn mask_loss<'t>(tape: &'t Tape, silhouette: Var<'t>, mask: &MaskImage) -> Var<'t> {
    let (h, w) = silhouette.shape();
    assert_eq!(
        (h, w),
        (mask.height(), mask.width()),
        "mask loss dimension mismatch: render {h}x{w} vs mask {}x{}",
        mask.height(),
        mask.width()
    );
    let m = tape.constant(mask.to_value());
    silhouette.sub(m).square().sum()
}

pub struct KeypointLoss<'t> {
    pub value: Var<'t>,
    /// Keypoints whose 3D curve point fell behind the near plane this pass.
    pub behind_camera: usize,
}

/// Sum of pixel distances between projected curve points `p(s_i)` and the
/// 2D keypoints extracted from the reference centerline.
pub fn keypoint_loss<'t>(
    tape: &'t Tape,
    curve: &BezierVars<'t>,
    cam: &CameraModel,
    keypoints: &[(f64, [f64; 2])],
) -> KeypointLoss<'t> {
    assert!(!keypoints.is_empty(), "keypoint loss needs at least one keypoint");
    let mut acc = tape.scalar(0.0);
    let mut behind = 0;
    for &(s, target) in keypoints {
        let p = bezier_point(curve, s);
        match project_var(tape, cam, p) {
            Ok(uv) => {
                let t = tape.constant(crate::autodiff::Value::row(target.to_vec()));
                acc = acc.add(uv.sub(t).norm());
            }
            Err(_) => {
                behind += 1;
                acc = acc.add(tape.scalar(BEHIND_CAMERA_PENALTY));
            }
        }
    }
    KeypointLoss { value: acc, behind_camera: behind }
}

pub struct ShapeLoss<'t> {
    pub total: Var<'t>,
    pub mask: Var<'t>,
    pub keypoint: Var<'t>,
    pub behind_camera: usize,
}

/// Weighted shape objective. A zero keypoint weight (or an empty keypoint
/// list) reduces it to the mask term.
pub fn shape_loss<'t>(
    tape: &'t Tape,
    silhouette: Var<'t>,
    mask: &MaskImage,
    curve: &BezierVars<'t>,
    cam: &CameraModel,
    keypoints: &[(f64, [f64; 2])],
    weights: &LossWeights,
) -> ShapeLoss<'t> {
    let mask_term = mask_loss(tape, silhouette, mask);
    let (kp_term, behind) = if weights.keypoint > 0.0 && !keypoints.is_empty() {
        let kp = keypoint_loss(tape, curve, cam, keypoints);
        (kp.value, kp.behind_camera)
    } else {
        (tape.scalar(0.0), 0)
    };
    let total = mask_term.scale(weights.mask).add(kp_term.scale(weights.keypoint));
    ShapeLoss { total, mask: mask_term, keypoint: kp_term, behind_camera: behind }
}

/// Silhouette mass falling on nonzero entries of the reference distance map:
/// `sum_ij S(i,j) * D(i,j)`.
pub fn dist_loss<'t>(tape: &'t Tape, silhouette: Var<'t>, dist: &DistanceMap) -> Var<'t> {
    let (h, w) = silhouette.shape();
    assert_eq!(
        (h, w),
        (dist.height(), dist.width()),
        "distance loss dimension mismatch: render {h}x{w} vs map {}x{}",
        dist.height(),
        dist.width()
    );
    let d = tape.constant(dist.to_value());
    silhouette.mul(d).sum()
}

/// Absolute difference of total positive mass between render and reference:
/// `| sum S - sum M |`, with a zero subgradient at exact equality.
pub fn appearance_loss<'t>(_tape: &'t Tape, silhouette: Var<'t>, mask: &MaskImage) -> Var<'t> {
    let (h, w) = silhouette.shape();
    assert_eq!(
        (h, w),
        (mask.height(), mask.width()),
        "appearance loss dimension mismatch: render {h}x{w} vs mask {}x{}",
        mask.height(),
        mask.width()
    );
    silhouette.sum().offset(-(mask.count_positive() as f64)).abs()
}

pub struct PoseLoss<'t> {
    pub total: Var<'t>,
    pub mask: Var<'t>,
    pub dist: Var<'t>,
    pub appearance: Var<'t>,
}

/// Weighted pose objective over mask, distance, and appearance terms.
pub fn pose_loss<'t>(
    tape: &'t Tape,
    silhouette: Var<'t>,
    mask: &MaskImage,
    dist: &DistanceMap,
    weights: &LossWeights,
) -> PoseLoss<'t> {
    let mask_term = mask_loss(tape, silhouette, mask);
    let dist_term = if weights.dist > 0.0 { dist_loss(tape, silhouette, dist) } else { tape.scalar(0.0) };
    let app_term =
        if weights.appearance > 0.0 { appearance_loss(tape, silhouette, mask) } else { tape.scalar(0.0) };
    let total = mask_term
        .scale(weights.mask)
        .add(dist_term.scale(weights.dist))
        .add(app_term.scale(weights.appearance));
    PoseLoss { total, mask: mask_term, dist: dist_term, appearance: app_term }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{diff_fn, grad_check, Value};
    use crate::geometry::BezierState;
    use crate::imageproc::distance_map;

    fn cam() -> CameraModel {
        CameraModel { fx: 100.0, fy: 100.0, cx: 8.0, cy: 8.0, width: 16, height: 16 }
    }

    fn checkerboard(w: usize, h: usize) -> MaskImage {
        MaskImage::from_fn(w, h, |i, j| (i + j) % 2 == 0)
    }

    #[test]
    fn mask_loss_zero_on_exact_match() {
        let tape = Tape::new();
        let m = checkerboard(16, 16);
        let s = tape.leaf(m.to_value());
        assert_eq!(mask_loss(&tape, s, &m).scalar_value(), 0.0);
    }

    #[test]
    fn mask_loss_counts_unit_errors() {
        let tape = Tape::new();
        let m = checkerboard(16, 16);
        let k = m.count_positive() as f64;
        let s = tape.leaf(Value::zeros(16, 16));
        assert_eq!(mask_loss(&tape, s, &m).scalar_value(), k);
    }

    #[test]
    fn mask_loss_gradient_is_two_residual() {
        let tape = Tape::new();
        let m = checkerboard(4, 4);
        let data: Vec<f64> = (0..16).map(|k| k as f64 / 16.0).collect();
        let s = tape.leaf(Value::new(data.clone(), 4, 4));
        let loss = mask_loss(&tape, s, &m);
        tape.backward(loss);
        let g = s.grad();
        for (k, gk) in g.iter().enumerate() {
            let want = 2.0 * (data[k] - m.to_value().data()[k]);
            assert!((gk - want).abs() < 1e-12);
        }
    }

    #[test]
    #[should_panic(expected = "dimension mismatch")]
    fn mask_loss_dimension_mismatch_rejected() {
        let tape = Tape::new();
        let m = checkerboard(8, 8);
        let s = tape.leaf(Value::zeros(4, 4));
        let _ = mask_loss(&tape, s, &m);
    }

    #[test]
    fn keypoint_loss_pythagorean_example() {
        // One keypoint whose projection lands at (10, 10), target (13, 14).
        let c = cam();
        let tape = Tape::new();
        let z = 1.0;
        let tip = [(10.0 - c.cx) / c.fx * z, (10.0 - c.cy) / c.fy * z, z];
        let state = BezierState::new([[0.0, 0.0, 1.0], [0.01, 0.0, 1.0], tip], vec![0.01; 2]);
        let vars = BezierVars::from_state(&tape, &state);
        let kp = keypoint_loss(&tape, &vars, &c, &[(1.0, [13.0, 14.0])]);
        assert!((kp.value.scalar_value() - 5.0).abs() < 1e-12);
        assert_eq!(kp.behind_camera, 0);
    }

    #[test]
    fn keypoint_loss_zero_on_exact_projection() {
        let c = cam();
        let tape = Tape::new();
        let state =
            BezierState::new([[0.0, 0.0, 1.0], [0.05, 0.02, 1.1], [0.1, -0.03, 1.2]], vec![0.01; 2]);
        let vars = BezierVars::from_state(&tape, &state);
        let targets: Vec<(f64, [f64; 2])> = [0.25, 0.5, 0.75, 1.0]
            .iter()
            .map(|&s| (s, c.project(state.point(s)).unwrap()))
            .collect();
        let kp = keypoint_loss(&tape, &vars, &c, &targets);
        assert_eq!(kp.value.scalar_value(), 0.0);
    }

    #[test]
    fn keypoint_behind_camera_penalized_with_zero_gradient() {
        let c = cam();
        let tape = Tape::new();
        let state =
            BezierState::new([[0.0, 0.0, 1.0], [0.0, 0.0, 0.4], [0.0, 0.0, -0.5]], vec![0.01; 2]);
        let vars = BezierVars::from_state(&tape, &state);
        let kp = keypoint_loss(&tape, &vars, &c, &[(1.0, [5.0, 5.0])]);
        assert_eq!(kp.behind_camera, 1);
        assert_eq!(kp.value.scalar_value(), BEHIND_CAMERA_PENALTY);
        tape.backward(kp.value);
        assert!(vars.c2.grad().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn keypoint_gradient_matches_finite_differences() {
        let c = cam();
        let targets = vec![(0.5, [6.0, 9.0]), (1.0, [11.0, 4.0])];
        let f = diff_fn(move |t, x| {
            let e = |k: usize| {
                let mut b = [0.0; 3];
                b[k] = 1.0;
                t.constant(Value::vec3(b))
            };
            let pick3 = |off: usize| {
                e(0).mul(x.index(off))
                    .add(e(1).mul(x.index(off + 1)))
                    .add(e(2).mul(x.index(off + 2)))
            };
            let vars = BezierVars {
                c0: pick3(0),
                c1: pick3(3),
                c2: pick3(6),
                radius_raw: t.leaf(Value::row(vec![-2.0, -2.0])),
            };
            keypoint_loss(t, &vars, &c, &targets).value
        });
        let x0 = [0.0, 0.0, 1.0, 0.04, 0.02, 1.05, 0.09, -0.02, 1.15];
        let err = grad_check(f, &x0, 1e-6);
        assert!(err < 1e-4, "keypoint gradient mismatch: {err}");
    }

    #[test]
    fn dist_loss_supported_inside_mask_is_zero() {
        let tape = Tape::new();
        let m = MaskImage::from_fn(16, 16, |i, j| (4..12).contains(&i) && (4..12).contains(&j));
        let d = distance_map(&m, 1.0).unwrap();
        // Silhouette strictly inside the mask support.
        let s = tape.leaf(
            MaskImage::from_fn(16, 16, |i, j| (6..10).contains(&i) && (6..10).contains(&j))
                .to_value(),
        );
        assert_eq!(dist_loss(&tape, s, &d).scalar_value(), 0.0);
    }

    #[test]
    fn dist_loss_gradient_is_the_map() {
        let tape = Tape::new();
        let m = MaskImage::from_fn(8, 8, |i, j| i == 4 && j == 4);
        let d = distance_map(&m, 100.0).unwrap();
        let s = tape.leaf(Value::new(vec![0.25; 64], 8, 8));
        let loss = dist_loss(&tape, s, &d);
        tape.backward(loss);
        for (g, want) in s.grad().iter().zip(d.data()) {
            assert!((g - want).abs() < 1e-15);
        }
        // Single pixel with S = 1 on a D = 0.07 cell contributes 0.07.
        let tape2 = Tape::new();
        let mut sv = vec![0.0; 64];
        let cell = d.data().iter().position(|&x| x > 0.0).unwrap();
        sv[cell] = 1.0;
        let s2 = tape2.leaf(Value::new(sv, 8, 8));
        let got = dist_loss(&tape2, s2, &d).scalar_value();
        assert!((got - d.data()[cell]).abs() < 1e-15);
    }

    #[test]
    fn appearance_loss_counts_mass_difference() {
        let tape = Tape::new();
        let m = checkerboard(10, 10); // 50 positives
        let s = tape.leaf(Value::new(vec![0.7; 100], 10, 10)); // mass 70
        let loss = appearance_loss(&tape, s, &m);
        assert!((loss.scalar_value() - 20.0).abs() < 1e-9);
        tape.backward(loss);
        assert!(s.grad().iter().all(|&g| (g - 1.0).abs() < 1e-12));
    }

    #[test]
    fn appearance_loss_zero_at_equality_with_zero_subgradient() {
        let tape = Tape::new();
        let m = checkerboard(10, 10);
        let s = tape.leaf(m.to_value());
        let loss = appearance_loss(&tape, s, &m);
        assert_eq!(loss.scalar_value(), 0.0);
        tape.backward(loss);
        assert!(s.grad().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn combined_losses_are_linear_in_weights() {
        let c = cam();
        let m = checkerboard(16, 16);
        let d = distance_map(&m, 100.0).unwrap();
        let eval = |weights: &LossWeights| {
            let tape = Tape::new();
            let s = tape.leaf(Value::new(vec![0.3; 256], 16, 16));
            pose_loss(&tape, s, &m, &d, weights).total.scalar_value()
        };
        let base = LossWeights::pose_defaults();
        let doubled = LossWeights { mask: 2.0, keypoint: 0.0, dist: 2.0, appearance: 2.0 };
        assert!((2.0 * eval(&base) - eval(&doubled)).abs() < 1e-9);

        let mask_only = LossWeights { mask: 1.0, keypoint: 0.0, dist: 0.0, appearance: 0.0 };
        let tape = Tape::new();
        let s = tape.leaf(Value::new(vec![0.3; 256], 16, 16));
        let m_only = pose_loss(&tape, s, &m, &d, &mask_only);
        let plain = mask_loss(&tape, s, &m);
        assert_eq!(m_only.total.scalar_value(), plain.scalar_value());
        let _ = c;
    }

    #[test]
    fn weight_validation() {
        assert!(LossWeights::shape_defaults().validate().is_ok());
        assert!(LossWeights { mask: -1.0, ..LossWeights::default() }.validate().is_err());
        assert!(LossWeights { mask: 0.0, keypoint: 0.0, dist: 0.0, appearance: 0.0 }
            .validate()
            .is_err());
    }
}
