//! Quadratic Bézier centerline and its Frenet–Serret frames.

use serde::{Deserialize, Serialize};

use crate::autodiff::{inverse_softplus, Tape, Value, Var};

/// State of the soft continuum arm: three control points and the radius of
/// each discretized cross section (base to tip, endpoints included).
///
/// Radii are strictly positive; during optimization they are stored as
/// unconstrained reals and mapped through softplus (see [`BezierVars`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BezierState {
    pub control_points: [[f64; 3]; 3],
    pub radius_profile: Vec<f64>,
}

impl BezierState {
    pub fn new(control_points: [[f64; 3]; 3], radius_profile: Vec<f64>) -> Self {
        let state = BezierState { control_points, radius_profile };
        state.validate().expect("invalid BezierState");
        state
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.radius_profile.is_empty() {
            return Err("radius profile is empty".into());
        }
        if let Some(r) = self.radius_profile.iter().find(|r| !(**r > 0.0)) {
            return Err(format!("radius profile entry {r} is not positive"));
        }
        Ok(())
    }

    /// Curve point by direct evaluation.
    pub fn point(&self, s: f64) -> [f64; 3] {
        assert!((0.0..=1.0).contains(&s), "bezier parameter {s} outside [0, 1]");
        let [c0, c1, c2] = self.control_points;
        let w0 = (1.0 - s) * (1.0 - s);
        let w1 = 2.0 * (1.0 - s) * s;
        let w2 = s * s;
        [
            w0 * c0[0] + w1 * c1[0] + w2 * c2[0],
            w0 * c0[1] + w1 * c1[1] + w2 * c2[1],
            w0 * c0[2] + w1 * c1[2] + w2 * c2[2],
        ]
    }

    /// First and second derivatives with respect to the curve parameter.
    pub fn derivatives(&self, s: f64) -> ([f64; 3], [f64; 3]) {
        assert!((0.0..=1.0).contains(&s), "bezier parameter {s} outside [0, 1]");
        let [c0, c1, c2] = self.control_points;
        let mut d1 = [0.0; 3];
        let mut d2 = [0.0; 3];
        for k in 0..3 {
            d1[k] = 2.0 * (1.0 - s) * (c1[k] - c0[k]) + 2.0 * s * (c2[k] - c1[k]);
            d2[k] = 2.0 * (c2[k] - 2.0 * c1[k] + c0[k]);
        }
        (d1, d2)
    }

    /// Polyline approximation of the curve length.
    pub fn curve_length(&self, samples: usize) -> f64 {
        let mut len = 0.0;
        let mut prev = self.point(0.0);
        for i in 1..=samples {
            let p = self.point(i as f64 / samples as f64);
            len += dist3(prev, p);
            prev = p;
        }
        len
    }
}

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Tape-bound curve parameters: control points as `(1, 3)` leaves and the
/// radius profile as one `(1, n)` leaf of pre-softplus values.
pub struct BezierVars<'t> {
    pub c0: Var<'t>,
    pub c1: Var<'t>,
    pub c2: Var<'t>,
    pub radius_raw: Var<'t>,
}

impl<'t> BezierVars<'t> {
    pub fn from_state(tape: &'t Tape, state: &BezierState) -> Self {
        let [c0, c1, c2] = state.control_points;
        let raw: Vec<f64> = state.radius_profile.iter().map(|&r| inverse_softplus(r)).collect();
        BezierVars {
            c0: tape.leaf(Value::vec3(c0)),
            c1: tape.leaf(Value::vec3(c1)),
            c2: tape.leaf(Value::vec3(c2)),
            radius_raw: tape.leaf(Value::row(raw)),
        }
    }

    /// Positive cross-section radii.
    pub fn radii(&self) -> Var<'t> {
        self.radius_raw.softplus()
    }

    /// Snapshot current values back into a plain state.
    pub fn to_state(&self) -> BezierState {
        let radii = self.radii();
        let profile = radii.with_value(|v| v.data().to_vec());
        BezierState {
            control_points: [self.c0.vec3_value(), self.c1.vec3_value(), self.c2.vec3_value()],
            radius_profile: profile,
        }
    }
}

/// Differentiable curve point `p(s)`.
pub fn bezier_point<'t>(curve: &BezierVars<'t>, s: f64) -> Var<'t> {
    assert!((0.0..=1.0).contains(&s), "bezier parameter {s} outside [0, 1]");
    let w0 = (1.0 - s) * (1.0 - s);
    let w1 = 2.0 * (1.0 - s) * s;
    let w2 = s * s;
    curve.c0.scale(w0).add(curve.c1.scale(w1)).add(curve.c2.scale(w2))
}

/// Differentiable first and second curve derivatives.
pub fn bezier_derivatives<'t>(curve: &BezierVars<'t>, s: f64) -> (Var<'t>, Var<'t>) {
    assert!((0.0..=1.0).contains(&s), "bezier parameter {s} outside [0, 1]");
    let d1 = curve
        .c1
        .sub(curve.c0)
        .scale(2.0 * (1.0 - s))
        .add(curve.c2.sub(curve.c1).scale(2.0 * s));
    let d2 = curve.c2.sub(curve.c1.scale(2.0)).add(curve.c0).scale(2.0);
    (d1, d2)
}

/// Relative threshold for a vanishing `p' x p''`: below it the Frenet normal
/// is undefined and a fallback frame is used.
pub const FRAME_DEGENERACY_TOL: f64 = 1e-9;

/// Orthonormal frame along the curve. `degenerate` marks frames built by the
/// fallback rule for straight or near-straight curves.
pub struct FrenetFrame<'t> {
    pub tangent: Var<'t>,
    pub normal: Var<'t>,
    pub binormal: Var<'t>,
    pub degenerate: bool,
}

/// Frenet–Serret frame at parameter `s`.
///
/// Non-degenerate: `T = p'/|p'|`, `B = (p' x p'')/|p' x p''|`, `N = B x T`.
/// Degenerate (collinear control points): `N` comes from projecting a global
/// up axis out of `T`, switching to the y axis when `T` is within 1e-6 of
/// the up axis itself.
pub fn frenet_frame<'t>(tape: &'t Tape, curve: &BezierVars<'t>, s: f64) -> FrenetFrame<'t> {
    let (d1, d2) = bezier_derivatives(curve, s);
    let speed_sq = {
        let v = d1.vec3_value();
        v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
    };

    // Vanishing speed (coincident control points at an endpoint): no tangent
    // direction exists at all. Use the chord as a fixed fallback tangent.
    if speed_sq < 1e-12 {
        let a = curve.c0.vec3_value();
        let b = curve.c2.vec3_value();
        let chord = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let len = (chord[0] * chord[0] + chord[1] * chord[1] + chord[2] * chord[2]).sqrt();
        let t = if len > 1e-12 {
            [chord[0] / len, chord[1] / len, chord[2] / len]
        } else {
            [1.0, 0.0, 0.0]
        };
        let tangent = tape.constant(Value::vec3(t));
        let up = if t[2].abs() > 1.0 - 1e-6 { [0.0, 1.0, 0.0] } else { [0.0, 0.0, 1.0] };
        let up = tape.constant(Value::vec3(up));
        let proj = up.sub(tangent.mul(up.dot(tangent)));
        let normal = proj.div(proj.norm());
        let binormal = tangent.cross(normal);
        return FrenetFrame { tangent, normal, binormal, degenerate: true };
    }

    let tangent = d1.div(d1.norm());

    let cross = d1.cross(d2);
    let cv = cross.vec3_value();
    let cross_mag = (cv[0] * cv[0] + cv[1] * cv[1] + cv[2] * cv[2]).sqrt();

    if cross_mag >= FRAME_DEGENERACY_TOL * speed_sq {
        let binormal = cross.div(cross.norm());
        let normal = binormal.cross(tangent);
        FrenetFrame { tangent, normal, binormal, degenerate: false }
    } else {
        let t = tangent.vec3_value();
        let up = if t[2].abs() > 1.0 - 1e-6 { [0.0, 1.0, 0.0] } else { [0.0, 0.0, 1.0] };
        let up = tape.constant(Value::vec3(up));
        let proj = up.sub(tangent.mul(up.dot(tangent)));
        let normal = proj.div(proj.norm());
        let binormal = tangent.cross(normal);
        FrenetFrame { tangent, normal, binormal, degenerate: true }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sample_state() -> BezierState {
        BezierState::new(
            [[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]],
            vec![0.1; 5],
        )
    }

    #[test]
    fn endpoints_interpolate_control_points() {
        let s = sample_state();
        assert_eq!(s.point(0.0), [0.0, 0.0, 0.0]);
        assert_eq!(s.point(1.0), [1.0, 1.0, 0.0]);
    }

    #[test]
    fn midpoint_evaluation() {
        let s = sample_state();
        let p = s.point(0.5);
        assert_abs_diff_eq!(p[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(p[2], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn derivative_at_zero_is_twice_first_leg() {
        let s = sample_state();
        let (d1, _) = s.derivatives(0.0);
        assert_eq!(d1, [0.0, 2.0, 0.0]);
    }

    #[test]
    fn second_derivative_is_constant() {
        let s = sample_state();
        let (_, a) = s.derivatives(0.0);
        let (_, b) = s.derivatives(0.73);
        assert_eq!(a, [2.0, -2.0, 0.0]);
        assert_eq!(a, b);
    }

    #[test]
    fn collinear_points_have_zero_second_derivative() {
        let s = BezierState::new(
            [[0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [2.0, 2.0, 2.0]],
            vec![0.1],
        );
        let (_, d2) = s.derivatives(0.4);
        assert_eq!(d2, [0.0, 0.0, 0.0]);
    }

    #[test]
    fn tape_point_matches_plain_evaluation() {
        let state = sample_state();
        let tape = Tape::new();
        let vars = BezierVars::from_state(&tape, &state);
        for s in [0.0, 0.21, 0.5, 0.99, 1.0] {
            let p = bezier_point(&vars, s).vec3_value();
            let q = state.point(s);
            for k in 0..3 {
                assert_abs_diff_eq!(p[k], q[k], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn frame_at_example_curve_start() {
        let state = sample_state();
        let tape = Tape::new();
        let vars = BezierVars::from_state(&tape, &state);
        let f = frenet_frame(&tape, &vars, 0.0);
        assert!(!f.degenerate);
        let t = f.tangent.vec3_value();
        let n = f.normal.vec3_value();
        let b = f.binormal.vec3_value();
        for (got, want) in [(t, [0.0, 1.0, 0.0]), (n, [1.0, 0.0, 0.0]), (b, [0.0, 0.0, -1.0])] {
            for k in 0..3 {
                assert_abs_diff_eq!(got[k], want[k], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn planar_curve_binormal_is_plane_normal() {
        let state = sample_state();
        let tape = Tape::new();
        let vars = BezierVars::from_state(&tape, &state);
        for s in [0.1, 0.35, 0.8] {
            let f = frenet_frame(&tape, &vars, s);
            let b = f.binormal.vec3_value();
            assert_abs_diff_eq!(b[2].abs(), 1.0, epsilon = 1e-9);
            assert_abs_diff_eq!(b[0], 0.0, epsilon = 1e-9);
            assert_abs_diff_eq!(b[1], 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn straight_curve_falls_back_with_tangent_along_line() {
        let state = BezierState::new(
            [[0.0, 0.0, 0.0], [0.5, 0.0, 0.0], [1.0, 0.0, 0.0]],
            vec![0.1],
        );
        let tape = Tape::new();
        let vars = BezierVars::from_state(&tape, &state);
        let f = frenet_frame(&tape, &vars, 0.5);
        assert!(f.degenerate);
        let t = f.tangent.vec3_value();
        assert_abs_diff_eq!(t[0], 1.0, epsilon = 1e-12);
        // Fallback frame is still orthonormal.
        let n = f.normal.vec3_value();
        let b = f.binormal.vec3_value();
        let dot_tn: f64 = (0..3).map(|k| t[k] * n[k]).sum();
        let dot_tb: f64 = (0..3).map(|k| t[k] * b[k]).sum();
        assert_abs_diff_eq!(dot_tn, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dot_tb, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn vertical_straight_curve_uses_y_axis_fallback() {
        let state = BezierState::new(
            [[0.0, 0.0, 0.0], [0.0, 0.0, 0.5], [0.0, 0.0, 1.0]],
            vec![0.1],
        );
        let tape = Tape::new();
        let vars = BezierVars::from_state(&tape, &state);
        let f = frenet_frame(&tape, &vars, 0.5);
        assert!(f.degenerate);
        let n = f.normal.vec3_value();
        assert_abs_diff_eq!(n[1].abs(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn softplus_roundtrip_preserves_radii() {
        let state = sample_state();
        let tape = Tape::new();
        let vars = BezierVars::from_state(&tape, &state);
        let back = vars.to_state();
        for (a, b) in state.radius_profile.iter().zip(&back.radius_profile) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    #[should_panic(expected = "outside [0, 1]")]
    fn out_of_range_parameter_rejected() {
        sample_state().point(1.5);
    }
}
