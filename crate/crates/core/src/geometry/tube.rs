//! Tubular surface mesh swept along the Bézier centerline.

use std::f64::consts::PI;

use crate::autodiff::{concat_rows, Tape, Var};

use super::bezier::{bezier_point, frenet_frame, BezierState, BezierVars};
use super::mesh::{TapeMesh, TriangleMesh};

/// Differentiable point on the tubular surface:
/// `S(s, phi) = p(s) + r(s) * (-N(s) cos(phi) + B(s) sin(phi))`.
///
/// `r(s)` interpolates linearly between the radii of the two discretized
/// rings bracketing `s`.
pub fn tube_surface_point<'t>(
    tape: &'t Tape,
    curve: &BezierVars<'t>,
    s: f64,
    phi: f64,
) -> Var<'t> {
    assert!((0.0..=1.0).contains(&s), "tube parameter {s} outside [0, 1]");
    let frame = frenet_frame(tape, curve, s);
    let p = bezier_point(curve, s);
    let r = radius_at(curve, s);
    let dir = frame.normal.scale(-phi.cos()).add(frame.binormal.scale(phi.sin()));
    p.add(dir.mul(r))
}

/// Radius at parameter `s`, linearly interpolated over the profile rings.
pub fn radius_at<'t>(curve: &BezierVars<'t>, s: f64) -> Var<'t> {
    let radii = curve.radii();
    let n = radii.shape().1;
    interp_radius(radii, n, s)
}

fn interp_radius(radii: Var<'_>, n: usize, s: f64) -> Var<'_> {
    if n == 1 {
        return radii.index(0);
    }
    let x = s * (n - 1) as f64;
    let i = (x.floor() as usize).min(n - 2);
    let frac = x - i as f64;
    if frac == 0.0 {
        radii.index(i)
    } else {
        radii.index(i).scale(1.0 - frac).add(radii.index(i + 1).scale(frac))
    }
}

/// Sweep the curve into a watertight tube mesh.
///
/// Vertices: `n_s * n_phi` ring points plus the two curve endpoints, giving
/// `n_s * n_phi + 2` in total. Rings sit at evenly spaced parameters
/// including both endpoints; ring `i` uses `radius_profile[i]` directly, so
/// the profile length must equal `n_s`. Faces: two triangles per side quad
/// and a fan of `n_phi` triangles per end cap, wound outward.
pub fn build_tube_mesh<'t>(
    tape: &'t Tape,
    curve: &BezierVars<'t>,
    n_s: usize,
    n_phi: usize,
) -> TapeMesh<'t> {
    assert!(n_s >= 2, "tube needs at least 2 rings, got {n_s}");
    assert!(n_phi >= 3, "tube needs at least 3 points per ring, got {n_phi}");
    let profile_len = curve.radius_raw.shape().1;
    assert_eq!(
        profile_len, n_s,
        "radius profile length {profile_len} does not match ring count {n_s}"
    );

    let radii = curve.radii();
    let mut parts: Vec<Var<'t>> = Vec::with_capacity(n_s * n_phi + 2);
    let mut centers: Vec<Var<'t>> = Vec::with_capacity(2);

    for i in 0..n_s {
        let s = i as f64 / (n_s - 1) as f64;
        let frame = frenet_frame(tape, curve, s);
        let p = bezier_point(curve, s);
        if i == 0 || i == n_s - 1 {
            centers.push(p);
        }
        let r = radii.index(i);
        for j in 0..n_phi {
            let phi = 2.0 * PI * j as f64 / n_phi as f64;
            let dir = frame.normal.scale(-phi.cos()).add(frame.binormal.scale(phi.sin()));
            parts.push(p.add(dir.mul(r)));
        }
    }
    // The two additional vertices at the curve ends.
    parts.push(centers[0]);
    parts.push(centers[1]);

    let vertices = concat_rows(tape, &parts);
    let faces = tube_faces(n_s, n_phi);
    TapeMesh { vertices, faces }
}

/// Face index layout shared by the differentiable and plain constructions.
pub fn tube_faces(n_s: usize, n_phi: usize) -> Vec<[usize; 3]> {
    let ring = |i: usize, j: usize| i * n_phi + (j % n_phi);
    let base = n_s * n_phi;
    let tip = base + 1;
    let mut faces = Vec::with_capacity(2 * n_phi * (n_s - 1) + 2 * n_phi);
    for i in 0..n_s - 1 {
        for j in 0..n_phi {
            let a = ring(i, j);
            let b = ring(i, j + 1);
            let c = ring(i + 1, j);
            let d = ring(i + 1, j + 1);
            faces.push([a, c, d]);
            faces.push([a, d, b]);
        }
    }
    for j in 0..n_phi {
        faces.push([base, ring(0, j), ring(0, j + 1)]);
        faces.push([tip, ring(n_s - 1, j + 1), ring(n_s - 1, j)]);
    }
    faces
}

/// Plain (value-only) tube mesh for synthetic data and metrics.
pub fn build_tube_mesh_plain(state: &BezierState, n_s: usize, n_phi: usize) -> TriangleMesh {
    let tape = Tape::new();
    let vars = BezierVars::from_state(&tape, state);
    build_tube_mesh(&tape, &vars, n_s, n_phi).to_mesh()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{diff_fn, grad_check};
    use crate::autodiff::Value;
    use approx::assert_abs_diff_eq;

    fn curved_state(n_s: usize) -> BezierState {
        BezierState::new(
            [[0.0, 0.0, 0.0], [0.0, 1.0, 0.2], [1.0, 1.0, 0.5]],
            (0..n_s).map(|i| 0.1 - 0.04 * i as f64 / (n_s.max(2) - 1) as f64).collect(),
        )
    }

    #[test]
    fn surface_point_at_phi_zero_is_minus_normal() {
        let tape = Tape::new();
        let state = curved_state(5);
        let vars = BezierVars::from_state(&tape, &state);
        let s = 0.5;
        let p = bezier_point(&vars, s).vec3_value();
        let f = frenet_frame(&tape, &vars, s);
        let n = f.normal.vec3_value();
        let r = radius_at(&vars, s).scalar_value();
        let sp = tube_surface_point(&tape, &vars, s, 0.0).vec3_value();
        for k in 0..3 {
            assert_abs_diff_eq!(sp[k], p[k] - r * n[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn surface_point_at_quarter_turn_is_binormal() {
        let tape = Tape::new();
        let state = curved_state(5);
        let vars = BezierVars::from_state(&tape, &state);
        let s = 0.25;
        let p = bezier_point(&vars, s).vec3_value();
        let f = frenet_frame(&tape, &vars, s);
        let b = f.binormal.vec3_value();
        let r = radius_at(&vars, s).scalar_value();
        let sp = tube_surface_point(&tape, &vars, s, std::f64::consts::FRAC_PI_2).vec3_value();
        for k in 0..3 {
            assert_abs_diff_eq!(sp[k], p[k] + r * b[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn surface_points_lie_at_radius_from_centerline() {
        let tape = Tape::new();
        let state = curved_state(7);
        let vars = BezierVars::from_state(&tape, &state);
        let mut rng_s = 0.123_f64;
        for _ in 0..100 {
            // Cheap deterministic pseudo-random sweep of (s, phi).
            rng_s = (rng_s * 9301.0 + 49297.0) % 233280.0;
            let s = rng_s / 233280.0;
            let phi = 2.0 * PI * ((rng_s * 7.0) % 233280.0) / 233280.0;
            let p = bezier_point(&vars, s).vec3_value();
            let sp = tube_surface_point(&tape, &vars, s, phi).vec3_value();
            let r = radius_at(&vars, s).scalar_value();
            let d = ((sp[0] - p[0]).powi(2) + (sp[1] - p[1]).powi(2) + (sp[2] - p[2]).powi(2))
                .sqrt();
            assert_abs_diff_eq!(d, r, epsilon = 1e-10);
        }
    }

    #[test]
    fn paper_resolution_vertex_count() {
        let mesh = build_tube_mesh_plain(&curved_state(100), 100, 40);
        assert_eq!(mesh.vertices.len(), 4002);
        assert_eq!(mesh.faces.len(), 2 * 40 * 99 + 2 * 40);
    }

    #[test]
    fn minimal_tube_counts_and_watertightness() {
        let mesh = build_tube_mesh_plain(&curved_state(2), 2, 3);
        assert_eq!(mesh.vertices.len(), 8);
        assert_eq!(mesh.faces.len(), 12);
        assert!(mesh.is_watertight());
    }

    #[test]
    fn tubes_are_watertight_across_resolutions() {
        for (n_s, n_phi) in [(2, 3), (3, 4), (5, 8), (10, 12)] {
            let mesh = build_tube_mesh_plain(&curved_state(n_s), n_s, n_phi);
            assert!(mesh.is_watertight(), "leaky tube at ns={n_s} nphi={n_phi}");
            assert!(mesh.signed_volume() > 0.0, "inward winding at ns={n_s} nphi={n_phi}");
        }
    }

    #[test]
    fn straight_tube_volume_matches_cylinder() {
        let n_s = 30;
        let state = BezierState::new(
            [[0.0, 0.0, 0.0], [0.0, 0.0, 0.5], [0.0, 0.0, 1.0]],
            vec![0.1; n_s],
        );
        let mesh = build_tube_mesh_plain(&state, n_s, 64);
        let analytic = PI * 0.1 * 0.1 * 1.0;
        let got = mesh.signed_volume();
        assert!((got - analytic).abs() / analytic < 0.01, "volume {got} vs {analytic}");
    }

    #[test]
    fn translation_equivariance() {
        let state = curved_state(4);
        let shift = [0.3, -1.2, 2.5];
        let mut moved = state.clone();
        for c in moved.control_points.iter_mut() {
            for k in 0..3 {
                c[k] += shift[k];
            }
        }
        let a = build_tube_mesh_plain(&state, 4, 6);
        let b = build_tube_mesh_plain(&moved, 4, 6);
        for (va, vb) in a.vertices.iter().zip(&b.vertices) {
            for k in 0..3 {
                assert_abs_diff_eq!(va[k] + shift[k], vb[k], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn vertex_gradients_match_finite_differences() {
        // Weighted sum of all tube vertices as a scalar function of the
        // control points and raw radii.
        let n_s = 3;
        let n_phi = 4;
        let f = diff_fn(move |t, x| {
            let e = |k: usize| {
                let mut basis = [0.0; 3];
                basis[k] = 1.0;
                t.constant(Value::vec3(basis))
            };
            let pick3 = |off: usize| {
                e(0).mul(x.index(off)).add(e(1).mul(x.index(off + 1))).add(e(2).mul(x.index(off + 2)))
            };
            let raw = {
                let parts: Vec<Var<'_>> = (0..n_s).map(|i| x.index(9 + i)).collect();
                // Assemble a 1xn row by scaling one-hot constant rows.
                let mut acc = t.constant(Value::row(vec![0.0; n_s]));
                for (i, p) in parts.iter().enumerate() {
                    let mut basis = vec![0.0; n_s];
                    basis[i] = 1.0;
                    acc = acc.add(t.constant(Value::row(basis)).mul(*p));
                }
                acc
            };
            let vars = BezierVars { c0: pick3(0), c1: pick3(3), c2: pick3(6), radius_raw: raw };
            let mesh = build_tube_mesh(t, &vars, n_s, n_phi);
            let w: Vec<f64> = (0..mesh.vertices.shape().0 * 3)
                .map(|k| ((k * 2654435761_usize) % 1000) as f64 / 1000.0 - 0.5)
                .collect();
            let rows = mesh.vertices.shape().0;
            mesh.vertices.mul(t.constant(Value::new(w, rows, 3))).sum()
        });
        let x0 = [
            0.0, 0.0, 0.0, 0.05, 0.9, 0.3, 1.1, 0.8, 0.4, // control points
            -1.8, -2.0, -2.2, // raw radii (softplus ~ 0.15..0.1)
        ];
        let err = grad_check(f, &x0, 1e-6);
        assert!(err < 1e-5, "tube vertex gradient mismatch: {err}");
    }
}
