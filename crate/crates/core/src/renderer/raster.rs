//! Soft silhouette rasterization with sigmoid blending.
//!
//! Per pixel `p`: `S(p) = 1 - prod_j (1 - D_j(p))` over faces whose padded
//! screen bounding box covers `p`, with
//! `D_j(p) = sigmoid(delta_j * d^2(p, face_j) / sigma)` where `d` is the
//! minimum screen-space distance from the pixel center to the triangle
//! boundary and `delta_j` is +1 inside, -1 outside. The whole render is one
//! tape primitive; its adjoint is derived in closed form below.
//!
//! Numerical policy: the blend saturates at `±LOGIT_CUT` — beyond the cut a
//! face contributes exactly 0 (far outside) or exactly 1 (deep inside), an
//! error below `sigmoid(-LOGIT_CUT) ~ 2e-9` with a zero slope that matches
//! the adjoint. Each face touches only pixels within
//! `sqrt(sigma * LOGIT_CUT)` of its screen bounding box. Once a pixel's
//! running product drops below `PROD_NEGLIGIBLE`, further factors cannot
//! change the rounded result (`1 - prod == 1.0` exactly) and are skipped;
//! the adjoint applies the matching skip.

use crate::autodiff::{CustomOp, Tape, Value, Var};
use crate::geometry::{TapeMesh, TriangleMesh};

use super::camera::{CameraModel, Z_NEAR};
use super::silhouette::SilhouetteImage;
use super::RenderError;

/// Blur area (pixels squared) used while optimizing.
pub const DEFAULT_SIGMA: f64 = 1.0;

/// Blur area for near-hard final / synthetic renders.
pub const HARD_SIGMA: f64 = 1e-2;

/// Sigmoid saturation cut on the blend logit.
pub const LOGIT_CUT: f64 = 20.0;

/// Below this running product, `1 - prod` rounds to exactly 1.0.
const PROD_NEGLIGIBLE: f64 = 1e-17;

/// Per-interaction adjoint contributions below this are dropped.
const GRAD_NEGLIGIBLE: f64 = 1e-18;

/// Screen triangles with twice-area magnitude below this are skipped.
const DEGENERATE_AREA2: f64 = 2e-12;

struct FaceGeom {
    verts: [usize; 3],
    uv: [[f64; 2]; 3],
    /// Inclusive pixel bounds (row0, row1, col0, col1).
    bounds: (usize, usize, usize, usize),
}

#[derive(Debug)]
struct RasterizeOp {
    cam: CameraModel,
    sigma: f64,
    faces: Vec<FaceGeom>,
    prod: Vec<f64>,
}

impl std::fmt::Debug for FaceGeom {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FaceGeom({:?})", self.verts)
    }
}

/// Render a camera-frame mesh to a `(height, width)` coverage node.
///
/// Faces with any vertex at or behind the near plane are culled whole;
/// screen-degenerate triangles are skipped; back faces are kept (silhouette
/// coverage is orientation-independent). An empty mesh renders all zeros.
pub fn render_silhouette<'t>(
    tape: &'t Tape,
    mesh: &TapeMesh<'t>,
    cam: &CameraModel,
    sigma: f64,
) -> Result<Var<'t>, RenderError> {
    if !(sigma > 0.0) {
        return Err(RenderError::InvalidSigma(sigma));
    }
    cam.validate()?;

    let (w, h) = (cam.width, cam.height);
    let (screen, zs) = mesh.vertices.with_value(|v| {
        let n = v.rows();
        let mut screen = vec![[0.0f64; 2]; n];
        let mut zs = vec![0.0f64; n];
        for i in 0..n {
            let p = [v.at(i, 0), v.at(i, 1), v.at(i, 2)];
            zs[i] = p[2];
            if let Some(uv) = cam.project(p) {
                screen[i] = uv;
            }
        }
        (screen, zs)
    });

    let pad = (sigma * LOGIT_CUT).sqrt();
    let mut faces = Vec::with_capacity(mesh.faces.len());
    for f in &mesh.faces {
        if f.iter().any(|&vi| zs[vi] <= Z_NEAR) {
            continue;
        }
        let uv = [screen[f[0]], screen[f[1]], screen[f[2]]];
        let area2 = (uv[1][0] - uv[0][0]) * (uv[2][1] - uv[0][1])
            - (uv[1][1] - uv[0][1]) * (uv[2][0] - uv[0][0]);
        if area2.abs() < DEGENERATE_AREA2 {
            continue;
        }
        let (min_u, max_u) = min_max(uv[0][0], uv[1][0], uv[2][0]);
        let (min_v, max_v) = min_max(uv[0][1], uv[1][1], uv[2][1]);
        // Pixel j center j + 0.5 lies in [lo, hi].
        let col0 = (min_u - pad - 0.5).ceil().max(0.0) as i64;
        let col1 = (max_u + pad - 0.5).floor().min(w as f64 - 1.0) as i64;
        let row0 = (min_v - pad - 0.5).ceil().max(0.0) as i64;
        let row1 = (max_v + pad - 0.5).floor().min(h as f64 - 1.0) as i64;
        if col0 > col1 || row0 > row1 || col1 < 0 || row1 < 0 {
            continue;
        }
        faces.push(FaceGeom {
            verts: *f,
            uv,
            bounds: (row0 as usize, row1 as usize, col0 as usize, col1 as usize),
        });
    }

    let mut prod = vec![1.0f64; w * h];
    for face in &faces {
        let (r0, r1, c0, c1) = face.bounds;
        for i in r0..=r1 {
            let pv = i as f64 + 0.5;
            let row = &mut prod[i * w..(i + 1) * w];
            for (j, slot) in row.iter_mut().enumerate().take(c1 + 1).skip(c0) {
                let p = *slot;
                if p < PROD_NEGLIGIBLE {
                    continue;
                }
                let pu = j as f64 + 0.5;
                let (inside, d2) = boundary_dist_sq(&face.uv, [pu, pv]);
                let delta = if inside { 1.0 } else { -1.0 };
                let logit = delta * d2 / sigma;
                if logit <= -LOGIT_CUT {
                    continue; // negligible far-outside contribution
                }
                *slot = if logit >= LOGIT_CUT { 0.0 } else { p * stable_sigmoid(-logit) };
            }
        }
    }

    let data: Vec<f64> = prod.iter().map(|&p| 1.0 - p).collect();
    let value = Value::new(data, h, w);
    let op = RasterizeOp { cam: *cam, sigma, faces, prod };
    Ok(tape.custom(&[mesh.vertices], value, Box::new(op)))
}

impl CustomOp for RasterizeOp {
    fn name(&self) -> &'static str {
        "rasterize"
    }

    fn backward(&self, out_grad: &[f64], _out: &Value, inputs: &[&Value]) -> Vec<Vec<f64>> {
        let verts = inputs[0];
        let n = verts.rows();
        let w = self.cam.width;
        // Screen-space adjoints (du, dv) per vertex, accumulated per face in
        // face-id order: deterministic by construction.
        let mut sg = vec![0.0f64; n * 2];

        for face in &self.faces {
            let mut corner = [[0.0f64; 2]; 3];
            let (r0, r1, c0, c1) = face.bounds;
            for i in r0..=r1 {
                let pv = i as f64 + 0.5;
                for j in c0..=c1 {
                    let idx = i * w + j;
                    let g = out_grad[idx];
                    let p = self.prod[idx];
                    if g == 0.0 || g.abs() * p < GRAD_NEGLIGIBLE {
                        continue;
                    }
                    let pu = j as f64 + 0.5;
                    let (inside, d2, k, t, diff) = boundary_dist_sq_argmin(&face.uv, [pu, pv]);
                    let delta = if inside { 1.0 } else { -1.0 };
                    if (d2 / self.sigma) >= LOGIT_CUT {
                        continue; // clamped: zero slope
                    }
                    let d_blend = stable_sigmoid(delta * d2 / self.sigma);
                    // dS/d(d^2) through face j at this pixel:
                    // prod/(1-D) * D*(1-D) * delta/sigma = prod * D * delta / sigma.
                    let wgt = g * p * d_blend * delta / self.sigma;
                    if wgt == 0.0 {
                        continue;
                    }
                    // Envelope derivative of the point-segment distance at
                    // the nearest edge (k, k+1): t is locally constant.
                    let ka = k;
                    let kb = (k + 1) % 3;
                    corner[ka][0] -= wgt * 2.0 * (1.0 - t) * diff[0];
                    corner[ka][1] -= wgt * 2.0 * (1.0 - t) * diff[1];
                    corner[kb][0] -= wgt * 2.0 * t * diff[0];
                    corner[kb][1] -= wgt * 2.0 * t * diff[1];
                }
            }
            for (c, &vi) in face.verts.iter().enumerate() {
                sg[vi * 2] += corner[c][0];
                sg[vi * 2 + 1] += corner[c][1];
            }
        }

        // Chain through the perspective projection.
        let mut out = vec![0.0f64; n * 3];
        for vi in 0..n {
            let (du, dv) = (sg[vi * 2], sg[vi * 2 + 1]);
            if du == 0.0 && dv == 0.0 {
                continue;
            }
            let (x, y, z) = (verts.at(vi, 0), verts.at(vi, 1), verts.at(vi, 2));
            if z <= Z_NEAR {
                continue;
            }
            out[vi * 3] = du * self.cam.fx / z;
            out[vi * 3 + 1] = dv * self.cam.fy / z;
            out[vi * 3 + 2] = -(du * self.cam.fx * x + dv * self.cam.fy * y) / (z * z);
        }
        vec![out]
    }
}

/// Value-only soft render of a plain mesh.
pub fn render_silhouette_plain(
    mesh: &TriangleMesh,
    cam: &CameraModel,
    sigma: f64,
) -> Result<SilhouetteImage, RenderError> {
    let tape = Tape::new();
    let flat: Vec<f64> = mesh.vertices.iter().flatten().copied().collect();
    let verts = tape.constant(Value::new(flat, mesh.vertices.len(), 3));
    let tm = TapeMesh { vertices: verts, faces: mesh.faces.clone() };
    let node = render_silhouette(&tape, &tm, cam, sigma)?;
    Ok(node.with_value(SilhouetteImage::from_value))
}

/// Minimum distance (pixels) from a point to a triangle boundary plus the
/// inside flag from the three edge half-plane tests.
pub fn screen_distance(pixel: [f64; 2], triangle: [[f64; 2]; 3]) -> (bool, f64) {
    let (inside, d2) = boundary_dist_sq(&triangle, pixel);
    (inside, d2.sqrt())
}

fn min_max(a: f64, b: f64, c: f64) -> (f64, f64) {
    (a.min(b).min(c), a.max(b).max(c))
}

#[inline]
fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn boundary_dist_sq(uv: &[[f64; 2]; 3], p: [f64; 2]) -> (bool, f64) {
    let mut min_d2 = f64::INFINITY;
    let mut pos = 0u8;
    let mut neg = 0u8;
    for k in 0..3 {
        let a = uv[k];
        let b = uv[(k + 1) % 3];
        let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
        let (px, py) = (p[0] - a[0], p[1] - a[1]);
        let cross = ex * py - ey * px;
        if cross >= 0.0 {
            pos += 1;
        }
        if cross <= 0.0 {
            neg += 1;
        }
        let len2 = ex * ex + ey * ey;
        let t = if len2 > 0.0 { ((px * ex + py * ey) / len2).clamp(0.0, 1.0) } else { 0.0 };
        let (dx, dy) = (px - t * ex, py - t * ey);
        let d2 = dx * dx + dy * dy;
        if d2 < min_d2 {
            min_d2 = d2;
        }
    }
    (pos == 3 || neg == 3, min_d2)
}

/// As [`boundary_dist_sq`] but also returns the nearest edge index, its
/// clamped projection parameter, and the residual vector for the adjoint.
#[inline]
fn boundary_dist_sq_argmin(uv: &[[f64; 2]; 3], p: [f64; 2]) -> (bool, f64, usize, f64, [f64; 2]) {
    let mut min_d2 = f64::INFINITY;
    let mut arg = (0usize, 0.0f64, [0.0f64; 2]);
    let mut pos = 0u8;
    let mut neg = 0u8;
    for k in 0..3 {
        let a = uv[k];
        let b = uv[(k + 1) % 3];
        let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
        let (px, py) = (p[0] - a[0], p[1] - a[1]);
        let cross = ex * py - ey * px;
        if cross >= 0.0 {
            pos += 1;
        }
        if cross <= 0.0 {
            neg += 1;
        }
        let len2 = ex * ex + ey * ey;
        let t = if len2 > 0.0 { ((px * ex + py * ey) / len2).clamp(0.0, 1.0) } else { 0.0 };
        let (dx, dy) = (px - t * ex, py - t * ey);
        let d2 = dx * dx + dy * dy;
        if d2 < min_d2 {
            min_d2 = d2;
            arg = (k, t, [dx, dy]);
        }
    }
    (pos == 3 || neg == 3, min_d2, arg.0, arg.1, arg.2)
}
