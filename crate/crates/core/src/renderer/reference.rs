//! Brute-force hard rasterizer: the independent coverage oracle the soft
//! renderer is validated against. Deliberately shares no code with the soft
//! kernel; coverage is decided by barycentric coordinates per pixel.

use crate::geometry::TriangleMesh;

use super::camera::{CameraModel, Z_NEAR};
use super::silhouette::SilhouetteImage;

/// Binary (0/1-valued) coverage image: a pixel is 1 when its center falls
/// inside any triangle whose vertices all project in front of the near
/// plane. Boundary pixels count as covered.
pub fn render_hard(mesh: &TriangleMesh, cam: &CameraModel) -> SilhouetteImage {
    let (w, h) = (cam.width, cam.height);
    let mut data = vec![0.0f64; w * h];

    for f in &mesh.faces {
        let ps = [mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]];
        if ps.iter().any(|p| p[2] <= Z_NEAR) {
            continue;
        }
        let uv: Vec<[f64; 2]> = ps.iter().map(|&p| cam.project(p).unwrap()).collect();
        let denom = (uv[1][1] - uv[2][1]) * (uv[0][0] - uv[2][0])
            + (uv[2][0] - uv[1][0]) * (uv[0][1] - uv[2][1]);
        if denom.abs() < 1e-12 {
            continue;
        }
        let min_u = uv.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        let max_u = uv.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        let min_v = uv.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
        let max_v = uv.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
        let col0 = (min_u - 0.5).ceil().max(0.0) as usize;
        let col1 = ((max_u - 0.5).floor()).min(w as f64 - 1.0).max(0.0) as usize;
        let row0 = (min_v - 0.5).ceil().max(0.0) as usize;
        let row1 = ((max_v - 0.5).floor()).min(h as f64 - 1.0).max(0.0) as usize;
        if min_u - 0.5 > w as f64 || min_v - 0.5 > h as f64 || max_u < 0.0 || max_v < 0.0 {
            continue;
        }
        for i in row0..=row1 {
            let pv = i as f64 + 0.5;
            for j in col0..=col1 {
                let pu = j as f64 + 0.5;
                let l0 = ((uv[1][1] - uv[2][1]) * (pu - uv[2][0])
                    + (uv[2][0] - uv[1][0]) * (pv - uv[2][1]))
                    / denom;
                let l1 = ((uv[2][1] - uv[0][1]) * (pu - uv[2][0])
                    + (uv[0][0] - uv[2][0]) * (pv - uv[2][1]))
                    / denom;
                let l2 = 1.0 - l0 - l1;
                if l0 >= 0.0 && l1 >= 0.0 && l2 >= 0.0 {
                    data[i * w + j] = 1.0;
                }
            }
        }
    }
    SilhouetteImage::new(w, h, data)
}
