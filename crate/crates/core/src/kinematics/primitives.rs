//! Primitive link meshes: boxes and cylinders.

use serde::{Deserialize, Serialize};

use crate::geometry::TriangleMesh;

use super::KinematicsError;

/// Parameterized link shape, centered at its frame origin. The cylinder axis
/// is z; boxes span `±dim/2` per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PrimitiveShape {
    Box { width: f64, height: f64, depth: f64 },
    Cylinder { radius: f64, length: f64, rings: usize },
}

impl PrimitiveShape {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        match *self {
            PrimitiveShape::Box { width, height, depth } => {
                for (name, v) in [("width", width), ("height", height), ("depth", depth)] {
                    if !(v > 0.0) {
                        return Err(KinematicsError::NonPositiveDimension(format!(
                            "box {name} = {v}"
                        )));
                    }
                }
            }
            PrimitiveShape::Cylinder { radius, length, rings } => {
                if !(radius > 0.0) {
                    return Err(KinematicsError::NonPositiveDimension(format!(
                        "cylinder radius = {radius}"
                    )));
                }
                if !(length > 0.0) {
                    return Err(KinematicsError::NonPositiveDimension(format!(
                        "cylinder length = {length}"
                    )));
                }
                if rings < 3 {
                    return Err(KinematicsError::NonPositiveDimension(format!(
                        "cylinder rings = {rings} (need at least 3)"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn analytic_volume(&self) -> f64 {
        match *self {
            PrimitiveShape::Box { width, height, depth } => width * height * depth,
            PrimitiveShape::Cylinder { radius, length, .. } => {
                std::f64::consts::PI * radius * radius * length
            }
        }
    }
}

/// Watertight, outward-wound mesh of the primitive.
pub fn primitive_mesh(shape: &PrimitiveShape) -> Result<TriangleMesh, KinematicsError> {
    shape.validate()?;
    Ok(match *shape {
        PrimitiveShape::Box { width, height, depth } => box_mesh(width, height, depth),
        PrimitiveShape::Cylinder { radius, length, rings } => cylinder_mesh(radius, length, rings),
    })
}

fn box_mesh(w: f64, h: f64, d: f64) -> TriangleMesh {
    let (x, y, z) = (w / 2.0, h / 2.0, d / 2.0);
    let vertices = vec![
        [-x, -y, -z],
        [x, -y, -z],
        [x, y, -z],
        [-x, y, -z],
        [-x, -y, z],
        [x, -y, z],
        [x, y, z],
        [-x, y, z],
    ];
    let faces = vec![
        [0, 2, 1],
        [0, 3, 2], // z-
        [4, 5, 6],
        [4, 6, 7], // z+
        [0, 1, 5],
        [0, 5, 4], // y-
        [2, 3, 7],
        [2, 7, 6], // y+
        [0, 4, 7],
        [0, 7, 3], // x-
        [1, 2, 6],
        [1, 6, 5], // x+
    ];
    TriangleMesh::new(vertices, faces)
}

fn cylinder_mesh(r: f64, l: f64, n: usize) -> TriangleMesh {
    let h = l / 2.0;
    let mut vertices = Vec::with_capacity(2 * n + 2);
    for ring_z in [-h, h] {
        for j in 0..n {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
            vertices.push([r * phi.cos(), r * phi.sin(), ring_z]);
        }
    }
    let bottom_center = 2 * n;
    let top_center = 2 * n + 1;
    vertices.push([0.0, 0.0, -h]);
    vertices.push([0.0, 0.0, h]);

    let bot = |j: usize| j % n;
    let top = |j: usize| n + j % n;
    let mut faces = Vec::with_capacity(4 * n);
    for j in 0..n {
        faces.push([bot(j), bot(j + 1), top(j + 1)]);
        faces.push([bot(j), top(j + 1), top(j)]);
        faces.push([bottom_center, bot(j + 1), bot(j)]);
        faces.push([top_center, top(j), top(j + 1)]);
    }
    TriangleMesh::new(vertices, faces)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_box_counts_and_corners() {
        let mesh = primitive_mesh(&PrimitiveShape::Box { width: 1.0, height: 1.0, depth: 1.0 })
            .unwrap();
        assert_eq!(mesh.vertices.len(), 8);
        assert_eq!(mesh.faces.len(), 12);
        for v in &mesh.vertices {
            for c in v {
                assert_eq!(c.abs(), 0.5);
            }
        }
        assert!(mesh.is_watertight());
        assert!((mesh.signed_volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cylinder_counts_and_watertightness() {
        let shape = PrimitiveShape::Cylinder { radius: 0.1, length: 1.0, rings: 16 };
        let mesh = primitive_mesh(&shape).unwrap();
        assert_eq!(mesh.vertices.len(), 34);
        assert!(mesh.is_watertight());
    }

    #[test]
    fn signed_volume_matches_analytic_within_tessellation_error() {
        for shape in [
            PrimitiveShape::Box { width: 0.2, height: 0.5, depth: 1.3 },
            PrimitiveShape::Cylinder { radius: 0.3, length: 0.8, rings: 24 },
            PrimitiveShape::Cylinder { radius: 0.05, length: 2.0, rings: 20 },
        ] {
            let mesh = primitive_mesh(&shape).unwrap();
            let got = mesh.signed_volume();
            let want = shape.analytic_volume();
            assert!(
                (got - want).abs() / want < 0.02,
                "{shape:?}: volume {got} vs analytic {want}"
            );
        }
    }

    #[test]
    fn nonpositive_dimensions_rejected() {
        assert!(primitive_mesh(&PrimitiveShape::Box { width: 0.0, height: 1.0, depth: 1.0 })
            .is_err());
        assert!(
            primitive_mesh(&PrimitiveShape::Cylinder { radius: -0.1, length: 1.0, rings: 8 })
                .is_err()
        );
    }
}
