//! Triangle mesh containers and integrity checks.

use std::collections::HashMap;
use std::io::Write;

use crate::autodiff::Var;

/// A plain triangle mesh: vertex positions and triangle index triples.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 3]>,
}

/// A mesh whose vertices live on a tape as one `(n, 3)` node, differentiable
/// with respect to whatever produced them; the face list is fixed data.
pub struct TapeMesh<'t> {
    pub vertices: Var<'t>,
    pub faces: Vec<[usize; 3]>,
}

impl<'t> TapeMesh<'t> {
    /// Snapshot current vertex values into a plain mesh.
    pub fn to_mesh(&self) -> TriangleMesh {
        let vertices = self.vertices.with_value(|v| {
            (0..v.rows()).map(|i| [v.at(i, 0), v.at(i, 1), v.at(i, 2)]).collect()
        });
        TriangleMesh { vertices, faces: self.faces.clone() }
    }
}

impl TriangleMesh {
    pub fn new(vertices: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> Self {
        let mesh = TriangleMesh { vertices, faces };
        mesh.assert_indices_in_range();
        mesh
    }

    fn assert_indices_in_range(&self) {
        let n = self.vertices.len();
        for (fi, f) in self.faces.iter().enumerate() {
            for &i in f {
                assert!(i < n, "mesh face {fi} references vertex {i} of {n}");
            }
        }
    }

    /// True when every undirected edge is shared by exactly two faces and the
    /// two incident faces traverse it in opposite directions.
    pub fn is_watertight(&self) -> bool {
        let mut undirected: HashMap<(usize, usize), usize> = HashMap::new();
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for f in &self.faces {
            for k in 0..3 {
                let a = f[k];
                let b = f[(k + 1) % 3];
                *directed.entry((a, b)).or_insert(0) += 1;
                let key = (a.min(b), a.max(b));
                *undirected.entry(key).or_insert(0) += 1;
            }
        }
        undirected.values().all(|&c| c == 2) && directed.values().all(|&c| c == 1)
    }

    /// Signed volume via the divergence theorem; positive for outward-wound
    /// closed meshes.
    pub fn signed_volume(&self) -> f64 {
        let mut v6 = 0.0;
        for f in &self.faces {
            let a = self.vertices[f[0]];
            let b = self.vertices[f[1]];
            let c = self.vertices[f[2]];
            v6 += a[0] * (b[1] * c[2] - b[2] * c[1])
                - a[1] * (b[0] * c[2] - b[2] * c[0])
                + a[2] * (b[0] * c[1] - b[1] * c[0]);
        }
        v6 / 6.0
    }

    /// Debug export: `v x y z` lines followed by 1-indexed `f i j k` lines.
    pub fn write_obj<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for v in &self.vertices {
            writeln!(w, "v {} {} {}", v[0], v[1], v[2])?;
        }
        for f in &self.faces {
            writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
        }
        Ok(())
    }
}
