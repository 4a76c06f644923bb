//! Differentiable assembly of the manipulator mesh in the camera frame.

use crate::autodiff::{concat_rows, Tape, Value, Var};
use crate::geometry::{TapeMesh, TriangleMesh};

use super::chain::{KinematicChain, VertexOffsets};
use super::se3::{mat4_mul, rotation_part, PoseSE3, PoseVars};
use super::KinematicsError;

/// Tape-bound rigid-robot parameters: the 6-DOF base pose and one offset
/// leaf per link, shaped `(vertex_count, 3)`.
pub struct RigidVars<'t> {
    pub pose: PoseVars<'t>,
    pub offsets: Vec<Var<'t>>,
}

impl<'t> RigidVars<'t> {
    pub fn from_parts(tape: &'t Tape, pose: &PoseSE3, offsets: &VertexOffsets) -> Self {
        let offset_vars = offsets
            .per_link
            .iter()
            .map(|link| {
                let flat: Vec<f64> = link.iter().flatten().copied().collect();
                tape.leaf(Value::new(flat, link.len(), 3))
            })
            .collect();
        RigidVars { pose: PoseVars::from_pose(tape, pose), offsets: offset_vars }
    }

    pub fn to_offsets(&self) -> VertexOffsets {
        let per_link = self
            .offsets
            .iter()
            .map(|v| {
                v.with_value(|val| {
                    (0..val.rows()).map(|i| [val.at(i, 0), val.at(i, 1), val.at(i, 2)]).collect()
                })
            })
            .collect();
        VertexOffsets { per_link }
    }
}

/// Vertex-wise displacement of a mesh: faces unchanged, identity Jacobian
/// with respect to the offsets.
pub fn apply_offsets<'t>(
    tape: &'t Tape,
    mesh: &TriangleMesh,
    offsets: Var<'t>,
) -> Result<TapeMesh<'t>, KinematicsError> {
    let n = mesh.vertices.len();
    let (rows, cols) = offsets.shape();
    if (rows, cols) != (n, 3) {
        return Err(KinematicsError::OffsetCardinality { link: 0, got: rows, expected: n });
    }
    let flat: Vec<f64> = mesh.vertices.iter().flatten().copied().collect();
    let base = tape.constant(Value::new(flat, n, 3));
    Ok(TapeMesh { vertices: base.add(offsets), faces: mesh.faces.clone() })
}

/// Compose the full robot mesh in the camera frame.
///
/// Per link: primitive vertices plus offsets, mapped by the fixed
/// `T^b_n(q) * attach` transform into the base frame; the concatenated cloud
/// is then mapped by the differentiable camera-from-base pose. Joint angles
/// are fixed inputs and never differentiated.
pub fn assemble_robot_mesh<'t>(
    tape: &'t Tape,
    chain: &KinematicChain,
    q: &[f64],
    vars: &RigidVars<'t>,
) -> Result<TapeMesh<'t>, KinematicsError> {
    let transforms = chain.link_transforms(q)?;
    let meshes = chain.link_meshes()?;
    if vars.offsets.len() != chain.links.len() {
        return Err(KinematicsError::OffsetCardinality {
            link: usize::MAX,
            got: vars.offsets.len(),
            expected: chain.links.len(),
        });
    }

    let mut parts = Vec::with_capacity(chain.links.len());
    let mut faces = Vec::new();
    let mut base_index = 0;
    for (((link, mesh), t_bn), &offsets) in
        chain.links.iter().zip(&meshes).zip(&transforms).zip(&vars.offsets)
    {
        let in_link = apply_offsets(tape, mesh, offsets)?;
        let m = mat4_mul(t_bn, &link.attach_matrix());
        let rot = rotation_part(&m);
        let trans = [m[0][3], m[1][3], m[2][3]];
        parts.push(in_link.vertices.apply_rigid_const(rot, trans));
        for f in &mesh.faces {
            faces.push([f[0] + base_index, f[1] + base_index, f[2] + base_index]);
        }
        base_index += mesh.vertices.len();
    }

    let in_base = concat_rows(tape, &parts);
    let rot = vars.pose.rotation_var(tape);
    let vertices = in_base.apply_rigid(rot, vars.pose.trans);
    Ok(TapeMesh { vertices, faces })
}

/// Value-only assembly for synthetic data and metrics.
pub fn assemble_robot_mesh_plain(
    chain: &KinematicChain,
    q: &[f64],
    offsets: &VertexOffsets,
    pose: &PoseSE3,
) -> Result<TriangleMesh, KinematicsError> {
    offsets.validate_against(chain)?;
    let tape = Tape::new();
    let vars = RigidVars::from_parts(&tape, pose, offsets);
    Ok(assemble_robot_mesh(&tape, chain, q, &vars)?.to_mesh())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::chain::{AttachTransform, DHLink, DHParams};
    use crate::kinematics::primitives::PrimitiveShape;
    use approx::assert_abs_diff_eq;

    fn test_chain() -> KinematicChain {
        KinematicChain::new(vec![
            DHLink {
                dh: DHParams { a: 0.3, alpha: 0.5, d: 0.0, theta_offset: 0.0 },
                primitive: PrimitiveShape::Cylinder { radius: 0.04, length: 0.3, rings: 6 },
                attach: None,
            },
            DHLink {
                dh: DHParams { a: 0.25, alpha: -0.3, d: 0.05, theta_offset: 0.2 },
                primitive: PrimitiveShape::Box { width: 0.06, height: 0.05, depth: 0.25 },
                attach: Some(AttachTransform {
                    position: [-0.12, 0.0, 0.0],
                    axis_angle: [0.0, 1.2, 0.0],
                }),
            },
        ])
    }

    #[test]
    fn zero_offsets_are_identity() {
        let chain = test_chain();
        let mesh = primitive_meshes_first(&chain);
        let tape = Tape::new();
        let zeros = tape.leaf(Value::zeros(mesh.vertices.len(), 3));
        let out = apply_offsets(&tape, &mesh, zeros).unwrap().to_mesh();
        assert_eq!(out, mesh);
    }

    fn primitive_meshes_first(chain: &KinematicChain) -> TriangleMesh {
        chain.link_meshes().unwrap().remove(0)
    }

    #[test]
    fn constant_offset_translates_mesh() {
        let chain = test_chain();
        let mesh = primitive_meshes_first(&chain);
        let n = mesh.vertices.len();
        let tape = Tape::new();
        let shift = tape.leaf(Value::new(
            std::iter::repeat([0.1, -0.2, 0.3]).take(n).flatten().collect(),
            n,
            3,
        ));
        let out = apply_offsets(&tape, &mesh, shift).unwrap().to_mesh();
        for (a, b) in mesh.vertices.iter().zip(&out.vertices) {
            assert_abs_diff_eq!(a[0] + 0.1, b[0], epsilon = 1e-15);
            assert_abs_diff_eq!(a[1] - 0.2, b[1], epsilon = 1e-15);
            assert_abs_diff_eq!(a[2] + 0.3, b[2], epsilon = 1e-15);
        }
    }

    #[test]
    fn offset_jacobian_is_identity_per_vertex() {
        let chain = test_chain();
        let mesh = primitive_meshes_first(&chain);
        let n = mesh.vertices.len();
        let tape = Tape::new();
        let offsets = tape.leaf(Value::zeros(n, 3));
        let out = apply_offsets(&tape, &mesh, offsets).unwrap();
        // d(vertex 3, coord 1)/d(offset i, coord j) = 1 iff (i,j) = (3,1).
        let picked = out.vertices.index(3 * 3 + 1);
        tape.backward(picked);
        let g = offsets.grad();
        for (k, gk) in g.iter().enumerate() {
            let want = if k == 3 * 3 + 1 { 1.0 } else { 0.0 };
            assert_eq!(*gk, want);
        }
    }

    #[test]
    fn mismatched_offset_cardinality_rejected() {
        let chain = test_chain();
        let mesh = primitive_meshes_first(&chain);
        let tape = Tape::new();
        let wrong = tape.leaf(Value::zeros(mesh.vertices.len() + 1, 3));
        assert!(apply_offsets(&tape, &mesh, wrong).is_err());
    }

    #[test]
    fn identity_pose_places_links_at_attach_frames() {
        let chain = KinematicChain::new(vec![DHLink {
            dh: DHParams { a: 0.0, alpha: 0.0, d: 0.0, theta_offset: 0.0 },
            primitive: PrimitiveShape::Box { width: 0.2, height: 0.2, depth: 0.2 },
            attach: Some(AttachTransform::identity()),
        }]);
        let offsets = VertexOffsets::zeros(&chain).unwrap();
        let mesh =
            assemble_robot_mesh_plain(&chain, &[0.0], &offsets, &PoseSE3::identity()).unwrap();
        let prim = primitive_meshes_first(&chain);
        assert_eq!(mesh, prim);
    }

    #[test]
    fn pure_translation_lifts_all_vertices() {
        let chain = test_chain();
        let offsets = VertexOffsets::zeros(&chain).unwrap();
        let q = [0.3, -0.4];
        let base = assemble_robot_mesh_plain(&chain, &q, &offsets, &PoseSE3::identity()).unwrap();
        let lifted = assemble_robot_mesh_plain(
            &chain,
            &q,
            &offsets,
            &PoseSE3::new([0.0; 3], [0.0, 0.0, 1.0]),
        )
        .unwrap();
        for (a, b) in base.vertices.iter().zip(&lifted.vertices) {
            assert_abs_diff_eq!(a[0], b[0], epsilon = 1e-12);
            assert_abs_diff_eq!(a[1], b[1], epsilon = 1e-12);
            assert_abs_diff_eq!(a[2] + 1.0, b[2], epsilon = 1e-12);
        }
    }

    #[test]
    fn pose_composition_is_equivariant() {
        let chain = test_chain();
        let offsets = VertexOffsets::zeros(&chain).unwrap();
        let q = [0.5, 0.1];
        let pose = PoseSE3::new([0.2, -0.5, 0.9], [0.1, 0.2, 1.5]);
        let extra = PoseSE3::new([0.0, 0.7, 0.0], [-0.3, 0.4, 0.2]);
        // Compose extra * pose as matrices, convert back via application.
        let composed = mat4_mul(&extra.matrix(), &pose.matrix());
        let direct = assemble_robot_mesh_plain(&chain, &q, &offsets, &pose).unwrap();
        let lifted: Vec<[f64; 3]> =
            direct.vertices.iter().map(|&v| extra.apply(v)).collect();
        // Applying the composed matrix to base-frame points must match.
        let base = assemble_robot_mesh_plain(&chain, &q, &offsets, &PoseSE3::identity()).unwrap();
        for (v, want) in base.vertices.iter().zip(&lifted) {
            let got = super::super::se3::mat4_apply(&composed, *v);
            for k in 0..3 {
                assert_abs_diff_eq!(got[k], want[k], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn assembled_vertex_gradients_match_finite_differences() {
        use crate::autodiff::{diff_fn, grad_check};
        let chain = test_chain();
        let q = [0.3, -0.6];
        let counts = chain.vertex_counts().unwrap();
        let f = diff_fn(move |t: &Tape, x: Var<'_>| {
            let e = |k: usize| {
                let mut b = [0.0; 3];
                b[k] = 1.0;
                t.constant(Value::vec3(b))
            };
            let pick3 = |off: usize| {
                e(0).mul(x.index(off)).add(e(1).mul(x.index(off + 1))).add(e(2).mul(x.index(off + 2)))
            };
            // Pose from the first 6 params; offsets stay zero but remain leaves.
            let pose = PoseVars { omega: pick3(0), trans: pick3(3) };
            let offsets: Vec<Var<'_>> =
                counts.iter().map(|&n| t.leaf(Value::zeros(n, 3))).collect();
            let vars = RigidVars { pose, offsets };
            let mesh = assemble_robot_mesh(t, &chain, &q, &vars).unwrap();
            let rows = mesh.vertices.shape().0;
            let w: Vec<f64> = (0..rows * 3)
                .map(|k| (((k * 131) % 977) as f64) / 977.0 - 0.5)
                .collect();
            mesh.vertices.mul(t.constant(Value::new(w, rows, 3))).sum()
        });
        let x0 = [0.4, -0.8, 0.3, 0.1, -0.2, 1.4];
        let err = grad_check(f, &x0, 1e-6);
        assert!(err < 1e-5, "assembled mesh pose gradient mismatch: {err}");
    }
}
