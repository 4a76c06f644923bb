//! DH-parameterized kinematic chain and the robot description format.

use serde::{Deserialize, Serialize};

use super::primitives::{primitive_mesh, PrimitiveShape};
use super::se3::{mat4_identity, mat4_mul, rodrigues, Mat4};
use super::KinematicsError;
use crate::geometry::TriangleMesh;

/// Classic Denavit–Hartenberg row: `A = RotZ(theta) TransZ(d) TransX(a) RotX(alpha)`
/// with `theta = q + theta_offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DHParams {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    pub theta_offset: f64,
}

impl DHParams {
    pub fn matrix(&self, q: f64) -> Mat4 {
        let theta = q + self.theta_offset;
        let (st, ct) = theta.sin_cos();
        let (sa, ca) = self.alpha.sin_cos();
        [
            [ct, -st * ca, st * sa, self.a * ct],
            [st, ct * ca, -ct * sa, self.a * st],
            [0.0, sa, ca, self.d],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }
}

/// Fixed transform from a link's DH frame to its primitive-mesh frame,
/// stored as translation plus axis-angle so it is rigid by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttachTransform {
    pub position: [f64; 3],
    pub axis_angle: [f64; 3],
}

impl AttachTransform {
    pub fn identity() -> Self {
        AttachTransform { position: [0.0; 3], axis_angle: [0.0; 3] }
    }

    pub fn matrix(&self) -> Mat4 {
        let r = rodrigues(self.axis_angle);
        [
            [r[0][0], r[0][1], r[0][2], self.position[0]],
            [r[1][0], r[1][1], r[1][2], self.position[1]],
            [r[2][0], r[2][1], r[2][2], self.position[2]],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }
}

/// One rigid link: DH row, primitive shape, and primitive placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DHLink {
    pub dh: DHParams,
    pub primitive: PrimitiveShape,
    /// Placement of the primitive in the link's DH frame. When omitted in a
    /// description file, defaults to the midpoint of the link segment with
    /// the primitive's long axis (z) along the segment, evaluated at q = 0.
    #[serde(default)]
    pub attach: Option<AttachTransform>,
}

impl DHLink {
    /// Effective attach transform, materializing the default placement.
    pub fn attach_matrix(&self) -> Mat4 {
        match &self.attach {
            Some(a) => a.matrix(),
            None => default_attach(&self.dh),
        }
    }
}

/// Midpoint-of-segment placement: rotate the primitive z axis onto the
/// direction from the previous frame origin (expressed in this link's frame
/// at q = 0) toward this frame's origin, centered halfway.
fn default_attach(dh: &DHParams) -> Mat4 {
    // Previous origin in this frame: inverse DH matrix applied to 0.
    let m = dh.matrix(0.0);
    let r = [
        [m[0][0], m[1][0], m[2][0]],
        [m[0][1], m[1][1], m[2][1]],
        [m[0][2], m[1][2], m[2][2]],
    ];
    let t = [m[0][3], m[1][3], m[2][3]];
    let prev = [
        -(r[0][0] * t[0] + r[0][1] * t[1] + r[0][2] * t[2]),
        -(r[1][0] * t[0] + r[1][1] * t[1] + r[1][2] * t[2]),
        -(r[2][0] * t[0] + r[2][1] * t[1] + r[2][2] * t[2]),
    ];
    let len = (prev[0] * prev[0] + prev[1] * prev[1] + prev[2] * prev[2]).sqrt();
    if len < 1e-12 {
        return mat4_identity();
    }
    let dir = [-prev[0] / len, -prev[1] / len, -prev[2] / len];
    let rot = rotation_from_z_to(dir);
    let mid = [prev[0] / 2.0, prev[1] / 2.0, prev[2] / 2.0];
    [
        [rot[0][0], rot[0][1], rot[0][2], mid[0]],
        [rot[1][0], rot[1][1], rot[1][2], mid[1]],
        [rot[2][0], rot[2][1], rot[2][2], mid[2]],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

fn rotation_from_z_to(dir: [f64; 3]) -> [[f64; 3]; 3] {
    let z = [0.0, 0.0, 1.0];
    let dot = dir[2];
    if dot > 1.0 - 1e-12 {
        return rodrigues([0.0; 3]);
    }
    if dot < -1.0 + 1e-12 {
        return rodrigues([std::f64::consts::PI, 0.0, 0.0]);
    }
    let axis = [z[1] * dir[2] - z[2] * dir[1], z[2] * dir[0] - z[0] * dir[2], z[0] * dir[1] - z[1] * dir[0]];
    let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let angle = dot.clamp(-1.0, 1.0).acos();
    rodrigues([axis[0] / norm * angle, axis[1] / norm * angle, axis[2] / norm * angle])
}

/// Ordered rigid links of a manipulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KinematicChain {
    pub links: Vec<DHLink>,
}

impl KinematicChain {
    pub fn new(links: Vec<DHLink>) -> Self {
        KinematicChain { links }
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        if self.links.is_empty() {
            return Err(KinematicsError::Description("chain has no links".into()));
        }
        for link in &self.links {
            link.primitive.validate()?;
        }
        Ok(())
    }

    /// Base-to-link transforms `T^b_n = A_1(q_1) .. A_n(q_n)`.
    pub fn link_transforms(&self, q: &[f64]) -> Result<Vec<Mat4>, KinematicsError> {
        if q.len() != self.links.len() {
            return Err(KinematicsError::JointCountMismatch {
                got: q.len(),
                expected: self.links.len(),
            });
        }
        let mut out = Vec::with_capacity(self.links.len());
        let mut acc = mat4_identity();
        for (link, &qi) in self.links.iter().zip(q) {
            acc = mat4_mul(&acc, &link.dh.matrix(qi));
            out.push(acc);
        }
        Ok(out)
    }

    /// Origin of the final DH frame in the base frame: the end effector of
    /// the synthetic scenarios and metrics.
    pub fn end_effector_base(&self, q: &[f64]) -> Result<[f64; 3], KinematicsError> {
        let t = self.link_transforms(q)?;
        let last = t.last().unwrap();
        Ok([last[0][3], last[1][3], last[2][3]])
    }

    /// Primitive meshes per link, in each link's mesh frame.
    pub fn link_meshes(&self) -> Result<Vec<TriangleMesh>, KinematicsError> {
        self.links.iter().map(|l| primitive_mesh(&l.primitive)).collect()
    }

    /// Vertex count per link; the offset parameter layout follows this and is
    /// stable across calls.
    pub fn vertex_counts(&self) -> Result<Vec<usize>, KinematicsError> {
        Ok(self.link_meshes()?.iter().map(|m| m.vertices.len()).collect())
    }

    /// Parse the robot description format (strict: unknown keys rejected).
    pub fn from_toml_str(text: &str) -> Result<Self, KinematicsError> {
        let chain: KinematicChain =
            toml::from_str(text).map_err(|e| KinematicsError::Description(e.to_string()))?;
        chain.validate()?;
        Ok(chain)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("chain serialization cannot fail")
    }
}

/// Per-link vertex displacement sets; cardinality matches each link's
/// primitive vertex set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexOffsets {
    pub per_link: Vec<Vec<[f64; 3]>>,
}

impl VertexOffsets {
    /// All-zero offsets shaped for the chain.
    pub fn zeros(chain: &KinematicChain) -> Result<Self, KinematicsError> {
        Ok(VertexOffsets {
            per_link: chain.vertex_counts()?.iter().map(|&n| vec![[0.0; 3]; n]).collect(),
        })
    }

    pub fn validate_against(&self, chain: &KinematicChain) -> Result<(), KinematicsError> {
        let counts = chain.vertex_counts()?;
        if self.per_link.len() != counts.len() {
            return Err(KinematicsError::OffsetCardinality {
                link: usize::MAX,
                got: self.per_link.len(),
                expected: counts.len(),
            });
        }
        for (i, (offs, &n)) in self.per_link.iter().zip(&counts).enumerate() {
            if offs.len() != n {
                return Err(KinematicsError::OffsetCardinality {
                    link: i,
                    got: offs.len(),
                    expected: n,
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn simple_link(a: f64, alpha: f64) -> DHLink {
        DHLink {
            dh: DHParams { a, alpha, d: 0.0, theta_offset: 0.0 },
            primitive: PrimitiveShape::Cylinder { radius: 0.05, length: a.max(0.1), rings: 8 },
            attach: None,
        }
    }

    #[test]
    fn identity_chain() {
        let links = vec![
            DHLink {
                dh: DHParams { a: 0.0, alpha: 0.0, d: 0.0, theta_offset: 0.0 },
                primitive: PrimitiveShape::Box { width: 0.1, height: 0.1, depth: 0.1 },
                attach: Some(AttachTransform::identity()),
            };
            3
        ];
        let chain = KinematicChain::new(links);
        for t in chain.link_transforms(&[0.0; 3]).unwrap() {
            assert_eq!(t, mat4_identity());
        }
    }

    #[test]
    fn single_link_quarter_turn() {
        let chain = KinematicChain::new(vec![simple_link(1.0, 0.0)]);
        let q = std::f64::consts::FRAC_PI_2;
        let t = chain.link_transforms(&[q]).unwrap()[0];
        // Rotation about z by pi/2 and translation (cos q, sin q, 0).
        assert_abs_diff_eq!(t[0][3], q.cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(t[1][3], q.sin(), epsilon = 1e-12);
        assert_abs_diff_eq!(t[2][3], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t[0][0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t[1][0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn chained_transforms_compose() {
        let chain = KinematicChain::new(vec![
            simple_link(0.3, 0.2),
            simple_link(0.25, -0.4),
            simple_link(0.2, 0.0),
        ]);
        let q = [0.4, -0.7, 0.9];
        let ts = chain.link_transforms(&q).unwrap();
        let mut acc = mat4_identity();
        for (n, link) in chain.links.iter().enumerate() {
            acc = mat4_mul(&acc, &link.dh.matrix(q[n]));
            for i in 0..4 {
                for j in 0..4 {
                    assert_abs_diff_eq!(ts[n][i][j], acc[i][j], epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn joint_count_mismatch_rejected() {
        let chain = KinematicChain::new(vec![simple_link(0.3, 0.0)]);
        assert!(matches!(
            chain.link_transforms(&[0.0, 0.0]),
            Err(KinematicsError::JointCountMismatch { got: 2, expected: 1 })
        ));
    }

    #[test]
    fn default_attach_centers_primitive_on_link_segment() {
        // Pure x-offset link: previous origin at (-a, 0, 0) in this frame, so
        // the primitive sits at (-a/2, 0, 0) with z rotated onto +x.
        let link = simple_link(0.8, 0.0);
        let m = link.attach_matrix();
        assert_abs_diff_eq!(m[0][3], -0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(m[1][3], 0.0, epsilon = 1e-12);
        // z axis of the attach frame maps to +x of the link frame.
        assert_abs_diff_eq!(m[0][2], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn description_roundtrip_and_unknown_key_rejection() {
        let text = r#"
[[links]]
dh = { a = 0.3, alpha = 1.5707963, d = 0.0, theta_offset = 0.0 }
primitive = { kind = "cylinder", radius = 0.04, length = 0.3, rings = 10 }
attach = { position = [0.0, 0.0, -0.15], axis_angle = [0.0, 0.0, 0.0] }

[[links]]
dh = { a = 0.25, alpha = 0.0, d = 0.05, theta_offset = 0.5 }
primitive = { kind = "box", width = 0.08, height = 0.06, depth = 0.25 }
"#;
        let chain = KinematicChain::from_toml_str(text).unwrap();
        assert_eq!(chain.links.len(), 2);
        assert!(chain.links[1].attach.is_none());
        let back = KinematicChain::from_toml_str(&chain.to_toml_string()).unwrap();
        assert_eq!(chain, back);

        let bad = text.replace("theta_offset", "theta_offzet");
        let err = KinematicChain::from_toml_str(&bad).unwrap_err();
        assert!(err.to_string().contains("theta_offzet") || err.to_string().contains("unknown"));
    }

    #[test]
    fn zero_offsets_match_chain_layout() {
        let chain = KinematicChain::new(vec![simple_link(0.3, 0.0), simple_link(0.2, 0.1)]);
        let offs = VertexOffsets::zeros(&chain).unwrap();
        offs.validate_against(&chain).unwrap();
        assert_eq!(offs.per_link[0].len(), 18); // 8-ring cylinder: 2*8+2
        let mut bad = offs;
        bad.per_link[1].pop();
        assert!(bad.validate_against(&chain).is_err());
    }
}
