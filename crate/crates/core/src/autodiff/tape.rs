//! Wengert tape: reverse-mode differentiation over dense array nodes.
//!
//! Operations execute eagerly during the forward pass and are recorded in
//! creation order, which is already a topological order (an op can only
//! reference nodes that exist). `backward` replays the record once, in
//! reverse, accumulating adjoints.
//!
//! Nodes hold whole arrays, not individual scalars; image-sized results such
//! as a rendered silhouette are a single node whose producing op carries a
//! hand-derived adjoint (see [`CustomOp`]). One tape serves one estimation;
//! tapes are not shared between threads.

use std::cell::RefCell;
use std::fmt;

use super::value::Value;

/// Radicand floor applied before `sqrt` and `norm` differentiation.
///
/// Forward values stay exact (`sqrt(0) = 0`); below the floor the adjoint is
/// zero, the subgradient we want at the non-smooth loci the Frenet formulas
/// hit on degenerate curves. Callers that divide by a norm must branch away
/// from the degenerate region themselves.
pub const SQRT_CLAMP: f64 = 1e-12;

/// A differentiable operation opaque to the tape, registered like any
/// primitive. The soft rasterizer and camera projection are implemented this
/// way so the tape stays free of scene types.
pub trait CustomOp: fmt::Debug {
    fn name(&self) -> &'static str;

    /// Given the adjoint of the output, return one adjoint per input, each
    /// shaped like the corresponding input.
    fn backward(&self, out_grad: &[f64], out_value: &Value, inputs: &[&Value]) -> Vec<Vec<f64>>;
}

#[derive(Debug)]
#[allow(dead_code)] // constant payloads are kept for op introspection
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    /// k * x for a compile-time constant k (no node allocated for k).
    Scale(usize, f64),
    /// x + k elementwise.
    Offset(usize, f64),
    Powf(usize, f64),
    Sqrt(usize),
    Sigmoid(usize),
    Sin(usize),
    Cos(usize),
    Softplus(usize),
    Abs(usize),
    Clamp(usize, f64, f64),
    Dot(usize, usize),
    Cross(usize, usize),
    Norm(usize),
    MatMul(usize, usize),
    Hat(usize),
    Sum(usize),
    Index(usize, usize),
    Concat(Vec<usize>),
    /// Rows of `points` mapped through `rot * p + trans` with constant pose.
    ApplyRigidConst { points: usize, rot: [[f64; 3]; 3], trans: [f64; 3] },
    /// Rows of `points` mapped through `rot * p + trans`, all differentiable.
    ApplyRigid { rot: usize, trans: usize, points: usize },
    Custom { inputs: Vec<usize>, op: Box<dyn CustomOp> },
}

struct Node {
    value: Value,
    op: Op,
    requires_grad: bool,
}

/// Ordered record of one forward pass.
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    grads: RefCell<Vec<Vec<f64>>>,
}

/// Handle to a node on a tape. Cheap to copy; all arithmetic goes through
/// methods on this handle.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: RefCell::new(Vec::new()), grads: RefCell::new(Vec::new()) }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A differentiable input.
    pub fn leaf(&self, value: Value) -> Var<'_> {
        self.push(value, Op::Leaf, true)
    }

    /// A fixed input: participates in forward values but receives no adjoint.
    pub fn constant(&self, value: Value) -> Var<'_> {
        self.push(value, Op::Leaf, false)
    }

    pub fn scalar(&self, x: f64) -> Var<'_> {
        self.constant(Value::scalar(x))
    }

    fn push(&self, value: Value, op: Op, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        let id = nodes.len();
        nodes.push(Node { value, op, requires_grad });
        Var { tape: self, id }
    }

    fn value_of(&self, id: usize) -> Value {
        self.nodes.borrow()[id].value.clone()
    }

    fn requires_grad(&self, id: usize) -> bool {
        self.nodes.borrow()[id].requires_grad
    }

    /// Register an externally computed differentiable op.
    pub fn custom(&self, inputs: &[Var<'_>], value: Value, op: Box<dyn CustomOp>) -> Var<'_> {
        let req = inputs.iter().any(|v| self.requires_grad(v.id));
        let ids = inputs.iter().map(|v| v.id).collect();
        self.push(value, Op::Custom { inputs: ids, op }, req)
    }

    /// Reverse sweep from a scalar root. Every node is visited at most once,
    /// in reverse topological order; leaves off any path to the root keep an
    /// exactly zero gradient.
    pub fn backward(&self, root: Var<'_>) {
        let nodes = self.nodes.borrow();
        assert!(root.id < nodes.len(), "autodiff: backward root is not on this tape");
        assert!(
            nodes[root.id].value.is_scalar(),
            "autodiff: backward requires a scalar root, got {}x{}",
            nodes[root.id].value.rows(),
            nodes[root.id].value.cols()
        );

        let mut grads: Vec<Vec<f64>> = nodes.iter().map(|n| vec![0.0; n.value.len()]).collect();
        let mut touched = vec![false; nodes.len()];
        grads[root.id][0] = 1.0;
        touched[root.id] = true;

        for i in (0..=root.id).rev() {
            if !touched[i] || !nodes[i].requires_grad {
                continue;
            }
            // Move this node's adjoint out so parents can be written freely.
            let g = std::mem::take(&mut grads[i]);
            accumulate_parents(&nodes, i, &g, &mut grads, &mut touched);
            grads[i] = g;
        }

        *self.grads.borrow_mut() = grads;
    }

    /// Gradient of the last `backward` root with respect to `var`.
    pub fn grad(&self, var: Var<'_>) -> Vec<f64> {
        let grads = self.grads.borrow();
        assert!(!grads.is_empty(), "autodiff: grad queried before backward");
        grads[var.id].clone()
    }
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn value(&self) -> Value {
        self.tape.value_of(self.id)
    }

    pub fn scalar_value(&self) -> f64 {
        self.tape.nodes.borrow()[self.id].value.as_scalar()
    }

    pub fn vec3_value(&self) -> [f64; 3] {
        self.tape.nodes.borrow()[self.id].value.as_vec3()
    }

    pub fn shape(&self) -> (usize, usize) {
        let nodes = self.tape.nodes.borrow();
        nodes[self.id].value.shape()
    }

    /// Read the forward value without cloning it.
    pub fn with_value<R>(&self, f: impl FnOnce(&Value) -> R) -> R {
        f(&self.tape.nodes.borrow()[self.id].value)
    }

    pub fn grad(&self) -> Vec<f64> {
        self.tape.grad(*self)
    }

    fn unary(self, value: Value, op: Op) -> Var<'t> {
        let req = self.tape.requires_grad(self.id);
        self.tape.push(value, op, req)
    }

    fn binary(self, other: Var<'t>, value: Value, op: Op) -> Var<'t> {
        let req = self.tape.requires_grad(self.id) || self.tape.requires_grad(other.id);
        self.tape.push(value, op, req)
    }

    pub fn add(self, other: Var<'t>) -> Var<'t> {
        let v = self.with_value(|a| other.with_value(|b| ew(a, b, "add", |x, y| x + y)));
        self.binary(other, v, Op::Add(self.id, other.id))
    }

    pub fn sub(self, other: Var<'t>) -> Var<'t> {
        let v = self.with_value(|a| other.with_value(|b| ew(a, b, "subtract", |x, y| x - y)));
        self.binary(other, v, Op::Sub(self.id, other.id))
    }

    pub fn mul(self, other: Var<'t>) -> Var<'t> {
        let v = self.with_value(|a| other.with_value(|b| ew(a, b, "multiply", |x, y| x * y)));
        self.binary(other, v, Op::Mul(self.id, other.id))
    }

    pub fn div(self, other: Var<'t>) -> Var<'t> {
        let v = self.with_value(|a| other.with_value(|b| ew(a, b, "divide", |x, y| x / y)));
        self.binary(other, v, Op::Div(self.id, other.id))
    }

    pub fn scale(self, k: f64) -> Var<'t> {
        let v = self.with_value(|a| map(a, |x| k * x));
        self.unary(v, Op::Scale(self.id, k))
    }

    pub fn offset(self, k: f64) -> Var<'t> {
        let v = self.with_value(|a| map(a, |x| x + k));
        self.unary(v, Op::Offset(self.id, k))
    }

    pub fn neg(self) -> Var<'t> {
        self.scale(-1.0)
    }

    pub fn powf(self, p: f64) -> Var<'t> {
        let v = self.with_value(|a| map(a, |x| x.powf(p)));
        self.unary(v, Op::Powf(self.id, p))
    }

    pub fn square(self) -> Var<'t> {
        self.mul(self)
    }

    pub fn sqrt(self) -> Var<'t> {
        let v = self.with_value(|a| map(a, |x| x.max(0.0).sqrt()));
        self.unary(v, Op::Sqrt(self.id))
    }

    pub fn sigmoid(self) -> Var<'t> {
        let v = self.with_value(|a| map(a, sigmoid));
        self.unary(v, Op::Sigmoid(self.id))
    }

    pub fn sin(self) -> Var<'t> {
        let v = self.with_value(|a| map(a, f64::sin));
        self.unary(v, Op::Sin(self.id))
    }

    pub fn cos(self) -> Var<'t> {
        let v = self.with_value(|a| map(a, f64::cos));
        self.unary(v, Op::Cos(self.id))
    }

    pub fn softplus(self) -> Var<'t> {
        let v = self.with_value(|a| map(a, softplus));
        self.unary(v, Op::Softplus(self.id))
    }

    pub fn abs(self) -> Var<'t> {
        let v = self.with_value(|a| map(a, f64::abs));
        self.unary(v, Op::Abs(self.id))
    }

    pub fn clamp(self, lo: f64, hi: f64) -> Var<'t> {
        assert!(lo <= hi, "autodiff: clamp bounds inverted ({lo} > {hi})");
        let v = self.with_value(|a| map(a, |x| x.clamp(lo, hi)));
        self.unary(v, Op::Clamp(self.id, lo, hi))
    }

    pub fn dot(self, other: Var<'t>) -> Var<'t> {
        let v = self.with_value(|a| {
            other.with_value(|b| {
                assert_eq!(
                    a.shape(),
                    b.shape(),
                    "autodiff: dot shape mismatch: {:?} vs {:?}",
                    a.shape(),
                    b.shape()
                );
                Value::scalar(a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum())
            })
        });
        self.binary(other, v, Op::Dot(self.id, other.id))
    }

    pub fn cross(self, other: Var<'t>) -> Var<'t> {
        let v = self.with_value(|a| {
            other.with_value(|b| {
                assert!(
                    a.shape() == (1, 3) && b.shape() == (1, 3),
                    "autodiff: cross requires 1x3 vectors, got {:?} and {:?}",
                    a.shape(),
                    b.shape()
                );
                Value::vec3(cross3(a.as_vec3(), b.as_vec3()))
            })
        });
        self.binary(other, v, Op::Cross(self.id, other.id))
    }

    pub fn norm(self) -> Var<'t> {
        let v = self.with_value(|a| {
            let sq: f64 = a.data().iter().map(|x| x * x).sum();
            Value::scalar(sq.sqrt())
        });
        self.unary(v, Op::Norm(self.id))
    }

    pub fn matmul(self, other: Var<'t>) -> Var<'t> {
        let v = self.with_value(|a| {
            other.with_value(|b| {
                assert_eq!(
                    a.cols(),
                    b.rows(),
                    "autodiff: matmul shape mismatch: {:?} x {:?}",
                    a.shape(),
                    b.shape()
                );
                let (m, k, n) = (a.rows(), a.cols(), b.cols());
                let mut out = Value::zeros(m, n);
                for i in 0..m {
                    for j in 0..n {
                        let mut acc = 0.0;
                        for l in 0..k {
                            acc += a.at(i, l) * b.at(l, j);
                        }
                        out.data_mut()[i * n + j] = acc;
                    }
                }
                out
            })
        });
        self.binary(other, v, Op::MatMul(self.id, other.id))
    }

    /// Skew-symmetric matrix of a 3-vector.
    pub fn hat(self) -> Var<'t> {
        let v = self.with_value(|a| {
            assert_eq!(a.shape(), (1, 3), "autodiff: hat requires a 1x3 vector, got {:?}", a.shape());
            let [x, y, z] = a.as_vec3();
            Value::matrix3([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
        });
        self.unary(v, Op::Hat(self.id))
    }

    pub fn sum(self) -> Var<'t> {
        let v = self.with_value(|a| Value::scalar(a.data().iter().sum()));
        self.unary(v, Op::Sum(self.id))
    }

    /// Scalar element at flat index `i`.
    pub fn index(self, i: usize) -> Var<'t> {
        let v = self.with_value(|a| {
            assert!(i < a.len(), "autodiff: index {} out of bounds for length {}", i, a.len());
            Value::scalar(a.data()[i])
        });
        self.unary(v, Op::Index(self.id, i))
    }

    /// Rows mapped through a fixed rigid transform.
    pub fn apply_rigid_const(self, rot: [[f64; 3]; 3], trans: [f64; 3]) -> Var<'t> {
        let v = self.with_value(|p| {
            assert_eq!(p.cols(), 3, "autodiff: apply_rigid_const requires Nx3 points, got {:?}", p.shape());
            let mut out = Value::zeros(p.rows(), 3);
            for i in 0..p.rows() {
                let q = [p.at(i, 0), p.at(i, 1), p.at(i, 2)];
                for a in 0..3 {
                    out.data_mut()[i * 3 + a] =
                        rot[a][0] * q[0] + rot[a][1] * q[1] + rot[a][2] * q[2] + trans[a];
                }
            }
            out
        });
        self.unary(v, Op::ApplyRigidConst { points: self.id, rot, trans })
    }

    /// Rows mapped through a differentiable rigid transform; `rot` is 3x3 and
    /// `trans` is 1x3.
    pub fn apply_rigid(self, rot: Var<'t>, trans: Var<'t>) -> Var<'t> {
        let v = self.with_value(|p| {
            rot.with_value(|r| {
                trans.with_value(|t| {
                    assert_eq!(r.shape(), (3, 3), "autodiff: apply_rigid rotation must be 3x3");
                    assert_eq!(t.shape(), (1, 3), "autodiff: apply_rigid translation must be 1x3");
                    assert_eq!(p.cols(), 3, "autodiff: apply_rigid requires Nx3 points, got {:?}", p.shape());
                    let mut out = Value::zeros(p.rows(), 3);
                    for i in 0..p.rows() {
                        let q = [p.at(i, 0), p.at(i, 1), p.at(i, 2)];
                        for a in 0..3 {
                            out.data_mut()[i * 3 + a] = r.at(a, 0) * q[0]
                                + r.at(a, 1) * q[1]
                                + r.at(a, 2) * q[2]
                                + t.data()[a];
                        }
                    }
                    out
                })
            })
        });
        let req = self.tape.requires_grad(self.id)
            || self.tape.requires_grad(rot.id)
            || self.tape.requires_grad(trans.id);
        self.tape.push(v, Op::ApplyRigid { rot: rot.id, trans: trans.id, points: self.id }, req)
    }
}

/// Stack same-shaped rows into one node; inputs must share a column count.
pub fn concat_rows<'t>(tape: &'t Tape, parts: &[Var<'t>]) -> Var<'t> {
    assert!(!parts.is_empty(), "autodiff: concat of zero nodes");
    let cols = parts[0].shape().1;
    let mut data = Vec::new();
    let mut rows = 0;
    for p in parts {
        p.with_value(|v| {
            assert_eq!(
                v.cols(),
                cols,
                "autodiff: concat column mismatch: {} vs {}",
                v.cols(),
                cols
            );
            rows += v.rows();
            data.extend_from_slice(v.data());
        });
    }
    let req = parts.iter().any(|p| tape.requires_grad(p.id));
    let ids = parts.iter().map(|p| p.id).collect();
    tape.push(Value::new(data, rows, cols), Op::Concat(ids), req)
}

fn accumulate_parents(
    nodes: &[Node],
    i: usize,
    g: &[f64],
    grads: &mut [Vec<f64>],
    touched: &mut [bool],
) {
    fn val(nodes: &[Node], id: usize) -> &Value {
        &nodes[id].value
    }
    let mut add_to = |id: usize, grads: &mut [Vec<f64>], f: &mut dyn FnMut(&mut [f64])| {
        if nodes[id].requires_grad {
            f(&mut grads[id]);
            touched[id] = true;
        }
    };

    match &nodes[i].op {
        Op::Leaf => {}
        Op::Add(a, b) => {
            add_to(*a, grads, &mut |ga| ew_accum(ga, g, 1.0));
            add_to(*b, grads, &mut |gb| ew_accum(gb, g, 1.0));
        }
        Op::Sub(a, b) => {
            add_to(*a, grads, &mut |ga| ew_accum(ga, g, 1.0));
            add_to(*b, grads, &mut |gb| ew_accum(gb, g, -1.0));
        }
        Op::Mul(a, b) => {
            let (va, vb) = (val(nodes, *a), val(nodes, *b));
            add_to(*a, grads, &mut |ga| ew_accum_mul(ga, g, vb));
            add_to(*b, grads, &mut |gb| ew_accum_mul(gb, g, va));
        }
        Op::Div(a, b) => {
            let (va, vb) = (val(nodes, *a), val(nodes, *b));
            add_to(*a, grads, &mut |ga| {
                for (k, gk) in g.iter().enumerate() {
                    ga[bc(k, ga.len())] += gk / vb.data()[bc(k, vb.len())];
                }
            });
            add_to(*b, grads, &mut |gb| {
                for (k, gk) in g.iter().enumerate() {
                    let x = va.data()[bc(k, va.len())];
                    let y = vb.data()[bc(k, vb.len())];
                    gb[bc(k, gb.len())] -= gk * x / (y * y);
                }
            });
        }
        Op::Scale(a, s) => add_to(*a, grads, &mut |ga| ew_accum(ga, g, *s)),
        Op::Offset(a, _) => add_to(*a, grads, &mut |ga| ew_accum(ga, g, 1.0)),
        Op::Powf(a, p) => {
            let va = val(nodes, *a);
            add_to(*a, grads, &mut |ga| {
                for (k, gk) in g.iter().enumerate() {
                    ga[k] += gk * p * va.data()[k].powf(p - 1.0);
                }
            });
        }
        Op::Sqrt(a) => {
            let va = val(nodes, *a);
            let out = &nodes[i].value;
            add_to(*a, grads, &mut |ga| {
                for (k, gk) in g.iter().enumerate() {
                    if va.data()[k] > SQRT_CLAMP {
                        ga[k] += gk * 0.5 / out.data()[k];
                    }
                }
            });
        }
        Op::Sigmoid(a) => {
            let out = &nodes[i].value;
            add_to(*a, grads, &mut |ga| {
                for (k, gk) in g.iter().enumerate() {
                    let y = out.data()[k];
                    ga[k] += gk * y * (1.0 - y);
                }
            });
        }
        Op::Sin(a) => {
            let va = val(nodes, *a);
            add_to(*a, grads, &mut |ga| {
                for (k, gk) in g.iter().enumerate() {
                    ga[k] += gk * va.data()[k].cos();
                }
            });
        }
        Op::Cos(a) => {
            let va = val(nodes, *a);
            add_to(*a, grads, &mut |ga| {
                for (k, gk) in g.iter().enumerate() {
                    ga[k] -= gk * va.data()[k].sin();
                }
            });
        }
        Op::Softplus(a) => {
            let va = val(nodes, *a);
            add_to(*a, grads, &mut |ga| {
                for (k, gk) in g.iter().enumerate() {
                    ga[k] += gk * sigmoid(va.data()[k]);
                }
            });
        }
        Op::Abs(a) => {
            let va = val(nodes, *a);
            add_to(*a, grads, &mut |ga| {
                for (k, gk) in g.iter().enumerate() {
                    // signum(0) = 0: flat subgradient at the kink.
                    let x = va.data()[k];
                    let s = if x > 0.0 {
                        1.0
                    } else if x < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    ga[k] += gk * s;
                }
            });
        }
        Op::Clamp(a, lo, hi) => {
            let va = val(nodes, *a);
            add_to(*a, grads, &mut |ga| {
                for (k, gk) in g.iter().enumerate() {
                    let x = va.data()[k];
                    if x >= *lo && x <= *hi {
                        ga[k] += gk;
                    }
                }
            });
        }
        Op::Dot(a, b) => {
            let (va, vb) = (val(nodes, *a), val(nodes, *b));
            let gs = g[0];
            add_to(*a, grads, &mut |ga| {
                for (k, x) in vb.data().iter().enumerate() {
                    ga[k] += gs * x;
                }
            });
            add_to(*b, grads, &mut |gb| {
                for (k, x) in va.data().iter().enumerate() {
                    gb[k] += gs * x;
                }
            });
        }
        Op::Cross(a, b) => {
            let va = val(nodes, *a).as_vec3();
            let vb = val(nodes, *b).as_vec3();
            let gv = [g[0], g[1], g[2]];
            add_to(*a, grads, &mut |ga| {
                let d = cross3(vb, gv);
                for k in 0..3 {
                    ga[k] += d[k];
                }
            });
            add_to(*b, grads, &mut |gb| {
                let d = cross3(gv, va);
                for k in 0..3 {
                    gb[k] += d[k];
                }
            });
        }
        Op::Norm(a) => {
            let va = val(nodes, *a);
            let sq: f64 = va.data().iter().map(|x| x * x).sum();
            let out = nodes[i].value.as_scalar();
            let gs = g[0];
            add_to(*a, grads, &mut |ga| {
                if sq > SQRT_CLAMP {
                    for (k, x) in va.data().iter().enumerate() {
                        ga[k] += gs * x / out;
                    }
                }
            });
        }
        Op::MatMul(a, b) => {
            let (va, vb) = (val(nodes, *a), val(nodes, *b));
            let (m, k, n) = (va.rows(), va.cols(), vb.cols());
            add_to(*a, grads, &mut |ga| {
                for r in 0..m {
                    for l in 0..k {
                        let mut acc = 0.0;
                        for c in 0..n {
                            acc += g[r * n + c] * vb.at(l, c);
                        }
                        ga[r * k + l] += acc;
                    }
                }
            });
            add_to(*b, grads, &mut |gb| {
                for l in 0..k {
                    for c in 0..n {
                        let mut acc = 0.0;
                        for r in 0..m {
                            acc += va.at(r, l) * g[r * n + c];
                        }
                        gb[l * n + c] += acc;
                    }
                }
            });
        }
        Op::Hat(a) => {
            add_to(*a, grads, &mut |ga| {
                ga[0] += g[7] - g[5];
                ga[1] += g[2] - g[6];
                ga[2] += g[3] - g[1];
            });
        }
        Op::Sum(a) => {
            let gs = g[0];
            add_to(*a, grads, &mut |ga| {
                for x in ga.iter_mut() {
                    *x += gs;
                }
            });
        }
        Op::Index(a, idx) => {
            let gs = g[0];
            add_to(*a, grads, &mut |ga| ga[*idx] += gs);
        }
        Op::Concat(parts) => {
            let mut offset = 0;
            for &p in parts {
                let len = nodes[p].value.len();
                let slice = &g[offset..offset + len];
                add_to(p, grads, &mut |gp| {
                    for (k, gk) in slice.iter().enumerate() {
                        gp[k] += gk;
                    }
                });
                offset += len;
            }
        }
        Op::ApplyRigidConst { points, rot, trans: _ } => {
            let n = val(nodes, *points).rows();
            add_to(*points, grads, &mut |gp| {
                for r in 0..n {
                    let gr = [g[r * 3], g[r * 3 + 1], g[r * 3 + 2]];
                    for b in 0..3 {
                        gp[r * 3 + b] += gr[0] * rot[0][b] + gr[1] * rot[1][b] + gr[2] * rot[2][b];
                    }
                }
            });
        }
        Op::ApplyRigid { rot, trans, points } => {
            let vp = val(nodes, *points);
            let vr = val(nodes, *rot);
            let n = vp.rows();
            add_to(*rot, grads, &mut |gr| {
                for r in 0..n {
                    for a in 0..3 {
                        let ga = g[r * 3 + a];
                        for b in 0..3 {
                            gr[a * 3 + b] += ga * vp.at(r, b);
                        }
                    }
                }
            });
            add_to(*trans, grads, &mut |gt| {
                for r in 0..n {
                    for a in 0..3 {
                        gt[a] += g[r * 3 + a];
                    }
                }
            });
            add_to(*points, grads, &mut |gp| {
                for r in 0..n {
                    let gr = [g[r * 3], g[r * 3 + 1], g[r * 3 + 2]];
                    for b in 0..3 {
                        gp[r * 3 + b] +=
                            gr[0] * vr.at(0, b) + gr[1] * vr.at(1, b) + gr[2] * vr.at(2, b);
                    }
                }
            });
        }
        Op::Custom { inputs, op } => {
            let in_values: Vec<&Value> = inputs.iter().map(|&id| val(nodes, id)).collect();
            let in_grads = op.backward(g, &nodes[i].value, &in_values);
            assert_eq!(
                in_grads.len(),
                inputs.len(),
                "autodiff: custom op {} returned {} gradients for {} inputs",
                op.name(),
                in_grads.len(),
                inputs.len()
            );
            for (slot, (&id, gin)) in inputs.iter().zip(&in_grads).enumerate() {
                assert_eq!(
                    gin.len(),
                    nodes[id].value.len(),
                    "autodiff: custom op {} gradient {} has wrong length",
                    op.name(),
                    slot
                );
                add_to(id, grads, &mut |gp| {
                    for (k, gk) in gin.iter().enumerate() {
                        gp[k] += gk;
                    }
                });
            }
        }
    }
}

/// Map a broadcast output index onto an operand of length `len`
/// (scalars broadcast against arrays).
#[inline]
fn bc(k: usize, len: usize) -> usize {
    if len == 1 {
        0
    } else {
        k
    }
}

fn ew_accum(dst: &mut [f64], g: &[f64], s: f64) {
    if dst.len() == g.len() {
        for (d, gk) in dst.iter_mut().zip(g) {
            *d += s * gk;
        }
    } else {
        // Scalar operand of a broadcast op: reduce.
        debug_assert_eq!(dst.len(), 1);
        dst[0] += s * g.iter().sum::<f64>();
    }
}

fn ew_accum_mul(dst: &mut [f64], g: &[f64], other: &Value) {
    if dst.len() == g.len() {
        for (k, (d, gk)) in dst.iter_mut().zip(g).enumerate() {
            *d += gk * other.data()[bc(k, other.len())];
        }
    } else {
        debug_assert_eq!(dst.len(), 1);
        let mut acc = 0.0;
        for (k, gk) in g.iter().enumerate() {
            acc += gk * other.data()[bc(k, other.len())];
        }
        dst[0] += acc;
    }
}

fn ew(a: &Value, b: &Value, op: &str, f: impl Fn(f64, f64) -> f64) -> Value {
    if a.shape() == b.shape() {
        let data = a.data().iter().zip(b.data()).map(|(x, y)| f(*x, *y)).collect();
        Value::new(data, a.rows(), a.cols())
    } else if a.is_scalar() {
        let x = a.as_scalar();
        let data = b.data().iter().map(|y| f(x, *y)).collect();
        Value::new(data, b.rows(), b.cols())
    } else if b.is_scalar() {
        let y = b.as_scalar();
        let data = a.data().iter().map(|x| f(*x, y)).collect();
        Value::new(data, a.rows(), a.cols())
    } else {
        panic!(
            "autodiff: {} shape mismatch: {:?} vs {:?}",
            op,
            a.shape(),
            b.shape()
        );
    }
}

fn map(a: &Value, f: impl Fn(f64) -> f64) -> Value {
    Value::new(a.data().iter().map(|x| f(*x)).collect(), a.rows(), a.cols())
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable `ln(1 + exp(x))`; maps unconstrained reals to positive radii.
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// Inverse of [`softplus`] on positive inputs; used to store radii as
/// unconstrained parameters.
pub fn inverse_softplus(y: f64) -> f64 {
    assert!(y > 0.0, "inverse_softplus requires a positive input, got {y}");
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}
