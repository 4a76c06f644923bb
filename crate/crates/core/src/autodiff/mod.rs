//! Reverse-mode differentiation substrate.
//!
//! Every differentiable stage of the estimation pipeline — curve and mesh
//! construction, kinematic assembly, projection, soft rasterization, loss
//! evaluation — records onto a [`Tape`] and is differentiated by a single
//! reverse sweep from the scalar loss.

mod grad_check;
mod tape;
mod value;

pub use grad_check::{diff_fn, grad_check};
pub use tape::{concat_rows, inverse_softplus, softplus, CustomOp, Tape, Var, SQRT_CLAMP};
pub use value::Value;
