//! Central finite-difference verification of tape gradients.

use super::tape::{Tape, Var};
use super::value::Value;

/// Identity helper that pins a closure to the higher-ranked signature
/// [`grad_check`] expects; lets call sites write `diff_fn(|tape, x| ...)`.
pub fn diff_fn<F>(f: F) -> F
where
    F: for<'t> Fn(&'t Tape, Var<'t>) -> Var<'t>,
{
    f
}

/// Compare the analytic gradient of `f` at `x0` against central finite
/// differences with the given step.
///
/// Returns the maximum over coordinates of
/// `|analytic - central| / max(1, |central|)`. NaN anywhere propagates into
/// the result and fails any threshold comparison.
pub fn grad_check<F>(f: F, x0: &[f64], step: f64) -> f64
where
    F: for<'t> Fn(&'t Tape, Var<'t>) -> Var<'t>,
{
    let analytic = {
        let tape = Tape::new();
        let x = tape.leaf(Value::row(x0.to_vec()));
        let y = f(&tape, x);
        tape.backward(y);
        x.grad()
    };

    let eval = |xs: &[f64]| -> f64 {
        let tape = Tape::new();
        let x = tape.leaf(Value::row(xs.to_vec()));
        f(&tape, x).scalar_value()
    };

    let mut worst = 0.0f64;
    let mut probe = x0.to_vec();
    for i in 0..x0.len() {
        probe[i] = x0[i] + step;
        let hi = eval(&probe);
        probe[i] = x0[i] - step;
        let lo = eval(&probe);
        probe[i] = x0[i];
        let central = (hi - lo) / (2.0 * step);
        let err = (analytic[i] - central).abs() / central.abs().max(1.0);
        if !(err <= worst) {
            worst = err; // keeps NaN
        }
    }
    worst
}
