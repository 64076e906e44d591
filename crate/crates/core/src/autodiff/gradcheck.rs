//! Central-difference gradient checking.

use super::params::ParamStore;
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::Result;

/// Per-coordinate error `|a - n| / max(1, |a|, |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / 1f64.max(analytic.abs()).max(numeric.abs())
}

fn scalar_of(tape: &Tape, v: Var) -> f64 {
    tape.value(v).data()[0]
}

/// Compares the tape's gradient of `f` with respect to each input against
/// `(f(θ + εe) - f(θ - εe)) / 2ε`, returning the largest relative error.
pub fn grad_check<F>(f: F, inputs: &[Tensor], epsilon: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let loss = f(&mut tape, &vars)?;
    let grads = tape.backward(loss)?;

    let eval = |values: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = f(&mut tape, &vars)?;
        Ok(scalar_of(&tape, out))
    };

    let mut worst = 0.0f64;
    let mut work: Vec<Tensor> = inputs.to_vec();
    for (i, var) in vars.iter().enumerate() {
        let analytic = grads.get(*var).cloned();
        for k in 0..inputs[i].len() {
            let orig = work[i].data()[k];
            work[i].data_mut()[k] = orig + epsilon;
            let plus = eval(&work)?;
            work[i].data_mut()[k] = orig - epsilon;
            let minus = eval(&work)?;
            work[i].data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = analytic.as_ref().map_or(0.0, |g| g.data()[k]);
            worst = worst.max(relative_error(a, numeric));
        }
    }
    Ok(worst)
}

/// Same check over every scalar of a parameter store.
pub fn grad_check_params<F>(store: &mut ParamStore, f: F, epsilon: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut tape = Tape::new();
    let loss = f(&mut tape, store)?;
    let grads = tape.backward(loss)?;
    let mut analytic = store.clone();
    analytic.zero_grads();
    grads.accumulate_into(&mut analytic);

    let mut worst = 0.0f64;
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        for k in 0..store.value(id).len() {
            let orig = store.value(id).data()[k];
            store.value_mut(id).data_mut()[k] = orig + epsilon;
            let mut t = Tape::new();
            let v = f(&mut t, store)?;
            let plus = scalar_of(&t, v);
            store.value_mut(id).data_mut()[k] = orig - epsilon;
            let mut t = Tape::new();
            let v = f(&mut t, store)?;
            let minus = scalar_of(&t, v);
            store.value_mut(id).data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * epsilon);
            worst = worst.max(relative_error(analytic.grad(id).data()[k], numeric));
        }
    }
    Ok(worst)
}
