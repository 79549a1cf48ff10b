//! Central-difference verification of analytic gradients.

use super::params::{Bindings, ParamSet};
use super::tape::Tape;
use super::ModelError;

/// Compares analytic gradients of `loss_fn` against central finite
/// differences with perturbation `eps` and returns the maximum relative
/// error over the checked parameter entries.
///
/// `loss_fn` must be deterministic and scalar-valued: it receives a fresh
/// tape plus bindings for `params` and returns the loss node. At most
/// `max_entries` parameter entries are checked, strided evenly through
/// each matrix.
pub fn gradient_check<F>(
    params: &ParamSet,
    loss_fn: F,
    eps: f64,
    max_entries: usize,
) -> Result<f64, ModelError>
where
    F: Fn(&mut Tape, &Bindings) -> super::tape::Var,
{
    // Analytic pass.
    let mut tape = Tape::new();
    let binds = Bindings::bind(&mut tape, params);
    let loss = loss_fn(&mut tape, &binds);
    let base = tape.scalar(loss);
    if !base.is_finite() {
        return Err(ModelError::NonFinite("loss".into()));
    }
    let grads = tape.backward(loss);

    let total: usize = params.n_scalars();
    let stride = total.div_ceil(max_entries.max(1)).max(1);

    let mut max_rel = 0.0f64;
    let mut flat_index = 0usize;
    for (name, value) in params.iter() {
        let analytic = grads.get(binds.var(name)).cloned();
        for idx in 0..value.len() {
            let pick = flat_index % stride == 0;
            flat_index += 1;
            if !pick {
                continue;
            }
            let (r, c) = (idx / value.ncols(), idx % value.ncols());

            let mut plus = params.clone();
            plus.get_mut(name)[[r, c]] += eps;
            let mut minus = params.clone();
            minus.get_mut(name)[[r, c]] -= eps;

            let lp = eval_loss(&plus, &loss_fn)?;
            let lm = eval_loss(&minus, &loss_fn)?;
            let numeric = (lp - lm) / (2.0 * eps);
            let a = analytic.as_ref().map_or(0.0, |g| g[[r, c]]);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            max_rel = max_rel.max(rel);
        }
    }
    Ok(max_rel)
}

fn eval_loss<F>(params: &ParamSet, loss_fn: &F) -> Result<f64, ModelError>
where
    F: Fn(&mut Tape, &Bindings) -> super::tape::Var,
{
    let mut tape = Tape::new();
    let binds = Bindings::bind(&mut tape, params);
    let loss = loss_fn(&mut tape, &binds);
    let value = tape.scalar(loss);
    if !value.is_finite() {
        return Err(ModelError::NonFinite("loss".into()));
    }
    Ok(value)
}
