//! Central finite differences for checking hand-written gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::tasks::{EncodedExample, LossKind, Model};

/// Relative error floor: below this magnitude both values are treated as
/// zero-scale and the absolute difference is compared instead.
pub const REL_FLOOR: f64 = 1e-5;

/// `|a - n| / max(|a|, |n|, REL_FLOOR)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Estimates `d f / d x[i]` for every `i` with central differences of step
/// `eps`, restoring `x` afterwards.
pub fn central_differences(x: &mut [f64], eps: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + eps;
        let plus = f(x);
        x[i] = orig - eps;
        let minus = f(x);
        x[i] = orig;
        out.push((plus - minus) / (2.0 * eps));
    }
    out
}

/// Largest [`relative_error`] over paired entries.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

/// Per-tensor maximum relative error between the analytic gradient of the
/// loss of `model` on `example` and central differences of step `eps`, in
/// [`Model::slices`] order. Dropout masks are drawn from `dropout_seed`
/// afresh for every evaluation, so they stay fixed across perturbations.
pub fn model_gradient_errors(
    model: &Model,
    example: &EncodedExample,
    loss: &LossKind,
    dropout_seed: Option<u64>,
    eps: f64,
) -> Result<Vec<f64>> {
    let eval = |m: &Model| {
        let mut rng = ChaCha8Rng::seed_from_u64(dropout_seed.unwrap_or(0));
        m.loss_and_grad(example, loss, dropout_seed.is_some(), &mut rng)
    };
    let (_, grads) = eval(model)?;
    let analytic: Vec<Vec<f64>> = grads.slices().iter().map(|s| s.to_vec()).collect();
    let mut probe = model.clone();
    let mut errors = Vec::with_capacity(analytic.len());
    for (t, a) in analytic.iter().enumerate() {
        let mut values = model.slices()[t].to_vec();
        let mut failure = None;
        let numeric = central_differences(&mut values, eps, |vals| {
            probe.slices_mut()[t].copy_from_slice(vals);
            match eval(&probe) {
                Ok((l, _)) => l,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
        probe.slices_mut()[t].copy_from_slice(model.slices()[t]);
        errors.push(max_relative_error(a, &numeric));
    }
    Ok(errors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic() {
        let mut x = vec![1.0, -2.0, 0.5];
        let g = central_differences(&mut x, 1e-5, |x| x.iter().map(|v| v * v * v).sum());
        let exact: Vec<f64> = x.iter().map(|v| 3.0 * v * v).collect();
        assert!(max_relative_error(&exact, &g) < 1e-8);
        assert_eq!(x, vec![1.0, -2.0, 0.5]);
    }
}
