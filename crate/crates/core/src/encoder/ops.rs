use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

pub(crate) const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_K: f64 = 0.044_715;

pub(crate) fn gelu(u: f64) -> f64 {
    0.5 * u * (1.0 + (GELU_C * (u + GELU_K * u * u * u)).tanh())
}

pub(crate) fn gelu_grad(u: f64) -> f64 {
    let t = (GELU_C * (u + GELU_K * u * u * u)).tanh();
    0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_K * u * u)
}

/// Per-row normalisation statistics kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct LayerNormCache {
    pub xhat: Array2<f64>,
    pub inv_std: Array1<f64>,
}

pub(crate) fn layer_norm(
    x: &Array2<f64>,
    gamma: &Array1<f64>,
    beta: &Array1<f64>,
) -> (Array2<f64>, LayerNormCache) {
    let d = x.ncols() as f64;
    let mut xhat = x.clone();
    let mut inv_std = Array1::zeros(x.nrows());
    for (mut row, s) in xhat.axis_iter_mut(Axis(0)).zip(inv_std.iter_mut()) {
        let mean = row.sum() / d;
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().map(|v| v * v).sum::<f64>() / d;
        let inv = 1.0 / (var + LN_EPS).sqrt();
        row.mapv_inplace(|v| v * inv);
        *s = inv;
    }
    let y = &xhat * gamma + beta;
    (y, LayerNormCache { xhat, inv_std })
}

/// Returns dx; accumulates dgamma / dbeta.
pub(crate) fn layer_norm_backward(
    dy: &Array2<f64>,
    cache: &LayerNormCache,
    gamma: &Array1<f64>,
    dgamma: &mut Array1<f64>,
    dbeta: &mut Array1<f64>,
) -> Array2<f64> {
    *dgamma += &(dy * &cache.xhat).sum_axis(Axis(0));
    *dbeta += &dy.sum_axis(Axis(0));
    let d = dy.ncols() as f64;
    let mut dx = dy * gamma;
    for ((mut row, xhat), &inv) in dx
        .axis_iter_mut(Axis(0))
        .zip(cache.xhat.axis_iter(Axis(0)))
        .zip(cache.inv_std.iter())
    {
        let mean_g = row.sum() / d;
        let mean_gx = row.dot(&xhat) / d;
        Zip::from(&mut row)
            .and(&xhat)
            .for_each(|g, &xh| *g = inv * (*g - mean_g - xh * mean_gx));
    }
    dx
}

/// Row-wise softmax of `scores` where `key_mask[j] == false` excludes column j.
pub(crate) fn masked_softmax(scores: &mut Array2<f64>, key_mask: &[bool]) {
    for mut row in scores.axis_iter_mut(Axis(0)) {
        let mut max = f64::NEG_INFINITY;
        for (v, &keep) in row.iter().zip(key_mask) {
            if keep && *v > max {
                max = *v;
            }
        }
        let mut sum = 0.0;
        for (v, &keep) in row.iter_mut().zip(key_mask) {
            *v = if keep { (*v - max).exp() } else { 0.0 };
            sum += *v;
        }
        row.mapv_inplace(|v| v / sum);
    }
}

/// Inverted-dropout mask: entries are 0 or 1/(1-rate).
pub(crate) fn dropout_mask<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    rate: f64,
    rng: &mut R,
) -> Array2<f64> {
    let keep = 1.0 / (1.0 - rate);
    Array2::from_shape_simple_fn((rows, cols), || {
        if rng.gen::<f64>() < rate {
            0.0
        } else {
            keep
        }
    })
}

pub(crate) fn add_bias(x: &mut Array2<f64>, b: &Array1<f64>) {
    *x += b;
}

/// `x · w + b`
pub(crate) fn affine(x: ArrayView2<f64>, w: &Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
    let mut y = x.dot(w);
    add_bias(&mut y, b);
    y
}

thread_local! {
    static PE_CACHE: RefCell<HashMap<(usize, usize), Rc<Array2<f64>>>> = RefCell::new(HashMap::new());
}

/// Fixed sinusoidal position table, `max_len × d_model`.
pub(crate) fn positional_encoding(max_len: usize, d_model: usize) -> Rc<Array2<f64>> {
    PE_CACHE.with(|cache| {
        cache
            .borrow_mut()
            .entry((max_len, d_model))
            .or_insert_with(|| {
                Rc::new(Array2::from_shape_fn((max_len, d_model), |(pos, i)| {
                    let pair = (i / 2) as f64;
                    let angle = pos as f64 / 10000f64.powf(2.0 * pair / d_model as f64);
                    if i % 2 == 0 {
                        angle.sin()
                    } else {
                        angle.cos()
                    }
                }))
            })
            .clone()
    })
}
