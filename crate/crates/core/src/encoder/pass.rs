use ndarray::{s, Array2, Axis};
use rand::Rng;

use super::ops::{
    affine, dropout_mask, gelu, gelu_grad, layer_norm, layer_norm_backward, masked_softmax,
    positional_encoding, LayerNormCache,
};
use super::{EncoderConfig, EncoderParams, LayerParams, PooledOutput};
use crate::error::{Error, Result};
use crate::tokenizer::TokenSequence;

#[derive(Debug, Clone)]
struct LayerCache {
    x_in: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    probs: Vec<Array2<f64>>,
    ctx: Array2<f64>,
    attn_drop: Option<Array2<f64>>,
    ln1: LayerNormCache,
    h1: Array2<f64>,
    pre_act: Array2<f64>,
    act: Array2<f64>,
    ffn_drop: Option<Array2<f64>>,
    ln2: LayerNormCache,
}

/// Activations recorded by [`forward`] and consumed by [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    ids: Vec<u32>,
    emb_drop: Option<Array2<f64>>,
    layers: Vec<LayerCache>,
}

impl ForwardCache {
    /// Attention distribution of one head, `max_len × max_len` (query rows).
    pub fn attention_probs(&self, layer: usize, head: usize) -> &Array2<f64> {
        &self.layers[layer].probs[head]
    }
}

/// Runs the encoder over one sequence.
///
/// Token embeddings are scaled by √d_model and added to sinusoidal position
/// codes. Each layer applies masked multi-head self-attention, a residual
/// add and layer norm, then a GELU feed-forward block, residual and layer
/// norm. Padded keys are excluded from attention. Dropout (embeddings,
/// attention output, feed-forward output) is applied only when `training`.
pub fn forward<R: Rng + ?Sized>(
    params: &EncoderParams,
    config: &EncoderConfig,
    seq: &TokenSequence,
    training: bool,
    rng: &mut R,
) -> Result<(PooledOutput, ForwardCache)> {
    let len = config.max_len;
    let d = config.d_model;
    if seq.ids.len() != len {
        return Err(Error::input(format!(
            "sequence length {} does not match encoder max_len {len}",
            seq.ids.len()
        )));
    }
    if let Some(&bad) = seq.ids.iter().find(|&&id| id as usize >= config.vocab_size) {
        return Err(Error::input(format!(
            "token id {bad} out of range for vocab size {}",
            config.vocab_size
        )));
    }
    let key_mask: Vec<bool> = seq.attention_mask.iter().map(|&m| m == 1).collect();
    let dropout = training && config.dropout_rate > 0.0;

    let pe = positional_encoding(len, d);
    let scale = (d as f64).sqrt();
    let mut x = Array2::from_shape_fn((len, d), |(t, j)| {
        params.token_embedding[[seq.ids[t] as usize, j]] * scale + pe[[t, j]]
    });
    let emb_drop = dropout.then(|| dropout_mask(len, d, config.dropout_rate, rng));
    if let Some(m) = &emb_drop {
        x *= m;
    }

    let mut layers = Vec::with_capacity(config.n_layers);
    for lp in &params.layers {
        let (out, cache) = layer_forward(lp, config, x, &key_mask, dropout, rng);
        layers.push(cache);
        x = out;
    }

    let output = PooledOutput {
        sentence_vec: x.row(0).to_owned(),
        token_vecs: x,
    };
    Ok((
        output,
        ForwardCache {
            ids: seq.ids.clone(),
            emb_drop,
            layers,
        },
    ))
}

fn layer_forward<R: Rng + ?Sized>(
    lp: &LayerParams,
    config: &EncoderConfig,
    x: Array2<f64>,
    key_mask: &[bool],
    dropout: bool,
    rng: &mut R,
) -> (Array2<f64>, LayerCache) {
    let (len, d) = x.dim();
    let dh = config.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();

    let q = affine(x.view(), &lp.wq, &lp.bq);
    let k = affine(x.view(), &lp.wk, &lp.bk);
    let v = affine(x.view(), &lp.wv, &lp.bv);

    let mut ctx = Array2::zeros((len, d));
    let mut probs = Vec::with_capacity(config.n_heads);
    for h in 0..config.n_heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let mut scores = q.slice(cols).dot(&k.slice(cols).t());
        scores *= scale;
        masked_softmax(&mut scores, key_mask);
        ctx.slice_mut(cols).assign(&scores.dot(&v.slice(cols)));
        probs.push(scores);
    }

    let mut attn_out = affine(ctx.view(), &lp.wo, &lp.bo);
    let attn_drop = dropout.then(|| dropout_mask(len, d, config.dropout_rate, rng));
    if let Some(m) = &attn_drop {
        attn_out *= m;
    }
    let (h1, ln1) = layer_norm(&(&x + &attn_out), &lp.ln1_gamma, &lp.ln1_beta);

    let pre_act = affine(h1.view(), &lp.w1, &lp.b1);
    let act = pre_act.mapv(gelu);
    let mut ffn_out = affine(act.view(), &lp.w2, &lp.b2);
    let ffn_drop = dropout.then(|| dropout_mask(len, d, config.dropout_rate, rng));
    if let Some(m) = &ffn_drop {
        ffn_out *= m;
    }
    let (out, ln2) = layer_norm(&(&h1 + &ffn_out), &lp.ln2_gamma, &lp.ln2_beta);

    let cache = LayerCache {
        x_in: x,
        q,
        k,
        v,
        probs,
        ctx,
        attn_drop,
        ln1,
        h1,
        pre_act,
        act,
        ffn_drop,
        ln2,
    };
    (out, cache)
}

/// Exact gradients of all encoder parameters given the gradient of some
/// scalar with respect to the encoder output.
pub fn backward(
    params: &EncoderParams,
    config: &EncoderConfig,
    cache: &ForwardCache,
    upstream: &PooledOutput,
) -> EncoderParams {
    let mut grads = EncoderParams::zeros(config);
    backward_into(params, config, cache, upstream, &mut grads);
    grads
}

/// Like [`backward`] but adds into an existing gradient buffer.
pub fn backward_into(
    params: &EncoderParams,
    config: &EncoderConfig,
    cache: &ForwardCache,
    upstream: &PooledOutput,
    grads: &mut EncoderParams,
) {
    let mut dx = upstream.token_vecs.clone();
    {
        let mut row0 = dx.row_mut(0);
        row0 += &upstream.sentence_vec;
    }
    for ((lp, lc), lg) in params
        .layers
        .iter()
        .zip(&cache.layers)
        .zip(grads.layers.iter_mut())
        .rev()
    {
        dx = layer_backward(lp, lc, lg, config, dx);
    }
    if let Some(m) = &cache.emb_drop {
        dx *= m;
    }
    let scale = (config.d_model as f64).sqrt();
    for (t, &id) in cache.ids.iter().enumerate() {
        let mut row = grads.token_embedding.row_mut(id as usize);
        row.scaled_add(scale, &dx.row(t));
    }
}

fn layer_backward(
    lp: &LayerParams,
    lc: &LayerCache,
    lg: &mut LayerParams,
    config: &EncoderConfig,
    dout: Array2<f64>,
) -> Array2<f64> {
    let dh = config.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();

    // second sublayer
    let d_r2 = layer_norm_backward(&dout, &lc.ln2, &lp.ln2_gamma, &mut lg.ln2_gamma, &mut lg.ln2_beta);
    let mut d_h1 = d_r2.clone();
    let mut d_ffn = d_r2;
    if let Some(m) = &lc.ffn_drop {
        d_ffn *= m;
    }
    lg.w2 += &lc.act.t().dot(&d_ffn);
    lg.b2 += &d_ffn.sum_axis(Axis(0));
    let mut d_pre = d_ffn.dot(&lp.w2.t());
    d_pre.zip_mut_with(&lc.pre_act, |g, &u| *g *= gelu_grad(u));
    lg.w1 += &lc.h1.t().dot(&d_pre);
    lg.b1 += &d_pre.sum_axis(Axis(0));
    d_h1 += &d_pre.dot(&lp.w1.t());

    // first sublayer
    let d_r1 = layer_norm_backward(&d_h1, &lc.ln1, &lp.ln1_gamma, &mut lg.ln1_gamma, &mut lg.ln1_beta);
    let mut d_x = d_r1.clone();
    let mut d_attn = d_r1;
    if let Some(m) = &lc.attn_drop {
        d_attn *= m;
    }
    lg.wo += &lc.ctx.t().dot(&d_attn);
    lg.bo += &d_attn.sum_axis(Axis(0));
    let d_ctx = d_attn.dot(&lp.wo.t());

    let mut dq = Array2::zeros(lc.q.raw_dim());
    let mut dk = Array2::zeros(lc.k.raw_dim());
    let mut dv = Array2::zeros(lc.v.raw_dim());
    for (h, probs) in lc.probs.iter().enumerate() {
        let cols = s![.., h * dh..(h + 1) * dh];
        let d_ctx_h = d_ctx.slice(cols);
        dv.slice_mut(cols).assign(&probs.t().dot(&d_ctx_h));
        let mut d_scores = d_ctx_h.dot(&lc.v.slice(cols).t());
        // softmax backward, row by row
        for (mut ds_row, p_row) in d_scores.axis_iter_mut(Axis(0)).zip(probs.axis_iter(Axis(0))) {
            let inner = ds_row.dot(&p_row);
            ds_row.zip_mut_with(&p_row, |g, &p| *g = p * (*g - inner));
        }
        d_scores *= scale;
        dq.slice_mut(cols).assign(&d_scores.dot(&lc.k.slice(cols)));
        dk.slice_mut(cols).assign(&d_scores.t().dot(&lc.q.slice(cols)));
    }

    let xt = lc.x_in.t();
    lg.wq += &xt.dot(&dq);
    lg.bq += &dq.sum_axis(Axis(0));
    lg.wk += &xt.dot(&dk);
    lg.bk += &dk.sum_axis(Axis(0));
    lg.wv += &xt.dot(&dv);
    lg.bv += &dv.sum_axis(Axis(0));
    d_x += &dq.dot(&lp.wq.t());
    d_x += &dk.dot(&lp.wk.t());
    d_x += &dv.dot(&lp.wv.t());
    d_x
}
