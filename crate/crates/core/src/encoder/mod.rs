//! A small post-LN bidirectional transformer encoder with hand-written
//! reverse-mode gradients, and a bag-of-features encoder for the frozen
//! feature regime.

mod ops;
mod pass;

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenizer::{TokenSequence, CLS_ID, PAD_ID, SEP_ID};

pub use pass::{backward, backward_into, forward, ForwardCache};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub d_ff: usize,
    pub max_len: usize,
    pub dropout_rate: f64,
}

impl EncoderConfig {
    pub fn new(vocab_size: usize) -> Self {
        EncoderConfig {
            vocab_size,
            d_model: 64,
            n_heads: 4,
            n_layers: 2,
            d_ff: 256,
            max_len: 128,
            dropout_rate: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("vocab_size", self.vocab_size),
            ("d_model", self.d_model),
            ("n_heads", self.n_heads),
            ("n_layers", self.n_layers),
            ("d_ff", self.d_ff),
            ("max_len", self.max_len),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::config(format!("{name} must be ≥ 1")));
        }
        if self.d_model % self.n_heads != 0 {
            return Err(Error::config(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::config(format!(
                "dropout_rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub wq: Array2<f64>,
    pub bq: Array1<f64>,
    pub wk: Array2<f64>,
    pub bk: Array1<f64>,
    pub wv: Array2<f64>,
    pub bv: Array1<f64>,
    pub wo: Array2<f64>,
    pub bo: Array1<f64>,
    pub ln1_gamma: Array1<f64>,
    pub ln1_beta: Array1<f64>,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub ln2_gamma: Array1<f64>,
    pub ln2_beta: Array1<f64>,
}

impl LayerParams {
    fn zeros(d: usize, f: usize) -> Self {
        LayerParams {
            wq: Array2::zeros((d, d)),
            bq: Array1::zeros(d),
            wk: Array2::zeros((d, d)),
            bk: Array1::zeros(d),
            wv: Array2::zeros((d, d)),
            bv: Array1::zeros(d),
            wo: Array2::zeros((d, d)),
            bo: Array1::zeros(d),
            ln1_gamma: Array1::zeros(d),
            ln1_beta: Array1::zeros(d),
            w1: Array2::zeros((d, f)),
            b1: Array1::zeros(f),
            w2: Array2::zeros((f, d)),
            b2: Array1::zeros(d),
            ln2_gamma: Array1::zeros(d),
            ln2_beta: Array1::zeros(d),
        }
    }
}

/// Encoder weights. The same shape doubles as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    /// `vocab_size × d_model`
    pub token_embedding: Array2<f64>,
    pub layers: Vec<LayerParams>,
}

/// Borrowed view of one named tensor.
#[derive(Debug, Clone, Copy)]
pub struct TensorRef<'a> {
    pub shape: [usize; 2],
    pub data: &'a [f64],
}

macro_rules! layer_fields {
    ($mac:ident) => {
        $mac!(wq, bq, wk, bk, wv, bv, wo, bo, ln1_gamma, ln1_beta, w1, b1, w2, b2, ln2_gamma, ln2_beta)
    };
}

impl EncoderParams {
    /// All-zero parameters with the shapes implied by `config`.
    pub fn zeros(config: &EncoderConfig) -> Self {
        EncoderParams {
            token_embedding: Array2::zeros((config.vocab_size, config.d_model)),
            layers: (0..config.n_layers)
                .map(|_| LayerParams::zeros(config.d_model, config.d_ff))
                .collect(),
        }
    }

    /// Tensors in a fixed order with stable names.
    pub fn named_tensors(&self) -> Vec<(String, TensorRef<'_>)> {
        let mut out = vec![(
            "token_embedding".to_string(),
            tensor_ref2(&self.token_embedding),
        )];
        for (i, layer) in self.layers.iter().enumerate() {
            macro_rules! push_all {
                ($($f:ident),*) => {
                    $(out.push((format!("layer{i}.{}", stringify!($f)), layer.$f.tensor_ref()));)*
                };
            }
            layer_fields!(push_all);
        }
        out
    }

    /// Mutable slices in the same order as [`named_tensors`](Self::named_tensors).
    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![self
            .token_embedding
            .as_slice_mut()
            .expect("contiguous")];
        for layer in &mut self.layers {
            macro_rules! push_all {
                ($($f:ident),*) => {
                    $(out.push(layer.$f.as_slice_mut().expect("contiguous"));)*
                };
            }
            layer_fields!(push_all);
        }
        out
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        self.named_tensors().into_iter().map(|(_, t)| t.data).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}

trait AsTensorRef {
    fn tensor_ref(&self) -> TensorRef<'_>;
}

impl AsTensorRef for Array1<f64> {
    fn tensor_ref(&self) -> TensorRef<'_> {
        TensorRef {
            shape: [1, self.len()],
            data: self.as_slice().expect("contiguous"),
        }
    }
}

impl AsTensorRef for Array2<f64> {
    fn tensor_ref(&self) -> TensorRef<'_> {
        tensor_ref2(self)
    }
}

fn tensor_ref2(a: &Array2<f64>) -> TensorRef<'_> {
    TensorRef {
        shape: [a.nrows(), a.ncols()],
        data: a.as_slice().expect("contiguous"),
    }
}

/// Glorot-uniform weights, zero biases, unit layer-norm scales. The result
/// depends only on `config` and `seed`.
pub fn init_params(config: &EncoderConfig, seed: u64) -> EncoderParams {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    init_params_with(config, &mut rng)
}

pub fn init_params_with<R: Rng + ?Sized>(config: &EncoderConfig, rng: &mut R) -> EncoderParams {
    let d = config.d_model;
    let f = config.d_ff;
    let mut p = EncoderParams::zeros(config);
    glorot_fill(&mut p.token_embedding, rng);
    for layer in &mut p.layers {
        for w in [&mut layer.wq, &mut layer.wk, &mut layer.wv, &mut layer.wo] {
            glorot_fill(w, rng);
        }
        glorot_fill(&mut layer.w1, rng);
        glorot_fill(&mut layer.w2, rng);
        layer.ln1_gamma.fill(1.0);
        layer.ln2_gamma.fill(1.0);
        debug_assert_eq!(layer.w1.dim(), (d, f));
    }
    p
}

/// Half-width of the Glorot-uniform interval for a `fan_in × fan_out` matrix.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

pub(crate) fn glorot_fill<R: Rng + ?Sized>(w: &mut Array2<f64>, rng: &mut R) {
    let bound = glorot_bound(w.nrows(), w.ncols());
    w.mapv_inplace(|_| rng.gen_range(-bound..=bound));
}

/// Encoder output: the `[CLS]` vector and every position's hidden state.
/// Also used to carry upstream gradients into [`backward`].
#[derive(Debug, Clone, PartialEq)]
pub struct PooledOutput {
    pub sentence_vec: Array1<f64>,
    /// `max_len × d_model`
    pub token_vecs: Array2<f64>,
}

impl PooledOutput {
    pub fn zeros(config: &EncoderConfig) -> Self {
        PooledOutput {
            sentence_vec: Array1::zeros(config.d_model),
            token_vecs: Array2::zeros((config.max_len, config.d_model)),
        }
    }
}

/// L2-normalised term frequencies over real, non-special tokens.
pub fn bow_encode(seq: &TokenSequence, vocab_size: usize) -> Array1<f64> {
    let mut v = Array1::<f64>::zeros(vocab_size);
    for (&id, &m) in seq.ids.iter().zip(&seq.attention_mask) {
        if m == 1 && id != CLS_ID && id != SEP_ID && id != PAD_ID && (id as usize) < vocab_size {
            v[id as usize] += 1.0;
        }
    }
    let norm = v.dot(&v).sqrt();
    if norm > 0.0 {
        v /= norm;
    }
    v
}
