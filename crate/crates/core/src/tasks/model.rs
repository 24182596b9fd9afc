use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::heads::{Head, Task};
use super::losses::{cross_entropy, focal_loss_from_logit, FocalConfig};
use super::span::span_loss;
use crate::encoder::{backward_into, forward, EncoderConfig, EncoderParams, PooledOutput};
use crate::error::{Error, Result};
use crate::tokenizer::{TokenSequence, Vocab};

/// Training objective for the match head. Sentiment and span heads always
/// use softmax cross-entropy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    CrossEntropy,
    Focal(FocalConfig),
}

impl Default for LossKind {
    fn default() -> Self {
        LossKind::CrossEntropy
    }
}

/// Encoder, task head and the vocabulary they were trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: EncoderConfig,
    pub encoder: EncoderParams,
    pub head: Head,
    pub vocab: Vocab,
}

/// Gradient buffers shaped like a [`Model`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub encoder: EncoderParams,
    pub head: Head,
}

impl ModelGrads {
    pub fn zeros_for(model: &Model) -> Self {
        ModelGrads {
            encoder: EncoderParams::zeros(&model.config),
            head: model.head.zeros_like(),
        }
    }

    /// Encoder tensors followed by head tensors.
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut s = self.encoder.slices();
        s.extend(self.head.slices());
        s
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut s = self.encoder.slices_mut();
        s.extend(self.head.slices_mut());
        s
    }

    pub fn add_assign(&mut self, other: &ModelGrads) {
        for (a, b) in self.slices_mut().into_iter().zip(other.slices()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for s in self.slices_mut() {
            for x in s.iter_mut() {
                *x *= factor;
            }
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }
}

/// One encoded training example with its supervision.
#[derive(Debug, Clone, PartialEq)]
pub enum Supervision {
    Sentiment(usize),
    Match(bool),
    /// Inclusive token positions of the gold answer.
    Span { start: usize, end: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedExample {
    pub seq: TokenSequence,
    pub target: Supervision,
}

impl Model {
    /// Fresh model: encoder parameters first, then the head, both drawn from `rng`.
    pub fn init<R: Rng + ?Sized>(config: EncoderConfig, task: Task, vocab: Vocab, rng: &mut R) -> Result<Self> {
        config.validate()?;
        if config.vocab_size != vocab.len() {
            return Err(Error::config(format!(
                "encoder vocab_size {} differs from vocabulary size {}",
                config.vocab_size,
                vocab.len()
            )));
        }
        let encoder = crate::encoder::init_params_with(&config, rng);
        let head = Head::init(task, config.d_model, rng);
        Ok(Model {
            config,
            encoder,
            head,
            vocab,
        })
    }

    pub fn task(&self) -> Task {
        self.head.task()
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut s = self.encoder.slices_mut();
        s.extend(self.head.slices_mut());
        s
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        let mut s = self.encoder.slices();
        s.extend(self.head.slices());
        s
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    /// Inference-mode encoder pass.
    pub fn encode(&self, seq: &TokenSequence) -> Result<PooledOutput> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        Ok(forward(&self.encoder, &self.config, seq, false, &mut rng)?.0)
    }

    /// Loss of one example and the gradient of every parameter.
    pub fn loss_and_grad<R: Rng + ?Sized>(
        &self,
        example: &EncodedExample,
        loss_kind: &LossKind,
        training: bool,
        rng: &mut R,
    ) -> Result<(f64, ModelGrads)> {
        let (out, cache) = forward(&self.encoder, &self.config, &example.seq, training, rng)?;
        let mut grads = ModelGrads::zeros_for(self);
        let mut upstream = PooledOutput::zeros(&self.config);
        let cls = out.sentence_vec.view();

        let loss = match (&self.head, &example.target, &mut grads.head) {
            (Head::Sentiment(h), Supervision::Sentiment(gold), Head::Sentiment(g)) => {
                let logits = h.logits(cls);
                let (loss, d_logits) = cross_entropy(&logits, *gold);
                upstream.sentence_vec = h.backward(cls, &d_logits, g);
                loss
            }
            (Head::Match(h), Supervision::Match(y), Head::Match(g)) => {
                let z = h.logit(cls);
                let focal = match loss_kind {
                    LossKind::CrossEntropy => FocalConfig {
                        gamma: 0.0,
                        alpha: None,
                    },
                    LossKind::Focal(cfg) => *cfg,
                };
                let (loss, dz) = focal_loss_from_logit(z, *y, &focal);
                upstream.sentence_vec = h.backward(cls, dz, g);
                loss
            }
            (Head::Span(h), Supervision::Span { start, end }, Head::Span(g)) => {
                let (s, e) = h.scores(out.token_vecs.view());
                let valid: Vec<usize> = example.seq.context_positions().collect();
                let (loss, ds, de) = span_loss(&s, &e, &valid, *start, *end)?;
                upstream.token_vecs = h.backward(out.token_vecs.view(), &ds, &de, g);
                loss
            }
            _ => {
                return Err(Error::input(format!(
                    "example supervision does not match the {} head",
                    self.task().as_str()
                )))
            }
        };
        backward_into(&self.encoder, &self.config, &cache, &upstream, &mut grads.encoder);
        Ok((loss, grads))
    }

    /// Start and end scores for a pair encoding (span head only).
    pub fn span_scores(&self, seq: &TokenSequence) -> Result<(Array1<f64>, Array1<f64>)> {
        let Head::Span(h) = &self.head else {
            return Err(self.wrong_head(Task::Mrc));
        };
        let out = self.encode(seq)?;
        Ok(h.scores(out.token_vecs.view()))
    }

    pub(crate) fn wrong_head(&self, wanted: Task) -> Error {
        Error::input(format!(
            "model has a {} head, expected {}",
            self.task().as_str(),
            wanted.as_str()
        ))
    }
}
