use serde::{Deserialize, Serialize};

use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::tasks::{check_threshold, LossKind, Task, DEFAULT_MAX_SPAN_LEN, DEFAULT_TEMPLATE};

/// Encoder hyperparameters that do not depend on the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderShape {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub d_ff: usize,
    pub dropout_rate: f64,
}

impl Default for EncoderShape {
    fn default() -> Self {
        EncoderShape {
            d_model: 64,
            n_heads: 4,
            n_layers: 2,
            d_ff: 256,
            dropout_rate: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub task: Task,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub max_len: usize,
    pub loss: LossKind,
    /// Key-entity decision threshold (match task).
    pub threshold: f64,
    /// Global gradient-norm clip; 0 disables clipping.
    pub clip_norm: f64,
    pub encoder: EncoderShape,
    pub vocab_min_freq: usize,
    pub vocab_max_size: usize,
    /// Tag-to-question template (mrc task).
    pub question_template: String,
    pub max_span_len: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            task: Task::Sentiment,
            epochs: 20,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            max_len: 128,
            loss: LossKind::CrossEntropy,
            threshold: 0.5,
            clip_norm: 1.0,
            encoder: EncoderShape::default(),
            vocab_min_freq: 1,
            vocab_max_size: 30_000,
            question_template: DEFAULT_TEMPLATE.to_string(),
            max_span_len: DEFAULT_MAX_SPAN_LEN,
        }
    }
}

impl TrainConfig {
    pub fn for_task(task: Task) -> Self {
        TrainConfig {
            task,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::config("epochs and batch_size must be ≥ 1"));
        }
        // zero is accepted: it freezes the parameters at their initial values
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::config(format!(
                "learning_rate {} must be a non-negative number",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon > 0.0) {
            return Err(Error::config("adam betas must lie in [0, 1) and epsilon be > 0"));
        }
        check_threshold(self.threshold)?;
        if !(self.clip_norm >= 0.0) {
            return Err(Error::config("clip_norm must be ≥ 0"));
        }
        if self.max_span_len == 0 {
            return Err(Error::config("max_span_len must be ≥ 1"));
        }
        match self.loss {
            LossKind::CrossEntropy => {}
            LossKind::Focal(f) => {
                f.validate()?;
                if self.task != Task::Match {
                    return Err(Error::config("focal loss applies to the match task only"));
                }
            }
        }
        if self.task == Task::Mrc {
            crate::tasks::build_question("", &self.question_template)?;
        }
        self.encoder_config(4).validate()
    }

    /// Encoder configuration for a vocabulary of `vocab_size` tokens.
    pub fn encoder_config(&self, vocab_size: usize) -> EncoderConfig {
        EncoderConfig {
            vocab_size,
            d_model: self.encoder.d_model,
            n_heads: self.encoder.n_heads,
            n_layers: self.encoder.n_layers,
            d_ff: self.encoder.d_ff,
            max_len: self.max_len,
            dropout_rate: self.encoder.dropout_rate,
        }
    }
}
