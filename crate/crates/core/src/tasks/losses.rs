use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Softmax cross-entropy of `logits` against class `gold`, with the gradient
/// with respect to the logits (`softmax - one_hot`).
pub fn cross_entropy(logits: &[f64], gold: usize) -> (f64, Vec<f64>) {
    assert!(gold < logits.len(), "gold class {gold} out of range");
    let (arg, max) = logits
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, z)| if z > acc.1 { (i, z) } else { acc });
    // ln Σ e^(z - max) = ln(1 + rest), kept accurate when rest is tiny
    let rest: f64 = logits
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != arg)
        .map(|(_, &z)| (z - max).exp())
        .sum();
    let log_sum = rest.ln_1p();
    let log_z = max + log_sum;
    let mut grad: Vec<f64> = logits.iter().map(|&z| (z - log_z).exp()).collect();
    grad[gold] -= 1.0;
    ((max - logits[gold]) + log_sum, grad)
}

/// Softmax probabilities.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocalConfig {
    pub gamma: f64,
    /// Weight of the positive class; the negative class gets `1 - alpha`.
    /// `None` weighs both classes by 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl Default for FocalConfig {
    fn default() -> Self {
        FocalConfig {
            gamma: 2.0,
            alpha: None,
        }
    }
}

impl FocalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) {
            return Err(Error::config(format!("focal gamma {} must be ≥ 0", self.gamma)));
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::config(format!("focal alpha {a} must lie in (0, 1)")));
            }
        }
        Ok(())
    }

    fn alpha_t(&self, positive: bool) -> f64 {
        match (self.alpha, positive) {
            (None, _) => 1.0,
            (Some(a), true) => a,
            (Some(a), false) => 1.0 - a,
        }
    }
}

/// Binary cross-entropy of probability `p` against label `y`.
pub fn binary_cross_entropy(p: f64, y: bool) -> f64 {
    if y {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Focal loss `-α_t (1 - p_t)^γ ln p_t` for the positive-class probability `p`.
pub fn focal_loss(p: f64, y: bool, cfg: &FocalConfig) -> f64 {
    let p_t = if y { p } else { 1.0 - p };
    -cfg.alpha_t(y) * (1.0 - p_t).powf(cfg.gamma) * p_t.ln()
}

/// Focal loss computed from the pre-sigmoid logit, with its derivative with
/// respect to that logit.
pub fn focal_loss_from_logit(logit: f64, y: bool, cfg: &FocalConfig) -> (f64, f64) {
    // z_t is the logit of the true class: p_t = sigmoid(z_t)
    let z_t = if y { logit } else { -logit };
    let log_p_t = -softplus(-z_t);
    let p_t = sigmoid(z_t);
    let q = sigmoid(-z_t);
    let alpha_t = cfg.alpha_t(y);
    let gamma = cfg.gamma;
    let q_gamma = if gamma == 0.0 { 1.0 } else { q.powf(gamma) };
    let loss = -alpha_t * q_gamma * log_p_t;
    let d_z_t = alpha_t * (gamma * p_t * q_gamma * log_p_t - q_gamma * q);
    (loss, if y { d_z_t } else { -d_z_t })
}
