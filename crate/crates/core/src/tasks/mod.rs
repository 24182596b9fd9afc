//! Task heads, losses and prediction for the three stages: sentiment
//! classification, entity/text pair matching and tag-conditioned span
//! extraction. Also home to the classical baseline classifiers.

pub mod classical;
mod heads;
mod losses;
mod model;
mod span;

use serde::{Deserialize, Serialize};

pub use classical::{classical_fit, classical_predict, ClassicalConfig, ClassicalKind, Classifier};
pub use heads::{Head, MatchHead, SentimentHead, SpanHead, Task};
pub use losses::{
    binary_cross_entropy, cross_entropy, focal_loss, focal_loss_from_logit, sigmoid, softmax,
    FocalConfig,
};
pub use model::{EncodedExample, LossKind, Model, ModelGrads, Supervision};
pub use span::{best_span, span_loss, SpanPrediction, DEFAULT_MAX_SPAN_LEN};

use crate::corpus::{char_slice, CharSpan, Document, SentimentLabel};
use crate::error::{Error, Result};
use crate::tokenizer::{encode_pair, encode_single, TokenSequence};

pub const DEFAULT_TEMPLATE: &str = "Which company involves {tag}?";
pub const DEFAULT_THRESHOLD: f64 = 0.5;
const TAG_PLACEHOLDER: &str = "{tag}";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentPrediction {
    pub label: SentimentLabel,
    pub prob_negative: f64,
}

impl SentimentPrediction {
    /// Applies the single-model rule: negative iff `prob_negative ≥ 0.5`.
    pub fn from_prob_negative(prob_negative: f64) -> Self {
        SentimentPrediction {
            label: if prob_negative >= 0.5 {
                SentimentLabel::Negative
            } else {
                SentimentLabel::Positive
            },
            prob_negative,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchPrediction {
    pub entity: String,
    pub score: f64,
    pub is_key: bool,
}

/// Substitutes `tag` for the single `{tag}` placeholder in `template`.
pub fn build_question(tag: &str, template: &str) -> Result<String> {
    match template.matches(TAG_PLACEHOLDER).count() {
        1 => Ok(template.replacen(TAG_PLACEHOLDER, tag, 1)),
        n => Err(Error::config(format!(
            "question template must contain exactly one {TAG_PLACEHOLDER} placeholder, found {n}"
        ))),
    }
}

pub fn check_threshold(threshold: f64) -> Result<()> {
    if (0.0..=1.0).contains(&threshold) {
        Ok(())
    } else {
        Err(Error::config(format!("threshold {threshold} outside [0, 1]")))
    }
}

/// Probability that `text` is negative.
pub fn sentiment_prob_negative(model: &Model, text: &str) -> Result<f64> {
    let Head::Sentiment(head) = &model.head else {
        return Err(model.wrong_head(Task::Sentiment));
    };
    let seq = encode_single(text, &model.vocab, model.config.max_len)?;
    let out = model.encode(&seq)?;
    let probs = softmax(&head.logits(out.sentence_vec.view()));
    Ok(probs[SentimentLabel::Negative.index()])
}

pub fn predict_sentiment(model: &Model, doc: &Document) -> Result<SentimentPrediction> {
    sentiment_prob_negative(model, &doc.cleaned_text).map(SentimentPrediction::from_prob_negative)
}

/// Probability that `entity` is a key entity of `text`.
pub fn score_entity(model: &Model, entity: &str, text: &str) -> Result<f64> {
    let Head::Match(head) = &model.head else {
        return Err(model.wrong_head(Task::Match));
    };
    let seq = encode_pair(entity, text, &model.vocab, model.config.max_len)?;
    let out = model.encode(&seq)?;
    Ok(sigmoid(head.logit(out.sentence_vec.view())))
}

/// Thresholds each entity score; `is_key = score ≥ threshold`.
pub fn match_predictions(scores: &[(String, f64)], threshold: f64) -> Result<Vec<MatchPrediction>> {
    check_threshold(threshold)?;
    Ok(scores
        .iter()
        .map(|(entity, score)| MatchPrediction {
            entity: entity.clone(),
            score: *score,
            is_key: *score >= threshold,
        })
        .collect())
}

/// Entities scoring at least `threshold`, in their original order.
pub fn detect_key_entities(scores: &[(String, f64)], threshold: f64) -> Result<Vec<String>> {
    Ok(match_predictions(scores, threshold)?
        .into_iter()
        .filter(|p| p.is_key)
        .map(|p| p.entity)
        .collect())
}

/// Encodes `(question, context)` and returns the best-scoring answer span.
pub fn extract_span(model: &Model, question: &str, context: &str, max_span_len: usize) -> Result<SpanPrediction> {
    let seq = encode_pair(question, context, &model.vocab, model.config.max_len)?;
    let (start, end) = model.span_scores(&seq)?;
    let valid: Vec<usize> = seq.context_positions().collect();
    let (i, j) = best_span(
        start.as_slice().expect("contiguous"),
        end.as_slice().expect("contiguous"),
        &valid,
        max_span_len,
    )?;
    Ok(SpanPrediction {
        start_token: i,
        end_token: j,
        text: span_text(&seq, context, i, j),
    })
}

pub(crate) fn span_text(seq: &TokenSequence, context: &str, i: usize, j: usize) -> String {
    match (seq.offsets[i], seq.offsets[j]) {
        (Some(a), Some(b)) => char_slice(context, a.start, b.end),
        _ => String::new(),
    }
}

/// Maps a character answer span onto inclusive context token positions.
/// `None` when the answer is not fully covered by the (possibly truncated)
/// context tokens.
pub fn answer_token_span(seq: &TokenSequence, answer: CharSpan) -> Option<(usize, usize)> {
    let overlapping: Vec<usize> = seq
        .context_positions()
        .filter(|&i| {
            let off = seq.offsets[i].expect("context token has an offset");
            off.start < answer.end_char && off.end > answer.start_char
        })
        .collect();
    let first = *overlapping.first()?;
    let last = *overlapping.last()?;
    let (a, b) = (seq.offsets[first]?, seq.offsets[last]?);
    (a.start <= answer.start_char && b.end >= answer.end_char).then_some((first, last))
}
