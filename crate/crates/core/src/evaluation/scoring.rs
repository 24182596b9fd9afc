use std::collections::{BTreeSet, HashMap};

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use super::metrics::{accuracy, entity_prf, EntityMetrics};
use super::pipeline::DocumentOutput;
use crate::corpus::{Document, SentimentLabel};
use crate::encoder::bow_encode;
use crate::error::{Error, Result};
use crate::tasks::{classical_fit, classical_predict, ClassicalConfig, ClassicalKind};
use crate::tokenizer::{build_vocab, encode_single, tokenize, Vocab};

/// Scores of pipeline output against gold documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionScores {
    pub documents: usize,
    /// Over documents with a gold sentiment and a predicted one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sentiment_accuracy: Option<f64>,
    /// Over documents with a gold key-entity list (empty for positive
    /// texts). A missing prediction counts as an empty set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entities: Option<EntityMetrics>,
    /// Exact match of extracted spans against the single gold key entity.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub span_exact_match: Option<f64>,
    pub prediction_errors: usize,
}

/// Joins predictions to gold documents by id and computes every metric the
/// gold data supports.
pub fn score_predictions(preds: &[DocumentOutput], gold: &[Document]) -> Result<PredictionScores> {
    let by_id: HashMap<&str, &DocumentOutput> = preds.iter().map(|p| (p.id.as_str(), p)).collect();
    if by_id.len() != preds.len() {
        return Err(Error::input("duplicate ids among predictions"));
    }
    let mut sp = Vec::new();
    let mut sg = Vec::new();
    let mut pred_sets: Vec<BTreeSet<String>> = Vec::new();
    let mut gold_sets = Vec::new();
    let (mut span_hits, mut span_total) = (0usize, 0usize);
    let mut errors = 0;
    for doc in gold {
        let p = by_id
            .get(doc.id.as_str())
            .ok_or_else(|| Error::input(format!("no prediction for document {}", doc.id)))?;
        if p.error.is_some() {
            errors += 1;
        }
        if let (Some(g), Some(s)) = (doc.sentiment, p.sentiment) {
            sg.push(g);
            sp.push(s);
        }
        let Some(keys) = &doc.key_entities else { continue };
        gold_sets.push(doc.key_set());
        pred_sets.push(p.key_entities.iter().flatten().cloned().collect());
        if doc.tag.is_some() && keys.len() == 1 {
            span_total += 1;
            span_hits += (p.span.as_deref() == Some(keys[0].as_str())) as usize;
        }
    }
    let any_entities = preds.iter().any(|p| p.key_entities.is_some());
    let any_spans = preds.iter().any(|p| p.span.is_some());
    Ok(PredictionScores {
        documents: gold.len(),
        sentiment_accuracy: if sp.is_empty() { None } else { Some(accuracy(&sp, &sg)?) },
        entities: if any_entities && !gold_sets.is_empty() {
            Some(entity_prf(&pred_sets, &gold_sets)?)
        } else {
            None
        },
        span_exact_match: (any_spans && span_total > 0).then(|| span_hits as f64 / span_total as f64),
        prediction_errors: errors,
    })
}

/// A bag-of-words sentiment classifier.
#[derive(Debug, Clone)]
pub struct BowBaseline {
    pub vocab: Vocab,
    pub max_len: usize,
    pub classifier: crate::tasks::Classifier,
}

fn bow_vectors(docs: &[Document], vocab: &Vocab, max_len: usize) -> Result<Vec<Array1<f64>>> {
    docs.iter()
        .map(|d| Ok(bow_encode(&encode_single(&d.cleaned_text, vocab, max_len)?, vocab.len())))
        .collect()
}

impl BowBaseline {
    /// Fits `kind` on L2-normalised term frequencies of the training texts.
    pub fn fit(kind: ClassicalKind, train: &[Document], max_len: usize, cfg: &ClassicalConfig) -> Result<Self> {
        let labels: Vec<usize> = train
            .iter()
            .map(|d| {
                d.sentiment.map(SentimentLabel::index).ok_or_else(|| Error::InvalidRecord {
                    id: d.id.clone(),
                    message: "missing sentiment label".into(),
                })
            })
            .collect::<Result<_>>()?;
        let tokens = train
            .iter()
            .flat_map(|d| tokenize(&d.cleaned_text).into_iter().map(|t| t.text));
        let vocab = build_vocab(tokens, 1, usize::MAX)?;
        let x = bow_vectors(train, &vocab, max_len)?;
        let fitted = classical_fit(kind, &x, &labels, cfg)?;
        Ok(BowBaseline {
            vocab,
            max_len,
            classifier: fitted.classifier,
        })
    }

    pub fn predict(&self, docs: &[Document]) -> Result<Vec<SentimentLabel>> {
        Ok(bow_vectors(docs, &self.vocab, self.max_len)?
            .iter()
            .map(|v| SentimentLabel::from_index(classical_predict(&self.classifier, v.view())))
            .collect())
    }

    /// Accuracy on labeled documents.
    pub fn accuracy(&self, docs: &[Document]) -> Result<f64> {
        let golds: Vec<SentimentLabel> = docs
            .iter()
            .map(|d| d.sentiment.ok_or_else(|| Error::input(format!("document {} has no label", d.id))))
            .collect::<Result<_>>()?;
        accuracy(&self.predict(docs)?, &golds)
    }
}
