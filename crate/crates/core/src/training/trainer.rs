use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{clip_global_norm, Adam};
use super::checkpoint::Checkpoint;
use super::config::TrainConfig;
use crate::corpus::{build_mrc_dataset, build_pair_dataset, Document, MrcExample, PairExample, SentimentLabel};
use crate::error::{Error, Result};
use crate::evaluation::entity_prf;
use crate::tasks::{
    answer_token_span, extract_span, score_entity, sentiment_prob_negative, EncodedExample, Model, ModelGrads,
    SentimentPrediction, Supervision, Task,
};
use crate::tokenizer::{build_vocab, encode_pair, encode_single, tokenize, Vocab};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentExample {
    pub doc_id: String,
    pub text: String,
    pub label: SentimentLabel,
}

/// Supervised examples for one task.
#[derive(Debug, Clone, PartialEq)]
pub enum TaskDataset {
    Sentiment(Vec<SentimentExample>),
    Match(Vec<PairExample>),
    Mrc(Vec<MrcExample>),
}

impl TaskDataset {
    /// Builds the task's examples from labeled documents. Sentiment needs a
    /// label on every document; match uses entity lists; mrc needs tags.
    pub fn from_documents(task: Task, docs: &[Document], template: &str) -> Result<Self> {
        Ok(match task {
            Task::Sentiment => TaskDataset::Sentiment(
                docs.iter()
                    .map(|d| {
                        let label = d.sentiment.ok_or_else(|| Error::InvalidRecord {
                            id: d.id.clone(),
                            message: "sentiment label required for training".into(),
                        })?;
                        Ok(SentimentExample {
                            doc_id: d.id.clone(),
                            text: d.cleaned_text.clone(),
                            label,
                        })
                    })
                    .collect::<Result<_>>()?,
            ),
            Task::Match => TaskDataset::Match(build_pair_dataset(docs).examples),
            Task::Mrc => TaskDataset::Mrc(build_mrc_dataset(docs, template)?.examples),
        })
    }

    pub fn task(&self) -> Task {
        match self {
            TaskDataset::Sentiment(_) => Task::Sentiment,
            TaskDataset::Match(_) => Task::Match,
            TaskDataset::Mrc(_) => Task::Mrc,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TaskDataset::Sentiment(v) => v.len(),
            TaskDataset::Match(v) => v.len(),
            TaskDataset::Mrc(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every token the model will see for this dataset, in order.
    pub fn tokens(&self) -> Vec<String> {
        let texts: Vec<&str> = match self {
            TaskDataset::Sentiment(v) => v.iter().map(|e| e.text.as_str()).collect(),
            TaskDataset::Match(v) => v.iter().flat_map(|e| [e.entity.as_str(), e.text.as_str()]).collect(),
            TaskDataset::Mrc(v) => v.iter().flat_map(|e| [e.question.as_str(), e.context.as_str()]).collect(),
        };
        texts.into_iter().flat_map(tokenize).map(|t| t.text).collect()
    }
}

/// Vocabulary built from a dataset with the config's frequency and size limits.
pub fn build_task_vocab(data: &TaskDataset, cfg: &TrainConfig) -> Result<Vocab> {
    build_vocab(data.tokens(), cfg.vocab_min_freq, cfg.vocab_max_size)
}

/// Encodes labeled examples. Returns the encodings and the number of mrc
/// examples dropped because the answer is missing or truncated away.
pub fn encode_dataset(data: &TaskDataset, vocab: &Vocab, max_len: usize) -> Result<(Vec<EncodedExample>, usize)> {
    let mut out = Vec::with_capacity(data.len());
    let mut skipped = 0;
    match data {
        TaskDataset::Sentiment(v) => {
            for e in v {
                out.push(EncodedExample {
                    seq: encode_single(&e.text, vocab, max_len)?,
                    target: Supervision::Sentiment(e.label.index()),
                });
            }
        }
        TaskDataset::Match(v) => {
            for e in v {
                let label = e.label.ok_or_else(|| Error::InvalidRecord {
                    id: e.doc_id.clone(),
                    message: format!("entity {:?} has no key/non-key label", e.entity),
                })?;
                out.push(EncodedExample {
                    seq: encode_pair(&e.entity, &e.text, vocab, max_len)?,
                    target: Supervision::Match(label),
                });
            }
        }
        TaskDataset::Mrc(v) => {
            for e in v {
                let seq = encode_pair(&e.question, &e.context, vocab, max_len)?;
                match e.answer.and_then(|a| answer_token_span(&seq, a)) {
                    Some((start, end)) => out.push(EncodedExample {
                        seq,
                        target: Supervision::Span { start, end },
                    }),
                    None => skipped += 1,
                }
            }
        }
    }
    Ok((out, skipped))
}

/// Task dev metric: accuracy (sentiment), entity F1 at `cfg.threshold`
/// grouped by document (match), exact-match rate over answerable examples (mrc).
pub fn dev_score(model: &Model, data: &TaskDataset, cfg: &TrainConfig) -> Result<f64> {
    if model.task() != data.task() {
        return Err(Error::input(format!(
            "{} model evaluated on {} data",
            model.task().as_str(),
            data.task().as_str()
        )));
    }
    match data {
        TaskDataset::Sentiment(v) => {
            if v.is_empty() {
                return Err(Error::input("empty dev set"));
            }
            let probs: Vec<f64> = v
                .par_iter()
                .map(|e| sentiment_prob_negative(model, &e.text))
                .collect::<Result<_>>()?;
            let correct = probs
                .iter()
                .zip(v)
                .filter(|(p, e)| SentimentPrediction::from_prob_negative(**p).label == e.label)
                .count();
            Ok(correct as f64 / v.len() as f64)
        }
        TaskDataset::Match(v) => {
            let scores: Vec<f64> = v
                .par_iter()
                .map(|e| score_entity(model, &e.entity, &e.text))
                .collect::<Result<_>>()?;
            let mut slot: HashMap<&str, usize> = HashMap::new();
            let mut pred: Vec<BTreeSet<&str>> = Vec::new();
            let mut gold: Vec<BTreeSet<&str>> = Vec::new();
            for (e, s) in v.iter().zip(scores) {
                let i = *slot.entry(e.doc_id.as_str()).or_insert_with(|| {
                    pred.push(BTreeSet::new());
                    gold.push(BTreeSet::new());
                    pred.len() - 1
                });
                if s >= cfg.threshold {
                    pred[i].insert(e.entity.as_str());
                }
                if e.label == Some(true) {
                    gold[i].insert(e.entity.as_str());
                }
            }
            Ok(entity_prf(&pred, &gold)?.f1)
        }
        TaskDataset::Mrc(v) => {
            let answerable: Vec<&MrcExample> = v.iter().filter(|e| e.answer.is_some()).collect();
            if answerable.is_empty() {
                return Err(Error::input("no answerable dev examples"));
            }
            let hits: Vec<bool> = answerable
                .par_iter()
                .map(|e| {
                    let p = extract_span(model, &e.question, &e.context, cfg.max_span_len)?;
                    Ok(Some(p.text) == e.answer_text())
                })
                .collect::<Result<_>>()?;
            Ok(hits.iter().filter(|&&h| h).count() as f64 / answerable.len() as f64)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean per-example training loss over the epoch.
    pub mean_loss: f64,
    pub dev_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Best-epoch parameters.
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    /// Training examples dropped before encoding (mrc answers lost to truncation).
    pub skipped_examples: usize,
}

/// Trains one model with mini-batch Adam. All randomness (initialisation,
/// shuffles, dropout) comes from one generator seeded with `cfg.seed`; batch
/// gradients are summed in a fixed order so runs are bitwise reproducible.
pub fn train(train_data: &TaskDataset, cfg: &TrainConfig, dev_data: &TaskDataset) -> Result<TrainOutcome> {
    train_with_vocab(train_data, cfg, dev_data, None)
}

/// Like [`train`], with a fixed vocabulary instead of one built from the
/// training data.
pub fn train_with_vocab(
    train_data: &TaskDataset,
    cfg: &TrainConfig,
    dev_data: &TaskDataset,
    vocab: Option<Vocab>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    for (name, d) in [("training", train_data), ("dev", dev_data)] {
        if d.task() != cfg.task {
            return Err(Error::config(format!(
                "{name} data is for {} but the config trains {}",
                d.task().as_str(),
                cfg.task.as_str()
            )));
        }
        if d.is_empty() {
            return Err(Error::input(format!("{name} set is empty")));
        }
    }
    let vocab = match vocab {
        Some(v) => v,
        None => build_task_vocab(train_data, cfg)?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = Model::init(cfg.encoder_config(vocab.len()), cfg.task, vocab, &mut rng)?;
    let (examples, skipped) = encode_dataset(train_data, &model.vocab, cfg.max_len)?;
    if examples.is_empty() {
        return Err(Error::input("no trainable examples after encoding"));
    }

    let mut adam = Adam::new(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, Model)> = None;
    let mut global_batch = 0usize;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let seeds: Vec<u64> = batch.iter().map(|_| rng.gen()).collect();
            let results: Vec<(f64, ModelGrads)> = batch
                .par_iter()
                .zip(seeds)
                .map(|(&i, s)| {
                    model.loss_and_grad(&examples[i], &cfg.loss, true, &mut ChaCha8Rng::seed_from_u64(s))
                })
                .collect::<Result<_>>()?;
            let mut results = results.into_iter();
            let (mut batch_loss, mut grads) = results.next().expect("non-empty batch");
            for (l, g) in results {
                batch_loss += l;
                grads.add_assign(&g);
            }
            if !batch_loss.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite loss in batch {global_batch} (epoch {epoch})"
                )));
            }
            loss_sum += batch_loss;
            grads.scale(1.0 / batch.len() as f64);
            clip_global_norm(grads.slices_mut(), cfg.clip_norm);
            adam.update(model.slices_mut(), grads.slices());
            if !model.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite parameters after batch {global_batch} (epoch {epoch})"
                )));
            }
            global_batch += 1;
        }
        let score = dev_score(&model, dev_data, cfg)?;
        log::debug!("epoch {epoch}: loss {:.5} dev {score:.4}", loss_sum / examples.len() as f64);
        history.push(EpochStats {
            epoch,
            mean_loss: loss_sum / examples.len() as f64,
            dev_score: score,
        });
        if best.as_ref().map_or(true, |(_, s, _)| score > *s) {
            best = Some((epoch, score, model.clone()));
        }
    }

    let (best_epoch, dev_score, model) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            model,
            train_config: cfg.clone(),
            dev_score,
            seed: cfg.seed,
        },
        history,
        best_epoch,
        skipped_examples: skipped,
    })
}

/// Builds task datasets from labeled documents and trains on them.
pub fn train_documents(train_docs: &[Document], cfg: &TrainConfig, dev_docs: &[Document]) -> Result<TrainOutcome> {
    let tr = TaskDataset::from_documents(cfg.task, train_docs, &cfg.question_template)?;
    let dev = TaskDataset::from_documents(cfg.task, dev_docs, &cfg.question_template)?;
    train(&tr, cfg, &dev)
}
