use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ensemble::{ensemble_key_entities, member_sentiments, vote_sentiment, MatchVoting};
use crate::corpus::{rule_match_entities, Document, Lexicon, SentimentLabel};
use crate::error::{Error, Result};
use crate::tasks::{build_question, check_threshold, extract_span, Task, DEFAULT_MAX_SPAN_LEN, DEFAULT_TEMPLATE, DEFAULT_THRESHOLD};
use crate::training::Checkpoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PipelineMode {
    /// Entity-list matching.
    #[default]
    Coarse,
    /// Tag-conditioned span extraction.
    Fine,
}

impl std::str::FromStr for PipelineMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coarse" => Ok(PipelineMode::Coarse),
            "fine" => Ok(PipelineMode::Fine),
            other => Err(Error::config(format!("unknown pipeline mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub mode: PipelineMode,
    pub threshold: f64,
    pub voting: MatchVoting,
    pub question_template: String,
    pub max_span_len: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            mode: PipelineMode::Coarse,
            threshold: DEFAULT_THRESHOLD,
            voting: MatchVoting::Majority,
            question_template: DEFAULT_TEMPLATE.to_string(),
            max_span_len: DEFAULT_MAX_SPAN_LEN,
        }
    }
}

/// Trained models for one pipeline run.
#[derive(Debug, Clone, Copy)]
pub struct PipelineModels<'a> {
    /// Sentiment ensemble (one member is a plain single model).
    pub sentiment: &'a [Checkpoint],
    /// Matcher ensemble, needed in coarse mode.
    pub matcher: &'a [Checkpoint],
    /// Span extractor, needed in fine mode.
    pub mrc: Option<&'a Checkpoint>,
    /// Fallback candidate source for documents without an entity list.
    pub lexicon: Option<&'a Lexicon>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentOutput {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sentiment: Option<SentimentLabel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prob_negative: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub key_entities: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub span: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl DocumentOutput {
    fn failed(id: &str, message: String) -> Self {
        DocumentOutput {
            id: id.to_string(),
            sentiment: None,
            prob_negative: None,
            key_entities: None,
            span: None,
            error: Some(message),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PipelineCounters {
    pub processed: usize,
    pub negative: usize,
    /// Positive documents that skipped entity detection.
    pub filtered_positive: usize,
    /// Negative documents whose candidate list was empty.
    pub empty_entity_list: usize,
    /// Candidate lists taken from the lexicon.
    pub lexicon_fallback: usize,
    pub errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    /// One entry per input document, in input order.
    pub outputs: Vec<DocumentOutput>,
    pub counters: PipelineCounters,
}

fn check_models(models: &PipelineModels, cfg: &PipelineConfig) -> Result<()> {
    check_threshold(cfg.threshold)?;
    build_question("x", &cfg.question_template)?;
    if cfg.max_span_len == 0 {
        return Err(Error::config("max_span_len must be at least 1"));
    }
    if models.sentiment.is_empty() {
        return Err(Error::config("pipeline needs at least one sentiment model"));
    }
    let wrong = |c: &Checkpoint, t: Task| c.model.task() != t;
    if models.sentiment.iter().any(|c| wrong(c, Task::Sentiment)) {
        return Err(Error::config("a sentiment checkpoint holds a different task"));
    }
    match cfg.mode {
        PipelineMode::Coarse => {
            if models.matcher.is_empty() {
                return Err(Error::config("coarse mode needs at least one matcher model"));
            }
            if models.matcher.iter().any(|c| wrong(c, Task::Match)) {
                return Err(Error::config("a matcher checkpoint holds a different task"));
            }
        }
        PipelineMode::Fine => match models.mrc {
            None => return Err(Error::config("fine mode needs an mrc model")),
            Some(c) if wrong(c, Task::Mrc) => {
                return Err(Error::config("the mrc checkpoint holds a different task"));
            }
            Some(_) => {}
        },
    }
    Ok(())
}

#[derive(Default)]
struct DocFlags {
    negative: bool,
    empty_list: bool,
    lexicon: bool,
}

fn process(doc: &Document, models: &PipelineModels, cfg: &PipelineConfig) -> Result<(DocumentOutput, DocFlags)> {
    let mut flags = DocFlags::default();
    let text = &doc.cleaned_text;
    let sentiment = vote_sentiment(&member_sentiments(models.sentiment, text)?)?;
    let mut out = DocumentOutput {
        id: doc.id.clone(),
        sentiment: Some(sentiment.label),
        prob_negative: Some(sentiment.prob_negative),
        key_entities: None,
        span: None,
        error: None,
    };
    if sentiment.label == SentimentLabel::Positive {
        return Ok((out, flags));
    }
    flags.negative = true;
    match cfg.mode {
        PipelineMode::Coarse => {
            let candidates = match (&doc.entity_list, models.lexicon) {
                (Some(list), _) => list.clone(),
                (None, Some(lex)) => {
                    flags.lexicon = true;
                    rule_match_entities(text, lex)
                }
                (None, None) => {
                    return Err(Error::input("no entity list and no lexicon to fall back on"));
                }
            };
            if candidates.is_empty() {
                flags.empty_list = true;
                out.key_entities = Some(Vec::new());
            } else {
                out.key_entities = Some(ensemble_key_entities(
                    models.matcher,
                    &candidates,
                    text,
                    cfg.threshold,
                    cfg.voting,
                )?);
            }
        }
        PipelineMode::Fine => {
            let tag = doc
                .tag
                .as_deref()
                .ok_or_else(|| Error::input("fine mode needs a tag"))?;
            let question = build_question(tag, &cfg.question_template)?;
            let mrc = models.mrc.expect("checked before the run");
            out.span = Some(extract_span(&mrc.model, &question, text, cfg.max_span_len)?.text);
        }
    }
    Ok((out, flags))
}

/// Runs sentiment filtering and then key-entity detection on every negative
/// document. Per-document failures become error entries and the run goes on;
/// missing or mismatched models fail the whole run.
pub fn run_pipeline(docs: &[Document], models: &PipelineModels, cfg: &PipelineConfig) -> Result<PipelineResult> {
    check_models(models, cfg)?;
    let results: Vec<_> = docs.par_iter().map(|d| (d, process(d, models, cfg))).collect();
    let mut counters = PipelineCounters::default();
    let mut outputs = Vec::with_capacity(docs.len());
    for (doc, r) in results {
        counters.processed += 1;
        match r {
            Ok((out, flags)) => {
                counters.negative += flags.negative as usize;
                counters.filtered_positive += !flags.negative as usize;
                counters.empty_entity_list += flags.empty_list as usize;
                counters.lexicon_fallback += flags.lexicon as usize;
                outputs.push(out);
            }
            Err(e @ Error::Numerical(_)) => return Err(e),
            Err(e) => {
                log::warn!("document {}: {e}", doc.id);
                counters.errors += 1;
                outputs.push(DocumentOutput::failed(&doc.id, e.to_string()));
            }
        }
    }
    Ok(PipelineResult { outputs, counters })
}
