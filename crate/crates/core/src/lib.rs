//! Sentiment analysis and key-entity detection for online financial texts.
//!
//! The crate is organised as a three-stage pipeline:
//!
//! 1. [`tasks::predict_sentiment`] classifies a text as negative or positive.
//! 2. For negative texts, [`tasks::score_entity`] scores every candidate entity
//!    against the text as a sentence pair and keeps those above a threshold
//!    (coarse-grained detection).
//! 3. When a text carries an event tag, [`tasks::extract_span`] rewrites the tag
//!    into a question and extracts the answer span (fine-grained detection).
//!
//! All three heads sit on top of a small bidirectional transformer
//! ([`encoder`]) that is trained from scratch by [`training`]. Ensembles,
//! voting and the entity-level metrics live in [`evaluation`].

pub mod cli;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod evaluation;
pub mod gradcheck;
pub mod synthetic;
pub mod tasks;
pub mod tokenizer;
pub mod training;

pub use error::{Error, Result};
