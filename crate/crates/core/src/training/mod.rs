//! Optimisation, checkpoints, k-fold cross-validation and hyperparameter search.

mod adam;
mod checkpoint;
mod config;
mod kfold;
mod search;
mod trainer;

pub use adam::{clip_global_norm, Adam};
pub use checkpoint::{Checkpoint, FORMAT_VERSION, MAGIC};
pub use config::{EncoderShape, TrainConfig};
pub use kfold::{kfold_split, FoldSplit};
pub use search::{
    apply_factor, cross_validate, neighborhood_search, search_grid, CrossValidation, FoldScore, HyperParam,
    ParamDelta, SearchResult, SearchRow,
};
pub use trainer::{
    build_task_vocab, dev_score, encode_dataset, train, train_documents, train_with_vocab, EpochStats, SentimentExample,
    TaskDataset, TrainOutcome,
};
