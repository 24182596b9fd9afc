//! Metrics, seed ensembles with voting, and the end-to-end pipeline.

mod ensemble;
mod metrics;
mod pipeline;
mod scoring;

pub use ensemble::{
    ensemble_key_entities, ensemble_train_select, mean_score_key_entities, member_matches, member_sentiments,
    select_top, vote_key_entities, vote_sentiment, EnsembleSelection, EnsembleSpec, MatchVoting, MemberScore,
};
pub use metrics::{accuracy, entity_prf, EntityMetrics};
pub use pipeline::{
    run_pipeline, DocumentOutput, PipelineConfig, PipelineCounters, PipelineMode, PipelineModels, PipelineResult,
};
pub use scoring::{score_predictions, BowBaseline, PredictionScores};
