//! Full coarse pipeline: train sentiment and matcher models, save and reload
//! their checkpoints, run the pipeline on a mixed corpus and score it.

use finkey::evaluation::{run_pipeline, score_predictions, PipelineConfig, PipelineModels};
use finkey::synthetic::{matcher_corpus, pipeline_corpus, sentiment_corpus};
use finkey::tasks::Task;
use finkey::training::{train_documents, Checkpoint, EncoderShape, TrainConfig};

fn small(task: Task, epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        learning_rate: 2e-3,
        max_len: 40,
        encoder: EncoderShape { d_model: 32, n_heads: 4, n_layers: 2, d_ff: 64, dropout_rate: 0.1 },
        ..TrainConfig::for_task(task)
    }
}

fn main() -> finkey::Result<()> {
    let dir = std::env::temp_dir().join("finkey-e2e");
    std::fs::create_dir_all(&dir).map_err(|e| finkey::Error::InvalidInput(e.to_string()))?;

    // sentiment sees both event-style and negation-style texts
    let mut sent_docs = sentiment_corpus(1000, 10);
    sent_docs.extend(pipeline_corpus(800, 11));
    let (tr, dv) = sent_docs.split_at(1500);
    let sentiment = train_documents(tr, &small(Task::Sentiment, 8), dv)?.checkpoint;
    println!("sentiment dev accuracy {:.4}", sentiment.dev_score);

    let match_docs = matcher_corpus(1700, 12);
    let (tr, dv) = match_docs.split_at(1400);
    let matcher = train_documents(tr, &small(Task::Match, 10), dv)?.checkpoint;
    println!("matcher dev F1 {:.4}", matcher.dev_score);

    let (sp, mp) = (dir.join("sentiment.ckpt"), dir.join("match.ckpt"));
    sentiment.save(&sp)?;
    matcher.save(&mp)?;
    let sentiment = vec![Checkpoint::load(&sp)?];
    let matcher = vec![Checkpoint::load(&mp)?];

    let docs = pipeline_corpus(300, 13);
    let models = PipelineModels { sentiment: &sentiment, matcher: &matcher, mrc: None, lexicon: None };
    let res = run_pipeline(&docs, &models, &PipelineConfig::default())?;
    println!("{:?}", res.counters);
    for o in res.outputs.iter().take(4) {
        println!("{}", serde_json::to_string(o).expect("serializable"));
    }
    let scores = score_predictions(&res.outputs, &docs)?;
    println!("sentiment accuracy {:?}", scores.sentiment_accuracy);
    if let Some(e) = scores.entities {
        println!("entity P {:.4} R {:.4} F1 {:.4}", e.precision, e.recall, e.f1);
    }
    Ok(())
}
