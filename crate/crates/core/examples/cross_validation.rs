//! k-fold cross-validation and a small neighborhood search over the learning
//! rate and batch size.

use finkey::synthetic::sentiment_corpus;
use finkey::tasks::Task;
use finkey::training::{cross_validate, kfold_split, neighborhood_search, EncoderShape, HyperParam, ParamDelta, TrainConfig};

fn main() -> finkey::Result<()> {
    let split = kfold_split(10, 3, 42)?;
    for f in 0..split.k() {
        println!("fold {f}: dev {:?}", split.dev_indices(f));
    }

    let docs = sentiment_corpus(600, 5);
    let cfg = TrainConfig {
        epochs: 4,
        learning_rate: 2e-3,
        max_len: 40,
        encoder: EncoderShape { d_model: 16, n_heads: 2, n_layers: 1, d_ff: 32, dropout_rate: 0.1 },
        ..TrainConfig::for_task(Task::Sentiment)
    };
    let cv = cross_validate(&docs, &cfg, 3)?;
    for f in &cv.folds {
        println!("fold {} ({} train / {} dev): {:.4}", f.fold, f.train_docs, f.dev_docs, f.dev_score);
    }
    println!("mean {:.4}", cv.mean_score);

    let deltas = [
        ParamDelta { param: HyperParam::LearningRate, factors: vec![0.5, 2.0] },
        ParamDelta { param: HyperParam::BatchSize, factors: vec![0.5] },
    ];
    let res = neighborhood_search(&cfg, &deltas, &docs, 3)?;
    for (i, row) in res.table.iter().enumerate() {
        let marker = if i == res.best_row { "*" } else { " " };
        println!("{marker} {:?} mean {:.4}", row.factors, row.mean_score);
    }
    println!("best: lr {} batch {}", res.best.learning_rate, res.best.batch_size);
    Ok(())
}
