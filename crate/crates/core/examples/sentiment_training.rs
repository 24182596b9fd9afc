//! Trains the sentiment model on the synthetic negation corpus and compares
//! it with bag-of-words baselines, which cannot see where the negator sits.

use finkey::evaluation::BowBaseline;
use finkey::synthetic::sentiment_corpus;
use finkey::tasks::{predict_sentiment, ClassicalConfig, ClassicalKind, Task};
use finkey::training::{train_documents, EncoderShape, TrainConfig};

fn main() -> finkey::Result<()> {
    let docs = sentiment_corpus(2500, 1);
    let (train, rest) = docs.split_at(1500);
    let (dev, test) = rest.split_at(500);

    let cfg = TrainConfig {
        epochs: 10,
        learning_rate: 2e-3,
        max_len: 40,
        encoder: EncoderShape { d_model: 32, n_heads: 4, n_layers: 2, d_ff: 64, dropout_rate: 0.1 },
        ..TrainConfig::for_task(Task::Sentiment)
    };
    let out = train_documents(train, &cfg, dev)?;
    for e in &out.history {
        println!("epoch {:2}  loss {:.4}  dev acc {:.4}", e.epoch, e.mean_loss, e.dev_score);
    }
    let model = &out.checkpoint.model;
    let correct = test
        .iter()
        .filter(|d| predict_sentiment(model, d).map(|p| Some(p.label) == d.sentiment).unwrap_or(false))
        .count();
    println!("transformer test accuracy {:.4}", correct as f64 / test.len() as f64);

    for kind in [ClassicalKind::Lr, ClassicalKind::Svm, ClassicalKind::Nbm] {
        let base = BowBaseline::fit(kind, train, cfg.max_len, &ClassicalConfig::default())?;
        println!("bow + {kind:?} test accuracy {:.4}", base.accuracy(test)?);
    }
    Ok(())
}
