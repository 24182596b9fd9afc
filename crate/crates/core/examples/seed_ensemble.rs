//! Trains one sentiment model per seed, keeps the best on the dev set and
//! votes over the survivors.

use finkey::evaluation::{accuracy, ensemble_train_select, member_sentiments, vote_sentiment, EnsembleSpec};
use finkey::synthetic::sentiment_corpus;
use finkey::tasks::{predict_sentiment, Task, DEFAULT_TEMPLATE};
use finkey::training::{EncoderShape, TaskDataset, TrainConfig};

fn main() -> finkey::Result<()> {
    let docs = sentiment_corpus(1700, 4);
    let (train, rest) = docs.split_at(1000);
    let (dev, test) = rest.split_at(300);
    let tr = TaskDataset::from_documents(Task::Sentiment, train, DEFAULT_TEMPLATE)?;
    let dv = TaskDataset::from_documents(Task::Sentiment, dev, DEFAULT_TEMPLATE)?;

    let cfg = TrainConfig {
        epochs: 6,
        learning_rate: 2e-3,
        max_len: 40,
        encoder: EncoderShape { d_model: 24, n_heads: 4, n_layers: 2, d_ff: 48, dropout_rate: 0.1 },
        ..TrainConfig::for_task(Task::Sentiment)
    };
    let spec = EnsembleSpec { seeds: (0..6).collect(), top_m: 5 };
    let sel = ensemble_train_select(&tr, &cfg, &spec, &dv)?;
    for m in &sel.members {
        println!("seed {}  dev {:.4}  {}", m.seed, m.dev_score, if m.kept { "kept" } else { "dropped" });
    }

    let gold: Vec<_> = test.iter().map(|d| d.sentiment.expect("labeled")).collect();
    for c in &sel.kept {
        let preds: Vec<_> =
            test.iter().map(|d| predict_sentiment(&c.model, d).map(|p| p.label)).collect::<finkey::Result<_>>()?;
        println!("member seed {} test accuracy {:.4}", c.seed, accuracy(&preds, &gold)?);
    }
    let voted: Vec<_> = test
        .iter()
        .map(|d| vote_sentiment(&member_sentiments(&sel.kept, &d.cleaned_text)?).map(|p| p.label))
        .collect::<finkey::Result<_>>()?;
    println!("ensemble test accuracy {:.4}", accuracy(&voted, &gold)?);
    Ok(())
}
