//! Coarse key-entity detection: one sentence-pair matcher scores every
//! listed entity against the text. Trained with focal loss and evaluated at
//! two thresholds.

use std::collections::BTreeSet;

use finkey::evaluation::entity_prf;
use finkey::synthetic::matcher_corpus;
use finkey::tasks::{detect_key_entities, score_entity, FocalConfig, LossKind, Task};
use finkey::training::{train_documents, EncoderShape, TrainConfig};

fn main() -> finkey::Result<()> {
    let docs = matcher_corpus(2300, 2);
    let (train, rest) = docs.split_at(1500);
    let (dev, test) = rest.split_at(400);

    let cfg = TrainConfig {
        epochs: 12,
        learning_rate: 2e-3,
        max_len: 40,
        loss: LossKind::Focal(FocalConfig { gamma: 2.0, alpha: None }),
        encoder: EncoderShape { d_model: 32, n_heads: 4, n_layers: 2, d_ff: 64, dropout_rate: 0.1 },
        ..TrainConfig::for_task(Task::Match)
    };
    let out = train_documents(train, &cfg, dev)?;
    println!("best epoch {} dev F1 {:.4}", out.best_epoch, out.checkpoint.dev_score);
    let model = &out.checkpoint.model;

    let mut scored = Vec::new();
    for d in test {
        let list = d.entity_list.clone().unwrap_or_default();
        let s: Vec<(String, f64)> =
            list.iter().map(|e| Ok((e.clone(), score_entity(model, e, &d.cleaned_text)?))).collect::<finkey::Result<_>>()?;
        scored.push(s);
    }
    let gold: Vec<BTreeSet<String>> = test.iter().map(|d| d.key_set()).collect();
    for threshold in [0.5, 0.2] {
        let pred: Vec<BTreeSet<String>> = scored
            .iter()
            .map(|s| detect_key_entities(s, threshold).map(|v| v.into_iter().collect()))
            .collect::<finkey::Result<_>>()?;
        let m = entity_prf(&pred, &gold)?;
        println!("threshold {threshold}: P {:.4} R {:.4} F1 {:.4}", m.precision, m.recall, m.f1);
    }

    let d = &test[0];
    println!("\n{}", d.cleaned_text);
    for (e, s) in &scored[0] {
        println!("  {e:<20} {s:.3}");
    }
    Ok(())
}
