//! Fine-grained detection: the event tag becomes a question and a span head
//! extracts the answering company from the text.

use finkey::synthetic::mrc_corpus;
use finkey::tasks::{build_question, extract_span, Task};
use finkey::training::{train_documents, EncoderShape, TrainConfig};

fn main() -> finkey::Result<()> {
    let docs = mrc_corpus(2000, 3);
    let (train, rest) = docs.split_at(1500);
    let (dev, test) = rest.split_at(250);

    let cfg = TrainConfig {
        epochs: 8,
        learning_rate: 2e-3,
        max_len: 40,
        encoder: EncoderShape { d_model: 32, n_heads: 4, n_layers: 2, d_ff: 64, dropout_rate: 0.1 },
        ..TrainConfig::for_task(Task::Mrc)
    };
    let out = train_documents(train, &cfg, dev)?;
    println!("best epoch {} dev exact match {:.4}", out.best_epoch, out.checkpoint.dev_score);

    let mut hits = 0;
    for (i, d) in test.iter().enumerate() {
        let question = build_question(d.tag.as_deref().unwrap_or_default(), &cfg.question_template)?;
        let span = extract_span(&out.checkpoint.model, &question, &d.cleaned_text, cfg.max_span_len)?;
        let gold = &d.key_entities.as_ref().expect("labeled")[0];
        hits += (&span.text == gold) as usize;
        if i < 3 {
            println!("Q: {question}\n   {}\n   -> {:?} (gold {gold:?})", d.cleaned_text, span.text);
        }
    }
    println!("test exact match {:.4}", hits as f64 / test.len() as f64);
    Ok(())
}
