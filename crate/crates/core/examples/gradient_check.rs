//! Compares the hand-written backward pass with central finite differences
//! for every head and loss on a tiny model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use finkey::encoder::EncoderConfig;
use finkey::gradcheck::model_gradient_errors;
use finkey::tasks::{EncodedExample, FocalConfig, LossKind, Model, Supervision, Task};
use finkey::tokenizer::{build_vocab, encode_pair, encode_single, tokenize};

fn main() -> finkey::Result<()> {
    let text = "acme bank was not fined while zeta trust grew";
    let vocab = build_vocab(tokenize(text).into_iter().map(|t| t.text), 1, 100)?;
    let config = EncoderConfig {
        vocab_size: vocab.len(),
        d_model: 8,
        n_heads: 2,
        n_layers: 2,
        d_ff: 16,
        max_len: 16,
        dropout_rate: 0.1,
    };
    let pair = encode_pair("acme bank", text, &vocab, 16)?;
    let cases = [
        (Task::Sentiment, encode_single(text, &vocab, 16)?, Supervision::Sentiment(1), LossKind::CrossEntropy),
        (Task::Match, pair.clone(), Supervision::Match(true), LossKind::CrossEntropy),
        (Task::Match, pair.clone(), Supervision::Match(false), LossKind::Focal(FocalConfig { gamma: 2.0, alpha: Some(0.25) })),
        (Task::Mrc, pair, Supervision::Span { start: 4, end: 5 }, LossKind::CrossEntropy),
    ];
    for (task, seq, target, loss) in cases {
        let model = Model::init(config.clone(), task, vocab.clone(), &mut ChaCha8Rng::seed_from_u64(7))?;
        let example = EncodedExample { seq, target };
        let errs = model_gradient_errors(&model, &example, &loss, Some(3), 1e-5)?;
        let worst = errs.iter().cloned().fold(0.0, f64::max);
        println!("{:<9} {:<40} {} tensors, max relative error {worst:.2e}", task.as_str(), format!("{loss:?}"), errs.len());
    }
    Ok(())
}
