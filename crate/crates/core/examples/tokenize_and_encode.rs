//! Tokenisation, vocabulary building, pair encoding and bag-of-words vectors.

use finkey::encoder::bow_encode;
use finkey::tokenizer::{build_vocab, encode_pair, encode_single, tokenize};

fn main() -> finkey::Result<()> {
    let text = "Acme Bank missed a loan payment , 招商银行 was fined .";
    for t in tokenize(text) {
        print!("{}[{}..{}] ", t.text, t.span.start, t.span.end);
    }
    println!();

    let vocab = build_vocab(tokenize(text).into_iter().map(|t| t.text), 1, 100)?;
    println!("vocab size {}", vocab.len());

    let seq = encode_pair("Acme Bank", text, &vocab, 24)?;
    let pieces: Vec<&str> = seq.ids.iter().map(|&id| vocab.token(id).unwrap_or("?")).collect();
    println!("pair ids  {:?}", seq.ids);
    println!("tokens    {pieces:?}");
    println!("segments  {:?}", seq.segment_ids);
    println!("mask      {:?}", seq.attention_mask);

    let single = encode_single("acme acme bank", &vocab, 8)?;
    let bow = bow_encode(&single, vocab.len());
    println!("bow norm {:.6}", bow.dot(&bow).sqrt());
    Ok(())
}
