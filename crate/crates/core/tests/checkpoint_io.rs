use finkey::error::Error;
use finkey::synthetic::matcher_corpus;
use finkey::tasks::{score_entity, Task};
use finkey::training::{train_documents, Checkpoint, EncoderShape, TrainConfig};

fn tiny_checkpoint() -> Checkpoint {
    let docs = matcher_corpus(60, 3);
    let (tr, dev) = docs.split_at(45);
    let cfg = TrainConfig {
        epochs: 2,
        max_len: 32,
        encoder: EncoderShape { d_model: 8, n_heads: 2, n_layers: 1, d_ff: 16, dropout_rate: 0.1 },
        ..TrainConfig::for_task(Task::Match)
    };
    train_documents(tr, &cfg, dev).unwrap().checkpoint
}

#[test]
fn save_and_load_preserve_the_model() {
    let ckpt = tiny_checkpoint();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    ckpt.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back, ckpt);
    assert_eq!(back.to_bytes().unwrap(), ckpt.to_bytes().unwrap());
    let text = "Acme Bank was fined by regulators , Zeta Trust hired a new chief .";
    assert_eq!(
        score_entity(&back.model, "Acme Bank", text).unwrap().to_bits(),
        score_entity(&ckpt.model, "Acme Bank", text).unwrap().to_bits()
    );
}

#[test]
fn corrupt_bytes_are_rejected() {
    let bytes = tiny_checkpoint().to_bytes().unwrap();
    let mut bad_magic = bytes.clone();
    bad_magic[0] ^= 0xff;
    assert!(Checkpoint::from_bytes(&bad_magic).is_err());
    assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
    assert!(Checkpoint::from_bytes(&[]).is_err());
    let missing = Checkpoint::load("/nonexistent/dir/x.ckpt").unwrap_err();
    assert!(matches!(missing, Error::Io { .. }));
}
