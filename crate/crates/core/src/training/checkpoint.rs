//! Checkpoint files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes   "FINKEYCK"
//! version      u32       currently 1
//! header_len   u64
//! header       JSON      {encoder, task, vocab, train_config, seed}
//! dev_score    f64       raw IEEE-754 bits
//! n_tensors    u32
//! per tensor:  name_len u32, name (UTF-8), rows u64, cols u64, rows*cols f64
//! ```
//!
//! Tensors appear in the model's parameter order (encoder, then head) and are
//! checked by name and shape on load.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use crate::encoder::{EncoderConfig, EncoderParams};
use crate::error::{Error, Result};
use crate::tasks::{Head, Model, Task};
use crate::tokenizer::Vocab;

pub const MAGIC: &[u8; 8] = b"FINKEYCK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub train_config: TrainConfig,
    /// Dev metric of the saved parameters, in [0, 1].
    pub dev_score: f64,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    encoder: EncoderConfig,
    task: Task,
    vocab: Vec<String>,
    train_config: TrainConfig,
    seed: u64,
}

fn named(model: &Model) -> Vec<(String, [usize; 2], &[f64])> {
    let mut out: Vec<(String, [usize; 2], &[f64])> = model
        .encoder
        .named_tensors()
        .into_iter()
        .map(|(n, t)| (n, t.shape, t.data))
        .collect();
    out.extend(
        model
            .head
            .named_tensors()
            .into_iter()
            .map(|(n, s, d)| (n.to_string(), s, d)),
    );
    out
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            encoder: self.model.config.clone(),
            task: self.model.task(),
            vocab: self.model.vocab.tokens().to_vec(),
            train_config: self.train_config.clone(),
            seed: self.seed,
        };
        let header = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&self.dev_score.to_le_bytes());
        let tensors = named(&self.model);
        out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for (name, shape, data) in tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(shape[0] as u64).to_le_bytes());
            out.extend_from_slice(&(shape[1] as u64).to_le_bytes());
            for v in data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Format("not a checkpoint file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let header_len = r.u64()? as usize;
        let header: Header =
            serde_json::from_slice(r.take(header_len)?).map_err(|e| Error::Format(format!("header: {e}")))?;
        let dev_score = r.f64()?;
        let vocab = Vocab::from_tokens(header.vocab)?;
        header.encoder.validate()?;
        if header.encoder.vocab_size != vocab.len() {
            return Err(Error::Format("vocab size disagrees with encoder config".into()));
        }
        let mut model = Model {
            encoder: EncoderParams::zeros(&header.encoder),
            head: Head::zeros(header.task, header.encoder.d_model),
            config: header.encoder,
            vocab,
        };
        let expected: Vec<(String, [usize; 2])> = named(&model).into_iter().map(|(n, s, _)| (n, s)).collect();
        let count = r.u32()? as usize;
        if count != expected.len() {
            return Err(Error::Format(format!(
                "expected {} tensors, found {count}",
                expected.len()
            )));
        }
        for ((name, shape), slot) in expected.into_iter().zip(model.slices_mut()) {
            let name_len = r.u32()? as usize;
            let found = std::str::from_utf8(r.take(name_len)?).map_err(|e| Error::Format(e.to_string()))?;
            let rows = r.u64()? as usize;
            let cols = r.u64()? as usize;
            if found != name || [rows, cols] != shape {
                return Err(Error::Format(format!(
                    "tensor {found} {rows}x{cols} where {name} {}x{} was expected",
                    shape[0], shape[1]
                )));
            }
            for v in slot.iter_mut() {
                *v = r.f64()?;
            }
        }
        if r.pos != bytes.len() {
            return Err(Error::Format("trailing bytes after last tensor".into()));
        }
        Ok(Checkpoint {
            model,
            train_config: header.train_config,
            dev_score,
            seed: header.seed,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.to_bytes()?;
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(&bytes))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("checkpoint truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::build_vocab;
    use rand::SeedableRng;

    fn checkpoint(task: Task) -> Checkpoint {
        let vocab = build_vocab(["acme", "bank", "fined", "fraud"].map(String::from), 1, 50).unwrap();
        let mut cfg = EncoderConfig::new(vocab.len());
        cfg.d_model = 8;
        cfg.n_heads = 2;
        cfg.d_ff = 16;
        cfg.max_len = 12;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        Checkpoint {
            model: Model::init(cfg, task, vocab, &mut rng).unwrap(),
            train_config: TrainConfig {
                learning_rate: 0.1 + 0.2,
                ..TrainConfig::for_task(task)
            },
            dev_score: 2.0 / 3.0,
            seed: 11,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        for task in [Task::Sentiment, Task::Match, Task::Mrc] {
            let ck = checkpoint(task);
            let bytes = ck.to_bytes().unwrap();
            let back = Checkpoint::from_bytes(&bytes).unwrap();
            assert_eq!(back, ck);
            assert_eq!(back.to_bytes().unwrap(), bytes);
            for (a, b) in back.model.slices().iter().zip(ck.model.slices()) {
                assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
            }
        }
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = checkpoint(Task::Match).to_bytes().unwrap();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(Checkpoint::from_bytes(b"nonsense").is_err());
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(Checkpoint::from_bytes(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(Checkpoint::from_bytes(&extra).is_err());
    }
}
