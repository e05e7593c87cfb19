//! The `MGTE` embedding-model file: little-endian binary with magic bytes,
//! a format version, the config block, the vocab block (length-prefixed
//! UTF-8), and the two row-major f32 matrices. Unknown versions are
//! rejected.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use super::{EmbeddingConfig, EmbeddingModel, Vocab};
use crate::binio::{BinReader, BinWriter};
use crate::{Error, Result};

pub const EMBEDDING_MAGIC: [u8; 4] = *b"MGTE";
pub const EMBEDDING_FORMAT_VERSION: u32 = 1;

pub fn save_embeddings(model: &EmbeddingModel, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BinWriter::new(BufWriter::new(file));
    w.raw(&EMBEDDING_MAGIC)?;
    w.u32(EMBEDDING_FORMAT_VERSION)?;

    let cfg = &model.config;
    w.u32(cfg.dim as u32)?;
    w.u32(cfg.window as u32)?;
    w.u32(cfg.negatives as u32)?;
    w.u32(cfg.epochs as u32)?;
    w.u32(cfg.min_count as u32)?;
    w.u32(cfg.ngram_min as u32)?;
    w.u32(cfg.ngram_max as u32)?;
    w.u32(cfg.bucket_count as u32)?;
    w.f64(cfg.initial_lr)?;
    w.u64(cfg.rng_seed)?;

    w.u32(model.vocab.len() as u32)?;
    w.u64(model.vocab.total_tokens)?;
    for (word, count) in model.vocab.words() {
        w.str(word)?;
        w.u64(*count)?;
    }

    w.f32_matrix(&model.input)?;
    w.f32_matrix(&model.output)?;
    w.into_inner().flush()?;
    Ok(())
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingModel> {
    let file = File::open(path)?;
    let mut r = BinReader::new(BufReader::new(file));
    let magic = r.raw(4)?;
    if magic != EMBEDDING_MAGIC {
        return Err(Error::Format(
            "bad magic bytes (not an MGTE embedding file)".into(),
        ));
    }
    let version = r.u32()?;
    if version != EMBEDDING_FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported embedding format version {version} (expected {EMBEDDING_FORMAT_VERSION})"
        )));
    }
    let config = EmbeddingConfig {
        dim: r.u32()? as usize,
        window: r.u32()? as usize,
        negatives: r.u32()? as usize,
        epochs: r.u32()? as usize,
        min_count: r.u32()? as usize,
        ngram_min: r.u32()? as usize,
        ngram_max: r.u32()? as usize,
        bucket_count: r.u32()? as usize,
        initial_lr: r.f64()?,
        rng_seed: r.u64()?,
    };
    config.validate().map_err(|e| Error::Format(format!("invalid stored config: {e}")))?;

    let vocab_len = r.u32()? as usize;
    if vocab_len == 0 || vocab_len > (1 << 26) {
        return Err(Error::Format(format!("implausible vocabulary size {vocab_len}")));
    }
    let total_tokens = r.u64()?;
    let mut words = Vec::with_capacity(vocab_len);
    for _ in 0..vocab_len {
        let word = r.str()?;
        let count = r.u64()?;
        words.push((word, count));
    }
    let vocab = Vocab::from_words(words, total_tokens);

    let input = r.f32_matrix((vocab_len + config.bucket_count) * config.dim)?;
    let output = r.f32_matrix(vocab_len * config.dim)?;
    r.expect_eof()?;
    Ok(EmbeddingModel::from_parts(config, vocab, input, output))
}
