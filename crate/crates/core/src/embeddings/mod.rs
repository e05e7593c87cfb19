//! Subword-augmented skip-gram embeddings trained on the preprocessed
//! corpus, and document vectors enriched with the stylometric features.
//!
//! Words are hashed into character n-gram buckets (FNV-1a/32 modulo the
//! bucket count) so out-of-vocabulary words still receive composed vectors.
//! Training is skip-gram with negative sampling; see [`train_embeddings`].

mod io;
mod train;

pub use io::{load_embeddings, save_embeddings, EMBEDDING_FORMAT_VERSION, EMBEDDING_MAGIC};
pub use train::{train_embeddings, train_embeddings_with_workers};

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Corpus;
use crate::stylometry::StyloFeatures;
use crate::textseg::{tokenize_words, TokenSequence};
use crate::{Error, Result};

/// Hyperparameters of the embedding model. The defaults follow the
/// conventions of the subword-embedding literature and are all overridable.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub min_count: usize,
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub bucket_count: usize,
    pub initial_lr: f64,
    pub rng_seed: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            min_count: 2,
            ngram_min: 3,
            ngram_max: 6,
            bucket_count: 2_000_000,
            initial_lr: 0.025,
            rng_seed: 0,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0
            || self.window == 0
            || self.negatives == 0
            || self.min_count == 0
            || self.ngram_min == 0
            || self.bucket_count == 0
        {
            return Err(Error::Validation(
                "embedding dim, window, negatives, min_count, ngram_min, and bucket_count must be positive".into(),
            ));
        }
        if self.ngram_min > self.ngram_max {
            return Err(Error::Validation(format!(
                "ngram_min {} exceeds ngram_max {}",
                self.ngram_min, self.ngram_max
            )));
        }
        if !(self.initial_lr > 0.0) {
            return Err(Error::Validation("initial learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Retained vocabulary: words with corpus frequency >= `min_count`, ordered
/// by descending frequency with lexicographic tie-break.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    words: Vec<(String, u64)>,
    index: HashMap<String, u32>,
    /// Total token occurrences seen while counting, including dropped words.
    pub total_tokens: u64,
}

impl Vocab {
    pub(crate) fn from_words(words: Vec<(String, u64)>, total_tokens: u64) -> Vocab {
        let index = words
            .iter()
            .enumerate()
            .map(|(i, (w, _))| (w.clone(), i as u32))
            .collect();
        Vocab {
            words,
            index,
            total_tokens,
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Dense index and frequency of a retained word.
    pub fn get(&self, word: &str) -> Option<(u32, u64)> {
        self.index.get(word).map(|&i| (i, self.words[i as usize].1))
    }

    pub fn words(&self) -> &[(String, u64)] {
        &self.words
    }
}

/// Counts tokens over the corpus's cleaned text and retains words meeting
/// `min_count`. The corpus must already be preprocessed.
pub fn build_vocab(corpus: &Corpus, config: &EmbeddingConfig) -> Result<Vocab> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::InsufficientData("empty corpus".into()));
    }
    let mut counts: HashMap<String, u64> = HashMap::new();
    let mut total = 0u64;
    for doc in &corpus.documents {
        for token in tokenize_words(&doc.clean_text).tokens {
            *counts.entry(token).or_insert(0) += 1;
            total += 1;
        }
    }
    let mut words: Vec<(String, u64)> = counts
        .into_iter()
        .filter(|(_, c)| *c >= config.min_count as u64)
        .collect();
    if words.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no word reaches min_count {} (did you preprocess the corpus?)",
            config.min_count
        )));
    }
    words.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(Vocab::from_words(words, total))
}

/// FNV-1a, 32-bit.
fn fnv1a32(bytes: &[u8]) -> u32 {
    let mut hash: u32 = 0x811c_9dc5;
    for &b in bytes {
        hash ^= b as u32;
        hash = hash.wrapping_mul(0x0100_0193);
    }
    hash
}

/// Bucket indices of a word's character n-grams.
///
/// The word is wrapped as `<word>`; every contiguous n-gram with length in
/// `ngram_min..=ngram_max` code points is hashed. Indices are in
/// `0..bucket_count`; the model offsets them by the vocabulary size.
pub fn subword_ids(word: &str, config: &EmbeddingConfig) -> Vec<u32> {
    let wrapped: Vec<char> = std::iter::once('<')
        .chain(word.chars())
        .chain(std::iter::once('>'))
        .collect();
    let mut ids = Vec::new();
    let mut buf = String::new();
    for start in 0..wrapped.len() {
        for len in config.ngram_min..=config.ngram_max {
            if start + len > wrapped.len() {
                break;
            }
            buf.clear();
            buf.extend(&wrapped[start..start + len]);
            ids.push(fnv1a32(buf.as_bytes()) % config.bucket_count as u32);
        }
    }
    ids
}

/// Trained embedding table: `vocab.len() + bucket_count` input rows followed
/// by `vocab.len()` output (context) rows, both `dim` wide.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub config: EmbeddingConfig,
    pub vocab: Vocab,
    pub(crate) input: Vec<f32>,
    pub(crate) output: Vec<f32>,
}

impl EmbeddingModel {
    /// Fresh model: input rows uniform in `(-1/dim, 1/dim)` drawn from the
    /// config seed, output rows zero.
    pub fn init(vocab: Vocab, config: EmbeddingConfig) -> Result<EmbeddingModel> {
        config.validate()?;
        let rows = vocab.len() + config.bucket_count;
        let bound = 1.0 / config.dim as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        let input: Vec<f32> = (0..rows * config.dim)
            .map(|_| rng.gen_range(-bound..bound) as f32)
            .collect();
        let output = vec![0.0f32; vocab.len() * config.dim];
        Ok(EmbeddingModel {
            config,
            vocab,
            input,
            output,
        })
    }

    pub(crate) fn from_parts(
        config: EmbeddingConfig,
        vocab: Vocab,
        input: Vec<f32>,
        output: Vec<f32>,
    ) -> EmbeddingModel {
        EmbeddingModel {
            config,
            vocab,
            input,
            output,
        }
    }

    pub fn input_rows(&self) -> usize {
        self.vocab.len() + self.config.bucket_count
    }

    pub fn input_matrix(&self) -> &[f32] {
        &self.input
    }

    pub fn output_matrix(&self) -> &[f32] {
        &self.output
    }

    /// Input-row indices composing a word: its own row when in vocabulary,
    /// plus its subword bucket rows offset by the vocabulary size.
    pub fn row_ids(&self, word: &str) -> Vec<u32> {
        let v = self.vocab.len() as u32;
        let mut rows = Vec::new();
        if let Some((idx, _)) = self.vocab.get(word) {
            rows.push(idx);
        }
        rows.extend(subword_ids(word, &self.config).into_iter().map(|b| v + b));
        rows
    }

    /// Mean of the word's input rows, accumulated in f64. A word with no
    /// rows (possible only when `ngram_min` exceeds the wrapped length)
    /// yields the zero vector; out-of-vocabulary words are never an error.
    pub fn word_vector(&self, word: &str) -> Vec<f64> {
        let rows = self.row_ids(word);
        let dim = self.config.dim;
        let mut out = vec![0.0f64; dim];
        if rows.is_empty() {
            return out;
        }
        for &r in &rows {
            let base = r as usize * dim;
            for (o, v) in out.iter_mut().zip(&self.input[base..base + dim]) {
                *o += *v as f64;
            }
        }
        let inv = 1.0 / rows.len() as f64;
        for o in &mut out {
            *o *= inv;
        }
        out
    }

    /// Negative-sampling loss of one (center, context) pair against fixed
    /// negative rows, computed in f64. Used to check that training reduces
    /// the loss on a frozen batch.
    pub fn pair_loss(&self, center: &str, context_index: u32, negatives: &[u32]) -> f64 {
        let dim = self.config.dim;
        let rows = self.row_ids(center);
        let mut hidden = vec![0.0f64; dim];
        for &r in &rows {
            let base = r as usize * dim;
            for (h, v) in hidden.iter_mut().zip(&self.input[base..base + dim]) {
                *h += *v as f64;
            }
        }
        if !rows.is_empty() {
            let inv = 1.0 / rows.len() as f64;
            for h in &mut hidden {
                *h *= inv;
            }
        }
        let dot = |idx: u32| -> f64 {
            let base = idx as usize * dim;
            hidden
                .iter()
                .zip(&self.output[base..base + dim])
                .map(|(h, o)| h * *o as f64)
                .sum()
        };
        let log_sigmoid = |x: f64| -> f64 {
            // ln(sigmoid(x)) computed stably
            if x > 0.0 {
                -(1.0 + (-x).exp()).ln()
            } else {
                x - (1.0 + x.exp()).ln()
            }
        };
        let mut loss = -log_sigmoid(dot(context_index));
        for &n in negatives {
            loss -= log_sigmoid(-dot(n));
        }
        loss
    }

    /// True when every entry of both matrices is finite.
    pub fn all_finite(&self) -> bool {
        self.input.iter().all(|v| v.is_finite()) && self.output.iter().all(|v| v.is_finite())
    }
}

/// Per-feature z-scoring parameters for the four stylometric measures,
/// fitted on the training split only.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScaler {
    pub means: [f64; 4],
    pub stds: [f64; 4],
    /// Features whose training-set standard deviation was zero; they are
    /// transformed to 0 instead of being divided by it.
    pub constant: [bool; 4],
}

impl FeatureScaler {
    pub fn fit(rows: &[StyloFeatures]) -> Result<FeatureScaler> {
        if rows.is_empty() {
            return Err(Error::InsufficientData("cannot fit scaler on empty data".into()));
        }
        let n = rows.len() as f64;
        let mut means = [0.0; 4];
        for row in rows {
            for (m, v) in means.iter_mut().zip(row.values()) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= n;
        }
        let mut vars = [0.0; 4];
        for row in rows {
            for (i, v) in row.values().into_iter().enumerate() {
                vars[i] += (v - means[i]).powi(2);
            }
        }
        let mut stds = [0.0; 4];
        let mut constant = [false; 4];
        for i in 0..4 {
            stds[i] = (vars[i] / n).sqrt();
            if stds[i] <= 1e-12 {
                constant[i] = true;
                stds[i] = 0.0;
            }
        }
        Ok(FeatureScaler {
            means,
            stds,
            constant,
        })
    }

    /// Z-scores the four measures; constant features map to 0.
    pub fn transform(&self, features: &StyloFeatures) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (i, v) in features.values().into_iter().enumerate() {
            out[i] = if self.constant[i] {
                0.0
            } else {
                (v - self.means[i]) / self.stds[i]
            };
        }
        out
    }

    pub fn any_constant(&self) -> bool {
        self.constant.iter().any(|c| *c)
    }
}

/// A document's feature vector: the mean word vector concatenated with the
/// standardized stylometric measures. Length is always `dim + 4`.
#[derive(Debug, Clone, PartialEq)]
pub struct DocVector {
    pub values: Vec<f64>,
}

/// Mean word vector over the tokens, concatenated with the z-scored
/// stylometric values.
pub fn doc_vector(
    model: &EmbeddingModel,
    tokens: &TokenSequence,
    stylo: &StyloFeatures,
    scaler: &FeatureScaler,
) -> Result<DocVector> {
    let mean = mean_word_vector(model, tokens)?;
    let mut values = mean;
    values.extend(scaler.transform(stylo));
    Ok(DocVector { values })
}

/// Mean of `word_vector` over a token sequence.
pub fn mean_word_vector(model: &EmbeddingModel, tokens: &TokenSequence) -> Result<Vec<f64>> {
    if tokens.is_empty() {
        return Err(Error::UndefinedFeature(
            "document vector of an empty token sequence".into(),
        ));
    }
    let dim = model.config.dim;
    let mut mean = vec![0.0f64; dim];
    for token in &tokens.tokens {
        let wv = model.word_vector(token);
        for (m, v) in mean.iter_mut().zip(wv) {
            *m += v;
        }
    }
    let inv = 1.0 / tokens.len() as f64;
    for m in &mut mean {
        *m *= inv;
    }
    Ok(mean)
}
