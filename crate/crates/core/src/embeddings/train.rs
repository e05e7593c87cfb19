//! Skip-gram training with negative sampling.
//!
//! Two execution contracts: single-worker training is bit-reproducible for a
//! fixed seed; multi-worker training applies unsynchronized (hogwild-style)
//! updates through relaxed atomics and trades reproducibility for speed.
//! Tests must rely only on the single-worker mode.

use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{build_vocab, subword_ids, EmbeddingConfig, EmbeddingModel};
use crate::corpus::Corpus;
use crate::textseg::tokenize_words;
use crate::{Error, Result};

/// Deterministic single-worker training. See
/// [`train_embeddings_with_workers`] for the knobs.
pub fn train_embeddings(corpus: &Corpus, config: &EmbeddingConfig) -> Result<EmbeddingModel> {
    train_embeddings_with_workers(corpus, config, 1)
}

/// Trains skip-gram embeddings on the corpus's cleaned text.
///
/// For every center token, a window size is drawn uniformly from
/// `1..=window` and each in-window (center, context) pair is updated with
/// the logistic loss against `negatives` samples drawn from the
/// unigram^0.75 distribution. The learning rate decays linearly from
/// `initial_lr` to 0 over all epochs. Input vectors start uniform in
/// `(-1/dim, 1/dim)` from `rng_seed`; output vectors start at zero.
pub fn train_embeddings_with_workers(
    corpus: &Corpus,
    config: &EmbeddingConfig,
    workers: usize,
) -> Result<EmbeddingModel> {
    config.validate()?;
    let vocab = build_vocab(corpus, config)?;

    // In-vocabulary token ids per document; empty lines train nothing.
    let lines: Vec<Vec<u32>> = corpus
        .documents
        .iter()
        .map(|doc| {
            tokenize_words(&doc.clean_text)
                .tokens
                .iter()
                .filter_map(|t| vocab.get(t).map(|(idx, _)| idx))
                .collect()
        })
        .filter(|line: &Vec<u32>| !line.is_empty())
        .collect();
    if lines.is_empty() {
        return Err(Error::InsufficientData(
            "no document contains an in-vocabulary token".into(),
        ));
    }

    // Input rows of each vocabulary word: the word row plus its offset
    // subword rows, precomputed once.
    let v = vocab.len() as u32;
    let word_rows: Vec<Vec<u32>> = vocab
        .words()
        .iter()
        .map(|(w, _)| {
            let mut rows = vec![vocab.get(w).unwrap().0];
            rows.extend(subword_ids(w, config).into_iter().map(|b| v + b));
            rows
        })
        .collect();

    // Cumulative unigram^0.75 table for negative sampling.
    let mut cumulative = Vec::with_capacity(vocab.len());
    let mut acc = 0.0f64;
    for (_, count) in vocab.words() {
        acc += (*count as f64).powf(0.75);
        cumulative.push(acc);
    }

    let mut model = EmbeddingModel::init(vocab, config.clone())?;
    let tokens_per_epoch: u64 = lines.iter().map(|l| l.len() as u64).sum();
    let total_tokens = tokens_per_epoch * config.epochs as u64;
    if total_tokens == 0 {
        return Ok(model); // zero epochs: the model equals its initialization
    }

    let progress = AtomicU64::new(0);
    let workers = workers.max(1);
    {
        let input = as_atomic(&mut model.input);
        let output = as_atomic(&mut model.output);
        let shared = SharedState {
            config,
            lines: &lines,
            word_rows: &word_rows,
            cumulative: &cumulative,
            input,
            output,
            dim: config.dim,
            total_tokens,
            progress: &progress,
        };
        for epoch in 0..config.epochs {
            if workers == 1 {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(config.rng_seed.wrapping_add(1 + epoch as u64));
                let mut scratch = Scratch::new(config.dim);
                for line in &lines {
                    train_line(&shared, line, &mut rng, &mut scratch);
                }
            } else {
                std::thread::scope(|scope| {
                    for w in 0..workers {
                        let shared = &shared;
                        scope.spawn(move || {
                            let mut rng = ChaCha8Rng::seed_from_u64(
                                shared
                                    .config
                                    .rng_seed
                                    .wrapping_add(1)
                                    .wrapping_add((epoch * workers + w) as u64 * 0x9e37_79b9),
                            );
                            let mut scratch = Scratch::new(shared.dim);
                            for line in shared.lines.iter().skip(w).step_by(workers) {
                                train_line(shared, line, &mut rng, &mut scratch);
                            }
                        });
                    }
                });
            }
            // epoch boundary: no worker is running, safe to inspect
            if !model_view_finite(input) || !model_view_finite(output) {
                return Err(Error::NonFinite(format!(
                    "embedding matrix after epoch {epoch}"
                )));
            }
        }
    }
    Ok(model)
}

/// Views an f32 buffer as relaxed atomics so hogwild workers can race on
/// updates without undefined behavior. `AtomicU32` has the same size and
/// alignment as `u32`/`f32`.
fn as_atomic(buf: &mut [f32]) -> &[AtomicU32] {
    unsafe { std::slice::from_raw_parts(buf.as_mut_ptr().cast::<AtomicU32>(), buf.len()) }
}

#[inline]
fn load(cell: &AtomicU32) -> f32 {
    f32::from_bits(cell.load(Ordering::Relaxed))
}

#[inline]
fn store(cell: &AtomicU32, value: f32) {
    cell.store(value.to_bits(), Ordering::Relaxed);
}

fn model_view_finite(cells: &[AtomicU32]) -> bool {
    cells.iter().all(|c| load(c).is_finite())
}

struct SharedState<'a> {
    config: &'a EmbeddingConfig,
    lines: &'a [Vec<u32>],
    word_rows: &'a [Vec<u32>],
    cumulative: &'a [f64],
    input: &'a [AtomicU32],
    output: &'a [AtomicU32],
    dim: usize,
    total_tokens: u64,
    progress: &'a AtomicU64,
}

struct Scratch {
    hidden: Vec<f32>,
    grad: Vec<f32>,
    negatives: Vec<u32>,
}

impl Scratch {
    fn new(dim: usize) -> Scratch {
        Scratch {
            hidden: vec![0.0; dim],
            grad: vec![0.0; dim],
            negatives: Vec::new(),
        }
    }
}

fn train_line(shared: &SharedState<'_>, line: &[u32], rng: &mut ChaCha8Rng, scratch: &mut Scratch) {
    let window = shared.config.window;
    for (pos, &center) in line.iter().enumerate() {
        let done = shared.progress.fetch_add(1, Ordering::Relaxed);
        let lr = (shared.config.initial_lr
            * (1.0 - done as f64 / shared.total_tokens as f64).max(0.0))
            as f32;
        let b = rng.gen_range(1..=window) as isize;
        for offset in -b..=b {
            if offset == 0 {
                continue;
            }
            let ctx_pos = pos as isize + offset;
            if ctx_pos < 0 || ctx_pos >= line.len() as isize {
                continue;
            }
            let context = line[ctx_pos as usize];
            draw_negatives(shared, context, rng, &mut scratch.negatives);
            update_pair(
                shared,
                &shared.word_rows[center as usize],
                context,
                &scratch.negatives,
                lr,
                &mut scratch.hidden,
                &mut scratch.grad,
            );
        }
    }
}

/// Samples `negatives` rows from the unigram^0.75 table, rejecting the
/// positive target. Capped retries keep a one-word vocabulary from looping.
fn draw_negatives(shared: &SharedState<'_>, target: u32, rng: &mut ChaCha8Rng, out: &mut Vec<u32>) {
    out.clear();
    let total = *shared.cumulative.last().unwrap();
    for _ in 0..shared.config.negatives {
        for _attempt in 0..32 {
            let r = rng.gen::<f64>() * total;
            let idx = shared.cumulative.partition_point(|&c| c <= r) as u32;
            if idx != target {
                out.push(idx.min(shared.cumulative.len() as u32 - 1));
                break;
            }
        }
    }
}

/// One positive/negative-sampled update. The hidden state is the mean of the
/// center word's input rows; the accumulated gradient is added to each of
/// those rows in full.
fn update_pair(
    shared: &SharedState<'_>,
    center_rows: &[u32],
    target: u32,
    negatives: &[u32],
    lr: f32,
    hidden: &mut [f32],
    grad: &mut [f32],
) {
    let dim = shared.dim;
    hidden.fill(0.0);
    for &r in center_rows {
        let base = r as usize * dim;
        for (h, cell) in hidden.iter_mut().zip(&shared.input[base..base + dim]) {
            *h += load(cell);
        }
    }
    let inv = 1.0 / center_rows.len() as f32;
    for h in hidden.iter_mut() {
        *h *= inv;
    }

    grad.fill(0.0);
    let pairs = std::iter::once((target, 1.0f32)).chain(negatives.iter().map(|&n| (n, 0.0f32)));
    for (row, label) in pairs {
        let base = row as usize * dim;
        let out_row = &shared.output[base..base + dim];
        let mut dot = 0.0f32;
        for (h, cell) in hidden.iter().zip(out_row) {
            dot += h * load(cell);
        }
        let score = 1.0 / (1.0 + (-dot).exp());
        let g = lr * (label - score);
        for ((gr, h), cell) in grad.iter_mut().zip(hidden.iter()).zip(out_row) {
            let o = load(cell);
            *gr += g * o;
            store(cell, o + g * h);
        }
    }

    for &r in center_rows {
        let base = r as usize * dim;
        for (gr, cell) in grad.iter().zip(&shared.input[base..base + dim]) {
            store(cell, load(cell) + gr);
        }
    }
}
